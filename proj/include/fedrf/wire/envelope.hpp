#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace fedrf::wire {

enum class MessageKind : std::uint8_t {
  Hello = 1,
  SetDataParams = 2,
  SetModelParams = 3,
  TrainRequest = 4,
  TrainResponse = 5,
  EvalRequest = 6,
  EvalResponse = 7,
  ApprovalPending = 8,
  Error = 9,
};

inline constexpr MessageKind kAllKinds[] = {
    MessageKind::Hello,         MessageKind::SetDataParams, MessageKind::SetModelParams,
    MessageKind::TrainRequest,  MessageKind::TrainResponse, MessageKind::EvalRequest,
    MessageKind::EvalResponse,  MessageKind::ApprovalPending, MessageKind::Error,
};

std::string_view to_string(MessageKind kind) noexcept;
std::optional<MessageKind> kind_from_byte(std::uint8_t b) noexcept;

/// One framed protocol message. On the wire:
///
///   length u32 BE | kind u8 | correlation_id u64 BE | payload
///
/// where length counts kind + correlation_id + payload (9 + payload bytes).
struct Envelope {
  MessageKind kind = MessageKind::Hello;
  std::uint64_t correlation_id = 0;
  std::vector<std::uint8_t> payload;

  friend bool operator==(const Envelope&, const Envelope&) = default;
};

inline constexpr std::size_t kEnvelopeHeaderBytes = 1 + 8;
inline constexpr std::size_t kMaxPayloadBytes = std::size_t{256} << 20;

/// Blocking byte stream. read_some returns 0 only at end of stream.
class ByteStream {
 public:
  virtual ~ByteStream() = default;
  virtual void write_all(std::span<const std::uint8_t> bytes) = 0;
  virtual std::size_t read_some(std::span<std::uint8_t> buffer) = 0;
};

/// In-memory stream: writes append, reads consume from the front.
class MemoryStream final : public ByteStream {
 public:
  MemoryStream() = default;
  explicit MemoryStream(std::vector<std::uint8_t> initial) : data_(std::move(initial)) {}

  void write_all(std::span<const std::uint8_t> bytes) override;
  std::size_t read_some(std::span<std::uint8_t> buffer) override;

  const std::vector<std::uint8_t>& data() const noexcept { return data_; }
  std::size_t read_position() const noexcept { return read_pos_; }

 private:
  std::vector<std::uint8_t> data_;
  std::size_t read_pos_ = 0;
};

/// Serialises one envelope (header + payload) to bytes.
std::vector<std::uint8_t> encode_frame(const Envelope& envelope);

void frame_write(ByteStream& stream, const Envelope& envelope);

/// Reads exactly one frame. Throws ConnectionClosed at end of stream (clean
/// or mid-frame), MalformedHeader for a length below 9 or an unknown kind
/// (the declared bytes are consumed either way, so the stream stays
/// aligned), FrameTooLarge when the payload would exceed 256 MiB (checked
/// before any allocation). Never reads past the frame.
Envelope frame_read(ByteStream& stream);

}  // namespace fedrf::wire
