#include "fedrf/wire/envelope.hpp"

#include <algorithm>
#include <array>

#include "fedrf/error.hpp"

namespace fedrf::wire {

std::string_view to_string(MessageKind kind) noexcept {
  switch (kind) {
    case MessageKind::Hello: return "HELLO";
    case MessageKind::SetDataParams: return "SET_DATA_PARAMS";
    case MessageKind::SetModelParams: return "SET_MODEL_PARAMS";
    case MessageKind::TrainRequest: return "TRAIN_REQUEST";
    case MessageKind::TrainResponse: return "TRAIN_RESPONSE";
    case MessageKind::EvalRequest: return "EVAL_REQUEST";
    case MessageKind::EvalResponse: return "EVAL_RESPONSE";
    case MessageKind::ApprovalPending: return "APPROVAL_PENDING";
    case MessageKind::Error: return "ERROR";
  }
  return "UNKNOWN";
}

std::optional<MessageKind> kind_from_byte(std::uint8_t b) noexcept {
  for (auto k : kAllKinds) {
    if (static_cast<std::uint8_t>(k) == b) return k;
  }
  return std::nullopt;
}

void MemoryStream::write_all(std::span<const std::uint8_t> bytes) {
  data_.insert(data_.end(), bytes.begin(), bytes.end());
}

std::size_t MemoryStream::read_some(std::span<std::uint8_t> buffer) {
  const auto n = std::min(buffer.size(), data_.size() - read_pos_);
  std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(read_pos_), n, buffer.begin());
  read_pos_ += n;
  return n;
}

namespace {

void read_exact(ByteStream& stream, std::span<std::uint8_t> out) {
  std::size_t got = 0;
  while (got < out.size()) {
    const auto n = stream.read_some(out.subspan(got));
    if (n == 0) {
      throw Error(ErrorCode::ConnectionClosed, got == 0 && out.size() == 4
                                                   ? "peer closed the stream"
                                                   : "stream ended inside a frame");
    }
    got += n;
  }
}

template <typename T>
void put_be(std::vector<std::uint8_t>& out, T v) {
  for (std::size_t i = sizeof(T); i-- > 0;) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <typename T>
T get_be(std::span<const std::uint8_t> in) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v = static_cast<T>((v << 8) | in[i]);
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_frame(const Envelope& envelope) {
  if (envelope.payload.size() > kMaxPayloadBytes) {
    throw Error(ErrorCode::FrameTooLarge, "payload of " + std::to_string(envelope.payload.size()) + " bytes");
  }
  std::vector<std::uint8_t> out;
  out.reserve(4 + kEnvelopeHeaderBytes + envelope.payload.size());
  put_be(out, static_cast<std::uint32_t>(kEnvelopeHeaderBytes + envelope.payload.size()));
  out.push_back(static_cast<std::uint8_t>(envelope.kind));
  put_be(out, envelope.correlation_id);
  out.insert(out.end(), envelope.payload.begin(), envelope.payload.end());
  return out;
}

void frame_write(ByteStream& stream, const Envelope& envelope) { stream.write_all(encode_frame(envelope)); }

Envelope frame_read(ByteStream& stream) {
  std::array<std::uint8_t, 4> prefix{};
  read_exact(stream, prefix);
  const auto length = get_be<std::uint32_t>(prefix);
  if (length < kEnvelopeHeaderBytes) {
    std::array<std::uint8_t, kEnvelopeHeaderBytes> skip{};
    read_exact(stream, std::span(skip).first(length));
    throw Error(ErrorCode::MalformedHeader, "frame length " + std::to_string(length) + " below header size");
  }
  if (length - kEnvelopeHeaderBytes > kMaxPayloadBytes) {
    throw Error(ErrorCode::FrameTooLarge, "declared frame length " + std::to_string(length));
  }
  std::array<std::uint8_t, kEnvelopeHeaderBytes> header{};
  read_exact(stream, header);
  Envelope env;
  env.correlation_id = get_be<std::uint64_t>(std::span<const std::uint8_t>(header).subspan(1));
  env.payload.resize(length - kEnvelopeHeaderBytes);
  if (!env.payload.empty()) read_exact(stream, env.payload);
  auto kind = kind_from_byte(header[0]);
  if (!kind) throw Error(ErrorCode::MalformedHeader, "unknown message kind " + std::to_string(header[0]));
  env.kind = *kind;
  return env;
}

}  // namespace fedrf::wire
