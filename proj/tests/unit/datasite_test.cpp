#include <gtest/gtest.h>

#include <json.hpp>
#include <thread>

#include "expect_code.hpp"
#include "fedrf/datasite.hpp"
#include "fedrf/harness.hpp"
#include "fedrf/net.hpp"
#include "fedrf/wire/forest_codec.hpp"
#include "synthetic.hpp"

namespace fedrf::datasite {
namespace {

using fedrf::testing::code_of;
using wire::Envelope;
using wire::MessageKind;

wire::DataParams blob_params(const Dataset& d) {
  return wire::DataParams{"cls", {}, d.label_names().back(), d.label_names()};
}

wire::ModelParams small_model(std::uint32_t base = 50, std::uint32_t extra = 10) {
  wire::ModelParams p;
  p.n_base_estimators = base;
  p.n_incremental_estimators = extra;
  p.incremental_rounds = 5;
  p.max_depth = 6;
  return p;
}

struct Fixture {
  Dataset data = fedrf::testing::make_blobs(200, 4, 2, 13);
  std::vector<std::string> log_lines;
  std::unique_ptr<Datasite> site;

  explicit Fixture(ApprovalPolicy policy = ApprovalPolicy::AutoApprove) {
    DatasiteConfig c;
    c.name = "unit";
    c.table = harness::to_table(data, "cls");
    c.policy = policy;
    c.threads = 1;
    site = std::make_unique<Datasite>(std::move(c), [this](const std::string& l) { log_lines.push_back(l); });
  }

  Envelope set_data() { return site->call(wire::make_envelope(wire::SetDataParams{blob_params(data)}, 1)); }

  wire::TrainRequest train_request(std::uint32_t round, std::optional<std::vector<std::uint8_t>> base = {}) {
    return wire::TrainRequest{round, 1000 + round, small_model(), std::move(base)};
  }
};

TEST(DatasiteTest, HelloAndVersionCheck) {
  Fixture f;
  auto reply = wire::open_envelope<wire::Hello>(f.site->call(wire::make_envelope(wire::Hello{1, "coordinator", "c"}, 3)));
  EXPECT_EQ(reply.role, "datasite");
  EXPECT_EQ(reply.name, "unit");
  auto bad = f.site->call(wire::make_envelope(wire::Hello{2, "coordinator", "c"}, 4));
  EXPECT_EQ(code_of([&] { wire::open_envelope<wire::Hello>(bad); }), ErrorCode::UnsupportedVersion);
  EXPECT_EQ(bad.correlation_id, 4u);
}

TEST(DatasiteTest, DataParamsAckListsFeatureNamesOnly) {
  Fixture f;
  auto ack = wire::open_envelope<wire::DataParamsAck>(f.set_data());
  EXPECT_EQ(ack.feature_names, f.data.feature_names());
  // Same params again is fine; different ones are refused.
  EXPECT_NO_THROW(wire::open_envelope<wire::DataParamsAck>(f.set_data()));
  auto other = blob_params(f.data);
  other.positive_label = other.label_names.front();
  auto reply = f.site->call(wire::make_envelope(wire::SetDataParams{other}, 2));
  EXPECT_EQ(code_of([&] { wire::open_envelope<wire::DataParamsAck>(reply); }), ErrorCode::SchemaMismatch);
}

TEST(DatasiteTest, LocalConfigMustAgreeWithCoordinator) {
  Dataset data = fedrf::testing::make_blobs(50, 2, 2, 1);
  DatasiteConfig c;
  c.table = harness::to_table(data, "cls");
  c.target_column = "other";
  Datasite site(std::move(c), {});
  auto reply = site.call(wire::make_envelope(wire::SetDataParams{blob_params(data)}, 1));
  EXPECT_EQ(code_of([&] { wire::open_envelope<wire::DataParamsAck>(reply); }), ErrorCode::SchemaMismatch);
}

TEST(DatasiteTest, TrainingRequiresDataParams) {
  Fixture f;
  EXPECT_EQ(code_of([&] { f.site->handle_train(1, f.train_request(0)); }), ErrorCode::DataParamsNotSet);
}

TEST(DatasiteTest, BaseThenWarmStartRounds) {
  Fixture f;
  f.set_data();
  auto r0 = wire::open_envelope<wire::TrainResponse>(
      f.site->call(wire::make_envelope(f.train_request(0), 10)));
  auto forest0 = wire::decode_forest(r0.forest);
  EXPECT_EQ(forest0.trees.size(), 50u);
  EXPECT_EQ(r0.n_samples, 200u);
  EXPECT_EQ(r0.round_index, 0u);
  EXPECT_EQ(f.site->round_index(), 1u);

  auto r1 = wire::open_envelope<wire::TrainResponse>(
      f.site->call(wire::make_envelope(f.train_request(1, r0.forest), 11)));
  auto forest1 = wire::decode_forest(r1.forest);
  EXPECT_EQ(forest1.trees.size(), 60u);
  for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(forest1.trees[i], forest0.trees[i]);
  EXPECT_EQ(f.site->round_index(), 2u);

  auto stale = f.site->call(wire::make_envelope(f.train_request(1, r0.forest), 12));
  EXPECT_EQ(code_of([&] { wire::open_envelope<wire::TrainResponse>(stale); }), ErrorCode::StaleRound);
  EXPECT_EQ(f.site->round_index(), 2u);
  EXPECT_EQ(f.site->executed_requests(), 2u);
}

TEST(DatasiteTest, SameRequestGivesSameForest) {
  Fixture a, b;
  a.set_data();
  b.set_data();
  EXPECT_EQ(a.site->handle_train(1, a.train_request(0)).forest, b.site->handle_train(1, b.train_request(0)).forest);
}

TEST(DatasiteTest, SubsampleUsesFractionOfRows) {
  Fixture f;
  f.set_data();
  auto req = f.train_request(0);
  req.model_params.sample_fraction = 0.5;
  auto r = f.site->handle_train(1, req);
  EXPECT_EQ(r.n_samples, 100u);
}

TEST(DatasiteTest, BaseForestWithWrongSchemaIsRejected) {
  Fixture f;
  f.set_data();
  std::mt19937_64 rng(1);
  auto foreign = wire::encode_forest(fedrf::testing::random_forest(rng));
  EXPECT_EQ(code_of([&] { f.site->handle_train(1, f.train_request(0, foreign)); }), ErrorCode::SchemaMismatch);
  std::vector<std::uint8_t> junk = {1, 2, 3};
  EXPECT_EQ(code_of([&] { f.site->handle_train(2, f.train_request(0, junk)); }), ErrorCode::CorruptModel);
}

TEST(DatasiteTest, EvalSchemaAndSanityBound) {
  Fixture f;
  f.set_data();
  auto trained = f.site->handle_train(1, f.train_request(0));
  auto metrics = f.site->handle_eval(2, wire::EvalRequest{trained.forest}).metrics;
  std::size_t positives = 0;
  for (auto l : f.data.labels()) positives += l;
  const double majority = std::max(positives, f.data.n_samples() - positives) / double(f.data.n_samples());
  EXPECT_GE(metrics.accuracy, majority);
  EXPECT_EQ(metrics.n_samples, 200u);

  auto narrow_data = fedrf::testing::make_blobs(50, 3, 2, 2);
  forest::ForestParams p;
  p.n_estimators = 3;
  auto narrow = forest::fit_forest(narrow_data, p, 1);
  EXPECT_EQ(code_of([&] { f.site->handle_eval(3, wire::EvalRequest{wire::encode_forest(narrow)}); }),
            ErrorCode::SchemaMismatch);
  EXPECT_EQ(code_of([&] { f.site->handle_eval(4, wire::EvalRequest{{0x46, 0x52}}); }), ErrorCode::CorruptModel);
}

TEST(DatasiteTest, ManualApprovalExecutesExactlyOnce) {
  Fixture f(ApprovalPolicy::Manual);
  f.set_data();
  std::vector<Envelope> replies;
  f.site->submit(wire::make_envelope(f.train_request(0), 77), [&](Envelope e) { replies.push_back(std::move(e)); });

  ASSERT_EQ(replies.size(), 1u);
  auto pending = wire::open_envelope<wire::ApprovalPending>(replies[0]);
  EXPECT_EQ(replies[0].correlation_id, 77u);
  EXPECT_EQ(f.site->executed_requests(), 0u);
  ASSERT_EQ(f.site->pending().size(), 1u);
  EXPECT_EQ(f.site->pending()[0].id, pending.request_id);
  EXPECT_NE(pending.summary.find("round 0"), std::string::npos) << pending.summary;

  EXPECT_EQ(code_of([&] { f.site->handle_train(pending.request_id, f.train_request(0)); }), ErrorCode::NotApproved);
  EXPECT_EQ(f.site->executed_requests(), 0u);

  f.site->approve(pending.request_id);
  ASSERT_EQ(replies.size(), 2u);
  EXPECT_EQ(replies[1].kind, MessageKind::TrainResponse);
  EXPECT_EQ(replies[1].correlation_id, 77u);
  EXPECT_EQ(f.site->executed_requests(), 1u);
  EXPECT_TRUE(f.site->pending().empty());

  EXPECT_EQ(code_of([&] { f.site->approve(pending.request_id); }), ErrorCode::UnknownRequestId);
  // The consumed approval cannot be reused through the direct entry point.
  EXPECT_EQ(code_of([&] { f.site->handle_train(pending.request_id, f.train_request(1)); }), ErrorCode::NotApproved);
  EXPECT_EQ(f.site->executed_requests(), 1u);
}

TEST(DatasiteTest, RejectAnswersRejected) {
  Fixture f(ApprovalPolicy::Manual);
  f.set_data();
  std::vector<Envelope> replies;
  f.site->submit(wire::make_envelope(f.train_request(0), 5), [&](Envelope e) { replies.push_back(std::move(e)); });
  auto id = wire::open_envelope<wire::ApprovalPending>(replies.at(0)).request_id;
  f.site->reject(id);
  ASSERT_EQ(replies.size(), 2u);
  EXPECT_EQ(code_of([&] { wire::open_envelope<wire::TrainResponse>(replies[1]); }), ErrorCode::Rejected);
  EXPECT_EQ(f.site->executed_requests(), 0u);
  EXPECT_EQ(code_of([&] { f.site->reject(id); }), ErrorCode::UnknownRequestId);
  EXPECT_EQ(code_of([&] { f.site->approve(9999); }), ErrorCode::UnknownRequestId);
}

// Property: over random approve/reject/duplicate sequences, every request
// gets exactly one final reply and executes at most once.
TEST(DatasiteTest, ApprovalStateMachine) {
  std::mt19937_64 rng(4);
  for (int iter = 0; iter < 20; ++iter) {
    Fixture f(ApprovalPolicy::Manual);
    f.set_data();
    std::map<std::uint64_t, int> finals;
    std::vector<std::uint64_t> ids;
    std::uint64_t expected_exec = 0;
    forest::ForestParams fp;
    fp.n_estimators = 2;
    const auto model = wire::encode_forest(forest::fit_forest(f.data, fp, 1));
    // Evaluations carry no round state, so every approved one must run.
    for (int i = 0; i < 4; ++i) {
      f.site->submit(wire::make_envelope(wire::EvalRequest{model}, 100 + i), [&](Envelope e) {
        if (e.kind != MessageKind::ApprovalPending) ++finals[e.correlation_id];
        else ids.push_back(wire::open_envelope<wire::ApprovalPending>(e).request_id);
      });
    }
    for (int step = 0; step < 12; ++step) {
      const auto id = ids[rng() % ids.size()];
      const auto queue = f.site->pending();
      const bool was_pending =
          std::any_of(queue.begin(), queue.end(), [&](const PendingRequest& p) { return p.id == id; });
      const bool approve = rng() % 2;
      const auto code = [&]() -> std::optional<ErrorCode> {
        try {
          approve ? f.site->approve(id) : f.site->reject(id);
          return std::nullopt;
        } catch (const Error& e) {
          return e.code();
        }
      }();
      if (was_pending) {
        EXPECT_FALSE(code.has_value());
        expected_exec += approve ? 1 : 0;
      } else {
        EXPECT_EQ(code, ErrorCode::UnknownRequestId);
      }
    }
    EXPECT_EQ(f.site->executed_requests(), expected_exec);
    for (const auto& [cid, n] : finals) EXPECT_EQ(n, 1) << cid;
    EXPECT_EQ(finals.size() + f.site->pending().size(), 4u);
  }
}

TEST(DatasiteTest, EveryEventIsOneJsonLine) {
  Fixture f;
  f.set_data();
  f.site->call(wire::make_envelope(f.train_request(0), 2));
  std::set<std::string> events;
  for (const auto& line : f.log_lines) {
    auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j["site"], "unit");
    EXPECT_TRUE(j.contains("ts_ms"));
    events.insert(j["event"].get<std::string>());
  }
  for (const char* e : {"request", "response", "data_params", "trained"}) EXPECT_TRUE(events.count(e)) << e;
}

TEST(DatasiteServerTest, TcpRoundTripAndAdminApproval) {
  Fixture f(ApprovalPolicy::Manual);
  const std::string admin = (std::filesystem::temp_directory_path() / "fedrf_unit_admin.sock").string();
  DatasiteServer server(*f.site, net::Address{"127.0.0.1", 0}, admin);
  ASSERT_NE(server.port(), 0);

  auto conn = net::connect_tcp(net::Address{"127.0.0.1", server.port()});
  wire::frame_write(conn, wire::make_envelope(wire::Hello{1, "coordinator", "t"}, 1));
  EXPECT_EQ(wire::frame_read(conn).kind, MessageKind::Hello);
  wire::frame_write(conn, wire::make_envelope(wire::SetDataParams{blob_params(f.data)}, 2));
  EXPECT_EQ(wire::frame_read(conn).kind, MessageKind::SetDataParams);

  wire::frame_write(conn, wire::make_envelope(f.train_request(0), 3));
  auto pending = wire::open_envelope<wire::ApprovalPending>(wire::frame_read(conn));

  auto listing = admin_request(admin, "list");
  ASSERT_EQ(listing.size(), 1u);
  EXPECT_EQ(listing[0].rfind("pending " + std::to_string(pending.request_id), 0), 0u) << listing[0];

  auto bad = admin_request(admin, "approve 424242");
  EXPECT_EQ(bad.front().rfind("error UnknownRequestId", 0), 0u) << bad.front();

  auto ok = admin_request(admin, "approve " + std::to_string(pending.request_id));
  EXPECT_EQ(ok.front(), "ok");
  conn.set_deadline(net::Clock::now() + std::chrono::seconds(60));
  auto reply = wire::frame_read(conn);
  EXPECT_EQ(reply.kind, MessageKind::TrainResponse);
  EXPECT_EQ(reply.correlation_id, 3u);

  // A malformed header gets an error reply and the connection stays usable.
  const std::vector<std::uint8_t> short_frame = {0, 0, 0, 2, 1, 1};
  conn.write_all(short_frame);
  EXPECT_EQ(wire::frame_read(conn).kind, MessageKind::Error);
  wire::frame_write(conn, wire::make_envelope(wire::Hello{1, "coordinator", "t"}, 9));
  EXPECT_EQ(wire::frame_read(conn).correlation_id, 9u);

  server.stop();
  EXPECT_FALSE(std::filesystem::exists(admin));
}

}  // namespace
}  // namespace fedrf::datasite
