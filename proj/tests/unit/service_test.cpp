#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <set>
#include <thread>

#include <gtest/gtest.h>

#include "prefrank/common/random.hpp"
#include "prefrank/pairs/annotator.hpp"
#include "prefrank/service/http_server.hpp"
#include "prefrank/service/session.hpp"
#include "prefrank/synth/dataset.hpp"
#include "prefrank/synth/metrics.hpp"

// After Eigen: a system header pulled in here defines macros that clash with
// Eigen parameter names.
#include <httplib.h>

namespace prefrank::service {
namespace {

namespace fs = std::filesystem;

SessionConfig FastConfig(pairs::StrategyKind strategy = pairs::StrategyKind::kRandom, std::size_t round = 25) {
  SessionConfig c;
  c.strategy = strategy;
  c.round_size = round;
  c.encoder.hidden = {16, 16};
  c.encoder.predict_passes = 5;
  c.schedule.target_steps = 150;
  c.seed = 5;
  return c;
}

fs::path TempDir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("prefrank_service_test_" + name);
  fs::remove_all(dir);
  return dir;
}

// Answers `count` issued pairs with the noiseless oracle.
void Annotate(Session& s, const synth::SyntheticDataset& data, std::size_t count) {
  for (std::size_t k = 0; k < count; ++k) {
    const auto p = s.NextPair();
    ASSERT_TRUE(p.has_value());
    s.Submit(p->pair_id, pairs::AnnotateWithNoise(data.oracle.Attribute(p->a), data.oracle.Attribute(p->b), 0, 0, 0));
  }
}

// ---------------------------------------------------------------------------
// Session

TEST(SessionTest, FreshSessionServesValidRandomPairs) {
  const auto data = synth::Generate(synth::GeneratorKind::kLinear, 30, 2, 1);
  Session s(FastConfig(), data.features);
  EXPECT_EQ(s.Status().annotations_total, 0u);
  EXPECT_EQ(s.Status().rounds_completed, 0u);
  EXPECT_EQ(s.Status().strategy, "random");
  EXPECT_EQ(s.snapshot(), nullptr);
  for (int k = 0; k < 20; ++k) {
    const auto p = s.NextPair();
    ASSERT_TRUE(p.has_value());
    EXPECT_NE(p->a, p->b);
    EXPECT_LT(p->a, 30u);
    EXPECT_LT(p->b, 30u);
  }
}

TEST(SessionTest, PendingPairsAreNotReissued) {
  const auto data = synth::Generate(synth::GeneratorKind::kLinear, 3, 1, 2);
  for (auto strategy : {pairs::StrategyKind::kRandom, pairs::StrategyKind::kHard}) {
    Session s(FastConfig(strategy), data.features);
    std::set<std::pair<ItemId, ItemId>> seen;
    std::vector<IssuedPair> issued;
    for (int k = 0; k < 3; ++k) {
      const auto p = s.NextPair();
      ASSERT_TRUE(p.has_value());
      EXPECT_TRUE(seen.insert(std::minmax(p->a, p->b)).second);
      issued.push_back(*p);
    }
    EXPECT_FALSE(s.NextPair().has_value());
    s.Submit(issued[1].pair_id, 1.0);
    const auto again = s.NextPair();
    ASSERT_TRUE(again.has_value());
    EXPECT_EQ(std::minmax(again->a, again->b), std::minmax(issued[1].a, issued[1].b));
  }
}

TEST(SessionTest, SubmitErrors) {
  const auto data = synth::Generate(synth::GeneratorKind::kLinear, 10, 2, 3);
  Session s(FastConfig(), data.features);
  const auto p = s.NextPair();
  auto kind_of = [&](std::uint64_t id, double outcome) {
    try {
      s.Submit(id, outcome);
    } catch (const SubmitError& e) {
      return static_cast<int>(e.kind());
    }
    return -1;
  };
  EXPECT_EQ(kind_of(999, 1.0), static_cast<int>(SubmitErrorKind::kUnknownPair));
  EXPECT_EQ(kind_of(p->pair_id, 0.3), static_cast<int>(SubmitErrorKind::kInvalidOutcome));
  EXPECT_EQ(s.pending_count(), 1u);
  const auto ok = s.Submit(p->pair_id, 0.5);
  EXPECT_TRUE(ok.accepted);
  EXPECT_EQ(ok.annotations_total, 1u);
  EXPECT_EQ(kind_of(p->pair_id, 0.5), static_cast<int>(SubmitErrorKind::kDuplicate));
  EXPECT_EQ(s.log().size(), 1u);
  EXPECT_EQ(s.log().front(), rater::Comparison::Make(p->a, p->b, 0.5));
}

TEST(SessionTest, EveryRoundSizeAcceptanceTriggersRetrain) {
  const auto data = synth::Generate(synth::GeneratorKind::kLinear, 40, 2, 4);
  Session s(FastConfig(pairs::StrategyKind::kHard), data.features);
  for (std::size_t k = 1; k <= 50; ++k) {
    const auto p = s.NextPair();
    const auto r = s.Submit(p->pair_id, 1.0);
    EXPECT_EQ(r.retrain_triggered, k % 25 == 0) << k;
    if (k == 25) {
      s.WaitIdle();
      EXPECT_EQ(s.Status().rounds_completed, 1u);
      EXPECT_FALSE(s.Status().training);
    }
  }
  s.WaitIdle();
  const auto st = s.Status();
  EXPECT_EQ(st.annotations_total, 50u);
  EXPECT_EQ(st.rounds_completed, 2u);
  EXPECT_GE(st.last_spearman_vs_self, -1.0);
  EXPECT_LE(st.last_spearman_vs_self, 1.0);
  const auto snap = s.snapshot();
  ASSERT_NE(snap, nullptr);
  EXPECT_EQ(snap->round, 2u);
  EXPECT_EQ(snap->comparisons, 50u);
  EXPECT_EQ(snap->estimates.size(), 40u);
  EXPECT_FALSE(s.retrain_error().has_value());
}

TEST(SessionTest, ExpiredPairsReturnToThePool) {
  const auto data = synth::Generate(synth::GeneratorKind::kLinear, 2, 1, 5);
  Session s(FastConfig(), data.features);
  auto now = std::chrono::steady_clock::now();
  s.SetClockForTesting([&] { return now; });
  const auto p = s.NextPair();
  ASSERT_TRUE(p.has_value());
  EXPECT_FALSE(s.NextPair().has_value());
  now += std::chrono::minutes(9);
  EXPECT_FALSE(s.NextPair().has_value());
  now += std::chrono::minutes(1);
  const auto q = s.NextPair();
  ASSERT_TRUE(q.has_value());
  EXPECT_NE(q->pair_id, p->pair_id);
  EXPECT_THROW(s.Submit(p->pair_id, 1.0), SubmitError);
  EXPECT_TRUE(s.Submit(q->pair_id, 1.0).accepted);
}

TEST(SessionTest, HardModePicksBottomQuartileGapAfterHundredAnnotations) {
  const auto data = synth::Generate(synth::GeneratorKind::kLinear, 200, 2, 6);
  Session s(FastConfig(pairs::StrategyKind::kHard), data.features);
  Annotate(s, data, 100);
  s.WaitIdle();
  const auto snap = s.snapshot();
  ASSERT_NE(snap, nullptr);
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const auto p = s.NextPair();
    const double gap = std::abs(snap->means[p->a] - snap->means[p->b]);
    std::vector<double> gaps;
    while (gaps.size() < 256) {
      const auto a = rng.Index(200);
      const auto b = rng.Index(200);
      if (a != b) gaps.push_back(std::abs(snap->means[a] - snap->means[b]));
    }
    std::nth_element(gaps.begin(), gaps.begin() + 64, gaps.end());
    EXPECT_LE(gap, gaps[64]);
  }
}

TEST(SessionTest, ConcurrentCallsGetDistinctPendingPairs) {
  const auto data = synth::Generate(synth::GeneratorKind::kLinear, 8, 2, 8);
  Session s(FastConfig(), data.features);
  std::mutex mu;
  std::vector<std::pair<ItemId, ItemId>> got;
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&] {
      for (int k = 0; k < 7; ++k) {
        const auto p = s.NextPair();
        if (!p) continue;
        std::lock_guard<std::mutex> lock(mu);
        got.push_back(std::minmax(p->a, p->b));
      }
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(got.size(), 28u);  // C(8, 2): every pair exactly once
  EXPECT_EQ(std::set(got.begin(), got.end()).size(), got.size());
}

TEST(SessionTest, LogReplayReproducesSnapshotAndOfflinePredict) {
  const auto data = synth::Generate(synth::GeneratorKind::kRing, 60, 2, 9);
  const auto dir = TempDir("replay");
  std::string live_model;
  std::string live_ratings;
  {
    Session s(FastConfig(pairs::StrategyKind::kHard), data.features, dir.string());
    Annotate(s, data, 60);  // two full rounds plus 10 more
    s.WaitIdle();
    live_model = s.snapshot()->model.ToJson().dump();
    live_ratings = RatingsJson(s.snapshot()->estimates).dump();

    // Offline predict on the snapshot file.
    std::ifstream in(dir / "snapshot.json");
    const auto snap = nlohmann::json::parse(in);
    const auto model = rater::EncoderModel::FromJson(snap.at("model"));
    const auto offline = rater::PredictWithUncertainty(model, data.features, snap.at("predict_passes").get<int>(),
                                                       snap.at("predict_seed").get<std::uint64_t>());
    EXPECT_EQ(RatingsJson(offline).dump(), live_ratings);
    EXPECT_EQ(snap.at("comparisons").get<std::size_t>(), 50u);
  }
  const auto resumed = Session::Resume(dir.string(), data.features);
  EXPECT_EQ(resumed->log().size(), 60u);
  EXPECT_EQ(resumed->Status().annotations_total, 60u);
  EXPECT_EQ(resumed->Status().rounds_completed, 2u);
  EXPECT_EQ(resumed->snapshot()->model.ToJson().dump(), live_model);
  EXPECT_EQ(RatingsJson(resumed->snapshot()->estimates).dump(), live_ratings);

  // The resumed session keeps appending to the same log.
  Annotate(*resumed, data, 1);
  EXPECT_EQ(Session::Resume(dir.string(), data.features)->log().size(), 61u);
  fs::remove_all(dir);
}

TEST(SessionTest, ResumeRejectsDifferentDataset) {
  const auto data = synth::Generate(synth::GeneratorKind::kLinear, 10, 2, 10);
  const auto dir = TempDir("digest");
  { Session s(FastConfig(), data.features, dir.string()); }
  const auto other = synth::Generate(synth::GeneratorKind::kLinear, 10, 2, 11);
  EXPECT_THROW(Session::Resume(dir.string(), other.features), std::invalid_argument);
  fs::remove_all(dir);
}

TEST(SessionConfigTest, JsonRoundTripAndValidation) {
  SessionConfig c = FastConfig(pairs::StrategyKind::kEasy, 7);
  c.pending_ttl = std::chrono::milliseconds(1234);
  const auto back = SessionConfig::FromJson(nlohmann::json::parse(c.ToJson().dump()));
  EXPECT_EQ(back.ToJson(), c.ToJson());
  c.round_size = 0;
  EXPECT_THROW(c.Validate(), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// HTTP

class HttpTest : public ::testing::Test {
 protected:
  void SetUp() override {
    port_ = server_.Start("127.0.0.1", 0);
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
  }
  void TearDown() override { server_.Stop(); }

  nlohmann::json PostComparison(const nlohmann::json& body, int expected_status) {
    const auto res = client_->Post("/comparison", body.dump(), "application/json");
    EXPECT_TRUE(res);
    EXPECT_EQ(res->status, expected_status) << res->body;
    return nlohmann::json::parse(res->body, nullptr, false);
  }

  AnnotationServer server_;
  int port_ = 0;
  std::unique_ptr<httplib::Client> client_;
};

TEST_F(HttpTest, LoadingStateAnswers503) {
  for (const char* path : {"/next-pair", "/ratings", "/status"}) {
    const auto res = client_->Get(path);
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 503) << path;
  }
  PostComparison({{"pair_id", 1}, {"outcome", 1}}, 503);
}

TEST_F(HttpTest, EndpointsFollowTheContract) {
  const auto data = synth::Generate(synth::GeneratorKind::kRing, 30, 2, 12);
  auto session = std::make_shared<Session>(FastConfig(pairs::StrategyKind::kHard, 5), data.features);
  server_.Attach(session);

  auto status = nlohmann::json::parse(client_->Get("/status")->body);
  EXPECT_EQ(status["annotations_total"], 0);
  EXPECT_EQ(status["strategy"], "hard");
  EXPECT_EQ(client_->Get("/ratings")->status, 204);

  const auto res = client_->Get("/next-pair");
  ASSERT_EQ(res->status, 200);
  const auto pair = nlohmann::json::parse(res->body);
  EXPECT_NE(pair["item_a"]["id"], pair["item_b"]["id"]);
  EXPECT_EQ(pair["item_a"]["features"].size(), 2u);
  const double hx = pair["item_a"]["hint"]["x"];
  EXPECT_GE(hx, 0.0);
  EXPECT_LE(hx, 1.0);

  const auto id = pair["pair_id"].get<std::uint64_t>();
  PostComparison({{"pair_id", id + 1000}, {"outcome", 1}}, 404);
  PostComparison({{"pair_id", id}, {"outcome", 0.25}}, 422);
  PostComparison({{"pair_id", id}}, 422);
  PostComparison({{"pair_id", "x"}, {"outcome", 1}}, 422);
  EXPECT_EQ(client_->Post("/comparison", "{not json", "application/json")->status, 400);
  auto ok = PostComparison({{"pair_id", id}, {"outcome", 0.5}}, 200);
  EXPECT_EQ(ok["accepted"], true);
  EXPECT_EQ(ok["annotations_total"], 1);
  EXPECT_EQ(ok["retrain_triggered"], false);
  PostComparison({{"pair_id", id}, {"outcome", 0.5}}, 409);
  EXPECT_EQ(session->log().size(), 1u);

  for (int k = 2; k <= 5; ++k) {
    const auto p = nlohmann::json::parse(client_->Get("/next-pair")->body);
    ok = PostComparison({{"pair_id", p["pair_id"]}, {"outcome", 1}}, 200);
  }
  EXPECT_EQ(ok["retrain_triggered"], true);
  session->WaitIdle();
  status = nlohmann::json::parse(client_->Get("/status")->body);
  EXPECT_EQ(status["rounds_completed"], 1);
  EXPECT_EQ(status["training"], false);
  const auto ratings = client_->Get("/ratings");
  ASSERT_EQ(ratings->status, 200);
  const auto table = nlohmann::json::parse(ratings->body);
  ASSERT_EQ(table.size(), 30u);
  EXPECT_EQ(ratings->body, RatingsJson(session->snapshot()->estimates).dump());
  for (const auto& row : table) {
    EXPECT_TRUE(row.contains("id") && row.contains("mean") && row.contains("epistemic") && row.contains("aleatoric"));
  }
}

TEST_F(HttpTest, AllPendingAnswers409) {
  const auto data = synth::Generate(synth::GeneratorKind::kLinear, 2, 1, 13);
  server_.Attach(std::make_shared<Session>(FastConfig(), data.features));
  EXPECT_EQ(client_->Get("/next-pair")->status, 200);
  EXPECT_EQ(client_->Get("/next-pair")->status, 409);
}

TEST_F(HttpTest, ConcurrentReadsDuringRetrainSeeWholeSnapshots) {
  const auto data = synth::Generate(synth::GeneratorKind::kLinear, 50, 2, 14);
  auto session = std::make_shared<Session>(FastConfig(pairs::StrategyKind::kRandom, 10), data.features);
  server_.Attach(session);
  std::atomic<bool> done{false};
  std::atomic<int> bad{0};
  std::atomic<int> reads{0};
  std::thread reader([&] {
    httplib::Client c("127.0.0.1", port_);
    while (!done) {
      const auto res = c.Get("/ratings");
      if (!res) {
        ++bad;
        continue;
      }
      if (res->status == 200) {
        const auto table = nlohmann::json::parse(res->body, nullptr, false);
        if (table.is_discarded() || table.size() != 50u) ++bad;
        ++reads;
      } else if (res->status != 204) {
        ++bad;
      }
    }
  });
  Annotate(*session, data, 40);
  session->WaitIdle();
  // Let the reader see at least one completed snapshot.
  while (reads == 0) std::this_thread::yield();
  done = true;
  reader.join();
  EXPECT_EQ(bad, 0);
  EXPECT_EQ(session->Status().rounds_completed, 4u);
}

}  // namespace
}  // namespace prefrank::service
