#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "prefrank/pairs/sampling.hpp"
#include "prefrank/rater/training.hpp"

namespace prefrank::service {

using diffcore::Tensor;
using rater::Comparison;
using rater::ItemId;

struct SessionConfig {
  pairs::StrategyKind strategy = pairs::StrategyKind::kHard;
  // Accepted annotations per retrain.
  std::size_t round_size = 25;
  std::size_t candidate_pool = 256;
  // input_dim is overwritten with the data set width.
  rater::EncoderConfig encoder;
  rater::TrainSchedule schedule;
  // Issued pairs not answered within this time return to the pool.
  std::chrono::milliseconds pending_ttl{std::chrono::minutes(10)};
  std::uint64_t seed = 0;

  void Validate() const;
  nlohmann::json ToJson() const;
  static SessionConfig FromJson(const nlohmann::json& j);
};

// One trained rater and everything served from it.
struct Snapshot {
  std::size_t round = 0;        // 1-based round that produced it
  std::size_t comparisons = 0;  // length of the log prefix it was trained on
  rater::EncoderModel model;
  std::uint64_t predict_seed = 0;
  int predict_passes = 0;
  std::vector<rater::RatingEstimate> estimates;
  // Deterministic mean ratings, used for pair selection.
  std::vector<double> means;

  // {"round", "comparisons", "predict_seed", "predict_passes", "model"}.
  nlohmann::json ToJson() const;
};

// Trains round `round` from scratch on `prefix` with seeds derived from the
// session seed, so a replayed log gives a bit-identical snapshot.
Snapshot TrainSnapshot(const SessionConfig& config, const Tensor& features, std::span<const Comparison> prefix,
                       std::size_t round);

// [{id, mean, epistemic, aleatoric}], the wire form of /ratings.
nlohmann::json RatingsJson(std::span<const rater::RatingEstimate> estimates);

struct IssuedPair {
  std::uint64_t pair_id = 0;
  ItemId a = 0;
  ItemId b = 0;
};

struct SubmitResult {
  bool accepted = false;
  std::size_t annotations_total = 0;
  bool retrain_triggered = false;
};

enum class SubmitErrorKind { kUnknownPair, kInvalidOutcome, kDuplicate };

class SubmitError : public std::runtime_error {
 public:
  SubmitError(SubmitErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  SubmitErrorKind kind() const { return kind_; }

 private:
  SubmitErrorKind kind_;
};

struct StatusView {
  std::size_t annotations_total = 0;
  std::size_t rounds_completed = 0;
  std::string strategy;
  bool training = false;
  // Spearman between the ratings of the two latest snapshots; 0 until two
  // snapshots exist.
  double last_spearman_vs_self = 0.0;
};

// State of one live annotation session: the append-only comparison log,
// pending pairs, and the current model snapshot. A background worker runs
// retrains; readers get the snapshot through a mutex-guarded shared_ptr
// swap, so they always see one complete snapshot.
//
// With a log directory, the session writes `session.json` (config and data
// set digest), appends every accepted comparison to `comparisons.csv`, and
// rewrites `snapshot.json` after each retrain.
class Session {
 public:
  using Clock = std::function<std::chrono::steady_clock::time_point()>;

  Session(SessionConfig config, Tensor features, std::string log_dir = "");
  ~Session();
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  // Restores a session from a log directory written by an earlier run. The
  // latest snapshot is retrained synchronously from the log.
  static std::unique_ptr<Session> Resume(const std::string& log_dir, Tensor features);

  // Next pair by the configured strategy against the current snapshot
  // (uniformly random before the first retrain). Never returns a pair that
  // is still pending; nullopt when every distinct pair is pending.
  std::optional<IssuedPair> NextPair();

  // Throws SubmitError: kDuplicate for a pair id already answered,
  // kUnknownPair for an id never issued (or expired), kInvalidOutcome for an
  // outcome outside {1, 0.5, 0}.
  SubmitResult Submit(std::uint64_t pair_id, double outcome);

  std::shared_ptr<const Snapshot> snapshot() const;
  StatusView Status() const;
  std::vector<Comparison> log() const;
  const Tensor& features() const { return features_; }
  const SessionConfig& config() const { return config_; }
  std::size_t pending_count() const;
  // Message of the latest failed retrain, if any. A failed round leaves the
  // previous snapshot in place.
  std::optional<std::string> retrain_error() const;

  // Blocks until every queued retrain has finished.
  void WaitIdle();

  void SetClockForTesting(Clock clock);

  static std::string DatasetDigest(const Tensor& features);

 private:
  struct Pending {
    ItemId a = 0;
    ItemId b = 0;
    std::chrono::steady_clock::time_point issued;
  };

  void PurgeExpiredLocked();
  void Install(std::shared_ptr<const Snapshot> next);
  void WorkerLoop();
  void AppendToLogFile(const Comparison& c);

  SessionConfig config_;
  Tensor features_;
  std::string log_dir_;
  std::vector<ItemId> pool_;

  mutable std::mutex mutex_;  // log, pending, submitted, issue counter
  std::vector<Comparison> log_;
  std::map<std::uint64_t, Pending> pending_;
  std::set<std::pair<ItemId, ItemId>> pending_pairs_;
  std::set<std::uint64_t> answered_;
  std::uint64_t next_pair_id_ = 1;
  std::uint64_t issue_counter_ = 0;
  Clock clock_;

  mutable std::mutex snapshot_mutex_;
  std::shared_ptr<const Snapshot> snapshot_;

  std::atomic<std::size_t> annotations_total_{0};
  std::atomic<std::size_t> rounds_completed_{0};
  std::atomic<bool> training_{false};
  std::atomic<double> last_spearman_{0.0};

  mutable std::mutex queue_mutex_;
  std::condition_variable queue_cv_;
  std::condition_variable idle_cv_;
  std::deque<std::pair<std::size_t, std::size_t>> queue_;  // (round, prefix length)
  bool busy_ = false;
  bool stopping_ = false;
  std::optional<std::string> retrain_error_;
  std::thread worker_;
};

}  // namespace prefrank::service
