#include "prefrank/service/session.hpp"

#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "prefrank/common/hash.hpp"
#include "prefrank/common/random.hpp"
#include "prefrank/pairs/comparisons_io.hpp"
#include "prefrank/rater/losses.hpp"
#include "prefrank/synth/dataset_io.hpp"
#include "prefrank/synth/metrics.hpp"

namespace prefrank::service {

namespace {

constexpr const char* kHeaderFile = "session.json";
constexpr const char* kLogFile = "comparisons.csv";
constexpr const char* kSnapshotFile = "snapshot.json";
constexpr const char* kFormat = "prefrank-session/1";

std::string JoinPath(const std::string& dir, const char* name) {
  return (std::filesystem::path(dir) / name).string();
}

void WriteFileAtomically(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out << content;
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

// ---------------------------------------------------------------------------
// SessionConfig

void SessionConfig::Validate() const {
  if (round_size < 1) throw std::invalid_argument("round_size: must be >= 1");
  if (candidate_pool < 1) throw std::invalid_argument("candidate_pool: must be >= 1");
  if (pending_ttl.count() < 0) throw std::invalid_argument("pending_ttl_ms: must be >= 0");
  if (schedule.target_steps < 1) throw std::invalid_argument("schedule.target_steps: must be >= 1");
  if (schedule.batch_size < 1) throw std::invalid_argument("schedule.batch_size: must be >= 1");
  if (schedule.min_epochs < 0 || schedule.max_epochs < schedule.min_epochs) {
    throw std::invalid_argument("schedule: need 0 <= min_epochs <= max_epochs");
  }
  encoder.Validate();
}

nlohmann::json SessionConfig::ToJson() const {
  return {{"strategy", pairs::ToString(strategy)},
          {"round_size", round_size},
          {"candidate_pool", candidate_pool},
          {"encoder", encoder.ToJson()},
          {"schedule",
           {{"target_steps", schedule.target_steps},
            {"batch_size", schedule.batch_size},
            {"min_epochs", schedule.min_epochs},
            {"max_epochs", schedule.max_epochs}}},
          {"pending_ttl_ms", pending_ttl.count()},
          {"seed", seed}};
}

SessionConfig SessionConfig::FromJson(const nlohmann::json& j) {
  SessionConfig c;
  c.strategy = pairs::ParseStrategyKind(j.at("strategy").get<std::string>());
  c.round_size = j.at("round_size").get<std::size_t>();
  c.candidate_pool = j.at("candidate_pool").get<std::size_t>();
  c.encoder = rater::EncoderConfig::FromJson(j.at("encoder"));
  const auto& s = j.at("schedule");
  c.schedule.target_steps = s.at("target_steps").get<long>();
  c.schedule.batch_size = s.at("batch_size").get<int>();
  c.schedule.min_epochs = s.at("min_epochs").get<int>();
  c.schedule.max_epochs = s.at("max_epochs").get<int>();
  c.pending_ttl = std::chrono::milliseconds(j.at("pending_ttl_ms").get<long long>());
  c.seed = j.at("seed").get<std::uint64_t>();
  c.Validate();
  return c;
}

// ---------------------------------------------------------------------------
// Snapshots

nlohmann::json Snapshot::ToJson() const {
  return {{"round", round},
          {"comparisons", comparisons},
          {"predict_seed", predict_seed},
          {"predict_passes", predict_passes},
          {"model", model.ToJson()}};
}

Snapshot TrainSnapshot(const SessionConfig& config, const Tensor& features, std::span<const Comparison> prefix,
                       std::size_t round) {
  rater::EncoderConfig enc = config.encoder;
  enc.input_dim = static_cast<int>(features.cols());
  enc.seed = DeriveSeed(config.seed, 1, round);
  Snapshot s{.round = round, .comparisons = prefix.size(), .model = rater::EncoderModel(enc)};
  rater::Train(s.model, features, prefix, config.schedule.For(prefix.size()));
  s.predict_seed = DeriveSeed(config.seed, 2, round);
  s.predict_passes = enc.predict_passes;
  s.estimates = rater::PredictWithUncertainty(s.model, features, s.predict_passes, s.predict_seed);
  s.means = rater::MeanRatings(s.model, features);
  return s;
}

nlohmann::json RatingsJson(std::span<const rater::RatingEstimate> estimates) {
  nlohmann::json out = nlohmann::json::array();
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    out.push_back({{"id", i},
                   {"mean", estimates[i].mean},
                   {"epistemic", estimates[i].epistemic},
                   {"aleatoric", estimates[i].aleatoric}});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Session

std::string Session::DatasetDigest(const Tensor& features) {
  std::ostringstream csv;
  synth::WriteFeaturesCsv(csv, features);
  return Fnv1aHex(csv.str());
}

Session::Session(SessionConfig config, Tensor features, std::string log_dir)
    : config_(std::move(config)), features_(std::move(features)), log_dir_(std::move(log_dir)) {
  config_.encoder.input_dim = static_cast<int>(features_.cols());
  config_.Validate();
  if (features_.rows() < 2) throw std::invalid_argument("session: need at least two items");
  pool_.resize(static_cast<std::size_t>(features_.rows()));
  std::iota(pool_.begin(), pool_.end(), ItemId{0});
  clock_ = [] { return std::chrono::steady_clock::now(); };
  if (!log_dir_.empty()) {
    std::filesystem::create_directories(log_dir_);
    const nlohmann::json header{{"format", kFormat},
                                {"config", config_.ToJson()},
                                {"items", features_.rows()},
                                {"dim", features_.cols()},
                                {"dataset_digest", DatasetDigest(features_)}};
    WriteFileAtomically(JoinPath(log_dir_, kHeaderFile), header.dump(2) + "\n");
    std::ostringstream empty;
    pairs::WriteComparisonsCsv(empty, {});
    WriteFileAtomically(JoinPath(log_dir_, kLogFile), empty.str());
  }
  worker_ = std::thread([this] { WorkerLoop(); });
}

Session::~Session() {
  {
    std::lock_guard<std::mutex> lock(queue_mutex_);
    stopping_ = true;
  }
  queue_cv_.notify_all();
  if (worker_.joinable()) worker_.join();
}

std::unique_ptr<Session> Session::Resume(const std::string& log_dir, Tensor features) {
  std::ifstream in(JoinPath(log_dir, kHeaderFile), std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + JoinPath(log_dir, kHeaderFile));
  const auto header = nlohmann::json::parse(in);
  if (header.at("format").get<std::string>() != kFormat) throw std::invalid_argument("session log: unknown format");
  if (header.at("dataset_digest").get<std::string>() != DatasetDigest(features)) {
    throw std::invalid_argument("session log: data set differs from the one the log was recorded on");
  }
  auto log = pairs::LoadComparisons(JoinPath(log_dir, kLogFile));
  rater::RequireKnownItems(log, static_cast<std::size_t>(features.rows()));

  auto session = std::make_unique<Session>(SessionConfig::FromJson(header.at("config")), std::move(features));
  const std::size_t rounds = log.size() / session->config_.round_size;
  for (std::size_t r = rounds >= 2 ? rounds - 1 : 1; r <= rounds; ++r) {
    const std::span<const Comparison> prefix(log.data(), r * session->config_.round_size);
    session->Install(std::make_shared<const Snapshot>(
        TrainSnapshot(session->config_, session->features_, prefix, r)));
  }
  session->log_ = std::move(log);
  session->annotations_total_ = session->log_.size();
  session->log_dir_ = log_dir;
  return session;
}

void Session::SetClockForTesting(Clock clock) {
  std::lock_guard<std::mutex> lock(mutex_);
  clock_ = std::move(clock);
}

void Session::PurgeExpiredLocked() {
  const auto now = clock_();
  for (auto it = pending_.begin(); it != pending_.end();) {
    if (now - it->second.issued >= config_.pending_ttl) {
      pending_pairs_.erase(std::minmax(it->second.a, it->second.b));
      it = pending_.erase(it);
    } else {
      ++it;
    }
  }
}

std::optional<IssuedPair> Session::NextPair() {
  const auto snap = snapshot();
  std::lock_guard<std::mutex> lock(mutex_);
  PurgeExpiredLocked();
  const std::size_t n = pool_.size();
  const std::size_t distinct = n * (n - 1) / 2;
  if (pending_pairs_.size() >= distinct) return std::nullopt;

  pairs::Strategy strategy;
  strategy.candidate_pool = config_.candidate_pool;
  strategy.kind = config_.strategy == pairs::StrategyKind::kHardPseudo ? pairs::StrategyKind::kHard
                                                                        : config_.strategy;
  std::span<const double> ratings;
  if (snap) {
    ratings = snap->means;
  } else {
    strategy.kind = pairs::StrategyKind::kRandom;
  }
  auto free = [&](const pairs::ItemPair& p) { return !pending_pairs_.contains(std::minmax(p.a, p.b)); };
  const std::uint64_t issue_seed = DeriveSeed(config_.seed, 3, issue_counter_++);

  std::optional<pairs::ItemPair> chosen;
  const bool exhaustive = strategy.kind != pairs::StrategyKind::kRandom && strategy.candidate_pool >= distinct;
  if (exhaustive) {
    // The best pending_pairs_.size() + 1 distinct pairs hold at least one
    // free pair.
    const auto ranked =
        pairs::SamplePairs(strategy, pool_, ratings, pending_pairs_.size() + 1, issue_seed).query;
    for (const auto& p : ranked) {
      if (free(p)) {
        chosen = p;
        break;
      }
    }
  } else {
    for (std::uint64_t attempt = 0; attempt < 64 && !chosen; ++attempt) {
      const auto p = pairs::SamplePairs(strategy, pool_, ratings, 1, DeriveSeed(issue_seed, attempt)).query.front();
      if (free(p)) chosen = p;
    }
    for (std::size_t i = 0; i < n && !chosen; ++i) {
      for (std::size_t j = i + 1; j < n && !chosen; ++j) {
        if (free({pool_[i], pool_[j]})) chosen = pairs::ItemPair{pool_[i], pool_[j]};
      }
    }
  }
  const std::uint64_t id = next_pair_id_++;
  pending_[id] = {chosen->a, chosen->b, clock_()};
  pending_pairs_.insert(std::minmax(chosen->a, chosen->b));
  return IssuedPair{id, chosen->a, chosen->b};
}

SubmitResult Session::Submit(std::uint64_t pair_id, double outcome) {
  SubmitResult result;
  std::size_t round = 0;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    if (answered_.contains(pair_id)) {
      throw SubmitError(SubmitErrorKind::kDuplicate, "pair " + std::to_string(pair_id) + " was already answered");
    }
    PurgeExpiredLocked();
    const auto it = pending_.find(pair_id);
    if (it == pending_.end()) {
      throw SubmitError(SubmitErrorKind::kUnknownPair, "pair " + std::to_string(pair_id) + " is not pending");
    }
    if (!rater::IsValidOutcome(outcome)) {
      throw SubmitError(SubmitErrorKind::kInvalidOutcome, "outcome must be 1, 0.5 or 0");
    }
    const Comparison c = Comparison::Make(it->second.a, it->second.b, outcome);
    AppendToLogFile(c);
    log_.push_back(c);
    pending_pairs_.erase(std::minmax(it->second.a, it->second.b));
    pending_.erase(it);
    answered_.insert(pair_id);
    result.accepted = true;
    result.annotations_total = log_.size();
    annotations_total_ = log_.size();
    if (log_.size() % config_.round_size == 0) {
      result.retrain_triggered = true;
      round = log_.size() / config_.round_size;
    }
  }
  if (result.retrain_triggered) {
    {
      std::lock_guard<std::mutex> lock(queue_mutex_);
      queue_.emplace_back(round, round * config_.round_size);
      training_ = true;
    }
    queue_cv_.notify_one();
  }
  return result;
}

void Session::AppendToLogFile(const Comparison& c) {
  if (log_dir_.empty()) return;
  std::ofstream out(JoinPath(log_dir_, kLogFile), std::ios::binary | std::ios::app);
  if (!out) throw std::runtime_error("cannot append to the session log");
  out << c.a << ',' << c.b << ',' << pairs::FormatOutcome(c.score_a) << '\n';
  out.flush();
  if (!out) throw std::runtime_error("cannot append to the session log");
}

std::shared_ptr<const Snapshot> Session::snapshot() const {
  std::lock_guard<std::mutex> lock(snapshot_mutex_);
  return snapshot_;
}

void Session::Install(std::shared_ptr<const Snapshot> next) {
  std::shared_ptr<const Snapshot> previous;
  {
    std::lock_guard<std::mutex> lock(snapshot_mutex_);
    previous = snapshot_;
    snapshot_ = next;
  }
  if (previous) last_spearman_ = synth::Spearman(previous->means, next->means);
  rounds_completed_ = next->round;
  if (!log_dir_.empty()) WriteFileAtomically(JoinPath(log_dir_, kSnapshotFile), next->ToJson().dump() + "\n");
}

void Session::WorkerLoop() {
  while (true) {
    std::pair<std::size_t, std::size_t> job;
    {
      std::unique_lock<std::mutex> lock(queue_mutex_);
      queue_cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
      if (stopping_) return;
      job = queue_.front();
      queue_.pop_front();
      busy_ = true;
    }
    std::vector<Comparison> prefix;
    {
      std::lock_guard<std::mutex> lock(mutex_);
      prefix.assign(log_.begin(), log_.begin() + static_cast<std::ptrdiff_t>(job.second));
    }
    std::string error;
    try {
      Install(std::make_shared<const Snapshot>(TrainSnapshot(config_, features_, prefix, job.first)));
    } catch (const std::exception& e) {
      error = "round " + std::to_string(job.first) + ": " + e.what();
    }
    {
      std::lock_guard<std::mutex> lock(queue_mutex_);
      if (!error.empty()) retrain_error_ = error;
      busy_ = false;
      training_ = !queue_.empty();
    }
    idle_cv_.notify_all();
  }
}

void Session::WaitIdle() {
  std::unique_lock<std::mutex> lock(queue_mutex_);
  idle_cv_.wait(lock, [&] { return queue_.empty() && !busy_; });
}

StatusView Session::Status() const {
  StatusView s;
  s.annotations_total = annotations_total_.load();
  s.rounds_completed = rounds_completed_.load();
  s.strategy = pairs::ToString(config_.strategy);
  s.training = training_.load();
  s.last_spearman_vs_self = last_spearman_.load();
  return s;
}

std::vector<Comparison> Session::log() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return log_;
}

std::optional<std::string> Session::retrain_error() const {
  std::lock_guard<std::mutex> lock(queue_mutex_);
  return retrain_error_;
}

std::size_t Session::pending_count() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return pending_.size();
}

}  // namespace prefrank::service
