#pragma once

// Live evaluation sessions. Each session runs the four emotion phases
// against a row source, predicts the 14 traits when the last phase closes,
// takes one ratings submission and persists everything under
// <data_dir>/sessions.
//
// Concurrency: one pump thread per session is the only writer of row
// buffers; commands and snapshots take the session mutex; subscribers get
// bounded queues and are dropped when they fall behind.

#include <array>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "traitwave/classical/grid.hpp"
#include "traitwave/dataset.hpp"
#include "traitwave/features.hpp"
#include "traitwave/service/report.hpp"
#include "traitwave/service/source.hpp"

namespace traitwave::service {

using json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

enum class Phase { Idle, Happy, Sad, Neutral, Meditation, Predicting, Rating, Done };

inline constexpr std::array<std::string_view, 8> kPhaseNames = {"idle",       "happy",      "sad",    "neutral",
                                                                "meditation", "predicting", "rating", "done"};

inline std::string_view name_of(Phase p) { return kPhaseNames[static_cast<std::size_t>(p)]; }

inline std::optional<Emotion> running_emotion(Phase p) {
  if (p >= Phase::Happy && p <= Phase::Meditation) return emotion_at(static_cast<std::size_t>(p) - 1);
  return std::nullopt;
}

/// The phase `advance` moves to, or nothing when advance is not allowed
/// (Rating closes only through a ratings submission; Done is terminal).
inline std::optional<Phase> next_phase(Phase p) {
  if (p >= Phase::Rating) return std::nullopt;
  return static_cast<Phase>(static_cast<int>(p) + 1);
}

/// Bounded message queue for one stream subscriber.
class Subscription {
 public:
  enum class Status { Message, Timeout, Closed, Dropped };

  explicit Subscription(std::size_t capacity) : capacity_(capacity) {}

  /// Never blocks. Returns false once the subscriber has been dropped.
  bool push(std::string message) {
    bool kept = false;
    {
      std::lock_guard lock(mutex_);
      if (dropped_ || closed_) return false;
      if (queue_.size() >= capacity_) {
        dropped_ = true;
      } else {
        queue_.push_back(std::move(message));
        kept = true;
      }
    }
    cv_.notify_all();
    return kept;
  }

  /// Queued messages come first; Dropped or Closed is reported after them.
  Status pop(std::string& out, std::chrono::milliseconds wait) {
    std::unique_lock lock(mutex_);
    cv_.wait_for(lock, wait, [&] { return !queue_.empty() || closed_ || dropped_; });
    if (!queue_.empty()) {
      out = std::move(queue_.front());
      queue_.pop_front();
      return Status::Message;
    }
    if (dropped_) return Status::Dropped;
    if (closed_) return Status::Closed;
    return Status::Timeout;
  }

  void close() {
    {
      std::lock_guard lock(mutex_);
      closed_ = true;
    }
    cv_.notify_all();
  }

  bool active() const {
    std::lock_guard lock(mutex_);
    return !closed_ && !dropped_;
  }

 private:
  std::size_t capacity_;
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<std::string> queue_;
  bool closed_ = false;
  bool dropped_ = false;
};

inline std::string row_message(std::uint64_t t_ms, const BandPowerRow& row, Phase phase) {
  json j;
  j["t_ms"] = t_ms;
  j["bands"] = row.bands;
  j["phase"] = name_of(phase);
  return j.dump();
}

inline json predictions_to_json(const std::array<classical::TraitPrediction, kNumTraits>& preds) {
  json out = json::array();
  for (const auto& p : preds)
    out.push_back({{"trait", traitwave::name_of(p.trait)},
                   {"value", p.value},
                   {"probability", p.probability},
                   {"emotion", traitwave::name_of(p.emotion)}});
  return out;
}

struct ServiceConfig {
  fs::path data_dir = ".";
  std::size_t subscriber_capacity = 1024;
};

struct SessionOptions {
  fs::path selector;
  nlohmann::json source = {{"type", "simulator"}};
  std::uint32_t phase_duration_s = 120;
  double time_scale = 1.0;  // pacing multiplier for paced sources; 0 = as fast as possible

  static SessionOptions from_json(const nlohmann::json& j, const fs::path& data_dir) {
    if (!j.is_object()) throw Error(ErrorCode::BadRequest, "body must be a JSON object");
    SessionOptions o;
    if (!j.contains("selector") || !j.at("selector").is_string())
      throw Error(ErrorCode::BadRequest, "selector path is required");
    o.selector = j.at("selector").get<std::string>();
    if (o.selector.is_relative()) o.selector = data_dir / o.selector;
    if (j.contains("source")) o.source = j.at("source");
    if (!o.source.is_object()) throw Error(ErrorCode::BadRequest, "source must be an object");
    if (j.contains("phase_duration_s")) {
      const auto d = j.at("phase_duration_s").get<double>();
      if (!(d >= 1 && d <= 86400 && d == std::floor(d)))
        throw Error(ErrorCode::BadRequest, "phase_duration_s must be a whole number of seconds in [1, 86400]");
      o.phase_duration_s = static_cast<std::uint32_t>(d);
    }
    o.time_scale = j.value("time_scale", 1.0);
    if (!(o.time_scale >= 0.0 && o.time_scale <= 100.0)) throw Error(ErrorCode::BadRequest, "time_scale must lie in [0, 100]");
    return o;
  }
};

class Session {
 public:
  Session(std::string id, SessionOptions opts, classical::TraitSelector selector, std::unique_ptr<RowSource> source,
          fs::path dir, std::size_t subscriber_capacity)
      : id_(std::move(id)),
        opts_(std::move(opts)),
        selector_(std::move(selector)),
        source_(std::move(source)),
        dir_(std::move(dir)),
        subscriber_capacity_(subscriber_capacity),
        rows_per_second_(opts_.source.value("rows_per_second", std::uint32_t{1})) {
    fs::create_directories(dir_);
    persist_locked();
    pump_ = std::thread([this] { pump(); });
  }

  ~Session() { stop(); }

  void stop() {
    {
      std::lock_guard lock(mutex_);
      if (stopping_) return;
      stopping_ = true;
      for (auto& s : subscribers_) s->close();
      subscribers_.clear();
    }
    cv_.notify_all();
    if (pump_.joinable()) pump_.join();
  }

  const std::string& id() const { return id_; }

  json snapshot() const {
    std::lock_guard lock(mutex_);
    return snapshot_locked();
  }

  Phase phase() const {
    std::lock_guard lock(mutex_);
    return phase_;
  }

  Phase advance() {
    std::unique_lock lock(mutex_);
    const auto to = next_phase(phase_);
    if (!to)
      throw Error(ErrorCode::InvalidTransition, std::string("cannot advance from ") + std::string(name_of(phase_)));
    if (const auto e = running_emotion(phase_)) {
      const auto& buf = rows_[index_of(*e)];
      if (buf.empty())
        throw Error(ErrorCode::EmptyPhaseBuffer, std::string(traitwave::name_of(*e)) + " phase has no rows yet");
      source_->end_phase();
      codec::Bytes capture;
      for (const auto& row : buf) {
        const auto packet = codec::encode_packet(codec::eeg_power_row(row));
        capture.insert(capture.end(), packet.begin(), packet.end());
      }
      codec::write_capture(dir_ / capture_file_name(*e), capture);
    }
    if (*to == Phase::Predicting) predict_locked();
    phase_ = *to;
    ++generation_;
    phase_started_ = Clock::now();
    phase_complete_ = false;
    persist_locked();
    lock.unlock();
    cv_.notify_all();
    return *to;
  }

  std::optional<std::array<classical::TraitPrediction, kNumTraits>> predictions() const {
    std::lock_guard lock(mutex_);
    return predictions_;
  }

  EvaluationReport submit_ratings(std::span<const int> ratings, double satisfaction) {
    std::unique_lock lock(mutex_);
    if (phase_ != Phase::Rating)
      throw Error(ErrorCode::WrongPhase, std::string("ratings are accepted in the rating phase, not ") +
                                             std::string(name_of(phase_)));
    report_ = make_report(id_, *predictions_, ratings, satisfaction);
    phase_ = Phase::Done;
    ++generation_;
    for (auto& s : subscribers_) s->close();
    subscribers_.clear();
    persist_locked();
    lock.unlock();
    cv_.notify_all();
    return *report_;
  }

  std::shared_ptr<Subscription> subscribe() {
    auto sub = std::make_shared<Subscription>(subscriber_capacity_);
    std::lock_guard lock(mutex_);
    if (phase_ == Phase::Done || stopping_) sub->close();
    else subscribers_.push_back(sub);
    return sub;
  }

  /// Blocks until the current emotion phase has every row its source can
  /// give, or `timeout` passes. Returns whether the phase is complete.
  bool wait_phase_complete(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mutex_);
    return cv_.wait_for(lock, timeout, [&] { return phase_complete_ || stopping_; }) && phase_complete_;
  }

 private:
  std::uint64_t row_interval_us() const {
    return static_cast<std::uint64_t>(opts_.time_scale * 1e6 / static_cast<double>(rows_per_second_));
  }

  void pump() {
    std::uint64_t seen = ~std::uint64_t{0};
    while (true) {
      std::unique_lock lock(mutex_);
      cv_.wait(lock, [&] { return stopping_ || (running_emotion(phase_) && !phase_complete_); });
      if (stopping_) return;
      const auto emotion = *running_emotion(phase_);
      const auto gen = generation_;
      const auto started = phase_started_;
      const auto k = rows_[index_of(emotion)].size();
      lock.unlock();

      if (seen != gen) {
        source_->begin_phase(emotion);
        seen = gen;
      }
      auto row = source_->next(std::chrono::milliseconds(100));
      const bool exhausted = source_->exhausted();
      if (row && source_->paced()) {
        const auto due = started + std::chrono::microseconds(row_interval_us() * (k + 1));
        lock.lock();
        cv_.wait_until(lock, due, [&] { return stopping_ || generation_ != gen; });
        lock.unlock();
      }

      lock.lock();
      if (stopping_) return;
      if (generation_ != gen) continue;
      if (row) {
        row->timestamp_ms = k * 1000 / rows_per_second_;
        rows_[index_of(emotion)].push_back(*row);
        const auto msg = row_message(row->timestamp_ms, *row, phase_);
        std::erase_if(subscribers_, [&](const auto& s) { return !s->push(msg); });
      }
      const bool timed_out = !source_->paced() && Clock::now() - phase_started_ >= std::chrono::seconds(opts_.phase_duration_s);
      if ((exhausted && source_->paced()) || timed_out) phase_complete_ = true;
      lock.unlock();
      cv_.notify_all();
    }
  }

  void predict_locked() {
    classical::EmotionFeatures f;
    for (auto e : kEmotions) {
      const Segment seg{id_, e, rows_[index_of(e)]};
      f[index_of(e)] = features::extract_features(seg).values;
    }
    predictions_ = classical::predict_traits(selector_, f);
  }

  json snapshot_locked() const {
    json j;
    j["session_id"] = id_;
    j["phase"] = name_of(phase_);
    j["phase_duration_s"] = opts_.phase_duration_s;
    j["time_scale"] = opts_.time_scale;
    j["selector"] = opts_.selector.string();
    j["source"] = source_->describe();
    if (const auto e = running_emotion(phase_)) {
      const auto elapsed =
          std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - phase_started_).count();
      const auto total = static_cast<std::int64_t>(opts_.phase_duration_s) * 1000;
      j["running"] = {{"emotion", traitwave::name_of(*e)},
                      {"elapsed_ms", elapsed},
                      {"remaining_ms", std::max<std::int64_t>(0, total - elapsed)},
                      {"rows", rows_[index_of(*e)].size()},
                      {"complete", phase_complete_}};
    } else {
      j["running"] = nullptr;
    }
    json buffered;
    for (auto e : kEmotions) buffered[std::string(traitwave::name_of(e))] = rows_[index_of(e)].size();
    j["buffered"] = buffered;
    j["predictions"] = predictions_ ? predictions_to_json(*predictions_) : json();
    if (report_) {
      j["ratings"] = report_->ratings;
      j["satisfaction"] = report_->satisfaction;
      j["report"] = report_to_json(*report_);
    } else {
      j["ratings"] = nullptr;
      j["satisfaction"] = nullptr;
      j["report"] = nullptr;
    }
    return j;
  }

  void persist_locked() const {
    dataset::write_text(dir_.parent_path() / (id_ + ".json"), snapshot_locked().dump(2) + "\n");
  }

  const std::string id_;
  const SessionOptions opts_;
  const classical::TraitSelector selector_;
  std::unique_ptr<RowSource> source_;
  const fs::path dir_;
  const std::size_t subscriber_capacity_;
  const std::uint32_t rows_per_second_;

  mutable std::mutex mutex_;
  std::condition_variable cv_;
  Phase phase_ = Phase::Idle;
  std::uint64_t generation_ = 0;
  Clock::time_point phase_started_ = Clock::now();
  bool phase_complete_ = false;
  bool stopping_ = false;
  std::array<std::vector<BandPowerRow>, kNumEmotions> rows_;
  std::optional<std::array<classical::TraitPrediction, kNumTraits>> predictions_;
  std::optional<EvaluationReport> report_;
  std::vector<std::shared_ptr<Subscription>> subscribers_;
  std::thread pump_;
};

/// Parses `{"ratings": [14 x 0/1], "satisfaction": x}`.
inline std::pair<std::vector<int>, double> parse_ratings(const nlohmann::json& body) {
  if (!body.is_object() || !body.contains("ratings") || !body.at("ratings").is_array())
    throw Error(ErrorCode::BadRequest, "ratings array is required");
  std::vector<int> ratings;
  for (const auto& r : body.at("ratings")) {
    if (r.is_boolean()) ratings.push_back(r.get<bool>() ? 1 : 0);
    else if (r.is_number_integer() && (r.get<int>() == 0 || r.get<int>() == 1)) ratings.push_back(r.get<int>());
    else throw Error(ErrorCode::BadRequest, "each rating must be 0 or 1");
  }
  if (!body.contains("satisfaction") || !body.at("satisfaction").is_number())
    throw Error(ErrorCode::BadRequest, "numeric satisfaction is required");
  return {ratings, body.at("satisfaction").get<double>()};
}

class SessionManager {
 public:
  explicit SessionManager(ServiceConfig cfg) : cfg_(std::move(cfg)) {
    fs::create_directories(sessions_dir());
    for (const auto& entry : fs::directory_iterator(sessions_dir())) {
      if (entry.path().extension() != ".json") continue;
      unsigned n = 0;
      if (std::sscanf(entry.path().stem().string().c_str(), "s%u", &n) == 1) next_id_ = std::max(next_id_, n + 1);
      try {
        const auto j = nlohmann::json::parse(dataset::read_text(entry.path()));
        if (j.contains("report") && !j.at("report").is_null()) reports_.push_back(report_from_json(j.at("report")));
      } catch (const std::exception&) {
        // A damaged session file only loses its report from the summary.
      }
    }
  }

  ~SessionManager() { shutdown(); }

  SessionManager(const SessionManager&) = delete;
  SessionManager& operator=(const SessionManager&) = delete;

  const ServiceConfig& config() const { return cfg_; }
  fs::path sessions_dir() const { return cfg_.data_dir / "sessions"; }

  std::string create(const nlohmann::json& body) {
    auto opts = SessionOptions::from_json(body, cfg_.data_dir);
    auto selector = classical::load_selector(opts.selector);
    auto source = make_source(opts.source, opts.phase_duration_s, cfg_.data_dir);
    std::string id;
    {
      std::lock_guard lock(mutex_);
      char buf[16];
      std::snprintf(buf, sizeof buf, "s%06u", next_id_++);
      id = buf;
    }
    auto session = std::make_shared<Session>(id, std::move(opts), std::move(selector), std::move(source),
                                             sessions_dir() / id, cfg_.subscriber_capacity);
    std::lock_guard lock(mutex_);
    sessions_[id] = std::move(session);
    return id;
  }

  std::shared_ptr<Session> find(const std::string& id) const {
    std::lock_guard lock(mutex_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) throw Error(ErrorCode::UnknownSession, "no session " + id);
    return it->second;
  }

  json snapshot(const std::string& id) const { return find(id)->snapshot(); }

  Phase advance(const std::string& id) { return find(id)->advance(); }

  json predictions(const std::string& id) const {
    const auto session = find(id);
    const auto preds = session->predictions();
    if (!preds) throw Error(ErrorCode::WrongPhase, "predictions exist from the predicting phase on");
    return {{"session_id", id}, {"predictions", predictions_to_json(*preds)}};
  }

  EvaluationReport submit_ratings(const std::string& id, const nlohmann::json& body) {
    const auto session = find(id);
    const auto [ratings, satisfaction] = parse_ratings(body);
    auto report = session->submit_ratings(ratings, satisfaction);
    std::lock_guard lock(mutex_);
    reports_.push_back(report);
    return report;
  }

  json summary() const {
    std::lock_guard lock(mutex_);
    return summary_to_json(reports_);
  }

  std::shared_ptr<Subscription> subscribe(const std::string& id) { return find(id)->subscribe(); }

  std::vector<std::string> session_ids() const {
    std::lock_guard lock(mutex_);
    std::vector<std::string> ids;
    for (const auto& [id, s] : sessions_) ids.push_back(id);
    return ids;
  }

  void shutdown() {
    std::map<std::string, std::shared_ptr<Session>> sessions;
    {
      std::lock_guard lock(mutex_);
      sessions.swap(sessions_);
    }
    for (auto& [id, s] : sessions) s->stop();
  }

 private:
  ServiceConfig cfg_;
  mutable std::mutex mutex_;
  unsigned next_id_ = 1;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::vector<EvaluationReport> reports_;
};

}  // namespace traitwave::service
