#pragma once

// Row sources feeding a live session: the cohort simulator, a replayed set
// of per-phase captures, or raw ThinkGear bytes arriving on a local TCP
// socket. A source is driven by a single pump thread.

#include <chrono>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include <boost/asio.hpp>
#include <nlohmann/json.hpp>

#include "traitwave/codec.hpp"
#include "traitwave/simulator.hpp"

namespace traitwave::service {

namespace fs = std::filesystem;

class RowSource {
 public:
  virtual ~RowSource() = default;
  /// Called by the pump when a new emotion phase opens.
  virtual void begin_phase(Emotion e) = 0;
  /// Called when an emotion phase closes; may come from any thread.
  virtual void end_phase() {}
  /// Next row of the current phase, waiting at most `wait` for one.
  virtual std::optional<BandPowerRow> next(std::chrono::milliseconds wait) = 0;
  /// True once the current phase can yield no more rows.
  virtual bool exhausted() const = 0;
  /// Sources that hold their data up front are paced by the pump.
  virtual bool paced() const { return true; }
  virtual nlohmann::ordered_json describe() const = 0;
};

/// Rows of an in-memory segment, one per call.
class SegmentCursor {
 public:
  void reset(std::vector<BandPowerRow> rows) {
    rows_ = std::move(rows);
    at_ = 0;
  }
  std::optional<BandPowerRow> next() {
    if (at_ >= rows_.size()) return std::nullopt;
    return rows_[at_++];
  }
  bool done() const { return at_ >= rows_.size(); }

 private:
  std::vector<BandPowerRow> rows_;
  std::size_t at_ = 0;
};

struct SimulatorSourceConfig {
  std::uint64_t seed = 0;
  std::size_t subject = 0;  // index into the simulated cohort
  double effect_scale = sim::kScaleStrong;
  std::uint32_t duration_s = 120;
  std::uint32_t rows_per_second = 1;
};

/// Replays subject `subject` of the cohort the simulator would produce for
/// `seed`, so a live session sees exactly the rows of the exported dataset.
class SimulatorSource : public RowSource {
 public:
  explicit SimulatorSource(const SimulatorSourceConfig& cfg)
      : cfg_(cfg),
        profile_(sim::sample_subject(cfg.subject, sim::default_effects(cfg.effect_scale), sim::PopulationConfig{},
                                     cfg.seed)) {}

  void begin_phase(Emotion e) override {
    const auto seg = sim::generate_segment(profile_, e, cfg_.duration_s, cfg_.rows_per_second,
                                           sim::segment_seed(cfg_.seed, cfg_.subject, e));
    cursor_.reset(seg.rows);
  }
  std::optional<BandPowerRow> next(std::chrono::milliseconds) override { return cursor_.next(); }
  bool exhausted() const override { return cursor_.done(); }
  nlohmann::ordered_json describe() const override {
    return {{"type", "simulator"},          {"seed", cfg_.seed},
            {"subject", cfg_.subject},      {"subject_id", profile_.subject_id},
            {"effect_scale", cfg_.effect_scale}, {"rows_per_second", cfg_.rows_per_second}};
  }
  const sim::SubjectProfile& profile() const { return profile_; }

 private:
  SimulatorSourceConfig cfg_;
  sim::SubjectProfile profile_;
  SegmentCursor cursor_;
};

inline fs::path capture_file_name(Emotion e) { return std::string(name_of(e)) + ".tgr"; }

/// EEG power rows decoded from a capture; other events are skipped.
inline std::vector<BandPowerRow> rows_from_capture(std::span<const std::uint8_t> bytes) {
  const auto decoded = codec::decode_stream(bytes, {});
  std::vector<BandPowerRow> rows;
  for (const auto& ev : decoded.events)
    if (const auto* p = std::get_if<codec::event::EegPower>(&ev)) rows.push_back(p->row);
  return rows;
}

/// Reads <dir>/<emotion>.tgr for each phase.
class ReplaySource : public RowSource {
 public:
  explicit ReplaySource(fs::path dir) : dir_(std::move(dir)) {
    for (auto e : kEmotions)
      if (!fs::exists(dir_ / capture_file_name(e)))
        throw Error(ErrorCode::IoError, "missing capture " + (dir_ / capture_file_name(e)).string());
  }

  void begin_phase(Emotion e) override { cursor_.reset(rows_from_capture(codec::read_capture(dir_ / capture_file_name(e)))); }
  std::optional<BandPowerRow> next(std::chrono::milliseconds) override { return cursor_.next(); }
  bool exhausted() const override { return cursor_.done(); }
  nlohmann::ordered_json describe() const override { return {{"type", "replay"}, {"capture_dir", dir_.string()}}; }

 private:
  fs::path dir_;
  SegmentCursor cursor_;
};

/// Listens on 127.0.0.1:`port` (0 picks a free port) and decodes whatever
/// bytes arrive. Rows that arrive between phases are discarded.
class TcpSource : public RowSource {
 public:
  explicit TcpSource(unsigned short port)
      : acceptor_(io_, boost::asio::ip::tcp::endpoint(boost::asio::ip::make_address("127.0.0.1"), port)) {
    port_ = acceptor_.local_endpoint().port();
    accept();
    thread_ = std::thread([this] { io_.run(); });
  }

  ~TcpSource() override {
    io_.stop();
    if (thread_.joinable()) thread_.join();
  }

  void begin_phase(Emotion) override {
    std::lock_guard lock(mutex_);
    queue_.clear();
    open_ = true;
  }

  void end_phase() override {
    std::lock_guard lock(mutex_);
    queue_.clear();
    open_ = false;
  }

  std::optional<BandPowerRow> next(std::chrono::milliseconds wait) override {
    std::unique_lock lock(mutex_);
    if (!cv_.wait_for(lock, wait, [&] { return !queue_.empty(); })) return std::nullopt;
    auto row = queue_.front();
    queue_.pop_front();
    return row;
  }

  bool exhausted() const override { return false; }
  bool paced() const override { return false; }
  nlohmann::ordered_json describe() const override { return {{"type", "external"}, {"port", port_}}; }
  unsigned short port() const { return port_; }

 private:
  void accept() {
    acceptor_.async_accept([this](boost::system::error_code ec, boost::asio::ip::tcp::socket socket) {
      if (ec) return;
      auto conn = std::make_shared<Connection>(std::move(socket));
      read(conn);
      accept();
    });
  }

  struct Connection {
    explicit Connection(boost::asio::ip::tcp::socket s) : socket(std::move(s)) {}
    boost::asio::ip::tcp::socket socket;
    codec::StreamDecoder decoder;
    std::array<std::uint8_t, 4096> buffer{};
  };

  void read(std::shared_ptr<Connection> conn) {
    conn->socket.async_read_some(boost::asio::buffer(conn->buffer), [this, conn](boost::system::error_code ec,
                                                                                  std::size_t n) {
      if (ec) return;
      const auto result = conn->decoder.feed(std::span<const std::uint8_t>(conn->buffer.data(), n));
      {
        std::lock_guard lock(mutex_);
        if (open_)
          for (const auto& ev : result.events)
            if (const auto* p = std::get_if<codec::event::EegPower>(&ev)) queue_.push_back(p->row);
      }
      cv_.notify_all();
      read(conn);
    });
  }

  boost::asio::io_context io_;
  boost::asio::ip::tcp::acceptor acceptor_;
  unsigned short port_ = 0;
  std::thread thread_;
  std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<BandPowerRow> queue_;
  bool open_ = false;
};

/// Builds a source from its JSON description. `data_dir` anchors relative
/// paths and replays of earlier sessions.
inline std::unique_ptr<RowSource> make_source(const nlohmann::json& j, std::uint32_t duration_s,
                                              const fs::path& data_dir) {
  const auto type = j.value("type", std::string("simulator"));
  if (type == "simulator") {
    SimulatorSourceConfig cfg;
    cfg.seed = j.value("seed", std::uint64_t{0});
    cfg.subject = j.value("subject", std::size_t{0});
    if (j.contains("effect_scale")) {
      const auto& s = j.at("effect_scale");
      std::optional<double> scale = s.is_string() ? sim::parse_effect_scale(s.get<std::string>())
                                                  : std::optional<double>(s.get<double>());
      if (!scale || *scale < 0.0) throw Error(ErrorCode::BadRequest, "bad effect_scale");
      cfg.effect_scale = *scale;
    }
    cfg.rows_per_second = j.value("rows_per_second", std::uint32_t{1});
    if (cfg.rows_per_second == 0) throw Error(ErrorCode::BadRequest, "rows_per_second must be positive");
    cfg.duration_s = duration_s;
    return std::make_unique<SimulatorSource>(cfg);
  }
  if (type == "replay") {
    if (j.contains("session")) return std::make_unique<ReplaySource>(data_dir / "sessions" / j.at("session").get<std::string>());
    if (!j.contains("capture_dir")) throw Error(ErrorCode::BadRequest, "replay source needs session or capture_dir");
    fs::path dir = j.at("capture_dir").get<std::string>();
    return std::make_unique<ReplaySource>(dir.is_relative() ? data_dir / dir : dir);
  }
  if (type == "external") return std::make_unique<TcpSource>(j.value("port", static_cast<unsigned short>(0)));
  throw Error(ErrorCode::BadRequest, "unknown source type " + type);
}

}  // namespace traitwave::service
