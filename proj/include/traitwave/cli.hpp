#pragma once

// Command-line front end. Every subcommand reads and writes under one data
// directory (--data-dir, or $TRAITWAVE_DATA_DIR):
//
//   dataset/labels.jsonl, dataset/segments/   simulate
//   dataset/captures/<subject>_<emotion>.tgr  simulate --captures
//   features.csv                              featurize
//   split.json, models/, accuracy_grid.csv    train
//   deep/, deep_accuracy.csv                  train --deep
//   selector.json                             select
//   sessions/                                 serve
//
// Machine-readable results go to stdout or files; logs go to stderr.
// Exit codes: 0 success, 1 data error, 2 usage error.

#include <csignal>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "traitwave/classical/grid.hpp"
#include "traitwave/deep/train.hpp"
#include "traitwave/service/server.hpp"

namespace traitwave::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitData = 1;
inline constexpr int kExitUsage = 2;

struct CliConfig {
  std::uint64_t seed = 7;
  std::string data_dir = "traitwave-data";
  bool verbose = false;

  // simulate
  std::size_t subjects = 80;
  std::uint32_t duration_s = 120;
  std::uint32_t rows_per_second = 1;
  std::string effect_scale = "strong";
  bool captures = false;

  // shared inputs and outputs
  std::string dataset;   // defaults to <data-dir>/dataset
  std::string models;    // defaults to <data-dir>/models
  std::string selector;  // defaults to <data-dir>/selector.json
  std::string out;       // subcommand-specific default
  bool relative = false;
  unsigned threads = 0;

  // decode
  std::string capture;

  // train
  bool standardize = false;
  std::size_t max_evaluations = 0;
  std::size_t folds = 5;
  std::string deep = "none";
  int epochs = 50;
  int hidden = deep::kDefaultHidden;

  // select
  std::string mode = "argmax";

  // predict
  std::string subject;
  std::string capture_dir;

  // serve
  std::string address = "127.0.0.1";
  unsigned short port = 8080;
  std::size_t subscriber_capacity = 1024;
};

/// Builds the parser; `cfg` receives the parsed values.
inline std::unique_ptr<CLI::App> build_app(CliConfig& cfg) {
  auto app = std::make_unique<CLI::App>("EEG-based personal trait prediction toolkit", "traitwave");
  app->require_subcommand(1, 1);
  app->fallthrough();  // global flags may follow the subcommand
  app->option_defaults()->always_capture_default();
  app->add_option("--seed", cfg.seed, "Master seed for simulation, splitting and training");
  app->add_option("--data-dir", cfg.data_dir, "Working directory for datasets, models and sessions")
      ->envname("TRAITWAVE_DATA_DIR");
  app->add_flag("-v,--verbose", cfg.verbose, "Log progress to stderr");

  auto* sim = app->add_subcommand("simulate", "Simulate a cohort and write labels and segments");
  sim->add_option("--subjects", cfg.subjects, "Number of subjects")->check(CLI::Range(1, 1000000));
  sim->add_option("--duration", cfg.duration_s, "Seconds per emotion segment")->check(CLI::Range(1, 86400));
  sim->add_option("--rows-per-second", cfg.rows_per_second, "Band-power rows per second")->check(CLI::Range(1, 1000));
  sim->add_option("--effect-scale", cfg.effect_scale,
                  "Trait effect strength: none, weak, moderate, strong or a non-negative number");
  sim->add_option("--out", cfg.dataset, "Dataset directory (default <data-dir>/dataset)");
  sim->add_flag("--captures", cfg.captures, "Also write each segment as a ThinkGear capture (.tgr)");

  auto* dec = app->add_subcommand("decode", "Decode a ThinkGear capture (.tgr) into row CSV");
  dec->add_option("capture", cfg.capture, "Capture file")->required();
  dec->add_option("--out", cfg.out, "Output CSV (default stdout)");

  auto* feat = app->add_subcommand("featurize", "Write the per-segment feature matrix as CSV");
  feat->add_option("--dataset", cfg.dataset, "Dataset directory (default <data-dir>/dataset)");
  feat->add_option("--out", cfg.out, "Output CSV, - for stdout (default <data-dir>/features.csv)");
  feat->add_flag("--relative", cfg.relative, "Use relative band powers instead of raw magnitudes");

  auto* stats = app->add_subcommand("stats", "Box-plot statistics of band means per emotion as JSON");
  stats->add_option("--dataset", cfg.dataset, "Dataset directory (default <data-dir>/dataset)");
  stats->add_option("--out", cfg.out, "Output JSON (default stdout)");
  stats->add_flag("--relative", cfg.relative, "Use relative band powers instead of raw magnitudes");

  auto* train = app->add_subcommand("train", "Split the cohort and train the 56-model grid");
  train->add_option("--dataset", cfg.dataset, "Dataset directory (default <data-dir>/dataset)");
  train->add_option("--models", cfg.models, "Model bundle directory (default <data-dir>/models)");
  train->add_option("--threads", cfg.threads, "Worker threads, 0 for one per core");
  train->add_option("--folds", cfg.folds, "Cross-validation folds")->check(CLI::Range(2, 100));
  train->add_option("--max-evaluations", cfg.max_evaluations,
                    "Evaluate a seeded subset of this many specs per cell, 0 for the full grid");
  train->add_flag("--standardize", cfg.standardize, "Z-score features using training-side statistics");
  train->add_option("--deep", cfg.deep, "Also train recurrent models: none, lstm, bilstm or both")
      ->check(CLI::IsMember({"none", "lstm", "bilstm", "both"}));
  train->add_option("--epochs", cfg.epochs, "Recurrent training epochs")->check(CLI::Range(1, 100000));
  train->add_option("--hidden", cfg.hidden, "Recurrent hidden units")->check(CLI::Range(1, 4096));

  auto* sel = app->add_subcommand("select", "Pick one emotion model per trait and write the selector");
  sel->add_option("--models", cfg.models, "Model bundle directory (default <data-dir>/models)");
  sel->add_option("--out", cfg.selector, "Selector file (default <data-dir>/selector.json)");
  sel->add_option("--mode", cfg.mode, "argmax (highest training accuracy) or vote (majority of four)")
      ->check(CLI::IsMember({"argmax", "vote"}));

  auto* pred = app->add_subcommand("predict", "Predict the 14 traits for one subject");
  pred->add_option("--selector", cfg.selector, "Selector file (default <data-dir>/selector.json)");
  pred->add_option("--dataset", cfg.dataset, "Dataset directory (default <data-dir>/dataset)");
  auto* subj = pred->add_option("--subject", cfg.subject, "Subject id in the dataset");
  pred->add_option("--captures", cfg.capture_dir, "Directory with happy/sad/neutral/meditation .tgr captures")
      ->excludes(subj);
  pred->add_option("--out", cfg.out, "Output JSON (default stdout)");

  auto* eval = app->add_subcommand("evaluate", "Per-trait accuracy of the selector on the held-out subjects");
  eval->add_option("--selector", cfg.selector, "Selector file (default <data-dir>/selector.json)");
  eval->add_option("--dataset", cfg.dataset, "Dataset directory (default <data-dir>/dataset)");
  eval->add_option("--out", cfg.out, "Output CSV (default stdout)");

  auto* serve = app->add_subcommand("serve", "Run the HTTP and WebSocket session service");
  serve->add_option("--address", cfg.address, "Listen address");
  serve->add_option("--port", cfg.port, "Listen port, 0 for any free port");
  serve->add_option("--subscriber-capacity", cfg.subscriber_capacity,
                    "Messages a stream subscriber may fall behind before it is dropped")
      ->check(CLI::Range(1, 1000000));
  return app;
}

namespace detail {

struct Context {
  CliConfig& cfg;
  std::ostream& out;
  std::ostream& err;

  fs::path data_dir() const { return cfg.data_dir; }
  fs::path dataset() const { return cfg.dataset.empty() ? data_dir() / "dataset" : fs::path(cfg.dataset); }
  fs::path models() const { return cfg.models.empty() ? data_dir() / "models" : fs::path(cfg.models); }
  fs::path selector() const { return cfg.selector.empty() ? data_dir() / "selector.json" : fs::path(cfg.selector); }
  void log(const std::string& msg) const {
    if (cfg.verbose) err << msg << '\n';
  }

  /// Writes `text` to `path`, or to stdout when `path` is empty or "-".
  void emit(const std::string& path, const std::string& text) const {
    if (path.empty() || path == "-") {
      out << text;
    } else {
      const fs::path p(path);
      if (p.has_parent_path()) fs::create_directories(p.parent_path());
      dataset::write_text(p, text);
      log("wrote " + p.string());
    }
  }
};

inline int cmd_simulate(const Context& c) {
  const auto scale = sim::parse_effect_scale(c.cfg.effect_scale);
  if (!scale) throw CLI::ValidationError("--effect-scale", "unknown effect scale " + c.cfg.effect_scale);
  dataset::SimulationConfig sc;
  sc.subjects = c.cfg.subjects;
  sc.duration_s = c.cfg.duration_s;
  sc.rows_per_second = c.cfg.rows_per_second;
  sc.effects = sim::default_effects(*scale);
  const auto records = dataset::simulate_records(sc, c.cfg.seed);
  const auto dir = c.dataset();
  dataset::export_records(records, dir);
  if (c.cfg.captures) {
    fs::create_directories(dir / "captures");
    for (const auto& r : records)
      for (const auto& seg : r.segments) {
        auto name = dataset::segment_file_name(r.subject_id, seg.emotion).replace_extension(".tgr");
        codec::write_capture(dir / "captures" / name, sim::segment_to_wire(seg));
      }
  }
  c.log("simulated " + std::to_string(records.size()) + " subjects into " + dir.string());
  return kExitOk;
}

inline int cmd_decode(const Context& c) {
  const auto bytes = codec::read_capture(c.cfg.capture);
  auto result = codec::decode_stream(bytes, {});
  auto errors = result.errors;
  for (const auto& e : codec::finish(result.state)) errors.push_back(e);

  std::ostringstream csv;
  csv << "index,event,value";
  for (auto b : kBandNames) csv << ',' << b;
  csv << '\n';
  std::size_t index = 0;
  for (const auto& ev : result.events) {
    csv << index++ << ',';
    std::visit(
        [&](const auto& e) {
          using T = std::decay_t<decltype(e)>;
          if constexpr (std::is_same_v<T, codec::event::EegPower>) {
            csv << "eeg_power,";
            for (auto v : e.row.bands) csv << ',' << v;
          } else {
            if constexpr (std::is_same_v<T, codec::event::PoorSignal>) csv << "poor_signal," << int(e.level);
            else if constexpr (std::is_same_v<T, codec::event::Attention>) csv << "attention," << int(e.value);
            else if constexpr (std::is_same_v<T, codec::event::Meditation>) csv << "meditation," << int(e.value);
            else if constexpr (std::is_same_v<T, codec::event::RawWave>) csv << "raw_wave," << e.sample;
            else csv << "unknown_0x" << std::hex << int(e.row.code) << std::dec << ',';
            for (std::size_t b = 0; b < kNumBands; ++b) csv << ',';
          }
        },
        ev);
    csv << '\n';
  }
  c.emit(c.cfg.out, csv.str());
  for (const auto& e : errors)
    c.err << "traitwave decode: " << codec::name_of(e.kind) << " frame at byte offset " << e.offset << '\n';
  c.log("decoded " + std::to_string(result.events.size()) + " events");
  return errors.empty() ? kExitOk : kExitData;
}

inline int cmd_featurize(const Context& c) {
  const auto records = dataset::ingest(c.dataset());
  std::vector<features::FeatureVector> rows;
  for (const auto& r : records)
    for (auto e : kEmotions) rows.push_back(features::extract_features(r.segment(e), c.cfg.relative));
  std::ostringstream csv;
  features::write_feature_csv(csv, rows);
  c.emit(c.cfg.out.empty() ? (c.data_dir() / "features.csv").string() : c.cfg.out, csv.str());
  return kExitOk;
}

inline int cmd_stats(const Context& c) {
  const auto records = dataset::ingest(c.dataset());
  const auto grid = features::band_emotion_report(records, c.cfg.relative);
  c.emit(c.cfg.out, features::report_to_json(grid, c.cfg.relative).dump(2) + "\n");
  return kExitOk;
}

inline int cmd_train(const Context& c) {
  const auto records = dataset::ingest(c.dataset());
  const auto split = dataset::split_80_20(records, c.cfg.seed);
  fs::create_directories(c.data_dir());
  dataset::write_text(c.data_dir() / "split.json", dataset::split_to_json(split));
  c.log("split " + std::to_string(split.train.size()) + " train / " + std::to_string(split.test.size()) +
        " test subjects");

  classical::GridConfig gc;
  gc.seed = c.cfg.seed;
  gc.threads = c.cfg.threads;
  gc.standardize = c.cfg.standardize;
  gc.budget.folds = c.cfg.folds;
  if (c.cfg.max_evaluations > 0) gc.budget.max_evaluations = c.cfg.max_evaluations;
  const auto models = classical::train_grid(records, split, gc);
  classical::save_models(models, c.models());
  std::ostringstream grid;
  classical::write_accuracy_grid(grid, models);
  dataset::write_text(c.data_dir() / "accuracy_grid.csv", grid.str());
  c.out << grid.str();
  c.log("trained " + std::to_string(models.size()) + " models into " + c.models().string());

  if (c.cfg.deep != "none") {
    deep::DeepGridConfig dc;
    dc.train.seed = c.cfg.seed;
    dc.train.epochs = c.cfg.epochs;
    dc.train.hidden = c.cfg.hidden;
    dc.threads = c.cfg.threads;
    if (c.cfg.deep == "lstm") dc.kinds = {deep::ModelKind::Lstm};
    if (c.cfg.deep == "bilstm") dc.kinds = {deep::ModelKind::BiLstm};
    const auto nets = deep::train_deep_grid(records, split, dc);
    const auto dir = c.data_dir() / "deep";
    fs::create_directories(dir);
    for (const auto& m : nets) {
      dataset::write_text(dir / deep::deep_bundle_file_name(m), deep::deep_bundle_to_json(m).dump() + "\n");
      std::ostringstream curve;
      deep::write_loss_curve(curve, m.curve);
      dataset::write_text(dir / deep::deep_bundle_file_name(m).replace_extension(".loss.csv"), curve.str());
    }
    std::ostringstream acc;
    deep::write_deep_accuracy(acc, nets);
    dataset::write_text(c.data_dir() / "deep_accuracy.csv", acc.str());
    c.log("trained " + std::to_string(nets.size()) + " recurrent models into " + dir.string());
  }
  return kExitOk;
}

inline int cmd_select(const Context& c) {
  if (!fs::is_directory(c.models())) throw Error(ErrorCode::IoError, "no model directory " + c.models().string());
  const auto models = classical::load_models(c.models());
  const auto mode = c.cfg.mode == "vote" ? classical::SelectionMode::Vote : classical::SelectionMode::Argmax;
  const auto sel = classical::select_per_trait(models, mode);
  const auto path = c.selector();
  const auto base = path.has_parent_path() ? path.parent_path() : fs::path(".");
  fs::create_directories(base);
  const auto ref = fs::relative(fs::absolute(c.models()), fs::absolute(base)).generic_string();
  dataset::write_text(path, classical::selector_to_json(sel, ref));
  c.log("wrote " + path.string());
  return kExitOk;
}

inline classical::EmotionFeatures features_from_captures(const fs::path& dir) {
  classical::EmotionFeatures f;
  for (auto e : kEmotions) {
    Segment seg{dir.filename().string(), e, {}};
    const auto rows = service::rows_from_capture(codec::read_capture(dir / service::capture_file_name(e)));
    for (std::size_t k = 0; k < rows.size(); ++k) seg.rows.push_back({static_cast<std::uint64_t>(k) * 1000, rows[k].bands});
    f[index_of(e)] = features::extract_features(seg).values;
  }
  return f;
}

inline int cmd_predict(const Context& c) {
  if (c.cfg.subject.empty() && c.cfg.capture_dir.empty())
    throw CLI::ValidationError("--subject", "give --subject or --captures");
  const auto sel = classical::load_selector(c.selector());
  nlohmann::ordered_json j;
  classical::EmotionFeatures f;
  if (!c.cfg.subject.empty()) {
    const auto records = dataset::ingest(c.dataset());
    const auto it = std::find_if(records.begin(), records.end(),
                                 [&](const auto& r) { return r.subject_id == c.cfg.subject; });
    if (it == records.end()) throw Error(ErrorCode::LabelError, "no subject " + c.cfg.subject + " in dataset");
    j["subject_id"] = c.cfg.subject;
    f = classical::emotion_features(*it);
  } else {
    j["captures"] = c.cfg.capture_dir;
    f = features_from_captures(c.cfg.capture_dir);
  }
  j["predictions"] = service::predictions_to_json(classical::predict_traits(sel, f));
  c.emit(c.cfg.out, j.dump(2) + "\n");
  return kExitOk;
}

inline int cmd_evaluate(const Context& c) {
  const auto sel = classical::load_selector(c.selector());
  const auto records = dataset::ingest(c.dataset());
  const auto split = dataset::split_from_json(dataset::read_text(c.data_dir() / "split.json"));
  const auto test = dataset::partition(records, split).second;
  const auto scores = classical::score_selector(sel, test);
  std::ostringstream csv;
  csv << "trait,emotion,correct,total,accuracy\n";
  char buf[32];
  double sum = 0.0;
  for (std::size_t t = 0; t < kNumTraits; ++t) {
    std::snprintf(buf, sizeof buf, "%.6f", scores[t].accuracy());
    csv << kTraitNames[t] << ',' << traitwave::name_of(sel.choices[t].emotion) << ',' << scores[t].correct << ','
        << scores[t].total << ',' << buf << '\n';
    sum += scores[t].accuracy();
  }
  std::snprintf(buf, sizeof buf, "%.6f", sum / static_cast<double>(kNumTraits));
  csv << "mean,,,," << buf << '\n';
  c.emit(c.cfg.out, csv.str());
  return kExitOk;
}

inline int cmd_serve(const Context& c) {
  service::SessionManager mgr({c.data_dir(), c.cfg.subscriber_capacity});
  service::Server server(mgr, c.cfg.address, c.cfg.port);
  server.start();
  c.out << nlohmann::json{{"address", c.cfg.address}, {"port", server.port()}}.dump() << std::endl;
  c.err << "traitwave serve: listening on " << c.cfg.address << ':' << server.port() << '\n';
  boost::asio::io_context io;
  boost::asio::signal_set signals(io, SIGINT, SIGTERM);
  signals.async_wait([](const boost::system::error_code&, int) {});
  io.run();
  c.err << "traitwave serve: shutting down\n";
  server.stop();
  mgr.shutdown();
  return kExitOk;
}

}  // namespace detail

/// Parses `args` (without the program name) and runs one subcommand.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CliConfig cfg;
  auto app = build_app(cfg);
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app->parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app->help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app->help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "traitwave: " << e.what() << '\n';
    const auto subs = app->get_subcommands();
    err << "run 'traitwave " << (subs.empty() ? std::string() : subs.front()->get_name() + " ") << "--help' for usage\n";
    return kExitUsage;
  }

  const detail::Context c{cfg, out, err};
  const std::string name = app->get_subcommands().front()->get_name();
  try {
    if (name == "simulate") return detail::cmd_simulate(c);
    if (name == "decode") return detail::cmd_decode(c);
    if (name == "featurize") return detail::cmd_featurize(c);
    if (name == "stats") return detail::cmd_stats(c);
    if (name == "train") return detail::cmd_train(c);
    if (name == "select") return detail::cmd_select(c);
    if (name == "predict") return detail::cmd_predict(c);
    if (name == "evaluate") return detail::cmd_evaluate(c);
    return detail::cmd_serve(c);
  } catch (const CLI::ParseError& e) {
    err << "traitwave " << name << ": " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "traitwave " << name << ": " << e.what() << '\n';
    return kExitData;
  }
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return run(std::vector<std::string>(argv + 1, argv + argc), out, err);
}

}  // namespace traitwave::cli
