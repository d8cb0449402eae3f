// Acceptance run: one PASS/FAIL line per headline requirement. Exits non-zero
// if any line fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <set>
#include <string>

#include "support/fixtures.hpp"
#include "support/oracles.hpp"
#include "traitwave/deep/train.hpp"
#include "traitwave/service/server.hpp"

using namespace traitwave;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;

  /// Records a failed check; keeps the first explanation.
  void require(bool ok, const std::string& why) {
    if (!ok && pass) detail = why;
    pass = pass && ok;
  }
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---------------------------------------------------------------------------

Verdict codec_criterion() {
  using namespace codec;
  Verdict v;
  const auto t0 = Clock::now();
  Rng rng(1001);
  auto decode_all = [](const Bytes& b) {
    auto r = decode_stream(b, {});
    for (const auto& e : finish(r.state)) r.errors.push_back(e);
    return r;
  };

  std::size_t round_trips = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto rows = tw_test::random_rows(rng);
    const auto r = decode_all(encode_packet(rows));
    round_trips += (r.errors.empty() && rows_of(r.events) == rows) ? 1 : 0;
  }
  v.require(round_trips == 10000, std::to_string(10000 - round_trips) + " round trips differ");

  // A corruption is rejected when nothing decodes from the damaged packet.
  std::size_t rejected = 0;
  for (int i = 0; i < 10000; ++i) {
    auto packet = encode_packet(tw_test::random_rows(rng));
    const auto bit = rng.below(packet.size() * 8);
    packet[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    rejected += decode_all(packet).events.empty() ? 1 : 0;
  }
  v.require(rejected == 10000, std::to_string(10000 - rejected) + " single-bit corruptions accepted");

  std::size_t recovered = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto rows = tw_test::random_rows(rng);
    const auto packet = encode_packet(rows);
    auto stream = tw_test::random_bytes(rng, 512);
    const auto at = static_cast<std::ptrdiff_t>(rng.below(stream.size() + 1));
    stream.insert(stream.begin() + at, packet.begin(), packet.end());
    const auto got = rows_of(decode_all(stream).events);
    recovered += std::search(got.begin(), got.end(), rows.begin(), rows.end()) != got.end() ? 1 : 0;
  }
  v.require(recovered == 1000, std::to_string(1000 - recovered) + " embedded packets lost");
  const double secs = seconds_since(t0);
  v.require(secs < 10.0, "took " + fmt("%.2f s", secs));
  if (v.pass) v.detail = "10000 round trips, 10000 corruptions rejected, 1000/1000 recovered in " + fmt("%.2f s", secs);
  return v;
}

Verdict features_criterion() {
  Verdict v;
  Rng rng(2002);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    Segment seg{"x", Emotion::Happy, {}};
    const std::size_t n = 1 + rng.below(300);
    const std::uint64_t cap = rng.bernoulli(0.5) ? kMaxBandValue : 1000;
    for (std::size_t k = 0; k < n; ++k) {
      BandPowerRow r;
      r.timestamp_ms = k * 1000;
      for (auto& b : r.bands) b = static_cast<std::uint32_t>(rng.below(cap + 1));
      seg.rows.push_back(r);
    }
    const auto fv = features::extract_features(seg);
    for (std::size_t b = 0; b < kNumBands; ++b) {
      std::vector<long double> xs;
      for (const auto& r : seg.rows) xs.push_back(r.bands[b]);
      const auto m = tw_test::oracle_moments(xs);
      worst = std::max({worst, std::abs(fv.values[b] - static_cast<double>(m.mean)),
                        std::abs(fv.values[kNumBands + b] - static_cast<double>(m.sd))});
    }
  }
  v.require(worst <= 1e-9, "moment error " + fmt("%.3g", worst));

  double worst_sum = 0.0;
  for (int i = 0; i < 10000; ++i) {
    BandPowerRow r;
    for (auto& b : r.bands) b = static_cast<std::uint32_t>(rng.below(std::uint64_t{kMaxBandValue} + 1));
    r.bands[rng.below(kNumBands)] |= 1;
    long double sum = 0;
    for (double p : features::relative_band_power(r)) sum += p;
    worst_sum = std::max(worst_sum, static_cast<double>(std::abs(sum - 1.0L)));
  }
  v.require(worst_sum <= 1e-12, "relative sum error " + fmt("%.3g", worst_sum));

  std::size_t chains = 0;
  for (int i = 0; i < 2000; ++i) {
    std::vector<double> xs(1 + rng.below(60));
    for (auto& x : xs) x = rng.bernoulli(0.1) ? rng.normal(0, 50) : rng.normal(0, 1);
    const auto s = features::boxplot_stats(xs);
    const double iqr = s.q3 - s.q1;
    bool ok = s.min <= s.whisker_low && s.whisker_low <= s.q1 && s.q1 <= s.median && s.median <= s.q3 &&
              s.q3 <= s.whisker_high && s.whisker_high <= s.max;
    for (double o : s.outliers) ok = ok && (o < s.q1 - 1.5 * iqr || o > s.q3 + 1.5 * iqr);
    chains += ok ? 1 : 0;
  }
  v.require(chains == 2000, std::to_string(2000 - chains) + " box plots break the ordering chain");
  if (v.pass)
    v.detail = "max moment error " + fmt("%.3g", worst) + ", max relative-sum error " + fmt("%.3g", worst_sum) +
               ", 2000 box plots ordered";
  return v;
}

Verdict dataset_criterion() {
  Verdict v;
  dataset::SimulationConfig cfg;
  cfg.subjects = 80;
  cfg.duration_s = 2;
  const auto records = dataset::simulate_records(cfg, 7);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto s = dataset::split_80_20(records, seed);
    const auto [train, test] = dataset::partition(records, s);
    v.require(s.train.size() == 64 && s.test.size() == 16, "subject counts " + std::to_string(s.train.size()) + "/" +
                                                                std::to_string(s.test.size()));
    v.require(train.size() * kNumEmotions == 256 && test.size() * kNumEmotions == 64, "segment counts differ");
    std::set<std::string> both(s.train.begin(), s.train.end());
    both.insert(s.test.begin(), s.test.end());
    v.require(both.size() == 80, "split sides overlap for seed " + std::to_string(seed));
    auto shuffled = records;
    std::reverse(shuffled.begin(), shuffled.end());
    v.require(dataset::split_80_20(shuffled, seed) == s, "split not deterministic for seed " + std::to_string(seed));
  }
  if (v.pass) v.detail = "64/16 subjects, 256/64 segments, disjoint and deterministic for 100 seeds";
  return v;
}

/// Held-out per-trait accuracy of the argmax selector at one effect scale.
std::array<classical::TraitScore, kNumTraits> heldout_scores(double scale, std::uint64_t seed, std::size_t* n_models) {
  dataset::SimulationConfig sim;
  sim.effects = sim::default_effects(scale);
  const auto records = dataset::simulate_records(sim, seed);
  const auto split = dataset::split_80_20(records, seed);
  classical::GridConfig cfg;
  cfg.seed = seed;
  const auto models = classical::train_grid(records, split, cfg);
  *n_models = models.size();
  const auto sel = classical::select_per_trait(models);
  return classical::score_selector(sel, dataset::partition(records, split).second);
}

Verdict grid_criterion() {
  Verdict v;
  const auto t0 = Clock::now();
  std::size_t n_strong = 0, n_null = 0;
  const auto strong = heldout_scores(sim::kScaleStrong, 7, &n_strong);
  const auto null = heldout_scores(sim::kScaleNone, 7, &n_null);
  v.require(n_strong == 56 && n_null == 56, "model count " + std::to_string(n_strong));
  double worst = 1.0, null_mean = 0.0;
  std::string worst_trait;
  for (std::size_t t = 0; t < kNumTraits; ++t) {
    if (strong[t].accuracy() < worst) {
      worst = strong[t].accuracy();
      worst_trait = std::string(kTraitNames[t]);
    }
    null_mean += null[t].accuracy() / kNumTraits;
  }
  v.require(worst >= 0.85, "strong-scale " + worst_trait + " held-out accuracy " + fmt("%.3f", worst));
  v.require(null_mean >= 0.35 && null_mean <= 0.65, "null-scale mean accuracy " + fmt("%.3f", null_mean));
  const double secs = seconds_since(t0);
  v.require(secs < 300.0, "took " + fmt("%.1f s", secs));
  if (v.pass)
    v.detail = "56 models; strong min held-out " + fmt("%.3f", worst) + "; null mean " + fmt("%.3f", null_mean) +
               "; " + fmt("%.1f s", secs) + " for both grids";
  return v;
}

Verdict oracle_criterion() {
  Verdict v;
  Rng rng(4004);
  const double l2s[] = {0.01, 0.1, 1.0, 10.0};
  double worst_nb = 0.0, worst_lr = 0.0;
  for (int i = 0; i < 50; ++i) {
    const auto inst = tw_test::random_instance(rng);
    const auto X = classical::Matrix::from_rows(inst.X);
    const auto nb = classical::NaiveBayesModel::fit(X, inst.y);
    const auto lr = classical::LogisticModel::fit(X, inst.y, l2s[i % 4]);
    const auto oracle = tw_test::oracle_logistic(inst, l2s[i % 4]);
    for (const auto& q : inst.queries) {
      worst_nb = std::max(worst_nb, std::abs(nb.predict(q) - tw_test::oracle_naive_bayes(inst, q)));
      worst_lr = std::max(worst_lr, std::abs(lr.predict(q) - oracle.predict(q)));
    }
  }
  v.require(worst_nb <= 1e-6, "naive Bayes deviation " + fmt("%.3g", worst_nb));
  v.require(worst_lr <= 1e-6, "logistic deviation " + fmt("%.3g", worst_lr));
  if (v.pass) v.detail = "50 instances; max deviation NB " + fmt("%.3g", worst_nb) + ", LR " + fmt("%.3g", worst_lr);
  return v;
}

Verdict deep_criterion() {
  using namespace deep;
  Verdict v;
  double worst_grad = 0.0;
  for (auto kind : {ModelKind::Lstm, ModelKind::BiLstm}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto net = Network::initialized(Shape{kind, kNumBands, 12}, seed);
      Rng rng(seed + 500);
      const auto seq = random_sequence(rng, 15, kNumBands);
      worst_grad = std::max(worst_grad, grad_check(net, seq, static_cast<int>(seed % 2), 300, seed).max_relative_error);
    }
  }
  v.require(worst_grad <= 1e-4, "gradient relative error " + fmt("%.3g", worst_grad));

  Rng rng(6006);
  double worst_softmax = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const std::array<double, kNumClasses> logits{rng.normal(0, 30), rng.normal(0, 30)};
    const auto s = softmax_cross_entropy(logits, static_cast<int>(i % 2));
    long double sum = 0;
    for (double p : s.prob) sum += p;
    worst_softmax = std::max(worst_softmax, static_cast<double>(std::abs(sum - 1.0L)));
  }
  v.require(worst_softmax <= 1e-12, "softmax sum error " + fmt("%.3g", worst_softmax));

  const auto task = toy_task(64, 20, 7);
  double worst_toy = 1.0;
  for (auto kind : {ModelKind::Lstm, ModelKind::BiLstm}) {
    TrainConfig cfg;  // 50 hidden, Adam lr 0.001, batch 32, dropout 0.2, 50 epochs
    cfg.seed = 1;
    const auto out = train(kind, task.xs, task.ys, cfg);
    worst_toy = std::min(worst_toy, accuracy_of(out.network, task.xs, task.ys));
  }
  v.require(worst_toy >= 0.95, "toy task training accuracy " + fmt("%.3f", worst_toy));
  if (v.pass)
    v.detail = "max gradient error " + fmt("%.3g", worst_grad) + ", softmax sum error " + fmt("%.3g", worst_softmax) +
               ", toy accuracy " + fmt("%.3f", worst_toy);
  return v;
}

Verdict selection_criterion() {
  Verdict v;
  Rng rng(7007);
  auto make_models = [](const std::array<std::array<double, kNumEmotions>, kNumTraits>& acc) {
    std::vector<classical::TrainedModel> models;
    for (std::size_t t = 0; t < kNumTraits; ++t)
      for (std::size_t e = 0; e < kNumEmotions; ++e) {
        classical::TrainedModel m;
        m.trait = trait_at(t);
        m.emotion = emotion_at(e);
        m.training_accuracy = acc[t][e];
        models.push_back(m);
      }
    return models;
  };
  const std::vector<std::function<double(double)>> transforms{
      [](double a) { return a * a; }, [](double a) { return std::exp(3 * a) - 7; },
      [](double a) { return std::sqrt(a) / 10; }, [](double a) { return std::atan(a - 0.5); }};
  for (int trial = 0; trial < 500; ++trial) {
    std::array<std::array<double, kNumEmotions>, kNumTraits> acc{};
    for (auto& row : acc)
      for (auto& a : row) a = static_cast<double>(rng.below(11)) / 10.0;  // coarse values force ties
    const auto sel = classical::select_per_trait(make_models(acc));
    for (std::size_t t = 0; t < kNumTraits; ++t) {
      // Expected: first emotion holding the maximum.
      std::size_t best = 0;
      for (std::size_t e = 1; e < kNumEmotions; ++e)
        if (acc[t][e] > acc[t][best]) best = e;
      v.require(sel.choices[t].emotion == emotion_at(best), "argmax or tie-break violated");
    }
    for (const auto& f : transforms) {
      auto moved = acc;
      for (auto& row : moved)
        for (auto& a : row) a = f(a);
      const auto sel2 = classical::select_per_trait(make_models(moved));
      for (std::size_t t = 0; t < kNumTraits; ++t)
        v.require(sel2.choices[t].emotion == sel.choices[t].emotion, "choice changed under a monotone transform");
    }
  }
  if (v.pass) v.detail = "500 random grids with ties, 4 increasing transforms each";
  return v;
}

Verdict reporting_criterion() {
  Verdict v;
  const std::vector<double> scores{3.5, 4, 4, 5, 5, 5, 4, 5, 4, 4, 2, 4, 4, 4, 4, 4, 4, 3.5, 4.5, 5};
  const double mean = service::mean_satisfaction(scores);
  v.require(mean == 4.125, "mean satisfaction " + fmt("%.17g", mean));
  std::array<classical::TraitPrediction, kNumTraits> preds{};
  std::size_t exact = 0;
  for (unsigned mask = 0; mask < (1u << kNumTraits); ++mask) {
    std::vector<int> ratings(kNumTraits);
    int ones = 0;
    for (std::size_t t = 0; t < kNumTraits; ++t) ones += ratings[t] = static_cast<int>((mask >> t) & 1);
    exact += service::make_report("s", preds, ratings, 3).accuracy == static_cast<double>(ones) / 14.0 ? 1 : 0;
  }
  v.require(exact == (1u << kNumTraits), std::to_string((1u << kNumTraits) - exact) + " rating vectors inexact");
  if (v.pass) v.detail = "mean 4.125 exactly; 16384/16384 rating vectors give ones/14";
  return v;
}

Verdict end_to_end_criterion() {
  Verdict v;
  const std::uint64_t seed = 7;
  const auto dir = tw_test::scratch_dir("acceptance_e2e");
  const auto fx = tw_test::build_selector(dir / "model", seed, 40, 30);
  service::SessionManager mgr({dir});
  auto drive = [&](const nlohmann::json& source) {
    const auto id = mgr.create({{"selector", fx.selector.string()},
                                {"phase_duration_s", fx.duration_s},
                                {"time_scale", 0},
                                {"source", source}});
    mgr.advance(id);
    for (int i = 0; i < 4; ++i) {
      if (!mgr.find(id)->wait_phase_complete(std::chrono::seconds(30)))
        throw Error(ErrorCode::IoError, "phase did not complete");
      mgr.advance(id);
    }
    return std::pair{id, mgr.predictions(id)["predictions"].dump()};
  };
  std::size_t same = 0;
  const std::size_t subjects = 10;
  for (std::size_t s = 0; s < subjects; ++s) {
    const auto [live_id, live] = drive({{"type", "simulator"}, {"seed", seed}, {"subject", s}});
    const auto [replay_id, replay] = drive({{"type", "replay"}, {"session", live_id}});
    same += live == replay ? 1 : 0;
  }
  v.require(same == subjects, std::to_string(subjects - same) + " replayed sessions predicted differently");
  if (v.pass) v.detail = "10/10 replayed sessions byte-identical to their live sessions";
  return v;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
      {"codec round trip, corruption and resync", codec_criterion},
      {"features against oracle", features_criterion},
      {"dataset 80/20 split", dataset_criterion},
      {"classical grid held-out accuracy", grid_criterion},
      {"classical oracles", oracle_criterion},
      {"deep gradients, softmax and toy task", deep_criterion},
      {"selection rule", selection_criterion},
      {"reporting arithmetic", reporting_criterion},
      {"end-to-end replay determinism", end_to_end_criterion},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("threw ") + e.what()};
    }
    failures += v.pass ? 0 : 1;
    std::printf("%s  %s: %s\n", v.pass ? "PASS" : "FAIL", name, v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
