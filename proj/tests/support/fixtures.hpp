#pragma once

// Small trained artifacts shared by the service, CLI and integration tests.

#include <filesystem>

#include "support/generators.hpp"
#include "traitwave/classical/grid.hpp"

namespace tw_test {

namespace fs = std::filesystem;

struct SelectorFixture {
  fs::path selector;
  std::uint64_t seed = 0;
  std::uint32_t duration_s = 0;
};

/// Trains a cheap three-spec grid on a simulated cohort and writes
/// <dir>/models plus <dir>/selector.json.
inline SelectorFixture build_selector(const fs::path& dir, std::uint64_t seed, std::size_t subjects = 20,
                                      std::uint32_t duration_s = 6) {
  using namespace traitwave;
  dataset::SimulationConfig sim;
  sim.subjects = subjects;
  sim.duration_s = duration_s;
  const auto records = dataset::simulate_records(sim, seed);
  classical::GridConfig cfg;
  cfg.seed = seed;
  cfg.threads = 1;
  cfg.budget.grid = {{classical::Family::Knn, 3, 0, 1, 0, 0},
                     {classical::Family::NaiveBayes, 0, 0, 1, 0, 0},
                     {classical::Family::DecisionTree, 0, 2, 1, 0, 0}};
  const auto models = classical::train_grid(records, dataset::split_80_20(records, seed), cfg);
  fs::create_directories(dir);
  classical::save_models(models, dir / "models");
  dataset::write_text(dir / "selector.json", classical::selector_to_json(classical::select_per_trait(models), "models"));
  return {dir / "selector.json", seed, duration_s};
}

}  // namespace tw_test
