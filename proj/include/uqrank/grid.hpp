#pragma once

#include <optional>
#include <string>
#include <vector>

#include "uqrank/config.hpp"
#include "uqrank/evaluation.hpp"

namespace uqrank {

struct GridCell {
  std::string source;
  std::string target;
  std::string train_ns;
  std::string test_ns;
  bool no_shift = false;
  std::size_t test_queries = 0;

  double recall_deterministic = 0.0;
  double recall_ensemble = 0.0;
  double recall_dropout = 0.0;
  double recall_ensemble_risk = 0.0;
  double recall_dropout_risk = 0.0;
  double b_ensemble = 0.0;
  double b_dropout = 0.0;

  double ece_deterministic = 0.0;
  double ece_ensemble = 0.0;
  double ece_dropout = 0.0;

  // Per-query R@1 against the deterministic baseline.
  TTestResult test_ensemble;
  TTestResult test_dropout;
  TTestResult test_ensemble_risk;
  TTestResult test_dropout_risk;
};

inline constexpr double kSignificanceLevel = 0.05;

inline bool significant(const TTestResult& r) { return r.p_value < kSignificanceLevel; }

struct ExperimentGrid {
  std::vector<std::string> sources;
  std::vector<std::string> targets;
  std::string train_ns;
  std::vector<std::string> test_ns;
  std::vector<GridCell> cells;  // source-major, then target, then test NS
};

// Trains once per source and evaluates every (target, test NS) cell. All
// corpus files are checked before any training starts.
ExperimentGrid run_experiment_grid(const ExperimentConfig& cfg);

}  // namespace uqrank
