#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "uqrank/core_data.hpp"
#include "uqrank/stochastic.hpp"

namespace uqrank {

// 0.0 to 1.0 in steps of 0.05, plus a -0.1 risk-seeking probe.
std::vector<double> default_b_grid();

struct RiskConfig {
  double b = 0.0;
  std::vector<double> b_grid = default_b_grid();
  // Adds cov(j, j) to the covariance sum as well (ablation).
  bool include_self_covariance = false;

  void validate() const;
  bool operator==(const RiskConfig&) const = default;
};

// score_j = mean_j - b * var_j - 2b * sum_{i != j} cov(j, i)
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> risk_adjusted_scores(
    const Eigen::MatrixBase<Derived>& samples, typename Derived::Scalar b, bool include_self_covariance = false) {
  using Scalar = typename Derived::Scalar;
  const auto stats = sample_statistics(samples);
  const Eigen::Index k = samples.cols();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    Scalar cross = 0;
    for (Eigen::Index i = 0; i < k; ++i) {
      if (i != j || include_self_covariance) cross += stats.covariance(j, i);
    }
    out(j) = stats.mean(j) - b * stats.variance(j) - 2 * b * cross;
  }
  return out;
}

inline Eigen::VectorXd risk_adjusted_scores(const PredictiveDistribution& dist, double b,
                                            bool include_self_covariance = false) {
  return risk_adjusted_scores(dist.scores, b, include_self_covariance);
}

RankedList rerank(const PredictiveDistribution& dist, const DialogueInstance& instance, double b,
                  bool include_self_covariance = false);

struct RankingCase {
  PredictiveDistribution distribution;
  DialogueInstance instance;
};

// Mean R_n@cutoff over the cases after risk-aware reranking with b.
double mean_recall(std::span<const RankingCase> cases, double b, std::size_t cutoff = 1,
                   bool include_self_covariance = false);
std::vector<double> per_query_recall(std::span<const RankingCase> cases, double b, std::size_t cutoff = 1,
                                     bool include_self_covariance = false);

// Best non-negative grid value on the validation cases. Ties go to b = 0,
// then to the smaller |b|.
double select_b(std::span<const RankingCase> validation, const std::vector<double>& grid, std::size_t cutoff = 1,
                bool include_self_covariance = false);

struct SweepRow {
  double b;
  double metric;
  double gain_percent;  // relative to the b = 0 row
};

std::vector<SweepRow> sweep_report(std::span<const RankingCase> test, const std::vector<double>& grid,
                                   std::size_t cutoff = 1, bool include_self_covariance = false);

}  // namespace uqrank
