#include "uqrank/risk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "uqrank/evaluation.hpp"

namespace uqrank {

std::vector<double> default_b_grid() {
  std::vector<double> grid{-0.1};
  for (int i = 0; i <= 20; ++i) grid.push_back(i / 20.0);
  return grid;
}

void RiskConfig::validate() const {
  if (std::find(b_grid.begin(), b_grid.end(), 0.0) == b_grid.end()) throw Error("risk grid must contain b = 0");
  for (double b : b_grid) {
    if (!std::isfinite(b)) throw Error("risk grid values must be finite");
  }
}

RankedList rerank(const PredictiveDistribution& dist, const DialogueInstance& instance, double b,
                  bool include_self_covariance) {
  const PredictiveDistribution aligned = dist.aligned_to(instance);
  const Eigen::VectorXd scores = risk_adjusted_scores(aligned.scores, b, include_self_covariance);
  return make_ranked_list(instance.id(), aligned.candidate_ids,
                          std::vector<double>(scores.data(), scores.data() + scores.size()));
}

std::vector<double> per_query_recall(std::span<const RankingCase> cases, double b, std::size_t cutoff,
                                     bool include_self_covariance) {
  std::vector<double> out;
  out.reserve(cases.size());
  for (const auto& c : cases) {
    const RankedList ranked = rerank(c.distribution, c.instance, b, include_self_covariance);
    out.push_back(recall_at_k(ranked, c.instance.labels(), c.instance.size(), cutoff));
  }
  return out;
}

double mean_recall(std::span<const RankingCase> cases, double b, std::size_t cutoff, bool include_self_covariance) {
  if (cases.empty()) throw Error("mean_recall: no cases");
  const auto per_query = per_query_recall(cases, b, cutoff, include_self_covariance);
  double sum = 0.0;
  for (double v : per_query) sum += v;
  return sum / static_cast<double>(per_query.size());
}

double select_b(std::span<const RankingCase> validation, const std::vector<double>& grid, std::size_t cutoff,
                bool include_self_covariance) {
  if (validation.empty()) throw Error("select_b: empty validation set");
  if (grid.empty()) throw Error("select_b: empty grid");
  double best_b = 0.0;
  double best_metric = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (double b : grid) {
    if (b < 0.0) continue;  // risk-seeking values are swept, never selected
    const double m = mean_recall(validation, b, cutoff, include_self_covariance);
    const bool better = m > best_metric || (m == best_metric && std::abs(b) < std::abs(best_b));
    if (!any || better) {
      best_b = b;
      best_metric = m;
      any = true;
    }
  }
  if (!any) throw Error("select_b: grid has no non-negative values");
  return best_b;
}

std::vector<SweepRow> sweep_report(std::span<const RankingCase> test, const std::vector<double>& grid,
                                   std::size_t cutoff, bool include_self_covariance) {
  if (std::find(grid.begin(), grid.end(), 0.0) == grid.end()) throw Error("sweep_report: grid must contain b = 0");
  std::vector<SweepRow> rows;
  rows.reserve(grid.size());
  for (double b : grid) rows.push_back({b, mean_recall(test, b, cutoff, include_self_covariance), 0.0});
  const double base = std::find_if(rows.begin(), rows.end(), [](const SweepRow& r) { return r.b == 0.0; })->metric;
  for (auto& r : rows) {
    if (r.metric == base) {
      r.gain_percent = 0.0;
    } else if (base == 0.0) {
      r.gain_percent = std::numeric_limits<double>::infinity();
    } else {
      r.gain_percent = 100.0 * (r.metric - base) / base;
    }
  }
  return rows;
}

}  // namespace uqrank
