#include "uqrank/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "uqrank/random.hpp"

namespace uqrank {

int bucket_index(double p, int c) {
  int idx = static_cast<int>(std::floor(p * c));
  idx = std::clamp(idx, 0, c - 1);
  // p * c can round across a boundary; settle against the exact edges.
  while (idx > 0 && p < static_cast<double>(idx) / c) --idx;
  while (idx < c - 1 && p >= static_cast<double>(idx + 1) / c) ++idx;
  return idx;
}

double ReliabilityReport::recompute_ece() const {
  if (n == 0) return 0.0;
  double e = 0.0;
  for (const auto& b : buckets) {
    if (b.size == 0) continue;
    e += static_cast<double>(b.size) / static_cast<double>(n) * std::abs(b.mean_confidence - b.relevance_fraction);
  }
  return e;
}

ReliabilityReport compute_ece(std::span<const Prediction> predictions, int bucket_count, Binning binning) {
  if (predictions.empty()) throw Error("compute_ece: no predictions");
  if (bucket_count < 1) throw Error("compute_ece: bucket count must be >= 1");
  for (const auto& p : predictions) {
    if (!(p.probability >= 0.0 && p.probability <= 1.0)) throw Error("compute_ece: probability outside [0, 1]");
    if (p.label != 0 && p.label != 1) throw Error("compute_ece: labels must be 0 or 1");
  }

  const std::size_t c = static_cast<std::size_t>(bucket_count);
  std::vector<double> conf_sum(c, 0.0);
  std::vector<std::size_t> rel(c, 0);
  ReliabilityReport report;
  report.bucket_count = bucket_count;
  report.n = predictions.size();
  report.buckets.resize(c);

  if (binning == Binning::equal_width) {
    for (std::size_t i = 0; i < c; ++i) {
      report.buckets[i].low = static_cast<double>(i) / bucket_count;
      report.buckets[i].high = static_cast<double>(i + 1) / bucket_count;
    }
    for (const auto& p : predictions) {
      const auto b = static_cast<std::size_t>(bucket_index(p.probability, bucket_count));
      conf_sum[b] += p.probability;
      rel[b] += static_cast<std::size_t>(p.label);
      ++report.buckets[b].size;
    }
  } else {
    // Sorted predictions split into c contiguous groups; the first n % c
    // groups take one extra element.
    std::vector<std::size_t> order(predictions.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return predictions[a].probability < predictions[b].probability; });
    const std::size_t base = predictions.size() / c;
    const std::size_t extra = predictions.size() % c;
    std::size_t pos = 0;
    for (std::size_t b = 0; b < c; ++b) {
      const std::size_t take = base + (b < extra ? 1 : 0);
      auto& bucket = report.buckets[b];
      bucket.size = take;
      if (take > 0) {
        bucket.low = predictions[order[pos]].probability;
        bucket.high = predictions[order[pos + take - 1]].probability;
      }
      for (std::size_t i = pos; i < pos + take; ++i) {
        conf_sum[b] += predictions[order[i]].probability;
        rel[b] += static_cast<std::size_t>(predictions[order[i]].label);
      }
      pos += take;
    }
  }

  for (std::size_t b = 0; b < c; ++b) {
    auto& bucket = report.buckets[b];
    if (bucket.size == 0) continue;
    bucket.mean_confidence = conf_sum[b] / static_cast<double>(bucket.size);
    bucket.relevance_fraction = static_cast<double>(rel[b]) / static_cast<double>(bucket.size);
  }
  report.ece = report.recompute_ece();
  return report;
}

std::string_view to_string(Reducer r) { return r == Reducer::mean ? "mean" : "deterministic"; }

Reducer reducer_from_string(std::string_view name) {
  if (name == "mean") return Reducer::mean;
  if (name == "deterministic") return Reducer::deterministic;
  throw Error("unknown reducer '" + std::string(name) + "'");
}

ReliabilityReport balanced_ece(const std::vector<PredictiveDistribution>& distributions,
                               const std::vector<DialogueInstance>& instances, Reducer reducer,
                               int non_rel_per_query, std::uint64_t seed, int bucket_count, Binning binning) {
  if (distributions.size() != instances.size()) throw Error("balanced_ece: distribution/instance count mismatch");
  if (non_rel_per_query < 1) throw Error("balanced_ece: non_rel_per_query must be >= 1");
  std::vector<Prediction> predictions;
  predictions.reserve(instances.size() * static_cast<std::size_t>(non_rel_per_query + 1));
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto& inst = instances[i];
    if (inst.relevant_count() < 1) {
      throw Error("balanced_ece: instance '" + inst.id() + "' has no relevant candidate");
    }
    const PredictiveDistribution dist = distributions[i].aligned_to(inst);
    Eigen::VectorXd reduced = reducer == Reducer::mean ? Eigen::VectorXd(dist.scores.colwise().mean().transpose())
                                                       : Eigen::VectorXd(dist.scores.row(0).transpose());
    std::vector<std::size_t> non_rel;
    for (std::size_t j = 0; j < inst.size(); ++j) {
      if (inst.labels()[j] == 1) {
        predictions.push_back({reduced(static_cast<Eigen::Index>(j)), 1});
      } else {
        non_rel.push_back(j);
      }
    }
    if (non_rel.size() < static_cast<std::size_t>(non_rel_per_query)) {
      throw Error("balanced_ece: instance '" + inst.id() + "' has only " + std::to_string(non_rel.size()) +
                  " non-relevant candidates");
    }
    Rng rng(derive_seed(seed, "calibration.sample", i));
    for (std::size_t pick : rng.sample_without_replacement(non_rel.size(), static_cast<std::size_t>(non_rel_per_query))) {
      predictions.push_back({reduced(static_cast<Eigen::Index>(non_rel[pick])), 0});
    }
  }
  return compute_ece(predictions, bucket_count, binning);
}

}  // namespace uqrank
