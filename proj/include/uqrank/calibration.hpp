#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "uqrank/core_data.hpp"

namespace uqrank {

struct Prediction {
  double probability;
  int label;
};

enum class Binning { equal_width, equal_mass };

struct ReliabilityBucket {
  double low = 0.0;
  double high = 0.0;
  std::size_t size = 0;
  double mean_confidence = 0.0;
  double relevance_fraction = 0.0;
};

struct ReliabilityReport {
  int bucket_count = 10;
  std::vector<ReliabilityBucket> buckets;
  double ece = 0.0;
  std::size_t n = 0;

  // sum_i |B_i| / n * |avg(B_i) - rel(B_i) / |B_i||, from the bucket fields.
  double recompute_ece() const;
};

// Equal-width bucket of p: [i/c, (i+1)/c), with 1.0 in the top bucket.
// Interior boundaries belong to the higher bucket.
int bucket_index(double probability, int bucket_count);

ReliabilityReport compute_ece(std::span<const Prediction> predictions, int bucket_count = 10,
                              Binning binning = Binning::equal_width);

enum class Reducer { mean, deterministic };

std::string_view to_string(Reducer r);
Reducer reducer_from_string(std::string_view name);

// Keeps each instance's relevant candidate plus `non_rel_per_query` sampled
// non-relevant ones, reduces every candidate's samples (column mean, or the
// first row for `deterministic`), then buckets. Distributions and instances
// are paired by position and aligned by candidate id.
ReliabilityReport balanced_ece(const std::vector<PredictiveDistribution>& distributions,
                               const std::vector<DialogueInstance>& instances, Reducer reducer,
                               int non_rel_per_query, std::uint64_t seed, int bucket_count = 10,
                               Binning binning = Binning::equal_width);

}  // namespace uqrank
