#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "uqrank/core_data.hpp"
#include "uqrank/random.hpp"
#include "uqrank/text.hpp"

namespace uqrank {

// Feature layout of the pointwise scorer. The order is part of the model
// file contract; do not reorder.
enum FeatureIndex : int {
  kFeatBm25 = 0,          // log(1 + BM25(context as query, response as document))
  kFeatJaccardUnigram,    // unigram Jaccard against the last utterance
  kFeatJaccardBigram,     // bigram Jaccard against the last utterance
  kFeatIdfOverlap,        // idf mass of response terms found in the context / total idf mass
  kFeatResponseLength,    // log(1 + response tokens)
  kFeatContextLength,     // log(1 + context tokens)
  kFeatEmbeddingCosine,   // hashed-embedding cosine(context, response)
  kFeatContextCoverage,   // fraction of distinct context terms present in the response
  kFeatureDim
};

using FeatureVector = Eigen::VectorXd;

FeatureVector extract_features(const std::vector<std::vector<std::string>>& context,
                               std::span<const std::string> response, const TermStats& stats);
FeatureVector extract_features(const DialogueInstance& instance, std::size_t candidate, const TermStats& stats);
// k x d matrix, one row per candidate.
Eigen::MatrixXd extract_features(const DialogueInstance& instance, const TermStats& stats);

// input -> tanh hidden layer -> 2 logits (relevant, non-relevant).
struct ScorerParameters {
  Eigen::MatrixXd w1;  // h x d
  Eigen::VectorXd b1;  // h
  Eigen::MatrixXd w2;  // 2 x h
  Eigen::VectorXd b2;  // 2
  double dropout_rate = 0.0;
  std::uint64_t train_seed = 0;

  int input_dim() const { return static_cast<int>(w1.cols()); }
  int hidden_dim() const { return static_cast<int>(w1.rows()); }
  std::size_t parameter_count() const { return static_cast<std::size_t>(w1.size() + b1.size() + w2.size() + b2.size()); }

  // Flat views in the order w1 (row-major), b1, w2 (row-major), b2.
  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);
  void validate() const;

  static ScorerParameters zeros(int input_dim, int hidden_dim, double dropout_rate = 0.0);
  // Uniform in [-0.5, 0.5] / sqrt(fan_in).
  static ScorerParameters initialize(int input_dim, int hidden_dim, double dropout_rate, std::uint64_t seed);

  bool operator==(const ScorerParameters& other) const;
};

// Bernoulli(1 - rate) keep indicators, one per hidden unit.
using DropoutMask = Eigen::VectorXd;
DropoutMask draw_mask(int hidden_dim, double dropout_rate, Rng& rng);

// Probability of relevance, in (0, 1). Surviving hidden units are scaled by
// 1 / (1 - dropout_rate). Throws on non-finite intermediates.
double forward(const ScorerParameters& params, const FeatureVector& x);
double forward(const ScorerParameters& params, const FeatureVector& x, const DropoutMask& mask);

// Cross-entropy of one example and, optionally, its gradient.
double loss_and_gradient(const ScorerParameters& params, const FeatureVector& x, int label,
                         const DropoutMask* mask, ScorerParameters* grad);

struct TrainConfig {
  double learning_rate = 0.05;
  int epochs = 5;
  int batch_size = 32;
  bool balance = true;
  int hidden_dim = 16;
  double dropout_rate = 0.1;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct TrainResult {
  ScorerParameters params;
  std::vector<double> epoch_loss;  // mean training loss per epoch
  std::size_t relevant_pairs_per_epoch = 0;
  std::size_t non_relevant_pairs_per_epoch = 0;
};

TrainResult train(const std::vector<DialogueInstance>& corpus, const TrainConfig& cfg, std::uint64_t seed);
TrainResult train(const std::vector<DialogueInstance>& corpus, const TermStats& stats, const TrainConfig& cfg,
                  std::uint64_t seed);

// max over parameters of |analytic - numeric| / (|analytic| + |numeric| + 1e-12),
// numeric from central differences with step 1e-5. Dropout is not applied.
double gradient_check(const ScorerParameters& params, const FeatureVector& x, int label);
// The same discrepancy per parameter, in flatten() order.
std::vector<double> gradient_discrepancies(const ScorerParameters& params, const FeatureVector& x, int label);

// An optional "config <hash>" line follows the magic header.
void save_parameters(const std::filesystem::path& path, const ScorerParameters& params,
                     const std::string& config_hash = {});
ScorerParameters load_parameters(const std::filesystem::path& path, std::optional<int> expected_input_dim = {},
                                 std::optional<int> expected_hidden_dim = {});

}  // namespace uqrank
