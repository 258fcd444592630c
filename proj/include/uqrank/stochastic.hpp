#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "uqrank/core_data.hpp"
#include "uqrank/ranker.hpp"

namespace uqrank {

struct EnsembleSpec {
  std::vector<std::uint64_t> member_seeds;
  TrainConfig train;

  void validate() const;
};

enum class MaskSharing { shared_per_pass, independent_per_candidate };

std::string_view to_string(MaskSharing m);
MaskSharing mask_sharing_from_string(std::string_view name);

struct DropoutSpec {
  int passes = 10;
  double dropout_rate = 0.1;
  std::uint64_t pass_seed_base = 0;
  MaskSharing mask_sharing = MaskSharing::shared_per_pass;

  void validate() const;
};

// Mean, unbiased (S - 1) variance and covariance of an S x k sample matrix.
// With a single sample the variance and covariance are zero and `degenerate`
// is set.
template <typename Scalar>
struct SampleStatistics {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> mean;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> variance;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> covariance;
  bool degenerate = false;
};

template <typename Derived>
SampleStatistics<typename Derived::Scalar> sample_statistics(const Eigen::MatrixBase<Derived>& samples) {
  using Scalar = typename Derived::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  SampleStatistics<Scalar> out;
  const Eigen::Index s = samples.rows();
  const Eigen::Index k = samples.cols();
  if (s == 0) throw Error("sample_statistics: no samples");
  out.mean = samples.colwise().mean().transpose();
  if (s < 2) {
    out.degenerate = true;
    out.covariance = Matrix::Zero(k, k);
  } else {
    const Matrix centered = samples.rowwise() - out.mean.transpose();
    const Matrix gram = (centered.transpose() * centered) / static_cast<Scalar>(s - 1);
    // The blocked product is not bitwise symmetric.
    out.covariance = (gram + gram.transpose()) / Scalar(2);
  }
  out.variance = out.covariance.diagonal();
  return out;
}

inline SampleStatistics<double> distribution_stats(const PredictiveDistribution& dist) {
  return sample_statistics(dist.scores);
}

// Single no-dropout forward per candidate.
PredictiveDistribution predict_deterministic(const ScorerParameters& params, const DialogueInstance& instance,
                                             const TermStats& stats);

// Row m holds member m's deterministic scores.
PredictiveDistribution predict_ensemble(const std::vector<ScorerParameters>& members,
                                        const DialogueInstance& instance, const TermStats& stats);

// Row t is forward pass t under a dropout mask seeded by pass_seed_base + t.
PredictiveDistribution predict_dropout(const ScorerParameters& params, const DropoutSpec& spec,
                                       const DialogueInstance& instance, const TermStats& stats);

std::vector<ScorerParameters> train_ensemble(const std::vector<DialogueInstance>& corpus, const TermStats& stats,
                                             const EnsembleSpec& spec);

}  // namespace uqrank
