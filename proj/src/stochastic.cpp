#include "uqrank/stochastic.hpp"

#include <set>

namespace uqrank {

void EnsembleSpec::validate() const {
  if (member_seeds.size() < 2) throw Error("ensemble needs at least 2 members");
  std::set<std::uint64_t> distinct(member_seeds.begin(), member_seeds.end());
  if (distinct.size() != member_seeds.size()) throw Error("ensemble member seeds must be distinct");
  train.validate();
}

std::string_view to_string(MaskSharing m) {
  return m == MaskSharing::shared_per_pass ? "shared_per_pass" : "independent_per_candidate";
}

MaskSharing mask_sharing_from_string(std::string_view name) {
  if (name == "shared_per_pass") return MaskSharing::shared_per_pass;
  if (name == "independent_per_candidate") return MaskSharing::independent_per_candidate;
  throw Error("unknown mask sharing mode '" + std::string(name) + "'");
}

void DropoutSpec::validate() const {
  if (passes < 1) throw Error("dropout passes must be positive");
  if (!(dropout_rate > 0.0 && dropout_rate < 1.0)) throw Error("dropout rate must lie in (0, 1)");
}

PredictiveDistribution predict_deterministic(const ScorerParameters& params, const DialogueInstance& instance,
                                             const TermStats& stats) {
  const Eigen::MatrixXd x = extract_features(instance, stats);
  PredictiveDistribution dist{instance.id(), instance.candidate_ids(),
                              Eigen::MatrixXd(1, static_cast<Eigen::Index>(instance.size())),
                              DistributionSource::deterministic, {params.train_seed}};
  for (Eigen::Index j = 0; j < x.rows(); ++j) dist.scores(0, j) = forward(params, x.row(j).transpose());
  return dist;
}

PredictiveDistribution predict_ensemble(const std::vector<ScorerParameters>& members,
                                        const DialogueInstance& instance, const TermStats& stats) {
  if (members.empty()) throw Error("predict_ensemble: no members");
  const Eigen::MatrixXd x = extract_features(instance, stats);
  PredictiveDistribution dist{instance.id(), instance.candidate_ids(),
                              Eigen::MatrixXd(static_cast<Eigen::Index>(members.size()), x.rows()),
                              DistributionSource::ensemble, {}};
  for (std::size_t m = 0; m < members.size(); ++m) {
    if (members[m].input_dim() != x.cols()) {
      throw Error("ensemble member " + std::to_string(m) + " expects " + std::to_string(members[m].input_dim()) +
                  " features, got " + std::to_string(x.cols()));
    }
    dist.sample_seeds.push_back(members[m].train_seed);
    for (Eigen::Index j = 0; j < x.rows(); ++j) {
      dist.scores(static_cast<Eigen::Index>(m), j) = forward(members[m], x.row(j).transpose());
    }
  }
  return dist;
}

PredictiveDistribution predict_dropout(const ScorerParameters& params, const DropoutSpec& spec,
                                       const DialogueInstance& instance, const TermStats& stats) {
  spec.validate();
  if (spec.dropout_rate != params.dropout_rate) {
    throw Error("predict_dropout: spec rate " + std::to_string(spec.dropout_rate) +
                " differs from the scorer's training rate " + std::to_string(params.dropout_rate));
  }
  const Eigen::MatrixXd x = extract_features(instance, stats);
  PredictiveDistribution dist{instance.id(), instance.candidate_ids(), Eigen::MatrixXd(spec.passes, x.rows()),
                              DistributionSource::dropout, {}};
  for (int t = 0; t < spec.passes; ++t) {
    const std::uint64_t pass_seed = spec.pass_seed_base + static_cast<std::uint64_t>(t);
    dist.sample_seeds.push_back(pass_seed);
    Rng shared(pass_seed);
    const DropoutMask shared_mask = draw_mask(params.hidden_dim(), params.dropout_rate, shared);
    for (Eigen::Index j = 0; j < x.rows(); ++j) {
      if (spec.mask_sharing == MaskSharing::shared_per_pass) {
        dist.scores(t, j) = forward(params, x.row(j).transpose(), shared_mask);
      } else {
        Rng own(derive_seed(pass_seed, "dropout.candidate", static_cast<std::uint64_t>(j)));
        dist.scores(t, j) = forward(params, x.row(j).transpose(), draw_mask(params.hidden_dim(), params.dropout_rate, own));
      }
    }
  }
  return dist;
}

std::vector<ScorerParameters> train_ensemble(const std::vector<DialogueInstance>& corpus, const TermStats& stats,
                                             const EnsembleSpec& spec) {
  spec.validate();
  std::vector<ScorerParameters> members;
  members.reserve(spec.member_seeds.size());
  for (std::uint64_t seed : spec.member_seeds) members.push_back(train(corpus, stats, spec.train, seed).params);
  return members;
}

}  // namespace uqrank
