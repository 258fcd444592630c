#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "uqrank/calibration.hpp"
#include "uqrank/config.hpp"
#include "uqrank/core_data.hpp"
#include "uqrank/negative_sampling.hpp"
#include "uqrank/ranker.hpp"
#include "uqrank/risk.hpp"
#include "uqrank/run_file.hpp"
#include "uqrank/stochastic.hpp"
#include "uqrank/text.hpp"

namespace uqrank {

// Ensemble members trained on one source corpus. Member 0 doubles as the
// deterministic baseline and as the model sampled with MC dropout.
struct TrainedModels {
  TermStats stats;
  std::vector<ScorerParameters> members;

  const ScorerParameters& baseline() const { return members.front(); }
};

TrainedModels train_models(const std::vector<DialogueInstance>& corpus, const ExperimentConfig& cfg);

// Candidate lists of the corpus rebuilt with the strategy (nullopt keeps them).
// The pool is the corpus's own distinct responses.
std::vector<DialogueInstance> apply_negative_sampling(const std::vector<DialogueInstance>& corpus,
                                                      const std::optional<NsStrategy>& strategy, std::size_t negatives,
                                                      std::uint64_t seed);

// One distribution per instance. Dropout pass seeds derive from the instance
// id, so a distribution does not depend on which other instances are scored.
std::vector<PredictiveDistribution> predict_corpus(const TrainedModels& models,
                                                   const std::vector<DialogueInstance>& corpus,
                                                   DistributionSource source, const ExperimentConfig& cfg);

RunFile make_run_file(const TrainedModels& models, std::vector<PredictiveDistribution> dists, DistributionSource source,
                      const ExperimentConfig& cfg);

// Pairs run-file distributions with corpus instances by id. Instances without
// a distribution are an error; extra distributions are ignored.
std::vector<RankingCase> pair_with_corpus(const std::vector<PredictiveDistribution>& dists,
                                          const std::vector<DialogueInstance>& corpus);

// Seeded split of a case list into (validation, test).
std::pair<std::vector<RankingCase>, std::vector<RankingCase>> split_validation(const std::vector<RankingCase>& cases,
                                                                               double validation_fraction,
                                                                               std::uint64_t seed);

ReliabilityReport balanced_ece(const std::vector<RankingCase>& cases, Reducer reducer, const ExperimentConfig& cfg,
                               int non_rel_per_query);

}  // namespace uqrank
