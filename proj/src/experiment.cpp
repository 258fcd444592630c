#include "uqrank/experiment.hpp"

#include <unordered_map>

#include "uqrank/random.hpp"

namespace uqrank {

TrainedModels train_models(const std::vector<DialogueInstance>& corpus, const ExperimentConfig& cfg) {
  TrainedModels out;
  out.stats = TermStats::from_corpus(corpus);
  out.members = train_ensemble(corpus, out.stats, cfg.ensemble_spec());
  return out;
}

std::vector<DialogueInstance> apply_negative_sampling(const std::vector<DialogueInstance>& corpus,
                                                      const std::optional<NsStrategy>& strategy, std::size_t negatives,
                                                      std::uint64_t seed) {
  if (!strategy) return corpus;
  const ResponsePool pool = ResponsePool::from_corpus(corpus);
  return resample_corpus(corpus, pool, *strategy, negatives, seed);
}

std::vector<PredictiveDistribution> predict_corpus(const TrainedModels& models,
                                                   const std::vector<DialogueInstance>& corpus,
                                                   DistributionSource source, const ExperimentConfig& cfg) {
  std::vector<PredictiveDistribution> out;
  out.reserve(corpus.size());
  const DropoutSpec base = cfg.dropout_spec();
  for (const auto& inst : corpus) {
    switch (source) {
      case DistributionSource::deterministic:
        out.push_back(predict_deterministic(models.baseline(), inst, models.stats));
        break;
      case DistributionSource::ensemble:
        out.push_back(predict_ensemble(models.members, inst, models.stats));
        break;
      case DistributionSource::dropout: {
        DropoutSpec spec = base;
        spec.pass_seed_base = derive_seed(base.pass_seed_base, inst.id(), 0);
        out.push_back(predict_dropout(models.baseline(), spec, inst, models.stats));
        break;
      }
    }
  }
  return out;
}

RunFile make_run_file(const TrainedModels& models, std::vector<PredictiveDistribution> dists, DistributionSource source,
                      const ExperimentConfig& cfg) {
  RunFile run;
  run.source = source;
  run.config_hash = config_hash(cfg);
  if (source == DistributionSource::ensemble) {
    for (const auto& m : models.members) run.seeds.push_back(m.train_seed);
  } else {
    run.seeds.push_back(models.baseline().train_seed);
  }
  run.distributions = std::move(dists);
  return run;
}

std::vector<RankingCase> pair_with_corpus(const std::vector<PredictiveDistribution>& dists,
                                          const std::vector<DialogueInstance>& corpus) {
  std::unordered_map<std::string, const PredictiveDistribution*> by_id;
  for (const auto& d : dists) by_id.emplace(d.instance_id, &d);
  std::vector<RankingCase> out;
  out.reserve(corpus.size());
  for (const auto& inst : corpus) {
    auto it = by_id.find(inst.id());
    if (it == by_id.end()) throw Error("run file has no distribution for instance '" + inst.id() + "'");
    out.push_back({it->second->aligned_to(inst), inst});
  }
  return out;
}

std::pair<std::vector<RankingCase>, std::vector<RankingCase>> split_validation(const std::vector<RankingCase>& cases,
                                                                               double validation_fraction,
                                                                               std::uint64_t seed) {
  std::vector<std::size_t> order(cases.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  const auto n_val = static_cast<std::size_t>(validation_fraction * static_cast<double>(cases.size()));
  std::vector<bool> is_val(cases.size(), false);
  for (std::size_t i = 0; i < n_val; ++i) is_val[order[i]] = true;
  std::pair<std::vector<RankingCase>, std::vector<RankingCase>> out;
  for (std::size_t i = 0; i < cases.size(); ++i) (is_val[i] ? out.first : out.second).push_back(cases[i]);
  return out;
}

ReliabilityReport balanced_ece(const std::vector<RankingCase>& cases, Reducer reducer, const ExperimentConfig& cfg,
                               int non_rel_per_query) {
  std::vector<PredictiveDistribution> dists;
  std::vector<DialogueInstance> instances;
  dists.reserve(cases.size());
  instances.reserve(cases.size());
  for (const auto& c : cases) {
    dists.push_back(c.distribution);
    instances.push_back(c.instance);
  }
  return balanced_ece(dists, instances, reducer, non_rel_per_query, derive_seed(cfg.seed, "calibration.sample"),
                      cfg.calibration_buckets, cfg.binning);
}

}  // namespace uqrank
