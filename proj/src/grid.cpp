#include "uqrank/grid.hpp"

#include <filesystem>
#include <map>

#include "uqrank/experiment.hpp"
#include "uqrank/random.hpp"

namespace uqrank {

namespace {

std::vector<double> recall_column(const std::vector<RankingCase>& cases, double b, const ExperimentConfig& cfg) {
  return per_query_recall(cases, b, 1, cfg.risk.include_self_covariance);
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

ExperimentGrid run_experiment_grid(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.grid_sources.empty() || cfg.grid_targets.empty() || cfg.grid_test_ns.empty()) {
    throw Error("grid needs at least one source, one target and one test NS strategy");
  }
  for (const auto& name : cfg.grid_sources) {
    const auto path = cfg.resolve(cfg.domains.at(name).train);
    if (!std::filesystem::exists(path)) throw Error("grid source '" + name + "': missing corpus " + path.string());
  }
  for (const auto& name : cfg.grid_targets) {
    const auto path = cfg.resolve(cfg.domains.at(name).test);
    if (!std::filesystem::exists(path)) throw Error("grid target '" + name + "': missing corpus " + path.string());
  }

  ExperimentGrid grid;
  grid.sources = cfg.grid_sources;
  grid.targets = cfg.grid_targets;
  grid.train_ns = ns_name(cfg.train_ns);
  for (const auto& ns : cfg.grid_test_ns) grid.test_ns.push_back(ns_name(ns));

  std::map<std::pair<std::string, std::string>, std::vector<DialogueInstance>> test_sets;
  for (const auto& target : cfg.grid_targets) {
    const auto raw = load_corpus(cfg.resolve(cfg.domains.at(target).test));
    for (const auto& ns : cfg.grid_test_ns) {
      test_sets[{target, ns_name(ns)}] =
          apply_negative_sampling(raw, ns, cfg.negatives, derive_seed(cfg.seed, "grid.test_ns." + target));
    }
  }

  for (const auto& source : cfg.grid_sources) {
    const auto train_raw = load_corpus(cfg.resolve(cfg.domains.at(source).train));
    const auto train_set =
        apply_negative_sampling(train_raw, cfg.train_ns, cfg.negatives, derive_seed(cfg.seed, "grid.train_ns." + source));
    const TrainedModels models = train_models(train_set, cfg);

    for (const auto& target : cfg.grid_targets) {
      for (const auto& ns : cfg.grid_test_ns) {
        const auto& corpus = test_sets.at({target, ns_name(ns)});
        GridCell cell;
        cell.source = source;
        cell.target = target;
        cell.train_ns = grid.train_ns;
        cell.test_ns = ns_name(ns);
        cell.no_shift = source == target && cell.train_ns == cell.test_ns;

        const std::uint64_t split_seed = derive_seed(cfg.seed, "grid.split");
        auto split = [&](DistributionSource src) {
          return split_validation(pair_with_corpus(predict_corpus(models, corpus, src, cfg), corpus),
                                  cfg.validation_fraction, split_seed);
        };
        const auto [det_val, det_test] = split(DistributionSource::deterministic);
        const auto [ens_val, ens_test] = split(DistributionSource::ensemble);
        const auto [drop_val, drop_test] = split(DistributionSource::dropout);
        (void)det_val;
        cell.test_queries = det_test.size();

        const bool self = cfg.risk.include_self_covariance;
        cell.b_ensemble = ens_val.empty() ? 0.0 : select_b(ens_val, cfg.risk.b_grid, 1, self);
        cell.b_dropout = drop_val.empty() ? 0.0 : select_b(drop_val, cfg.risk.b_grid, 1, self);

        const auto det = recall_column(det_test, 0.0, cfg);
        const auto ens = recall_column(ens_test, 0.0, cfg);
        const auto drop = recall_column(drop_test, 0.0, cfg);
        const auto ens_ra = recall_column(ens_test, cell.b_ensemble, cfg);
        const auto drop_ra = recall_column(drop_test, cell.b_dropout, cfg);
        cell.recall_deterministic = mean_of(det);
        cell.recall_ensemble = mean_of(ens);
        cell.recall_dropout = mean_of(drop);
        cell.recall_ensemble_risk = mean_of(ens_ra);
        cell.recall_dropout_risk = mean_of(drop_ra);
        if (det.size() >= 2) {
          cell.test_ensemble = paired_t_test(ens, det);
          cell.test_dropout = paired_t_test(drop, det);
          cell.test_ensemble_risk = paired_t_test(ens_ra, det);
          cell.test_dropout_risk = paired_t_test(drop_ra, det);
        }

        cell.ece_deterministic = balanced_ece(det_test, Reducer::mean, cfg, cfg.non_rel_per_query).ece;
        cell.ece_ensemble = balanced_ece(ens_test, Reducer::mean, cfg, cfg.non_rel_per_query).ece;
        cell.ece_dropout = balanced_ece(drop_test, Reducer::mean, cfg, cfg.non_rel_per_query).ece;
        grid.cells.push_back(std::move(cell));
      }
    }
  }
  return grid;
}

}  // namespace uqrank
