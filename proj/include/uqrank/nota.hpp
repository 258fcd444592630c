#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "uqrank/core_data.hpp"
#include "uqrank/forest.hpp"

namespace uqrank {

// A candidate list with one candidate removed. label 1 (NOTA) means the
// relevant response was the one removed.
struct NotaInstance {
  std::string base_id;
  DialogueInstance instance;
  int label = 0;
  Eigen::VectorXd features;
};

enum class NotaBlock { sorted_means, sorted_vars_ensemble, sorted_vars_dropout };

std::string_view to_string(NotaBlock b);
NotaBlock nota_block_from_string(std::string_view name);

struct NotaFeatureSpec {
  std::vector<NotaBlock> blocks{NotaBlock::sorted_means};
  // Source of the means block.
  DistributionSource mean_source = DistributionSource::dropout;
  // false keeps candidate order instead of sorting each block (comparison only).
  bool sorted = true;

  // Blocks must be distinct and in the order means, ensemble vars, dropout vars.
  void validate() const;
  std::string label() const;
  bool operator==(const NotaFeatureSpec&) const = default;
};

// Half the instances (seeded) lose their relevant candidate; the rest lose
// one seeded non-relevant candidate.
std::vector<NotaInstance> build_nota_dataset(const std::vector<DialogueInstance>& corpus, std::uint64_t seed);

using SourceDistributions = std::map<DistributionSource, PredictiveDistribution>;

Eigen::VectorXd extract_nota_features(const NotaInstance& inst, const SourceDistributions& dists,
                                      const NotaFeatureSpec& spec);

double f1_macro(const std::vector<int>& truth, const std::vector<int>& predicted);

// Label-stratified fold assignment: returns the fold of every instance.
std::vector<int> stratified_folds(const std::vector<int>& labels, int folds, std::uint64_t seed);

struct NotaEvaluation {
  double mean_f1 = 0.0;
  std::vector<double> fold_f1;
  double std_f1 = 0.0;  // sample standard deviation over folds
};

NotaEvaluation train_eval_nota(const std::vector<NotaInstance>& dataset, int folds, std::uint64_t seed,
                               const ForestConfig& forest = {});

// Corpus format plus a "nota_label" field; features are not stored.
void save_nota_dataset(const std::filesystem::path& path, const std::vector<NotaInstance>& dataset,
                       const std::string& header = {});
std::vector<NotaInstance> load_nota_dataset(const std::filesystem::path& path);

}  // namespace uqrank
