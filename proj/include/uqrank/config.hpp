#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "uqrank/calibration.hpp"
#include "uqrank/negative_sampling.hpp"
#include "uqrank/nota.hpp"
#include "uqrank/ranker.hpp"
#include "uqrank/risk.hpp"
#include "uqrank/stochastic.hpp"
#include "uqrank/synthetic.hpp"

namespace uqrank {

inline constexpr const char* kEnvPrefix = "UQRANK_";

struct DomainPaths {
  std::string train;
  std::string test;
  bool operator==(const DomainPaths&) const = default;
};

// Every setting of a run. Serialized as flat `section.key = value` lines;
// relative paths resolve against the directory holding the config file.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "out";

  std::string train_corpus = "out/train.jsonl";
  std::string test_corpus = "out/test.jsonl";
  std::string shifted_train_corpus = "out/train_shifted.jsonl";
  std::string shifted_test_corpus = "out/test_shifted.jsonl";

  SyntheticCorpusSpec synthetic;
  std::size_t synthetic_test_instances = 500;
  double synthetic_shift = 0.5;

  // nullopt keeps the corpus's own negatives.
  std::optional<NsStrategy> train_ns;
  std::optional<NsStrategy> test_ns;
  std::size_t negatives = 9;

  TrainConfig train;
  int ensemble_members = 5;
  int dropout_passes = 10;
  MaskSharing mask_sharing = MaskSharing::shared_per_pass;

  RiskConfig risk;
  double validation_fraction = 0.2;

  int calibration_buckets = 10;
  int non_rel_per_query = 1;
  Binning binning = Binning::equal_width;
  Reducer reducer = Reducer::mean;
  std::vector<int> figure_non_rel{1, 2, 5, 9};

  int nota_folds = 5;
  std::vector<NotaFeatureSpec> nota_specs;
  int forest_trees = 100;

  std::vector<std::string> grid_sources;
  std::vector<std::string> grid_targets;
  std::vector<std::optional<NsStrategy>> grid_test_ns;
  std::map<std::string, DomainPaths> domains;

  std::filesystem::path base_dir;  // not serialized

  ExperimentConfig();

  std::filesystem::path resolve(const std::string& path) const;
  std::filesystem::path output_path(const std::string& name) const;

  std::vector<std::uint64_t> member_seeds() const;
  EnsembleSpec ensemble_spec() const;
  DropoutSpec dropout_spec() const;

  void validate() const;
  bool operator==(const ExperimentConfig&) const = default;
};

std::string serialize_config(const ExperimentConfig& cfg);
// Applies `section.key = value` lines on top of the defaults.
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

// Sets one key; throws on unknown keys or bad values.
void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);
// Applies UQRANK_SECTION_KEY overrides from the environment.
void apply_env_overrides(ExperimentConfig& cfg);

// 16 hex digits of FNV-1a over the serialized config.
std::string config_hash(const ExperimentConfig& cfg);

std::string ns_name(const std::optional<NsStrategy>& ns);
std::optional<NsStrategy> ns_from_name(const std::string& name);

}  // namespace uqrank
