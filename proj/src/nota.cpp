#include "uqrank/nota.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>

#include "uqrank/random.hpp"
#include "uqrank/stochastic.hpp"

namespace uqrank {

std::string_view to_string(NotaBlock b) {
  switch (b) {
    case NotaBlock::sorted_means: return "means";
    case NotaBlock::sorted_vars_ensemble: return "vars_ensemble";
    case NotaBlock::sorted_vars_dropout: return "vars_dropout";
  }
  return "means";
}

NotaBlock nota_block_from_string(std::string_view name) {
  if (name == "means") return NotaBlock::sorted_means;
  if (name == "vars_ensemble") return NotaBlock::sorted_vars_ensemble;
  if (name == "vars_dropout") return NotaBlock::sorted_vars_dropout;
  throw Error("unknown NOTA feature block '" + std::string(name) + "'");
}

void NotaFeatureSpec::validate() const {
  if (blocks.empty()) throw Error("NOTA feature spec has no blocks");
  for (std::size_t i = 1; i < blocks.size(); ++i) {
    if (!(blocks[i - 1] < blocks[i])) {
      throw Error("NOTA feature blocks must be distinct and ordered means, vars_ensemble, vars_dropout");
    }
  }
}

std::string NotaFeatureSpec::label() const {
  std::string out;
  for (NotaBlock b : blocks) {
    if (!out.empty()) out += '+';
    switch (b) {
      case NotaBlock::sorted_means: out += mean_source == DistributionSource::ensemble ? "E[R^E]" : "E[R^D]"; break;
      case NotaBlock::sorted_vars_ensemble: out += "var[R^E]"; break;
      case NotaBlock::sorted_vars_dropout: out += "var[R^D]"; break;
    }
  }
  return out;
}

std::vector<NotaInstance> build_nota_dataset(const std::vector<DialogueInstance>& corpus, std::uint64_t seed) {
  for (const auto& inst : corpus) {
    if (inst.relevant_count() != 1 || inst.size() < 2) {
      throw Error("build_nota_dataset: instance '" + inst.id() +
                  "' needs exactly one relevant candidate and at least 2 candidates");
    }
  }
  Rng order_rng(derive_seed(seed, "nota.split"));
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  order_rng.shuffle(order);
  std::vector<int> is_nota(corpus.size(), 0);
  for (std::size_t r = 0; r < corpus.size() / 2; ++r) is_nota[order[r]] = 1;

  std::vector<NotaInstance> out;
  out.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& inst = corpus[i];
    const std::size_t rel = inst.relevant_index();
    std::size_t drop = rel;
    if (!is_nota[i]) {
      Rng rng(derive_seed(seed, "nota.drop", i));
      std::size_t pick = rng.below(inst.size() - 1);
      drop = pick >= rel ? pick + 1 : pick;
    }
    std::vector<std::size_t> keep;
    for (std::size_t j = 0; j < inst.size(); ++j) {
      if (j != drop) keep.push_back(j);
    }
    out.push_back({inst.id(), truncate_candidates(inst, keep), is_nota[i], Eigen::VectorXd()});
  }
  return out;
}

Eigen::VectorXd extract_nota_features(const NotaInstance& inst, const SourceDistributions& dists,
                                      const NotaFeatureSpec& spec) {
  spec.validate();
  const auto ids = inst.instance.candidate_ids();
  auto stats_for = [&](DistributionSource src) {
    auto it = dists.find(src);
    if (it == dists.end()) {
      throw Error("NOTA features for '" + inst.base_id + "' need a " + std::string(to_string(src)) + " distribution");
    }
    return distribution_stats(it->second.select_columns(ids));
  };
  const Eigen::Index k = static_cast<Eigen::Index>(ids.size());
  Eigen::VectorXd out(k * static_cast<Eigen::Index>(spec.blocks.size()));
  Eigen::Index offset = 0;
  for (NotaBlock b : spec.blocks) {
    Eigen::VectorXd block;
    switch (b) {
      case NotaBlock::sorted_means: block = stats_for(spec.mean_source).mean; break;
      case NotaBlock::sorted_vars_ensemble: block = stats_for(DistributionSource::ensemble).variance; break;
      case NotaBlock::sorted_vars_dropout: block = stats_for(DistributionSource::dropout).variance; break;
    }
    if (spec.sorted) std::sort(block.data(), block.data() + block.size(), std::greater<>());
    out.segment(offset, k) = block;
    offset += k;
  }
  return out;
}

double f1_macro(const std::vector<int>& truth, const std::vector<int>& predicted) {
  if (truth.size() != predicted.size() || truth.empty()) throw Error("f1_macro: bad input lengths");
  double total = 0.0;
  for (int cls : {0, 1}) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      const bool t = truth[i] == cls;
      const bool p = predicted[i] == cls;
      tp += static_cast<std::size_t>(t && p);
      fp += static_cast<std::size_t>(!t && p);
      fn += static_cast<std::size_t>(t && !p);
    }
    const std::size_t denom = 2 * tp + fp + fn;
    // A class absent from both truth and predictions counts as perfect.
    total += denom == 0 ? 1.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
  }
  return total / 2.0;
}

std::vector<int> stratified_folds(const std::vector<int>& labels, int folds, std::uint64_t seed) {
  if (folds < 2) throw Error("cross-validation needs at least 2 folds");
  if (labels.size() < static_cast<std::size_t>(folds)) throw Error("dataset smaller than fold count");
  std::vector<int> fold(labels.size(), 0);
  std::size_t dealt = 0;
  for (int cls : {0, 1}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == cls) members.push_back(i);
    }
    Rng rng(derive_seed(seed, "nota.folds", static_cast<std::uint64_t>(cls)));
    rng.shuffle(members);
    // Continue dealing where the previous class stopped so fold sizes stay level.
    for (std::size_t i : members) fold[i] = static_cast<int>(dealt++ % static_cast<std::size_t>(folds));
  }
  return fold;
}

NotaEvaluation train_eval_nota(const std::vector<NotaInstance>& dataset, int folds, std::uint64_t seed,
                               const ForestConfig& forest) {
  if (folds < 2) throw Error("train_eval_nota: need at least 2 folds");
  if (dataset.size() < static_cast<std::size_t>(folds)) throw Error("train_eval_nota: dataset smaller than fold count");
  std::vector<int> labels;
  const Eigen::Index d = dataset.front().features.size();
  for (const auto& inst : dataset) {
    if (inst.features.size() != d || d == 0) throw Error("train_eval_nota: feature dimensions differ or are empty");
    labels.push_back(inst.label);
  }
  if (std::all_of(labels.begin(), labels.end(), [&](int y) { return y == labels.front(); })) {
    throw Error("train_eval_nota: dataset has a single class");
  }
  const std::vector<int> fold = stratified_folds(labels, folds, seed);

  NotaEvaluation eval;
  for (int f = 0; f < folds; ++f) {
    std::vector<std::size_t> train_idx, test_idx;
    for (std::size_t i = 0; i < dataset.size(); ++i) (fold[i] == f ? test_idx : train_idx).push_back(i);
    Eigen::MatrixXd xtr(static_cast<Eigen::Index>(train_idx.size()), d);
    std::vector<int> ytr;
    for (std::size_t r = 0; r < train_idx.size(); ++r) {
      xtr.row(static_cast<Eigen::Index>(r)) = dataset[train_idx[r]].features.transpose();
      ytr.push_back(labels[train_idx[r]]);
    }
    const RandomForest model =
        RandomForest::fit(xtr, ytr, forest, derive_seed(seed, "nota.forest", static_cast<std::uint64_t>(f)));
    std::vector<int> truth, pred;
    for (std::size_t i : test_idx) {
      truth.push_back(labels[i]);
      pred.push_back(model.predict(dataset[i].features));
    }
    eval.fold_f1.push_back(f1_macro(truth, pred));
  }
  double sum = 0.0;
  for (double v : eval.fold_f1) sum += v;
  eval.mean_f1 = sum / folds;
  double ss = 0.0;
  for (double v : eval.fold_f1) ss += (v - eval.mean_f1) * (v - eval.mean_f1);
  eval.std_f1 = std::sqrt(ss / (folds - 1));
  return eval;
}

void save_nota_dataset(const std::filesystem::path& path, const std::vector<NotaInstance>& dataset,
                       const std::string& header) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write NOTA dataset " + path.string());
  if (!header.empty()) out << "# " << header << '\n';
  for (const auto& inst : dataset) {
    auto j = instance_to_json(inst.instance);
    j["nota_label"] = inst.label;
    out << j.dump() << '\n';
  }
}

std::vector<NotaInstance> load_nota_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open NOTA dataset " + path.string());
  std::vector<NotaInstance> out;
  std::string line;
  std::size_t line_no = 0;
  const CorpusParseOptions relaxed{false, 1};
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error("line " + std::to_string(line_no) + ": malformed JSON: " + e.what());
    }
    if (!j.contains("nota_label") || !j["nota_label"].is_number_integer()) {
      throw Error("line " + std::to_string(line_no) + ": field 'nota_label': missing or not an integer");
    }
    const int label = j["nota_label"].get<int>();
    DialogueInstance inst = parse_instance_json(j, line_no, relaxed);
    if (label != 0 && label != 1) throw Error("line " + std::to_string(line_no) + ": field 'nota_label': must be 0 or 1");
    if (inst.relevant_count() != (label == 1 ? 0 : 1)) {
      throw Error("line " + std::to_string(line_no) + ": field 'labels': inconsistent with nota_label");
    }
    std::string id = inst.id();
    out.push_back({std::move(id), std::move(inst), label, Eigen::VectorXd()});
  }
  return out;
}

}  // namespace uqrank
