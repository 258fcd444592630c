#include "uqrank/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "uqrank/random.hpp"

namespace uqrank {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) out.push_back(trim(item));
  return out;
}

std::string fmt_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw Error("config key '" + key + "': expected a number, got '" + v + "'");
  return out;
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& v) {
  Int out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw Error("config key '" + key + "': expected an integer, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw Error("config key '" + key + "': expected true or false, got '" + v + "'");
}

std::string join(const std::vector<std::string>& items, char sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

struct Key {
  std::string name;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

template <typename T>
Key int_key(std::string name, T ExperimentConfig::*field) {
  return {name, [field](const ExperimentConfig& c) { return std::to_string(c.*field); },
          [field, name](ExperimentConfig& c, const std::string& v) { c.*field = parse_int<T>(name, v); }};
}

Key double_key(std::string name, double ExperimentConfig::*field) {
  return {name, [field](const ExperimentConfig& c) { return fmt_double(c.*field); },
          [field, name](ExperimentConfig& c, const std::string& v) { c.*field = parse_double(name, v); }};
}

Key string_key(std::string name, std::string ExperimentConfig::*field) {
  return {name, [field](const ExperimentConfig& c) { return c.*field; },
          [field](ExperimentConfig& c, const std::string& v) { c.*field = v; }};
}

std::string spec_text(const NotaFeatureSpec& s) {
  std::vector<std::string> parts;
  for (NotaBlock b : s.blocks) parts.emplace_back(to_string(b));
  return join(parts, '+');
}

const std::vector<Key>& keys() {
  static const std::vector<Key> table = [] {
    std::vector<Key> k;
    k.push_back(int_key("seed", &ExperimentConfig::seed));
    k.push_back(string_key("output_dir", &ExperimentConfig::output_dir));
    k.push_back(string_key("corpus.train", &ExperimentConfig::train_corpus));
    k.push_back(string_key("corpus.test", &ExperimentConfig::test_corpus));
    k.push_back(string_key("corpus.shifted_train", &ExperimentConfig::shifted_train_corpus));
    k.push_back(string_key("corpus.shifted_test", &ExperimentConfig::shifted_test_corpus));

    auto syn_int = [&](std::string name, auto SyntheticCorpusSpec::*field) {
      using T = std::remove_reference_t<decltype(std::declval<SyntheticCorpusSpec>().*field)>;
      k.push_back({name, [field](const ExperimentConfig& c) { return std::to_string(c.synthetic.*field); },
                   [field, name](ExperimentConfig& c, const std::string& v) { c.synthetic.*field = parse_int<T>(name, v); }});
    };
    auto syn_double = [&](std::string name, double SyntheticCorpusSpec::*field) {
      k.push_back({name, [field](const ExperimentConfig& c) { return fmt_double(c.synthetic.*field); },
                   [field, name](ExperimentConfig& c, const std::string& v) { c.synthetic.*field = parse_double(name, v); }});
    };
    syn_int("synthetic.train_instances", &SyntheticCorpusSpec::instances);
    k.push_back(int_key("synthetic.test_instances", &ExperimentConfig::synthetic_test_instances));
    syn_int("synthetic.vocab_size", &SyntheticCorpusSpec::vocab_size);
    syn_int("synthetic.candidates", &SyntheticCorpusSpec::candidates);
    syn_int("synthetic.utterances_min", &SyntheticCorpusSpec::utterances_min);
    syn_int("synthetic.utterances_max", &SyntheticCorpusSpec::utterances_max);
    syn_int("synthetic.utterance_length_min", &SyntheticCorpusSpec::utterance_length_min);
    syn_int("synthetic.utterance_length_max", &SyntheticCorpusSpec::utterance_length_max);
    syn_int("synthetic.response_length_min", &SyntheticCorpusSpec::response_length_min);
    syn_int("synthetic.response_length_max", &SyntheticCorpusSpec::response_length_max);
    syn_double("synthetic.relevant_overlap", &SyntheticCorpusSpec::relevant_overlap);
    syn_double("synthetic.distractor_overlap", &SyntheticCorpusSpec::distractor_overlap);
    syn_double("synthetic.zipf_exponent", &SyntheticCorpusSpec::zipf_exponent);
    k.push_back(double_key("synthetic.shift", &ExperimentConfig::synthetic_shift));

    k.push_back({"ns.train", [](const ExperimentConfig& c) { return ns_name(c.train_ns); },
                 [](ExperimentConfig& c, const std::string& v) { c.train_ns = ns_from_name(v); }});
    k.push_back({"ns.test", [](const ExperimentConfig& c) { return ns_name(c.test_ns); },
                 [](ExperimentConfig& c, const std::string& v) { c.test_ns = ns_from_name(v); }});
    k.push_back(int_key("ns.negatives", &ExperimentConfig::negatives));

    k.push_back({"train.learning_rate", [](const ExperimentConfig& c) { return fmt_double(c.train.learning_rate); },
                 [](ExperimentConfig& c, const std::string& v) { c.train.learning_rate = parse_double("train.learning_rate", v); }});
    k.push_back({"train.epochs", [](const ExperimentConfig& c) { return std::to_string(c.train.epochs); },
                 [](ExperimentConfig& c, const std::string& v) { c.train.epochs = parse_int<int>("train.epochs", v); }});
    k.push_back({"train.batch_size", [](const ExperimentConfig& c) { return std::to_string(c.train.batch_size); },
                 [](ExperimentConfig& c, const std::string& v) { c.train.batch_size = parse_int<int>("train.batch_size", v); }});
    k.push_back({"train.balance", [](const ExperimentConfig& c) { return std::string(c.train.balance ? "true" : "false"); },
                 [](ExperimentConfig& c, const std::string& v) { c.train.balance = parse_bool("train.balance", v); }});
    k.push_back({"train.hidden", [](const ExperimentConfig& c) { return std::to_string(c.train.hidden_dim); },
                 [](ExperimentConfig& c, const std::string& v) { c.train.hidden_dim = parse_int<int>("train.hidden", v); }});
    k.push_back({"train.dropout_rate", [](const ExperimentConfig& c) { return fmt_double(c.train.dropout_rate); },
                 [](ExperimentConfig& c, const std::string& v) { c.train.dropout_rate = parse_double("train.dropout_rate", v); }});

    k.push_back(int_key("ensemble.members", &ExperimentConfig::ensemble_members));
    k.push_back(int_key("dropout.passes", &ExperimentConfig::dropout_passes));
    k.push_back({"dropout.mask_sharing", [](const ExperimentConfig& c) { return std::string(to_string(c.mask_sharing)); },
                 [](ExperimentConfig& c, const std::string& v) { c.mask_sharing = mask_sharing_from_string(v); }});

    k.push_back({"risk.b", [](const ExperimentConfig& c) { return fmt_double(c.risk.b); },
                 [](ExperimentConfig& c, const std::string& v) { c.risk.b = parse_double("risk.b", v); }});
    k.push_back({"risk.grid",
                 [](const ExperimentConfig& c) {
                   std::vector<std::string> parts;
                   for (double b : c.risk.b_grid) parts.push_back(fmt_double(b));
                   return join(parts, ',');
                 },
                 [](ExperimentConfig& c, const std::string& v) {
                   c.risk.b_grid.clear();
                   for (const auto& item : split_list(v, ',')) c.risk.b_grid.push_back(parse_double("risk.grid", item));
                 }});
    k.push_back({"risk.include_self_covariance",
                 [](const ExperimentConfig& c) { return std::string(c.risk.include_self_covariance ? "true" : "false"); },
                 [](ExperimentConfig& c, const std::string& v) {
                   c.risk.include_self_covariance = parse_bool("risk.include_self_covariance", v);
                 }});
    k.push_back(double_key("risk.validation_fraction", &ExperimentConfig::validation_fraction));

    k.push_back(int_key("calibration.buckets", &ExperimentConfig::calibration_buckets));
    k.push_back(int_key("calibration.non_rel_per_query", &ExperimentConfig::non_rel_per_query));
    k.push_back({"calibration.binning",
                 [](const ExperimentConfig& c) { return std::string(c.binning == Binning::equal_width ? "width" : "mass"); },
                 [](ExperimentConfig& c, const std::string& v) {
                   if (v == "width") c.binning = Binning::equal_width;
                   else if (v == "mass") c.binning = Binning::equal_mass;
                   else throw Error("config key 'calibration.binning': expected width or mass");
                 }});
    k.push_back({"calibration.reducer", [](const ExperimentConfig& c) { return std::string(to_string(c.reducer)); },
                 [](ExperimentConfig& c, const std::string& v) { c.reducer = reducer_from_string(v); }});
    k.push_back({"calibration.figure_non_rel",
                 [](const ExperimentConfig& c) {
                   std::vector<std::string> parts;
                   for (int v : c.figure_non_rel) parts.push_back(std::to_string(v));
                   return join(parts, ',');
                 },
                 [](ExperimentConfig& c, const std::string& v) {
                   c.figure_non_rel.clear();
                   for (const auto& item : split_list(v, ',')) {
                     c.figure_non_rel.push_back(parse_int<int>("calibration.figure_non_rel", item));
                   }
                 }});

    k.push_back(int_key("nota.folds", &ExperimentConfig::nota_folds));
    k.push_back(int_key("nota.forest_trees", &ExperimentConfig::forest_trees));
    k.push_back({"nota.specs",
                 [](const ExperimentConfig& c) {
                   std::vector<std::string> parts;
                   for (const auto& s : c.nota_specs) parts.push_back(spec_text(s));
                   return join(parts, ';');
                 },
                 [](ExperimentConfig& c, const std::string& v) {
                   const bool sorted = c.nota_specs.empty() ? true : c.nota_specs.front().sorted;
                   const auto source = c.nota_specs.empty() ? DistributionSource::dropout : c.nota_specs.front().mean_source;
                   c.nota_specs.clear();
                   for (const auto& item : split_list(v, ';')) {
                     NotaFeatureSpec spec;
                     spec.blocks.clear();
                     for (const auto& b : split_list(item, '+')) spec.blocks.push_back(nota_block_from_string(b));
                     spec.sorted = sorted;
                     spec.mean_source = source;
                     spec.validate();
                     c.nota_specs.push_back(spec);
                   }
                 }});
    k.push_back({"nota.sorted",
                 [](const ExperimentConfig& c) {
                   return std::string(c.nota_specs.empty() || c.nota_specs.front().sorted ? "true" : "false");
                 },
                 [](ExperimentConfig& c, const std::string& v) {
                   const bool sorted = parse_bool("nota.sorted", v);
                   for (auto& s : c.nota_specs) s.sorted = sorted;
                 }});
    k.push_back({"nota.mean_source",
                 [](const ExperimentConfig& c) {
                   return std::string(to_string(c.nota_specs.empty() ? DistributionSource::dropout : c.nota_specs.front().mean_source));
                 },
                 [](ExperimentConfig& c, const std::string& v) {
                   const auto src = distribution_source_from_string(v);
                   if (src == DistributionSource::deterministic) throw Error("config key 'nota.mean_source': expected ensemble or dropout");
                   for (auto& s : c.nota_specs) s.mean_source = src;
                 }});

    k.push_back({"grid.sources", [](const ExperimentConfig& c) { return join(c.grid_sources, ','); },
                 [](ExperimentConfig& c, const std::string& v) { c.grid_sources = split_list(v, ','); }});
    k.push_back({"grid.targets", [](const ExperimentConfig& c) { return join(c.grid_targets, ','); },
                 [](ExperimentConfig& c, const std::string& v) { c.grid_targets = split_list(v, ','); }});
    k.push_back({"grid.test_ns",
                 [](const ExperimentConfig& c) {
                   std::vector<std::string> parts;
                   for (const auto& n : c.grid_test_ns) parts.push_back(ns_name(n));
                   return join(parts, ',');
                 },
                 [](ExperimentConfig& c, const std::string& v) {
                   c.grid_test_ns.clear();
                   for (const auto& item : split_list(v, ',')) c.grid_test_ns.push_back(ns_from_name(item));
                 }});
    return k;
  }();
  return table;
}

std::string env_name(const std::string& key) {
  std::string out = kEnvPrefix;
  for (char ch : key) out += ch == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return out;
}

}  // namespace

std::string ns_name(const std::optional<NsStrategy>& ns) { return ns ? std::string(to_string(*ns)) : "keep"; }

std::optional<NsStrategy> ns_from_name(const std::string& name) {
  if (name == "keep") return std::nullopt;
  return ns_strategy_from_string(name);
}

ExperimentConfig::ExperimentConfig() {
  nota_specs = {NotaFeatureSpec{{NotaBlock::sorted_means}},
                NotaFeatureSpec{{NotaBlock::sorted_means, NotaBlock::sorted_vars_ensemble}},
                NotaFeatureSpec{{NotaBlock::sorted_means, NotaBlock::sorted_vars_dropout}},
                NotaFeatureSpec{{NotaBlock::sorted_means, NotaBlock::sorted_vars_ensemble, NotaBlock::sorted_vars_dropout}}};
  risk.b = 0.25;
  grid_sources = {"in"};
  grid_targets = {"in", "shifted"};
  grid_test_ns = {std::nullopt};
  domains["in"] = {"out/train.jsonl", "out/test.jsonl"};
  domains["shifted"] = {"out/train_shifted.jsonl", "out/test_shifted.jsonl"};
}

std::filesystem::path ExperimentConfig::resolve(const std::string& path) const {
  std::filesystem::path p(path);
  if (p.is_absolute() || base_dir.empty()) return p;
  return base_dir / p;
}

std::filesystem::path ExperimentConfig::output_path(const std::string& name) const {
  return resolve(output_dir) / name;
}

std::vector<std::uint64_t> ExperimentConfig::member_seeds() const {
  std::vector<std::uint64_t> seeds;
  for (int m = 0; m < ensemble_members; ++m) seeds.push_back(derive_seed(seed, "ensemble.member", static_cast<std::uint64_t>(m)));
  return seeds;
}

EnsembleSpec ExperimentConfig::ensemble_spec() const { return {member_seeds(), train}; }

DropoutSpec ExperimentConfig::dropout_spec() const {
  return {dropout_passes, train.dropout_rate, derive_seed(seed, "dropout.passes"), mask_sharing};
}

void ExperimentConfig::validate() const {
  train.validate();
  risk.validate();
  if (ensemble_members < 2) throw Error("ensemble.members must be >= 2");
  if (dropout_passes < 2) throw Error("dropout.passes must be >= 2");
  if (!(train.dropout_rate > 0.0)) throw Error("train.dropout_rate must be > 0 for dropout prediction");
  if (calibration_buckets < 1) throw Error("calibration.buckets must be >= 1");
  if (non_rel_per_query < 1) throw Error("calibration.non_rel_per_query must be >= 1");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) throw Error("risk.validation_fraction must lie in (0, 1)");
  if (nota_folds < 2) throw Error("nota.folds must be >= 2");
  if (negatives < 1) throw Error("ns.negatives must be >= 1");
  for (const auto& s : nota_specs) s.validate();
  for (const auto& name : grid_sources) {
    if (!domains.count(name)) throw Error("grid source '" + name + "' has no domain.<name>.* paths");
  }
  for (const auto& name : grid_targets) {
    if (!domains.count(name)) throw Error("grid target '" + name + "' has no domain.<name>.* paths");
  }
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::ostringstream os;
  std::string section;
  for (const auto& key : keys()) {
    const auto dot = key.name.find('.');
    const std::string sec = dot == std::string::npos ? "" : key.name.substr(0, dot);
    if (sec != section) {
      os << '\n';
      section = sec;
    }
    os << key.name << " = " << key.get(cfg) << '\n';
  }
  os << '\n';
  std::vector<std::string> names;
  for (const auto& [name, _] : cfg.domains) names.push_back(name);
  os << "domains = " << join(names, ',') << '\n';
  for (const auto& [name, paths] : cfg.domains) {
    os << "domain." << name << ".train = " << paths.train << '\n';
    os << "domain." << name << ".test = " << paths.test << '\n';
  }
  return os.str();
}

void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& k : keys()) {
    if (k.name == key) {
      k.set(cfg, value);
      return;
    }
  }
  if (key == "domains") {
    std::map<std::string, DomainPaths> next;
    for (const auto& name : split_list(value, ',')) {
      auto it = cfg.domains.find(name);
      next[name] = it == cfg.domains.end() ? DomainPaths{} : it->second;
    }
    cfg.domains = std::move(next);
    return;
  }
  if (key.rfind("domain.", 0) == 0) {
    const auto last = key.rfind('.');
    const std::string name = key.substr(7, last - 7);
    const std::string field = key.substr(last + 1);
    if (name.empty() || last <= 7) throw Error("bad domain key '" + key + "'");
    if (field == "train") cfg.domains[name].train = value;
    else if (field == "test") cfg.domains[name].test = value;
    else throw Error("unknown domain field in '" + key + "' (expected train or test)");
    return;
  }
  throw Error("unknown config key '" + key + "'");
}

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  ExperimentConfig cfg;
  cfg.base_dir = base_dir;
  std::istringstream is(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw Error("config line " + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    try {
      set_config_value(cfg, key, value);
    } catch (const Error& e) {
      throw Error("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  auto base = path.parent_path();
  if (base.empty()) base = ".";
  return parse_config(ss.str(), base);
}

void apply_env_overrides(ExperimentConfig& cfg) {
  std::vector<std::string> names;
  for (const auto& k : keys()) names.push_back(k.name);
  for (const auto& [domain, _] : cfg.domains) {
    names.push_back("domain." + domain + ".train");
    names.push_back("domain." + domain + ".test");
  }
  for (const auto& name : names) {
    const std::string var = env_name(name);
    const char* v = std::getenv(var.c_str());
    if (!v) continue;
    try {
      set_config_value(cfg, name, trim(v));
    } catch (const Error& e) {
      throw Error("environment variable " + var + ": " + e.what());
    }
  }
}

std::string config_hash(const ExperimentConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(serialize_config(cfg))));
  return buf;
}

}  // namespace uqrank
