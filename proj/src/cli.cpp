#include "uqrank/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "uqrank/evaluation.hpp"
#include "uqrank/experiment.hpp"
#include "uqrank/grid.hpp"
#include "uqrank/random.hpp"
#include "uqrank/reports.hpp"
#include "uqrank/run_file.hpp"

namespace uqrank {

namespace {

namespace fs = std::filesystem;

constexpr DistributionSource kSources[] = {DistributionSource::deterministic, DistributionSource::ensemble,
                                           DistributionSource::dropout};

std::string hash_header(const ExperimentConfig& cfg) { return "config=" + config_hash(cfg); }

std::vector<DialogueInstance> load_training_set(const ExperimentConfig& cfg, const std::string& path) {
  return apply_negative_sampling(load_corpus(cfg.resolve(path)), cfg.train_ns, cfg.negatives,
                                 derive_seed(cfg.seed, "ns.train"));
}

std::vector<DialogueInstance> load_eval_set(const ExperimentConfig& cfg, const std::string& path) {
  return apply_negative_sampling(load_corpus(cfg.resolve(path)), cfg.test_ns, cfg.negatives,
                                 derive_seed(cfg.seed, "ns.test"));
}

// Paths given on the command line are relative to the working directory, unlike
// paths inside the config file.
std::string flag_path(const std::string& s) { return s.empty() ? s : fs::absolute(s).string(); }

fs::path member_path(const fs::path& dir, int m) { return dir / ("member-" + std::to_string(m) + ".scorer"); }

std::vector<fs::path> save_models(const TrainedModels& models, const fs::path& dir, const ExperimentConfig& cfg) {
  fs::create_directories(dir);
  std::vector<fs::path> out;
  for (std::size_t m = 0; m < models.members.size(); ++m) {
    out.push_back(member_path(dir, static_cast<int>(m)));
    save_parameters(out.back(), models.members[m], config_hash(cfg));
  }
  return out;
}

TrainedModels load_models(const ExperimentConfig& cfg, const fs::path& dir, const std::string& train_path) {
  TrainedModels models;
  models.stats = TermStats::from_corpus(load_training_set(cfg, train_path));
  for (int m = 0; m < cfg.ensemble_members; ++m) {
    models.members.push_back(load_parameters(member_path(dir, m), kFeatureDim, cfg.train.hidden_dim));
  }
  return models;
}

std::string curve_label(const std::string& split, DistributionSource src, int non_rel) {
  return split + "/" + std::string(to_string(src)) + "/" + std::to_string(non_rel);
}

std::vector<NotaRow> evaluate_nota(const ExperimentConfig& cfg, std::vector<NotaInstance> dataset,
                                   const std::vector<PredictiveDistribution>& ensemble,
                                   const std::vector<PredictiveDistribution>& dropout) {
  std::map<std::string, SourceDistributions> by_base;
  for (const auto& d : ensemble) by_base[d.instance_id].emplace(DistributionSource::ensemble, d);
  for (const auto& d : dropout) by_base[d.instance_id].emplace(DistributionSource::dropout, d);
  std::vector<NotaRow> rows;
  for (const auto& spec : cfg.nota_specs) {
    for (auto& inst : dataset) {
      auto it = by_base.find(inst.base_id);
      if (it == by_base.end()) throw Error("no distributions for NOTA instance '" + inst.base_id + "'");
      inst.features = extract_nota_features(inst, it->second, spec);
    }
    ForestConfig forest;
    forest.trees = cfg.forest_trees;
    rows.push_back({spec.label(), train_eval_nota(dataset, cfg.nota_folds, derive_seed(cfg.seed, "nota.cv"), forest)});
  }
  return rows;
}

std::string fnv_hex(const std::string& bytes) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Options shared by every subcommand.
struct CommonOptions {
  std::string config;
  std::vector<std::string> sets;
};

void add_common(CLI::App* sub, CommonOptions& common) {
  sub->add_option("-c,--config", common.config, "Config file (flat 'section.key = value' lines)");
  sub->add_option("-s,--set", common.sets, "Override one config key, e.g. --set train.epochs=3")->take_all();
}

ExperimentConfig load_effective_config(const CommonOptions& common) {
  ExperimentConfig cfg;
  if (!common.config.empty()) {
    cfg = load_config(common.config);
  } else {
    cfg.base_dir = fs::current_path();
  }
  apply_env_overrides(cfg);
  for (const auto& kv : common.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error("--set expects key=value, got '" + kv + "'");
    set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

std::string config_help() {
  std::ostringstream os;
  os << "Config file: one 'section.key = value' per line, '#' starts a comment.\n"
     << "Relative paths resolve against the config file's directory. Any key can be\n"
     << "overridden with --set key=value or an environment variable " << kEnvPrefix << "SECTION_KEY\n"
     << "(dots become underscores). Keys and defaults:\n";
  std::istringstream lines(serialize_config(ExperimentConfig{}));
  std::string line;
  while (std::getline(lines, line)) {
    if (!line.empty()) os << "  " << line << '\n';
  }
  return os.str();
}

}  // namespace

std::vector<fs::path> generate_corpora(const ExperimentConfig& cfg) {
  struct Split {
    const char* name;
    std::string path;
    std::size_t instances;
    double rotation;
  };
  const Split splits[] = {
      {"train", cfg.train_corpus, cfg.synthetic.instances, 0.0},
      {"test", cfg.test_corpus, cfg.synthetic_test_instances, 0.0},
      {"shifted_train", cfg.shifted_train_corpus, cfg.synthetic.instances, cfg.synthetic_shift},
      {"shifted_test", cfg.shifted_test_corpus, cfg.synthetic_test_instances, cfg.synthetic_shift},
  };
  std::vector<fs::path> out;
  for (const auto& s : splits) {
    SyntheticCorpusSpec spec = cfg.synthetic;
    spec.instances = s.instances;
    spec.vocab_rotation = s.rotation;
    spec.seed = derive_seed(cfg.seed, std::string("synthetic.") + s.name);
    spec.id_prefix = s.name;
    const fs::path path = cfg.resolve(s.path);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    save_corpus(path, generate_synthetic_corpus(spec), hash_header(cfg));
    out.push_back(path);
  }
  return out;
}

std::vector<fs::path> run_pipeline(const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  const std::string hash = config_hash(cfg);
  const fs::path root = cfg.resolve(cfg.output_dir);
  std::vector<fs::path> artifacts;

  log << "gen\n";
  for (const auto& p : generate_corpora(cfg)) artifacts.push_back(p);

  log << "train\n";
  const auto train_set = load_training_set(cfg, cfg.train_corpus);
  const TrainedModels models = train_models(train_set, cfg);
  for (const auto& p : save_models(models, root / "models", cfg)) artifacts.push_back(p);

  log << "predict\n";
  struct SplitRuns {
    std::string name;
    std::vector<DialogueInstance> corpus;
    std::map<DistributionSource, std::vector<PredictiveDistribution>> dists;
  };
  std::vector<SplitRuns> splits;
  splits.push_back({"test", load_eval_set(cfg, cfg.test_corpus), {}});
  splits.push_back({"shifted", load_eval_set(cfg, cfg.shifted_test_corpus), {}});
  for (auto& split : splits) {
    for (DistributionSource src : kSources) {
      auto dists = predict_corpus(models, split.corpus, src, cfg);
      const fs::path path = root / "runs" / (split.name + "." + std::string(to_string(src)) + ".run");
      fs::create_directories(path.parent_path());
      write_run_file(path, make_run_file(models, dists, src, cfg));
      artifacts.push_back(path);
      // Analysis below reads the run files back, as the standalone commands do.
      split.dists[src] = read_run_file(path).distributions;
    }
  }

  log << "calibrate\n";
  std::vector<ReliabilityCurve> curves;
  std::vector<ReliabilityCurve> figure;
  for (const auto& split : splits) {
    for (DistributionSource src : kSources) {
      const auto cases = pair_with_corpus(split.dists.at(src), split.corpus);
      curves.push_back({curve_label(split.name, src, cfg.non_rel_per_query),
                        balanced_ece(cases, cfg.reducer, cfg, cfg.non_rel_per_query)});
      if (split.name == "test" && src == DistributionSource::deterministic) {
        for (int nr : cfg.figure_non_rel) {
          figure.push_back({curve_label(split.name, src, nr), balanced_ece(cases, cfg.reducer, cfg, nr)});
        }
      }
    }
  }
  write_reliability_csv(root / "calibration" / "reliability.csv", curves, hash);
  write_ece_summary_csv(root / "calibration" / "ece.csv", curves, hash);
  write_reliability_csv(root / "calibration" / "reliability_non_rel.csv", figure, hash);
  for (const char* name : {"reliability.csv", "reliability.csv.vl.json", "ece.csv", "reliability_non_rel.csv",
                           "reliability_non_rel.csv.vl.json"}) {
    artifacts.push_back(root / "calibration" / name);
  }

  log << "sweep-b\n";
  std::ostringstream selected;
  selected << "# config=" << hash << "\nsplit,source,b,r1_b0,r1_selected\n";
  for (const auto& split : splits) {
    for (DistributionSource src : {DistributionSource::ensemble, DistributionSource::dropout}) {
      const auto cases = pair_with_corpus(split.dists.at(src), split.corpus);
      const std::string stem = split.name + "." + std::string(to_string(src));
      const fs::path path = root / "sweep" / (stem + ".csv");
      write_sweep_csv(path, sweep_report(cases, cfg.risk.b_grid, 1, cfg.risk.include_self_covariance), hash);
      artifacts.push_back(path);
      artifacts.push_back(path.string() + ".vl.json");

      const auto [val, test] = split_validation(cases, cfg.validation_fraction, derive_seed(cfg.seed, "grid.split"));
      const double b = select_b(val, cfg.risk.b_grid, 1, cfg.risk.include_self_covariance);
      selected << split.name << ',' << to_string(src) << ',' << format_number(b) << ','
               << format_number(mean_recall(test, 0.0, 1, cfg.risk.include_self_covariance)) << ','
               << format_number(mean_recall(test, b, 1, cfg.risk.include_self_covariance)) << '\n';
    }
  }
  write_text(root / "sweep" / "selected_b.csv", selected.str());
  artifacts.push_back(root / "sweep" / "selected_b.csv");

  log << "nota\n";
  const auto& test_split = splits.front();
  auto dataset = build_nota_dataset(test_split.corpus, derive_seed(cfg.seed, "nota.dataset"));
  fs::create_directories(root / "nota");
  save_nota_dataset(root / "nota" / "dataset.jsonl", dataset, hash_header(cfg));
  artifacts.push_back(root / "nota" / "dataset.jsonl");
  const auto rows = evaluate_nota(cfg, std::move(dataset), test_split.dists.at(DistributionSource::ensemble),
                                  test_split.dists.at(DistributionSource::dropout));
  write_nota_csv(root / "nota" / "results.csv", rows, hash);
  artifacts.push_back(root / "nota" / "results.csv");

  std::vector<fs::path> relative;
  std::ostringstream manifest;
  manifest << "# config=" << hash << '\n';
  for (const auto& p : artifacts) {
    const fs::path rel = fs::relative(p, root);
    const std::string bytes = read_bytes(p);
    manifest << fnv_hex(bytes) << ' ' << bytes.size() << ' ' << rel.generic_string() << '\n';
    relative.push_back(rel);
  }
  write_text(root / "manifest.txt", manifest.str());
  relative.push_back("manifest.txt");
  return relative;
}

int cli_dispatch(const std::vector<std::string>& args) {
  std::vector<char*> argv;
  std::vector<std::string> storage = args;
  for (auto& a : storage) argv.push_back(a.data());
  argv.push_back(nullptr);
  return cli_dispatch(static_cast<int>(storage.size()), argv.data());
}

int cli_dispatch(int argc, char** argv) {
  CLI::App app{"Calibration and uncertainty tooling for pointwise response rankers"};
  app.name("uqrank");
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  app.footer(config_help());

  CommonOptions common;
  std::function<void()> action;

  // gen
  auto* gen = app.add_subcommand("gen", "Generate the synthetic train/test corpora named by the config");
  add_common(gen, common);
  std::string gen_out;
  std::size_t gen_instances = 0;
  double gen_shift = 0.0;
  std::string gen_name = "custom";
  gen->add_option("--out", gen_out, "Write a single corpus here instead of the configured set");
  gen->add_option("--instances", gen_instances, "Instance count for --out");
  gen->add_option("--shift", gen_shift, "Vocabulary rotation for --out")->check(CLI::Range(0.0, 1.0));
  gen->add_option("--name", gen_name, "Seed stream and id prefix for --out");
  gen->callback([&] {
    action = [&] {
      const auto cfg = load_effective_config(common);
      if (gen_out.empty()) {
        for (const auto& p : generate_corpora(cfg)) std::cout << p.string() << '\n';
        return;
      }
      SyntheticCorpusSpec spec = cfg.synthetic;
      if (gen_instances > 0) spec.instances = gen_instances;
      spec.vocab_rotation = gen_shift;
      spec.seed = derive_seed(cfg.seed, "synthetic." + gen_name);
      spec.id_prefix = gen_name;
      save_corpus(gen_out, generate_synthetic_corpus(spec), hash_header(cfg));
      std::cout << gen_out << '\n';
    };
  });

  // sample-negatives
  auto* ns = app.add_subcommand("sample-negatives", "Rebuild candidate lists with a negative sampling strategy");
  add_common(ns, common);
  std::string ns_in, ns_out, ns_strategy, ns_pool;
  std::size_t ns_m = 0;
  ns->add_option("--in", ns_in, "Input corpus")->required();
  ns->add_option("--out", ns_out, "Output corpus")->required();
  ns->add_option("--strategy", ns_strategy, "random | bm25 | embed")->required();
  ns->add_option("--negatives", ns_m, "Negatives per instance (default ns.negatives)");
  ns->add_option("--save-pool", ns_pool, "Also write <prefix>.index and <prefix>.emb");
  ns->callback([&] {
    action = [&] {
      const auto cfg = load_effective_config(common);
      const auto strategy = ns_strategy_from_string(ns_strategy);
      const auto corpus = load_corpus(ns_in);
      const ResponsePool pool = ResponsePool::from_corpus(corpus);
      if (!ns_pool.empty()) pool.save(ns_pool);
      std::size_t padded = 0;
      const auto out = resample_corpus(corpus, pool, strategy, ns_m ? ns_m : cfg.negatives,
                                       derive_seed(cfg.seed, "sample-negatives"), &padded);
      save_corpus(ns_out, out, hash_header(cfg));
      std::cout << "instances=" << out.size() << " padded=" << padded << '\n';
    };
  });

  // train
  auto* tr = app.add_subcommand("train", "Train the ensemble members (member 0 is the deterministic baseline)");
  add_common(tr, common);
  std::string tr_corpus, tr_out;
  tr->add_option("--corpus", tr_corpus, "Training corpus (default corpus.train)");
  tr->add_option("--models", tr_out, "Model directory (default <output_dir>/models)");
  tr->callback([&] {
    action = [&] {
      const auto cfg = load_effective_config(common);
      cfg.validate();
      const auto models = train_models(load_training_set(cfg, tr_corpus.empty() ? cfg.train_corpus : flag_path(tr_corpus)), cfg);
      for (const auto& p : save_models(models, tr_out.empty() ? cfg.output_path("models") : fs::path(tr_out), cfg)) {
        std::cout << p.string() << '\n';
      }
    };
  });

  // predict
  auto* pr = app.add_subcommand("predict", "Score a corpus and write a run file");
  add_common(pr, common);
  std::string pr_source = "deterministic", pr_corpus, pr_models, pr_train, pr_out;
  pr->add_option("--source", pr_source, "deterministic | ensemble | dropout");
  pr->add_option("--corpus", pr_corpus, "Corpus to score (default corpus.test)");
  pr->add_option("--models", pr_models, "Model directory (default <output_dir>/models)");
  pr->add_option("--train-corpus", pr_train, "Corpus the models were trained on (default corpus.train)");
  pr->add_option("--out", pr_out, "Run file")->required();
  pr->callback([&] {
    action = [&] {
      const auto cfg = load_effective_config(common);
      cfg.validate();
      const auto src = distribution_source_from_string(pr_source);
      const auto models = load_models(cfg, pr_models.empty() ? cfg.output_path("models") : fs::path(pr_models),
                                      pr_train.empty() ? cfg.train_corpus : flag_path(pr_train));
      const auto corpus = load_eval_set(cfg, pr_corpus.empty() ? cfg.test_corpus : flag_path(pr_corpus));
      write_run_file(pr_out, make_run_file(models, predict_corpus(models, corpus, src, cfg), src, cfg));
    };
  });

  // Shared by the run-file consumers.
  std::string run_path, run_corpus, out_path;
  auto add_run_options = [&](CLI::App* sub, bool needs_out) {
    add_common(sub, common);
    sub->add_option("--run", run_path, "Run file written by predict")->required();
    sub->add_option("--corpus", run_corpus, "Corpus with the relevance labels (default corpus.test)");
    auto* o = sub->add_option("--out", out_path, "Output file");
    if (needs_out) o->required();
  };
  auto run_cases = [&](const ExperimentConfig& cfg) {
    const auto run = read_run_file(run_path);
    return pair_with_corpus(run.distributions, load_eval_set(cfg, run_corpus.empty() ? cfg.test_corpus : flag_path(run_corpus)));
  };

  // calibrate
  auto* cal = app.add_subcommand("calibrate", "Balanced ECE and reliability table of a run file");
  add_run_options(cal, true);
  std::string cal_reducer;
  int cal_non_rel = 0;
  cal->add_option("--reducer", cal_reducer, "mean | deterministic (default calibration.reducer)");
  cal->add_option("--non-rel", cal_non_rel, "Non-relevant candidates per query (default calibration.non_rel_per_query)");
  cal->callback([&] {
    action = [&] {
      auto cfg = load_effective_config(common);
      if (!cal_reducer.empty()) cfg.reducer = reducer_from_string(cal_reducer);
      if (cal_non_rel > 0) cfg.non_rel_per_query = cal_non_rel;
      const auto run = read_run_file(run_path);
      const auto cases =
          pair_with_corpus(run.distributions, load_eval_set(cfg, run_corpus.empty() ? cfg.test_corpus : flag_path(run_corpus)));
      std::vector<ReliabilityCurve> curves{{curve_label("run", run.source, cfg.non_rel_per_query),
                                            balanced_ece(cases, cfg.reducer, cfg, cfg.non_rel_per_query)}};
      write_reliability_csv(out_path, curves, config_hash(cfg));
      std::cout << "ece=" << format_number(curves.front().report.ece) << " n=" << curves.front().report.n << '\n';
    };
  });

  // rerank
  auto* rr = app.add_subcommand("rerank", "Risk-aware reranking of a run file");
  add_common(rr, common);
  double rr_b = 0.0;
  bool rr_b_set = false;
  std::string rr_run, rr_out;
  rr->add_option("--run", rr_run, "Run file written by predict")->required();
  rr->add_option("--out", rr_out, "Ranked-list TSV")->required();
  auto* rr_b_opt = rr->add_option("--b", rr_b, "Risk parameter (default risk.b)");
  rr->callback([&] {
    rr_b_set = rr_b_opt->count() > 0;
    action = [&] {
      const auto cfg = load_effective_config(common);
      const double b = rr_b_set ? rr_b : cfg.risk.b;
      const auto run = read_run_file(rr_run);
      std::vector<RankedList> lists;
      std::vector<std::vector<std::string>> ids;
      for (const auto& d : run.distributions) {
        const Eigen::VectorXd s = risk_adjusted_scores(d, b, cfg.risk.include_self_covariance);
        lists.push_back(make_ranked_list(d.instance_id, d.candidate_ids, std::vector<double>(s.begin(), s.end())));
        ids.push_back(d.candidate_ids);
      }
      write_ranked_lists(rr_out, lists, ids, config_hash(cfg));
    };
  });

  // sweep-b
  auto* sw = app.add_subcommand("sweep-b", "R@1 and relative gain over the b grid");
  add_run_options(sw, true);
  sw->callback([&] {
    action = [&] {
      const auto cfg = load_effective_config(common);
      const auto rows = sweep_report(run_cases(cfg), cfg.risk.b_grid, 1, cfg.risk.include_self_covariance);
      write_sweep_csv(out_path, rows, config_hash(cfg));
    };
  });

  // select-b
  auto* sb = app.add_subcommand("select-b", "Pick b on a validation run file");
  add_run_options(sb, false);
  sb->callback([&] {
    action = [&] {
      const auto cfg = load_effective_config(common);
      const auto cases = run_cases(cfg);
      const double b = select_b(cases, cfg.risk.b_grid, 1, cfg.risk.include_self_covariance);
      std::cout << "b=" << format_number(b) << '\n';
      if (!out_path.empty()) {
        write_text(out_path, "# config=" + config_hash(cfg) + "\nb,metric\n" + format_number(b) + "," +
                                 format_number(mean_recall(cases, b, 1, cfg.risk.include_self_covariance)) + "\n");
      }
    };
  });

  // nota
  auto* nt = app.add_subcommand("nota", "Build the NOTA dataset and compare feature sets with cross-validation");
  add_common(nt, common);
  std::string nt_corpus, nt_ens, nt_drop, nt_dataset, nt_out, nt_models;
  nt->add_option("--corpus", nt_corpus, "Base corpus (default corpus.test)");
  nt->add_option("--ensemble-run", nt_ens, "Ensemble run file over the base corpus");
  nt->add_option("--dropout-run", nt_drop, "Dropout run file over the base corpus");
  nt->add_option("--models", nt_models, "Model directory, used when run files are not given");
  nt->add_option("--dataset-out", nt_dataset, "Also write the NOTA dataset");
  nt->add_option("--out", nt_out, "Results CSV")->required();
  nt->callback([&] {
    action = [&] {
      const auto cfg = load_effective_config(common);
      cfg.validate();
      const auto corpus = load_eval_set(cfg, nt_corpus.empty() ? cfg.test_corpus : flag_path(nt_corpus));
      std::vector<PredictiveDistribution> ens, drop;
      if (!nt_ens.empty() && !nt_drop.empty()) {
        ens = read_run_file(nt_ens).distributions;
        drop = read_run_file(nt_drop).distributions;
      } else if (nt_ens.empty() && nt_drop.empty()) {
        const auto models = load_models(cfg, nt_models.empty() ? cfg.output_path("models") : fs::path(nt_models),
                                        cfg.train_corpus);
        ens = predict_corpus(models, corpus, DistributionSource::ensemble, cfg);
        drop = predict_corpus(models, corpus, DistributionSource::dropout, cfg);
      } else {
        throw Error("nota: give both --ensemble-run and --dropout-run, or neither");
      }
      auto dataset = build_nota_dataset(corpus, derive_seed(cfg.seed, "nota.dataset"));
      if (!nt_dataset.empty()) save_nota_dataset(nt_dataset, dataset, hash_header(cfg));
      const auto rows = evaluate_nota(cfg, std::move(dataset), ens, drop);
      write_nota_csv(nt_out, rows, config_hash(cfg));
      for (const auto& r : rows) {
        std::cout << r.features << '\t' << format_number(r.result.mean_f1) << '\t' << format_number(r.result.std_f1)
                  << '\n';
      }
    };
  });

  // grid
  auto* gr = app.add_subcommand("grid", "Cross-domain / cross-NS experiment grid");
  add_common(gr, common);
  std::string gr_out;
  gr->add_option("--out", gr_out, "Grid CSV (default <output_dir>/grid.csv)");
  gr->callback([&] {
    action = [&] {
      const auto cfg = load_effective_config(common);
      const auto grid = run_experiment_grid(cfg);
      const fs::path out = gr_out.empty() ? cfg.output_path("grid.csv") : fs::path(gr_out);
      write_grid_csv(out, grid, config_hash(cfg));
      std::cout << out.string() << '\n';
    };
  });

  // eval
  auto* ev = app.add_subcommand("eval", "R@K of ranked lists, with a paired t-test against a baseline");
  add_common(ev, common);
  std::string ev_ranked, ev_baseline, ev_corpus, ev_out;
  std::size_t ev_k = 1;
  ev->add_option("--ranked", ev_ranked, "Ranked-list TSV written by rerank")->required();
  ev->add_option("--baseline", ev_baseline, "Baseline ranked-list TSV");
  ev->add_option("--corpus", ev_corpus, "Corpus with the relevance labels (default corpus.test)");
  ev->add_option("--cutoff", ev_k, "K in R@K")->check(CLI::PositiveNumber);
  ev->add_option("--out", ev_out, "Metrics CSV");
  ev->callback([&] {
    action = [&] {
      const auto cfg = load_effective_config(common);
      const auto corpus = load_eval_set(cfg, ev_corpus.empty() ? cfg.test_corpus : flag_path(ev_corpus));
      std::map<std::string, const DialogueInstance*> by_id;
      for (const auto& inst : corpus) by_id[inst.id()] = &inst;
      auto per_query = [&](const std::string& path) {
        std::vector<double> out;
        for (const auto& [id, ranked_ids] : read_ranked_lists(path).lists) {
          auto it = by_id.find(id);
          if (it == by_id.end()) throw Error(path + ": unknown instance '" + id + "'");
          const auto cand_ids = it->second->candidate_ids();
          RankedList list;
          list.instance_id = id;
          list.final_scores.assign(cand_ids.size(), 0.0);
          for (const auto& cid : ranked_ids) {
            const auto pos = std::find(cand_ids.begin(), cand_ids.end(), cid);
            if (pos == cand_ids.end()) throw Error(path + ": unknown candidate '" + cid + "' in '" + id + "'");
            list.ordering.push_back(static_cast<std::size_t>(pos - cand_ids.begin()));
          }
          out.push_back(recall_at_k(list, it->second->labels(), cand_ids.size(), ev_k));
        }
        return out;
      };
      auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return v.empty() ? 0.0 : s / static_cast<double>(v.size());
      };
      const auto sys = per_query(ev_ranked);
      std::ostringstream os;
      os << "# config=" << config_hash(cfg) << "\nsystem,queries,recall";
      std::string row = "ranked," + std::to_string(sys.size()) + "," + format_number(mean(sys));
      if (!ev_baseline.empty()) {
        const auto base = per_query(ev_baseline);
        const auto t = paired_t_test(sys, base);
        os << ",baseline_recall,t,p_value,significant";
        row += "," + format_number(mean(base)) + "," + format_number(t.t) + "," + format_number(t.p_value) + "," +
               (significant(t) ? "true" : "false");
      }
      os << '\n' << row << '\n';
      if (ev_out.empty()) {
        std::cout << os.str();
      } else {
        write_text(ev_out, os.str());
      }
    };
  });

  // pipeline
  auto* pl = app.add_subcommand("pipeline", "gen, train, predict, calibrate, sweep-b and nota in one go");
  add_common(pl, common);
  pl->callback([&] {
    action = [&] {
      const auto cfg = load_effective_config(common);
      for (const auto& p : run_pipeline(cfg, std::cerr)) std::cout << p.generic_string() << '\n';
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  try {
    if (action) action();
  } catch (const std::exception& e) {
    std::cerr << "uqrank: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace uqrank
