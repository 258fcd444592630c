#include <doctest.h>

#include <numeric>
#include <sstream>

#include "helpers.hpp"
#include "uqrank/cli.hpp"
#include "uqrank/reports.hpp"
#include "uqrank/run_file.hpp"

using namespace uqrank;

namespace {

const char* kSmallConfig =
    "output_dir = out\n"
    "synthetic.train_instances = 80\n"
    "synthetic.test_instances = 30\n"
    "train.epochs = 2\n"
    "ensemble.members = 2\n"
    "dropout.passes = 3\n"
    "nota.forest_trees = 10\n"
    "nota.folds = 3\n";

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "uqrank");
  return cli_dispatch(args);
}

// Sum of the `size` column of a reliability CSV.
std::size_t reliability_total(const std::filesystem::path& csv) {
  std::istringstream in(testing::read_file(csv));
  std::string line;
  std::size_t total = 0;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      CHECK(line == "curve,bucket_low,bucket_high,size,mean_confidence,relevance_fraction");
      header = false;
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    REQUIRE(fields.size() == 6);
    total += std::stoul(fields[3]);
  }
  return total;
}

class Workspace {
 public:
  Workspace() : dir_("cli") {
    testing::write_file(dir_ / "small.conf", kSmallConfig);
    conf_ = (dir_ / "small.conf").string();
  }
  const std::string& conf() const { return conf_; }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

 private:
  testing::TempDir dir_;
  std::string conf_;
};

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("unknown subcommands and flags fail") {
    CHECK(run({"frobnicate"}) != 0);
    CHECK(run({"gen", "--no-such-flag"}) != 0);
    CHECK(run({}) != 0);
    CHECK(run({"calibrate", "--out", "x.csv"}) != 0);  // --run is required
  }

  TEST_CASE("runtime errors give a nonzero status") {
    Workspace ws;
    CHECK(run({"calibrate", "-c", ws.conf(), "--run", ws.path("missing.run"), "--out", ws.path("x.csv")}) == 1);
    CHECK(run({"gen", "-c", ws.conf(), "--set", "no.such.key=1"}) == 1);
    CHECK(run({"gen", "-c", ws.conf(), "--set", "broken"}) == 1);
  }

  TEST_CASE("predict, calibrate and rerank share the run file") {
    Workspace ws;
    REQUIRE(run({"gen", "-c", ws.conf()}) == 0);
    REQUIRE(run({"train", "-c", ws.conf()}) == 0);
    const auto run_path = ws.path("ens.run");
    REQUIRE(run({"predict", "-c", ws.conf(), "--source", "ensemble", "--out", run_path}) == 0);
    const auto rf = read_run_file(run_path);
    CHECK(rf.source == DistributionSource::ensemble);
    CHECK(rf.distributions.size() == 30);
    CHECK(rf.seeds.size() == 2);
    CHECK_FALSE(rf.config_hash.empty());

    // balanced: one relevant and one non-relevant per instance
    REQUIRE(run({"calibrate", "-c", ws.conf(), "--run", run_path, "--out", ws.path("cal1.csv")}) == 0);
    CHECK(reliability_total(ws.path("cal1.csv")) == 2 * rf.distributions.size());
    // every candidate
    REQUIRE(run({"calibrate", "-c", ws.conf(), "--run", run_path, "--non-rel", "9", "--out", ws.path("cal9.csv")}) ==
            0);
    std::size_t cells = 0;
    for (const auto& d : rf.distributions) cells += static_cast<std::size_t>(d.candidates());
    CHECK(reliability_total(ws.path("cal9.csv")) == cells);
    CHECK(testing::read_file(ws.path("cal1.csv")).rfind("# config=", 0) == 0);

    REQUIRE(run({"rerank", "-c", ws.conf(), "--run", run_path, "--b", "0", "--out", ws.path("b0.tsv")}) == 0);
    const auto ranked = read_ranked_lists(ws.path("b0.tsv"));
    REQUIRE(ranked.lists.size() == rf.distributions.size());
    for (std::size_t i = 0; i < rf.distributions.size(); ++i) {
      const auto& d = rf.distributions[i];
      const Eigen::VectorXd mean = d.scores.colwise().mean().transpose();
      std::vector<std::size_t> order(d.candidate_ids.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double ma = mean(static_cast<Eigen::Index>(a));
        const double mb = mean(static_cast<Eigen::Index>(b));
        return ma != mb ? ma > mb : d.candidate_ids[a] < d.candidate_ids[b];
      });
      std::vector<std::string> expected;
      for (auto j : order) expected.push_back(d.candidate_ids[j]);
      CHECK(ranked.lists[i].first == d.instance_id);
      CHECK(ranked.lists[i].second == expected);
    }

    REQUIRE(run({"eval", "-c", ws.conf(), "--ranked", ws.path("b0.tsv"), "--out", ws.path("eval.csv")}) == 0);
    REQUIRE(run({"sweep-b", "-c", ws.conf(), "--run", run_path, "--out", ws.path("sweep.csv")}) == 0);
    CHECK(std::filesystem::exists(ws.path("sweep.csv.vl.json")));
  }

  TEST_CASE("reruns are byte-identical") {
    Workspace a, b;
    for (const auto* ws : {&a, &b}) {
      REQUIRE(run({"gen", "-c", ws->conf()}) == 0);
      REQUIRE(run({"train", "-c", ws->conf()}) == 0);
      REQUIRE(run({"predict", "-c", ws->conf(), "--source", "dropout", "--out", ws->path("d.run")}) == 0);
    }
    CHECK(testing::read_file(a.path("out/train.jsonl")) == testing::read_file(b.path("out/train.jsonl")));
    CHECK(testing::read_file(a.path("out/models/member-0.scorer")) ==
          testing::read_file(b.path("out/models/member-0.scorer")));
    CHECK(testing::read_file(a.path("d.run")) == testing::read_file(b.path("d.run")));
  }

  TEST_CASE("pipeline writes every declared artifact with the config hash") {
    Workspace ws;
    const auto cfg = load_config(ws.conf());
    std::ostringstream log;
    const auto artifacts = run_pipeline(cfg, log);
    const auto root = cfg.output_path("");
    CHECK(std::filesystem::exists(root / "manifest.txt"));
    for (const char* expected : {"calibration/ece.csv", "calibration/reliability.csv", "nota/results.csv",
                                 "nota/dataset.jsonl", "runs/test.ensemble.run", "runs/shifted.dropout.run",
                                 "sweep/selected_b.csv"}) {
      CHECK_MESSAGE(std::find(artifacts.begin(), artifacts.end(), std::filesystem::path(expected)) != artifacts.end(),
                    expected);
    }
    const std::string hash = config_hash(cfg);
    for (const auto& rel : artifacts) {
      if (rel.extension() == ".json") {
        CHECK(testing::read_file(root / rel).find(hash) != std::string::npos);
        continue;
      }
      const auto text = testing::read_file(root / rel);
      // scorer files carry the hash on the line after their magic
      const auto second_nl = text.find('\n', text.find('\n') + 1);
      CHECK_MESSAGE(text.substr(0, second_nl).find(hash) != std::string::npos, rel.string());
    }
  }
}
