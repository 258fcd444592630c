#include <doctest.h>

#include <algorithm>
#include <set>

#include "helpers.hpp"
#include "uqrank/nota.hpp"
#include "uqrank/stochastic.hpp"

using namespace uqrank;

namespace {

std::vector<DialogueInstance> corpus_of(std::size_t n, std::size_t k) {
  std::vector<DialogueInstance> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(testing::make_instance("q" + std::to_string(i), k, i % k));
  return out;
}

NotaInstance with_features(std::string id, int label, Eigen::VectorXd f) {
  NotaInstance n{id, testing::make_instance(id, 2, label ? 99 : 0), label, std::move(f)};
  return n;
}

}  // namespace

TEST_SUITE("nota") {
  TEST_CASE("dataset construction counts") {
    const auto ds = build_nota_dataset(corpus_of(100, 10), 3);
    REQUIRE(ds.size() == 100);
    int nota = 0;
    for (const auto& n : ds) {
      CHECK(n.instance.size() == 9);
      CHECK(n.instance.relevant_count() == (n.label == 1 ? 0 : 1));
      nota += n.label;
    }
    CHECK(nota == 50);
  }

  TEST_CASE("odd sizes differ by at most one") {
    const auto ds = build_nota_dataset(corpus_of(37, 4), 8);
    int nota = 0;
    for (const auto& n : ds) nota += n.label;
    CHECK(std::abs(2 * nota - 37) <= 1);
  }

  TEST_CASE("k = 2 leaves one candidate") {
    const auto ds = build_nota_dataset(corpus_of(10, 2), 1);
    for (const auto& n : ds) {
      CHECK(n.instance.size() == 1);
      CHECK(n.instance.labels()[0] == (n.label == 1 ? 0 : 1));
    }
  }

  TEST_CASE("construction is seeded") {
    const auto corpus = corpus_of(60, 5);
    const auto a = build_nota_dataset(corpus, 11);
    const auto b = build_nota_dataset(corpus, 11);
    const auto c = build_nota_dataset(corpus, 12);
    bool differs = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].instance == b[i].instance);
      CHECK(a[i].label == b[i].label);
      differs = differs || a[i].label != c[i].label || !(a[i].instance == c[i].instance);
    }
    CHECK(differs);
  }

  TEST_CASE("invalid base instances are named") {
    auto corpus = corpus_of(3, 4);
    corpus.push_back(testing::make_instance("broken", 4, 99));
    CHECK_THROWS_WITH_AS(build_nota_dataset(corpus, 0), doctest::Contains("broken"), Error);
  }

  TEST_CASE("feature dimensions and sorting") {
    Rng rng(50);
    const auto base = testing::make_instance("b", 10, 3);
    const auto ds = build_nota_dataset({base}, 2);
    SourceDistributions dists{
        {DistributionSource::ensemble,
         testing::make_distribution(base, testing::random_scores(rng, 5, 10), DistributionSource::ensemble)},
        {DistributionSource::dropout,
         testing::make_distribution(base, testing::random_scores(rng, 10, 10), DistributionSource::dropout)}};
    NotaFeatureSpec means;
    const auto f1 = extract_nota_features(ds[0], dists, means);
    CHECK(f1.size() == 9);
    for (Eigen::Index i = 1; i < f1.size(); ++i) CHECK(f1(i - 1) >= f1(i));
    NotaFeatureSpec with_dropout{{NotaBlock::sorted_means, NotaBlock::sorted_vars_dropout}};
    CHECK(extract_nota_features(ds[0], dists, with_dropout).size() == 18);
    NotaFeatureSpec all{{NotaBlock::sorted_means, NotaBlock::sorted_vars_ensemble, NotaBlock::sorted_vars_dropout}};
    const auto f3 = extract_nota_features(ds[0], dists, all);
    CHECK(f3.size() == 27);
    // the dropout-variance block equals the sorted column variances
    const auto kept = dists.at(DistributionSource::dropout).select_columns(ds[0].instance.candidate_ids());
    Eigen::VectorXd var = sample_statistics(kept.scores).variance;
    std::sort(var.data(), var.data() + var.size(), std::greater<>());
    CHECK((f3.segment(18, 9) - var).cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("features ignore candidate order") {
    Rng rng(51);
    const auto base = testing::make_instance("b", 6, 2);
    const Eigen::MatrixXd scores = testing::random_scores(rng, 4, 6);
    const auto ds = build_nota_dataset({base}, 0);
    // same candidates, reversed
    std::vector<CandidateResponse> rc(ds[0].instance.candidates().rbegin(), ds[0].instance.candidates().rend());
    std::vector<int> rl(ds[0].instance.labels().rbegin(), ds[0].instance.labels().rend());
    NotaInstance reversed = ds[0];
    reversed.instance = DialogueInstance(ds[0].instance.id(), ds[0].instance.context(), rc, rl);
    SourceDistributions dists{
        {DistributionSource::dropout, testing::make_distribution(base, scores, DistributionSource::dropout)}};
    NotaFeatureSpec spec{{NotaBlock::sorted_means, NotaBlock::sorted_vars_dropout}};
    CHECK(extract_nota_features(ds[0], dists, spec) == extract_nota_features(reversed, dists, spec));
  }

  TEST_CASE("missing distribution source is an error") {
    Rng rng(52);
    const auto base = testing::make_instance("b", 4, 0);
    const auto ds = build_nota_dataset({base}, 0);
    SourceDistributions dists{
        {DistributionSource::dropout,
         testing::make_distribution(base, testing::random_scores(rng, 3, 4), DistributionSource::dropout)}};
    CHECK_THROWS_AS(extract_nota_features(ds[0], dists, NotaFeatureSpec{{NotaBlock::sorted_vars_ensemble}}), Error);
  }

  TEST_CASE("spec validation and labels") {
    CHECK_THROWS_AS((NotaFeatureSpec{{NotaBlock::sorted_vars_dropout, NotaBlock::sorted_means}}.validate()), Error);
    CHECK_THROWS_AS((NotaFeatureSpec{{NotaBlock::sorted_means, NotaBlock::sorted_means}}.validate()), Error);
    CHECK_THROWS_AS(NotaFeatureSpec{{}}.validate(), Error);
    CHECK(nota_block_from_string(to_string(NotaBlock::sorted_vars_ensemble)) == NotaBlock::sorted_vars_ensemble);
    CHECK(NotaFeatureSpec{}.label() != NotaFeatureSpec{{NotaBlock::sorted_means, NotaBlock::sorted_vars_dropout}}.label());
  }

  TEST_CASE("f1 macro by hand") {
    CHECK(f1_macro({0, 1, 0, 1}, {0, 1, 0, 1}) == 1.0);
    // class 1: tp 1, fp 1, fn 1 -> 0.5; class 0: tp 1, fp 1, fn 1 -> 0.5
    CHECK(f1_macro({1, 1, 0, 0}, {1, 0, 1, 0}) == doctest::Approx(0.5));
    // class 1: tp 2, fp 0, fn 1 -> 0.8; class 0: tp 1, fp 1, fn 0 -> 2/3
    CHECK(f1_macro({1, 1, 1, 0}, {1, 1, 0, 0}) == doctest::Approx((0.8 + 2.0 / 3.0) / 2));
    CHECK_THROWS_AS(f1_macro({1}, {1, 0}), Error);
  }

  TEST_CASE("stratified folds partition the data") {
    Rng rng(53);
    std::vector<int> labels;
    for (int i = 0; i < 103; ++i) labels.push_back(rng.bernoulli(0.4) ? 1 : 0);
    const auto folds = stratified_folds(labels, 5, 9);
    REQUIRE(folds.size() == labels.size());
    std::vector<int> size(5, 0), pos(5, 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      REQUIRE(folds[i] >= 0);
      REQUIRE(folds[i] < 5);
      ++size[static_cast<std::size_t>(folds[i])];
      pos[static_cast<std::size_t>(folds[i])] += labels[i];
    }
    CHECK(*std::max_element(pos.begin(), pos.end()) - *std::min_element(pos.begin(), pos.end()) <= 1);
    CHECK(*std::max_element(size.begin(), size.end()) - *std::min_element(size.begin(), size.end()) <= 2);
    CHECK(stratified_folds(labels, 5, 9) == folds);
  }

  TEST_CASE("separable features give perfect F1") {
    Rng rng(54);
    std::vector<NotaInstance> ds;
    for (int i = 0; i < 100; ++i) {
      const int label = i % 2;
      Eigen::VectorXd f(3);
      f << (label ? 0.2 : 0.8) + rng.uniform(-0.05, 0.05), rng.uniform(), rng.uniform();
      ds.push_back(with_features("n" + std::to_string(i), label, f));
    }
    const auto r = train_eval_nota(ds, 5, 1);
    CHECK(r.mean_f1 == 1.0);
    CHECK(r.fold_f1.size() == 5);
    CHECK(r.std_f1 == 0.0);
  }

  TEST_CASE("shuffled labels give chance-level F1") {
    Rng rng(55);
    std::vector<NotaInstance> ds;
    for (int i = 0; i < 2000; ++i) {
      Eigen::VectorXd f(3);
      f << rng.uniform(), rng.uniform(), rng.uniform();
      ds.push_back(with_features("n" + std::to_string(i), i % 2, f));
    }
    ForestConfig small;
    small.trees = 25;
    const auto r = train_eval_nota(ds, 5, 2, small);
    CHECK(r.mean_f1 >= 0.45);
    CHECK(r.mean_f1 <= 0.55);
    for (double f : r.fold_f1) {
      CHECK(f >= 0.0);
      CHECK(f <= 1.0);
    }
  }

  TEST_CASE("evaluation is seeded") {
    Rng rng(56);
    std::vector<NotaInstance> ds;
    for (int i = 0; i < 120; ++i) {
      Eigen::VectorXd f(2);
      f << rng.uniform() + 0.3 * (i % 2), rng.uniform();
      ds.push_back(with_features("n" + std::to_string(i), i % 2, f));
    }
    const auto a = train_eval_nota(ds, 4, 3);
    const auto b = train_eval_nota(ds, 4, 3);
    CHECK(a.fold_f1 == b.fold_f1);
    Eigen::MatrixXd x(ds.size(), 2);
    std::vector<int> y;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      x.row(static_cast<Eigen::Index>(i)) = ds[i].features.transpose();
      y.push_back(ds[i].label);
    }
    CHECK(RandomForest::fit(x, y, {}, 5) == RandomForest::fit(x, y, {}, 5));
    CHECK(RandomForest::fit(x, y, {}, 5).tree_count() == 100);
  }

  TEST_CASE("evaluation preconditions") {
    std::vector<NotaInstance> one_class;
    for (int i = 0; i < 10; ++i) one_class.push_back(with_features("n" + std::to_string(i), 0, Eigen::VectorXd::Ones(2)));
    CHECK_THROWS_AS(train_eval_nota(one_class, 5, 0), Error);
    one_class[0].label = 1;
    CHECK_THROWS_AS(train_eval_nota(one_class, 1, 0), Error);
    CHECK_THROWS_AS(train_eval_nota(one_class, 11, 0), Error);
  }

  TEST_CASE("dataset file round trip") {
    testing::TempDir dir("nota");
    const auto ds = build_nota_dataset(corpus_of(20, 5), 4);
    save_nota_dataset(dir / "n.jsonl", ds, "config=feedbeef");
    const auto back = load_nota_dataset(dir / "n.jsonl");
    REQUIRE(back.size() == ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
      CHECK(back[i].instance == ds[i].instance);
      CHECK(back[i].label == ds[i].label);
      CHECK(back[i].base_id == ds[i].base_id);
    }
  }
}
