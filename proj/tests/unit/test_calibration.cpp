#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "helpers.hpp"
#include "uqrank/calibration.hpp"

using namespace uqrank;

namespace {

// Straight transcription of the bucketed weighted gap, one pass per bucket.
double brute_force_ece(const std::vector<Prediction>& preds, int c) {
  double total = 0.0;
  for (int i = 0; i < c; ++i) {
    const double lo = static_cast<double>(i) / c;
    const double hi = static_cast<double>(i + 1) / c;
    double conf = 0.0;
    double rel = 0.0;
    double count = 0.0;
    for (const auto& p : preds) {
      const bool inside = p.probability >= lo && (p.probability < hi || (i == c - 1 && p.probability <= 1.0));
      if (!inside) continue;
      conf += p.probability;
      rel += p.label;
      count += 1.0;
    }
    if (count == 0.0) continue;
    total += count / static_cast<double>(preds.size()) * std::fabs(conf / count - rel / count);
  }
  return total;
}

std::vector<Prediction> random_predictions(Rng& rng, std::size_t n) {
  std::vector<Prediction> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({rng.uniform(), rng.bernoulli(0.3) ? 1 : 0});
  return out;
}

std::vector<DialogueInstance> instances(std::size_t n, std::size_t k) {
  std::vector<DialogueInstance> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(testing::make_instance("q" + std::to_string(i), k, i % k));
  return out;
}

std::vector<PredictiveDistribution> distributions(const std::vector<DialogueInstance>& insts, Eigen::Index s,
                                                  std::uint64_t seed) {
  Rng rng(seed);
  std::vector<PredictiveDistribution> out;
  for (const auto& inst : insts) {
    out.push_back(testing::make_distribution(inst, testing::random_scores(rng, s, static_cast<Eigen::Index>(inst.size())),
                                             s == 1 ? DistributionSource::deterministic : DistributionSource::ensemble));
  }
  return out;
}

}  // namespace

TEST_SUITE("calibration") {
  TEST_CASE("two-bucket hand example") {
    const std::vector<Prediction> p{{0.2, 0}, {0.4, 1}, {0.6, 1}, {0.8, 1}};
    const auto r = compute_ece(p, 2);
    CHECK(r.ece == doctest::Approx(0.25));
    REQUIRE(r.buckets.size() == 2);
    CHECK(r.buckets[0].mean_confidence == doctest::Approx(0.3));
    CHECK(r.buckets[0].relevance_fraction == doctest::Approx(0.5));
    CHECK(r.buckets[1].mean_confidence == doctest::Approx(0.7));
    CHECK(r.buckets[1].relevance_fraction == doctest::Approx(1.0));
    CHECK(r.n == 4);
  }

  TEST_CASE("sharp predictor has zero error for every bucket count") {
    std::vector<Prediction> p;
    for (int i = 0; i < 30; ++i) p.push_back({i % 3 == 0 ? 1.0 : 0.0, i % 3 == 0 ? 1 : 0});
    for (int c = 1; c <= 50; ++c) CHECK(compute_ece(p, c).ece == 0.0);
  }

  TEST_CASE("half relevant at confidence one half") {
    std::vector<Prediction> p;
    for (int i = 0; i < 20; ++i) p.push_back({0.5, i % 2});
    CHECK(compute_ece(p, 10).ece == doctest::Approx(0.0));
  }

  TEST_CASE("boundary convention") {
    CHECK(bucket_index(0.0, 10) == 0);
    CHECK(bucket_index(0.1, 10) == 1);
    CHECK(bucket_index(0.3, 10) == 3);
    CHECK(bucket_index(0.7, 10) == 7);
    CHECK(bucket_index(0.5, 2) == 1);
    CHECK(bucket_index(1.0, 10) == 9);
    CHECK(bucket_index(std::nextafter(0.2, 0.0), 10) == 1);
    for (int c = 1; c <= 40; ++c) {
      for (int i = 1; i < c; ++i) CHECK(bucket_index(static_cast<double>(i) / c, c) == i);
    }
  }

  TEST_CASE("matches a brute-force oracle") {
    Rng rng(31);
    for (int t = 0; t < 40; ++t) {
      auto p = random_predictions(rng, 1 + rng.below(300));
      // sprinkle exact boundary values
      for (auto& x : p) {
        if (rng.bernoulli(0.1)) x.probability = static_cast<double>(rng.below(11)) / 10.0;
      }
      const int c = 1 + static_cast<int>(rng.below(20));
      const auto r = compute_ece(p, c);
      CHECK(r.ece == doctest::Approx(brute_force_ece(p, c)).epsilon(1e-12));
    }
  }

  TEST_CASE("report invariants") {
    Rng rng(32);
    for (int t = 0; t < 30; ++t) {
      auto p = random_predictions(rng, 1 + rng.below(200));
      const int c = 1 + static_cast<int>(rng.below(15));
      for (auto binning : {Binning::equal_width, Binning::equal_mass}) {
        const auto r = compute_ece(p, c, binning);
        std::size_t total = 0;
        for (const auto& b : r.buckets) total += b.size;
        CHECK(total == p.size());
        CHECK(r.ece >= 0.0);
        CHECK(r.ece <= 1.0);
        CHECK(r.ece == r.recompute_ece());
      }
      const auto before = compute_ece(p, c).ece;
      std::reverse(p.begin(), p.end());
      rng.shuffle(p);
      CHECK(compute_ece(p, c).ece == doctest::Approx(before).epsilon(1e-12));
    }
  }

  TEST_CASE("Bernoulli labels are calibrated") {
    Rng rng(33);
    std::vector<Prediction> p;
    for (int i = 0; i < 100000; ++i) {
      const double prob = rng.uniform();
      p.push_back({prob, rng.bernoulli(prob) ? 1 : 0});
    }
    CHECK(compute_ece(p, 10).ece < 0.01);
  }

  TEST_CASE("equal-mass buckets hold n / c predictions") {
    Rng rng(34);
    const auto p = random_predictions(rng, 103);
    const auto r = compute_ece(p, 10, Binning::equal_mass);
    for (std::size_t b = 0; b < 10; ++b) CHECK(r.buckets[b].size == (b < 3 ? 11u : 10u));
    for (std::size_t b = 1; b < 10; ++b) CHECK(r.buckets[b].low >= r.buckets[b - 1].high);
  }

  TEST_CASE("invalid predictions are rejected") {
    CHECK_THROWS_AS(compute_ece(std::vector<Prediction>{}, 10), Error);
    CHECK_THROWS_AS(compute_ece(std::vector<Prediction>{{1.2, 1}}, 10), Error);
    CHECK_THROWS_AS(compute_ece(std::vector<Prediction>{{-0.1, 0}}, 10), Error);
    CHECK_THROWS_AS(compute_ece(std::vector<Prediction>{{0.5, 0}}, 0), Error);
    CHECK_THROWS_AS(reducer_from_string("median"), Error);
  }

  TEST_CASE("balanced sampling counts") {
    const auto insts = instances(100, 10);
    const auto dists = distributions(insts, 3, 1);
    CHECK(balanced_ece(dists, insts, Reducer::mean, 1, 9).n == 200);
    CHECK(balanced_ece(dists, insts, Reducer::mean, 9, 9).n == 1000);
    CHECK_THROWS_AS(balanced_ece(dists, insts, Reducer::mean, 10, 9), Error);
    CHECK_THROWS_AS(balanced_ece(dists, insts, Reducer::mean, 0, 9), Error);
  }

  TEST_CASE("balanced sampling is seeded") {
    const auto insts = instances(60, 10);
    const auto dists = distributions(insts, 4, 2);
    const auto a = balanced_ece(dists, insts, Reducer::mean, 2, 17);
    const auto b = balanced_ece(dists, insts, Reducer::mean, 2, 17);
    CHECK(a.ece == b.ece);
    for (std::size_t i = 0; i < a.buckets.size(); ++i) CHECK(a.buckets[i].size == b.buckets[i].size);
  }

  TEST_CASE("full lists reduce to the plain ECE of every candidate") {
    const auto insts = instances(30, 5);
    const auto dists = distributions(insts, 4, 3);
    std::vector<Prediction> all_mean, all_first;
    for (std::size_t i = 0; i < insts.size(); ++i) {
      const Eigen::VectorXd mean = dists[i].scores.colwise().mean().transpose();
      for (std::size_t j = 0; j < insts[i].size(); ++j) {
        all_mean.push_back({mean(static_cast<Eigen::Index>(j)), insts[i].labels()[j]});
        all_first.push_back({dists[i].scores(0, static_cast<Eigen::Index>(j)), insts[i].labels()[j]});
      }
    }
    CHECK(balanced_ece(dists, insts, Reducer::mean, 4, 5).ece ==
          doctest::Approx(brute_force_ece(all_mean, 10)).epsilon(1e-12));
    CHECK(balanced_ece(dists, insts, Reducer::deterministic, 4, 5).ece ==
          doctest::Approx(brute_force_ece(all_first, 10)).epsilon(1e-12));
  }

  TEST_CASE("instances without a relevant candidate are rejected") {
    const std::vector<DialogueInstance> insts{testing::make_instance("nota", 5, 99)};
    const auto dists = distributions(insts, 2, 4);
    CHECK_THROWS_AS(balanced_ece(dists, insts, Reducer::mean, 1, 0), Error);
  }
}
