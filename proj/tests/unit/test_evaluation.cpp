#include <doctest.h>

#include <boost/math/distributions/students_t.hpp>
#include <cmath>

#include "helpers.hpp"
#include "uqrank/evaluation.hpp"

using namespace uqrank;

namespace {

RankedList ranked_with_relevant_at(std::size_t rank, std::size_t k) {
  // candidate 0 is relevant; give it the score that lands it at `rank`
  std::vector<std::string> ids;
  std::vector<double> scores;
  for (std::size_t j = 0; j < k; ++j) ids.push_back("c" + std::to_string(j));
  scores.assign(k, 0.0);
  double s = 1.0;
  std::size_t other = 1;
  for (std::size_t r = 0; r < k; ++r, s -= 0.05) {
    if (r == rank) {
      scores[0] = s;
    } else {
      scores[other++] = s;
    }
  }
  return make_ranked_list("q", ids, scores);
}

std::vector<int> first_relevant(std::size_t k) {
  std::vector<int> l(k, 0);
  l[0] = 1;
  return l;
}

// Textbook paired t statistic and a Boost two-sided p-value.
std::pair<double, double> textbook_t(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double mean = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) mean += a[i] - b[i];
  mean /= n;
  double ss = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) ss += (a[i] - b[i] - mean) * (a[i] - b[i] - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  const double t = mean / (sd / std::sqrt(n));
  boost::math::students_t dist(n - 1.0);
  return {t, 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)))};
}

}  // namespace

TEST_SUITE("evaluation") {
  TEST_CASE("recall examples") {
    CHECK(recall_at_k(ranked_with_relevant_at(0, 10), first_relevant(10), 10, 1) == 1.0);
    CHECK(recall_at_k(ranked_with_relevant_at(4, 10), first_relevant(10), 10, 1) == 0.0);
    CHECK(recall_at_k(ranked_with_relevant_at(4, 10), first_relevant(10), 10, 5) == 1.0);
    CHECK(recall_at_k(ranked_with_relevant_at(4, 10), first_relevant(10), 10, 4) == 0.0);
  }

  TEST_CASE("recall at n is one") {
    for (std::size_t r = 0; r < 10; ++r) CHECK(recall_at_k(ranked_with_relevant_at(r, 10), first_relevant(10), 10, 10) == 1.0);
  }

  TEST_CASE("recall counts a fraction of several relevant candidates") {
    const auto ranked = make_ranked_list("q", {"a", "b", "c", "d"}, {0.9, 0.8, 0.1, 0.7});
    CHECK(recall_at_k(ranked, {1, 0, 1, 0}, 4, 2) == 0.5);
    CHECK(recall_at_k(ranked, {1, 0, 1, 0}, 4, 4) == 1.0);
  }

  TEST_CASE("recall ignores reordering below the cutoff") {
    Rng rng(60);
    for (int t = 0; t < 100; ++t) {
      std::vector<std::string> ids{"a", "b", "c", "d", "e", "f"};
      std::vector<double> scores{0.95, 0.2, 0.3, 0.4, 0.5, 0.6};
      std::vector<double> shuffled{0.95};
      std::vector<double> tail(scores.begin() + 1, scores.end());
      rng.shuffle(tail);
      shuffled.insert(shuffled.end(), tail.begin(), tail.end());
      const std::vector<int> labels{1, 0, 0, 0, 0, 0};
      CHECK(recall_at_k(make_ranked_list("q", ids, scores), labels, 6, 1) ==
            recall_at_k(make_ranked_list("q", ids, shuffled), labels, 6, 1));
    }
  }

  TEST_CASE("uniform random ranking has recall one in k") {
    Rng rng(61);
    double hits = 0.0;
    const int trials = 10000;
    for (int t = 0; t < trials; ++t) {
      std::vector<std::string> ids;
      std::vector<double> scores;
      for (int j = 0; j < 10; ++j) {
        ids.push_back("c" + std::to_string(j));
        scores.push_back(rng.uniform());
      }
      hits += recall_at_k(make_ranked_list("q", ids, scores), first_relevant(10), 10, 1);
    }
    CHECK(hits / trials == doctest::Approx(0.1).epsilon(0.1));
    CHECK(std::fabs(hits / trials - 0.1) <= 0.01);
  }

  TEST_CASE("recall preconditions") {
    const auto r = ranked_with_relevant_at(0, 3);
    CHECK_THROWS_AS(recall_at_k(r, {0, 0, 0}, 3, 1), Error);
    CHECK_THROWS_AS(recall_at_k(r, {1, 0}, 3, 1), Error);
    CHECK_THROWS_AS(recall_at_k(r, {1, 0, 0}, 3, 4), Error);
  }

  TEST_CASE("identical vectors give t 0 and p 1") {
    const std::vector<double> a{0.1, 0.5, 0.9, 1.0};
    const auto r = paired_t_test(a, a);
    CHECK(r.t == 0.0);
    CHECK(r.p_value == 1.0);
    CHECK_FALSE(r.degenerate_variance);
  }

  TEST_CASE("constant differences are flagged") {
    const std::vector<double> a{1, 2, 3, 4, 5};
    const std::vector<double> b{0.5, 1.5, 2.5, 3.5, 4.5};
    const auto r = paired_t_test(a, b);
    CHECK(r.degenerate_variance);
    CHECK(r.p_value == 0.0);
    CHECK(std::isinf(r.t));
    CHECK(r.t > 0);
  }

  TEST_CASE("ten-element pair matches the textbook formula") {
    const std::vector<double> a{0.71, 0.64, 0.80, 0.55, 0.90, 0.62, 0.77, 0.69, 0.58, 0.83};
    const std::vector<double> b{0.66, 0.65, 0.71, 0.50, 0.84, 0.63, 0.70, 0.61, 0.59, 0.75};
    const auto [t, p] = textbook_t(a, b);
    const auto r = paired_t_test(a, b);
    CHECK(r.t == doctest::Approx(t).epsilon(1e-12));
    CHECK(r.p_value == doctest::Approx(p).epsilon(1e-9));
  }

  TEST_CASE("p-values agree with Boost on random data") {
    Rng rng(62);
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t n = 2 + rng.below(60);
      std::vector<double> a(n), b(n);
      for (std::size_t i = 0; i < n; ++i) {
        a[i] = rng.uniform();
        b[i] = rng.uniform() + 0.05;
      }
      const auto [t, p] = textbook_t(a, b);
      const auto r = paired_t_test(a, b);
      CHECK(r.t == doctest::Approx(t).epsilon(1e-10));
      CHECK(std::fabs(r.p_value - p) <= 1e-10);
    }
  }

  TEST_CASE("t-test is antisymmetric") {
    Rng rng(63);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> a(12), b(12);
      for (std::size_t i = 0; i < 12; ++i) {
        a[i] = rng.uniform();
        b[i] = rng.uniform();
      }
      const auto ab = paired_t_test(a, b);
      const auto ba = paired_t_test(b, a);
      CHECK(ab.t == -ba.t);
      CHECK(ab.p_value == ba.p_value);
    }
  }

  TEST_CASE("t-test preconditions") {
    const std::vector<double> a{1, 2, 3};
    const std::vector<double> b{1, 2};
    CHECK_THROWS_AS(paired_t_test(a, b), Error);
    CHECK_THROWS_AS(paired_t_test(std::vector<double>{1}, std::vector<double>{2}), Error);
  }

  TEST_CASE("incomplete beta edge values") {
    CHECK(regularized_incomplete_beta(2.0, 3.0, 0.0) == 0.0);
    CHECK(regularized_incomplete_beta(2.0, 3.0, 1.0) == 1.0);
    // I_x(1, 1) = x and I_x(a, 1) = x^a
    CHECK(regularized_incomplete_beta(1.0, 1.0, 0.37) == doctest::Approx(0.37).epsilon(1e-12));
    CHECK(regularized_incomplete_beta(3.0, 1.0, 0.5) == doctest::Approx(0.125).epsilon(1e-12));
    CHECK(student_t_two_sided_p(0.0, 5.0) == doctest::Approx(1.0));
  }
}
