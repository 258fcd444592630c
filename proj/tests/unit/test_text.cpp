#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "helpers.hpp"
#include "uqrank/random.hpp"
#include "uqrank/text.hpp"

using namespace uqrank;

namespace {

// Reference FNV-1a, checked against published test vectors below.
std::uint64_t ref_fnv(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::vector<std::string> words(const std::string& s) { return tokenize(s); }

}  // namespace

TEST_SUITE("text") {
  TEST_CASE("fnv1a64 test vectors") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
    CHECK(ref_fnv("foobar") == fnv1a64("foobar"));
  }

  TEST_CASE("derive_seed separates components and indices") {
    CHECK(derive_seed(1, "a") != derive_seed(1, "b"));
    CHECK(derive_seed(1, "a", 0) != derive_seed(1, "a", 1));
    CHECK(derive_seed(1, "a") != derive_seed(2, "a"));
    CHECK(derive_seed(7, "x", 3) == derive_seed(7, "x", 3));
  }

  TEST_CASE("rng draws are in range and reproducible") {
    Rng a(5), b(5);
    for (int i = 0; i < 1000; ++i) {
      const double u = a.uniform();
      CHECK(u >= 0.0);
      CHECK(u < 1.0);
      CHECK(u == b.uniform());
      const auto k = a.below(7);
      CHECK(k < 7);
      CHECK(k == b.below(7));
    }
    const auto s = a.sample_without_replacement(10, 10);
    std::vector<std::size_t> sorted = s;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < 10; ++i) CHECK(sorted[i] == i);
  }

  TEST_CASE("term statistics") {
    const auto stats = TermStats::from_documents({words("a b a"), words("b c"), words("c d e f")});
    CHECK(stats.doc_count == 3);
    CHECK(stats.avg_doc_len == doctest::Approx(3.0));
    CHECK(stats.doc_freq("a") == 1);
    CHECK(stats.doc_freq("b") == 2);
    CHECK(stats.doc_freq("zzz") == 0);
    CHECK(stats.idf("a") == doctest::Approx(std::log(1.0 + 2.5 / 1.5)));
  }

  TEST_CASE("bm25 against hand arithmetic on a three document pool") {
    // d1 = apple banana apple, d2 = banana cherry, d3 = cherry date elder fig
    // N = 3, avgdl = 3, k1 = 1.2, b = 0.75
    const std::vector<std::vector<std::string>> docs{words("apple banana apple"), words("banana cherry"),
                                                     words("cherry date elder fig")};
    const auto stats = TermStats::from_documents(docs);
    const auto query = words("apple banana");
    const double idf_apple = std::log(1.0 + (3 - 1 + 0.5) / (1 + 0.5));
    const double idf_banana = std::log(1.0 + (3 - 2 + 0.5) / (2 + 0.5));
    // d1: len 3 -> K = 1.2 * (0.25 + 0.75 * 3/3) = 1.2
    const double d1 = idf_apple * 2 * 2.2 / (2 + 1.2) + idf_banana * 1 * 2.2 / (1 + 1.2);
    // d2: len 2 -> K = 1.2 * (0.25 + 0.75 * 2/3) = 0.9
    const double d2 = idf_banana * 1 * 2.2 / (1 + 0.9);
    std::vector<double> got;
    for (const auto& d : docs) got.push_back(bm25(query, count_terms(d), d.size(), stats));
    CHECK(got[0] == doctest::Approx(d1).epsilon(1e-12));
    CHECK(got[1] == doctest::Approx(d2).epsilon(1e-12));
    CHECK(got[2] == 0.0);
    CHECK(got[0] > got[1]);
    CHECK(got[1] > got[2]);
  }

  TEST_CASE("bm25 is non-negative and non-decreasing in query term frequency") {
    Rng rng(11);
    std::vector<std::vector<std::string>> docs;
    for (int i = 0; i < 30; ++i) {
      std::vector<std::string> d;
      const auto len = 1 + rng.below(8);
      for (std::size_t t = 0; t < len; ++t) d.push_back("t" + std::to_string(rng.below(12)));
      docs.push_back(d);
    }
    const auto stats = TermStats::from_documents(docs);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<std::string> q;
      const auto qlen = 1 + rng.below(5);
      for (std::size_t t = 0; t < qlen; ++t) q.push_back("t" + std::to_string(rng.below(14)));
      const auto& d = docs[rng.below(docs.size())];
      const double base = bm25(q, count_terms(d), d.size(), stats);
      CHECK(base >= 0.0);
      auto more = q;
      more.push_back(q[rng.below(q.size())]);
      CHECK(bm25(more, count_terms(d), d.size(), stats) >= base);
    }
  }

  TEST_CASE("hashed embedding matches a brute-force construction") {
    const auto tokens = words("the cat sat on the mat");
    Eigen::VectorXd ref = Eigen::VectorXd::Zero(256);
    for (const auto& t : tokens) {
      const std::uint64_t h = ref_fnv(t);
      ref(static_cast<Eigen::Index>(h % 256)) += (h >> 63) ? -1.0 : 1.0;
    }
    ref /= ref.norm();
    const auto got = hashed_embedding(tokens);
    CHECK((got - ref).norm() < 1e-15);
    CHECK(got.norm() == doctest::Approx(1.0));
  }

  TEST_CASE("identical text has cosine 1, empty text embeds to zero") {
    const auto a = hashed_embedding(words("one two three"));
    CHECK(a.dot(a) == doctest::Approx(1.0));
    CHECK(hashed_embedding(std::vector<std::string>{}).norm() == 0.0);
  }

  TEST_CASE("disjoint tokens without collisions are orthogonal") {
    const std::vector<std::string> left{"alpha", "beta"};
    const std::vector<std::string> right{"gamma", "delta"};
    std::set<int> slots;
    for (const auto& t : left) slots.insert(hash_term(t).index);
    bool collide = false;
    for (const auto& t : right) collide |= slots.count(hash_term(t).index) > 0;
    REQUIRE_FALSE(collide);
    CHECK(hashed_embedding(left).dot(hashed_embedding(right)) == doctest::Approx(0.0));
  }
}
