#include <doctest.h>

#include <set>

#include "helpers.hpp"
#include "uqrank/synthetic.hpp"

using namespace uqrank;

namespace {

std::set<std::string> vocabulary(const std::vector<DialogueInstance>& corpus) {
  std::set<std::string> v;
  for (const auto& inst : corpus) {
    for (const auto& u : inst.context_tokens()) v.insert(u.begin(), u.end());
    for (const auto& c : inst.candidates()) v.insert(c.tokens().begin(), c.tokens().end());
  }
  return v;
}

}  // namespace

TEST_SUITE("synthetic") {
  TEST_CASE("same seed gives the same corpus") {
    SyntheticCorpusSpec spec;
    spec.instances = 50;
    spec.seed = 4;
    CHECK(generate_synthetic_corpus(spec) == generate_synthetic_corpus(spec));
    auto other = spec;
    other.seed = 5;
    CHECK_FALSE(generate_synthetic_corpus(spec) == generate_synthetic_corpus(other));
  }

  TEST_CASE("instances satisfy the corpus invariants") {
    SyntheticCorpusSpec spec;
    spec.instances = 100;
    const auto corpus = generate_synthetic_corpus(spec);
    REQUIRE(corpus.size() == 100);
    std::set<std::string> ids;
    for (const auto& inst : corpus) {
      CHECK(inst.size() == 10);
      CHECK(inst.relevant_count() == 1);
      ids.insert(inst.id());
      for (const auto& c : inst.candidates()) CHECK_FALSE(c.tokens().empty());
    }
    CHECK(ids.size() == 100);
  }

  TEST_CASE("unigram overlap alone solves a clean corpus") {
    SyntheticCorpusSpec spec;
    spec.instances = 300;
    spec.relevant_overlap = 0.8;
    spec.distractor_overlap = 0.0;
    const auto corpus = generate_synthetic_corpus(spec);
    double hits = 0.0;
    for (const auto& inst : corpus) {
      const std::set<std::string> ctx(inst.flat_context().begin(), inst.flat_context().end());
      std::vector<double> scores;
      for (const auto& c : inst.candidates()) {
        double shared = 0.0;
        for (const auto& t : c.tokens()) shared += ctx.count(t) ? 1.0 : 0.0;
        scores.push_back(shared);
      }
      const auto best = std::max_element(scores.begin(), scores.end()) - scores.begin();
      const bool unique = std::count(scores.begin(), scores.end(), scores[static_cast<std::size_t>(best)]) == 1;
      hits += (unique && static_cast<std::size_t>(best) == inst.relevant_index()) ? 1.0 : 0.0;
    }
    CHECK(hits / static_cast<double>(corpus.size()) == 1.0);
  }

  TEST_CASE("full rotation gives a disjoint vocabulary") {
    SyntheticCorpusSpec spec;
    spec.instances = 200;
    const auto source = vocabulary(generate_synthetic_corpus(spec));
    spec.vocab_rotation = 1.0;
    spec.seed = 9;
    const auto target = vocabulary(generate_synthetic_corpus(spec));
    for (const auto& w : target) CHECK_FALSE(source.count(w));
  }

  TEST_CASE("partial rotation shares part of the vocabulary") {
    SyntheticCorpusSpec spec;
    spec.instances = 200;
    const auto source = vocabulary(generate_synthetic_corpus(spec));
    spec.vocab_rotation = 0.5;
    const auto target = vocabulary(generate_synthetic_corpus(spec));
    std::size_t shared = 0;
    for (const auto& w : target) shared += source.count(w);
    CHECK(shared > 0);
    CHECK(shared < target.size());
    CHECK(synthetic_word(3, 100, 0.0) != synthetic_word(3, 100, 1.0));
  }

  TEST_CASE("infeasible specs are rejected") {
    SyntheticCorpusSpec spec;
    spec.relevant_overlap = 0.1;
    spec.distractor_overlap = 0.2;
    CHECK_THROWS_AS(generate_synthetic_corpus(spec), Error);
    spec = SyntheticCorpusSpec{};
    spec.vocab_size = 10;
    CHECK_THROWS_AS(generate_synthetic_corpus(spec), Error);
    spec = SyntheticCorpusSpec{};
    spec.candidates = 1;
    CHECK_THROWS_AS(spec.validate(), Error);
    spec = SyntheticCorpusSpec{};
    spec.vocab_rotation = 1.5;
    CHECK_THROWS_AS(spec.validate(), Error);
  }
}
