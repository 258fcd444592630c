#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "uqrank/core_data.hpp"

namespace uqrank {

// Desk-scale stand-in for a dialogue corpus. Tokens are drawn from a Zipfian
// vocabulary; the relevant response copies `relevant_overlap` of its tokens
// from the context and distractors copy `distractor_overlap`. The remaining
// tokens avoid the context vocabulary.
struct SyntheticCorpusSpec {
  std::size_t instances = 2000;
  std::size_t vocab_size = 2000;
  int candidates = 10;
  int utterances_min = 1;
  int utterances_max = 3;
  int utterance_length_min = 5;
  int utterance_length_max = 12;
  int response_length_min = 5;
  int response_length_max = 12;
  double relevant_overlap = 0.6;
  double distractor_overlap = 0.1;
  // Fraction of the vocabulary renamed into a disjoint namespace. 1.0 gives a
  // corpus with no word in common with an unrotated one.
  double vocab_rotation = 0.0;
  double zipf_exponent = 1.0;
  std::uint64_t seed = 0;
  std::string id_prefix = "syn";

  void validate() const;
  bool operator==(const SyntheticCorpusSpec&) const = default;
};

std::vector<DialogueInstance> generate_synthetic_corpus(const SyntheticCorpusSpec& spec);

// Surface form of vocabulary entry `rank` under a rotation fraction.
std::string synthetic_word(std::size_t rank, std::size_t vocab_size, double rotation);

}  // namespace uqrank
