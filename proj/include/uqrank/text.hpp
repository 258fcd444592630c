#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "uqrank/core_data.hpp"

namespace uqrank {

inline constexpr double kBm25K1 = 1.2;
inline constexpr double kBm25B = 0.75;
inline constexpr int kEmbeddingDim = 256;

using TermCounts = std::unordered_map<std::string, int>;

TermCounts count_terms(std::span<const std::string> tokens);

// Document statistics over a response collection.
struct TermStats {
  std::size_t doc_count = 0;
  double avg_doc_len = 0.0;
  std::unordered_map<std::string, std::size_t> df;

  std::size_t doc_freq(const std::string& term) const;
  // log(1 + (N - df + 0.5) / (df + 0.5)); non-negative for every df <= N.
  double idf(const std::string& term) const;

  static TermStats from_documents(const std::vector<std::vector<std::string>>& docs);
  // Statistics over the distinct candidate responses (by id) of a corpus.
  static TermStats from_corpus(const std::vector<DialogueInstance>& corpus);
};

// Okapi BM25 of one document against a query. Query terms are counted with
// multiplicity.
double bm25(std::span<const std::string> query, const TermCounts& doc_terms, std::size_t doc_len,
            const TermStats& stats, double k1 = kBm25K1, double b = kBm25B);

// Signed feature hashing: every term maps to one (index, sign) pair; the
// embedding is the L2-normalised sum over the tokens. Empty input yields the
// zero vector.
Eigen::VectorXd hashed_embedding(std::span<const std::string> tokens, int dim = kEmbeddingDim);

struct HashSlot {
  int index;
  double sign;
};
HashSlot hash_term(const std::string& term, int dim = kEmbeddingDim);

}  // namespace uqrank
