#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

#include "uqrank/core_data.hpp"
#include "uqrank/text.hpp"

namespace uqrank {

struct Posting {
  std::size_t doc;
  int tf;
  bool operator==(const Posting&) const = default;
};

// Every distinct response of a corpus (by id, sorted by id) with an inverted
// index and a hashed-embedding matrix.
class ResponsePool {
 public:
  static ResponsePool build(std::vector<CandidateResponse> responses);
  static ResponsePool from_corpus(const std::vector<DialogueInstance>& corpus);

  std::size_t size() const { return responses_.size(); }
  const CandidateResponse& response(std::size_t i) const { return responses_.at(i); }
  const std::vector<CandidateResponse>& responses() const { return responses_; }
  const TermStats& stats() const { return stats_; }
  const std::vector<Posting>& postings(const std::string& term) const;
  const Eigen::MatrixXd& embeddings() const { return embeddings_; }

  // BM25 of every pooled response against the query, via the index.
  std::vector<double> bm25_scores(std::span<const std::string> query) const;
  // Dot products between the query's hashed embedding and every response.
  std::vector<double> embedding_scores(std::span<const std::string> query) const;

  // Writes <prefix>.index and <prefix>.emb, each with a checksum header.
  void save(const std::filesystem::path& prefix) const;
  static ResponsePool load(const std::filesystem::path& prefix);

 private:
  std::vector<CandidateResponse> responses_;
  std::vector<std::size_t> doc_len_;
  std::unordered_map<std::string, std::vector<Posting>> index_;
  TermStats stats_;
  Eigen::MatrixXd embeddings_;
};

struct SampleResult {
  std::vector<CandidateResponse> responses;
  // Set when fewer than m responses scored above zero and zero-score
  // responses (in id order) filled the remainder.
  bool padded = false;
};

using IdSet = std::unordered_set<std::string>;

SampleResult ns_random(const ResponsePool& pool, const std::vector<std::string>& context, std::size_t m,
                       std::uint64_t seed, const IdSet& exclude);
// Top m by BM25 (k1 = 1.2, b = 0.75) with the concatenated context as query.
SampleResult ns_lexical(const ResponsePool& pool, const std::vector<std::string>& context, std::size_t m,
                        const IdSet& exclude);
// Top m by hashed-embedding dot product with the concatenated context.
SampleResult ns_embedding(const ResponsePool& pool, const std::vector<std::string>& context, std::size_t m,
                          const IdSet& exclude);

enum class NsStrategy { random, bm25, embed };

std::string_view to_string(NsStrategy s);
NsStrategy ns_strategy_from_string(std::string_view name);

SampleResult sample_negatives(NsStrategy strategy, const ResponsePool& pool, const std::vector<std::string>& context,
                              std::size_t m, std::uint64_t seed, const IdSet& exclude);

// Rebuilds an instance's candidate list as its relevant response plus m
// negatives drawn with the given strategy. The relevant response lands at a
// seeded position.
DialogueInstance resample_negatives(const DialogueInstance& instance, const ResponsePool& pool, NsStrategy strategy,
                                    std::size_t m, std::uint64_t seed, bool* padded = nullptr);

std::vector<DialogueInstance> resample_corpus(const std::vector<DialogueInstance>& corpus, const ResponsePool& pool,
                                              NsStrategy strategy, std::size_t m, std::uint64_t seed,
                                              std::size_t* padded_count = nullptr);

}  // namespace uqrank
