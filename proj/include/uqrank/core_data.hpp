#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace uqrank {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Lowercases ASCII letters and splits on whitespace and ASCII punctuation.
// Bytes >= 0x80 are kept as word characters so UTF-8 words survive intact.
std::vector<std::string> tokenize(std::string_view text);

enum class Provenance { ground_truth, sampled_random, sampled_lexical, sampled_embedding };

std::string_view to_string(Provenance p);
Provenance provenance_from_string(std::string_view name);

class CandidateResponse {
 public:
  CandidateResponse(std::string id, std::string text, Provenance provenance);

  const std::string& id() const { return id_; }
  const std::string& text() const { return text_; }
  const std::vector<std::string>& tokens() const { return tokens_; }
  Provenance provenance() const { return provenance_; }

  bool operator==(const CandidateResponse&) const = default;

 private:
  std::string id_;
  std::string text_;
  std::vector<std::string> tokens_;
  Provenance provenance_;
};

// A dialogue context, its candidate responses and binary relevance labels.
// Immutable once constructed. The constructor checks the structural
// invariants (aligned labels, unique candidate ids, 0/1 labels); the corpus
// loader additionally requires k >= 2 and exactly one relevant candidate.
class DialogueInstance {
 public:
  DialogueInstance(std::string id, std::vector<std::string> context,
                   std::vector<CandidateResponse> candidates, std::vector<int> labels);

  const std::string& id() const { return id_; }
  const std::vector<std::string>& context() const { return context_; }
  const std::vector<std::vector<std::string>>& context_tokens() const { return context_tokens_; }
  // All context tokens, utterances concatenated in order.
  const std::vector<std::string>& flat_context() const { return flat_context_; }
  const std::vector<CandidateResponse>& candidates() const { return candidates_; }
  const std::vector<int>& labels() const { return labels_; }

  std::size_t size() const { return candidates_.size(); }
  int relevant_count() const;
  // Index of the first relevant candidate, or size() when there is none.
  std::size_t relevant_index() const;
  std::vector<std::string> candidate_ids() const;

  bool operator==(const DialogueInstance&) const = default;

 private:
  std::string id_;
  std::vector<std::string> context_;
  std::vector<std::vector<std::string>> context_tokens_;
  std::vector<std::string> flat_context_;
  std::vector<CandidateResponse> candidates_;
  std::vector<int> labels_;
};

enum class CorpusFormat { jsonl };

// One JSON object per line: {"id", "context", "candidates", "labels"}.
std::vector<DialogueInstance> load_corpus(const std::filesystem::path& path,
                                          CorpusFormat format = CorpusFormat::jsonl);
std::vector<DialogueInstance> parse_corpus(std::string_view content);

struct CorpusParseOptions {
  bool require_single_relevant = true;
  std::size_t min_candidates = 2;
};

// Parses one record; errors name the line number and the offending field.
DialogueInstance parse_instance_json(const nlohmann::json& record, std::size_t line_no,
                                     const CorpusParseOptions& options);
nlohmann::ordered_json instance_to_json(const DialogueInstance& instance);

std::string format_instance(const DialogueInstance& instance);
// Lines starting with '#' are comments; a non-empty header is written as one.
void save_corpus(const std::filesystem::path& path, const std::vector<DialogueInstance>& corpus,
                 const std::string& header = {});

// Keeps the candidates at the given indices, in ascending index order.
DialogueInstance truncate_candidates(const DialogueInstance& instance,
                                     const std::vector<std::size_t>& keep);

enum class DistributionSource { deterministic, ensemble, dropout };

std::string_view to_string(DistributionSource s);
DistributionSource distribution_source_from_string(std::string_view name);

// S x k matrix of relevance probabilities for one candidate list. Column j
// belongs to candidate_ids[j].
struct PredictiveDistribution {
  std::string instance_id;
  std::vector<std::string> candidate_ids;
  Eigen::MatrixXd scores;
  DistributionSource source = DistributionSource::deterministic;
  std::vector<std::uint64_t> sample_seeds;

  Eigen::Index samples() const { return scores.rows(); }
  Eigen::Index candidates() const { return scores.cols(); }

  // Throws if any invariant is broken.
  void validate() const;
  // Reorders columns to the candidate order of the instance (matching by id).
  PredictiveDistribution aligned_to(const DialogueInstance& instance) const;
  PredictiveDistribution select_columns(const std::vector<std::string>& ids) const;
};

enum class TieBreak { by_candidate_id };

struct RankedList {
  std::string instance_id;
  std::vector<std::size_t> ordering;
  std::vector<double> final_scores;  // indexed by candidate, not by rank
  TieBreak tie_break = TieBreak::by_candidate_id;
};

// Orders by descending score; equal scores fall back to ascending id.
RankedList make_ranked_list(std::string instance_id, const std::vector<std::string>& candidate_ids,
                            std::vector<double> scores);

}  // namespace uqrank
