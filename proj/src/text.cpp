#include "uqrank/text.hpp"

#include <cmath>
#include <unordered_set>

#include "uqrank/random.hpp"

namespace uqrank {

TermCounts count_terms(std::span<const std::string> tokens) {
  TermCounts counts;
  for (const auto& t : tokens) ++counts[t];
  return counts;
}

std::size_t TermStats::doc_freq(const std::string& term) const {
  auto it = df.find(term);
  return it == df.end() ? 0 : it->second;
}

double TermStats::idf(const std::string& term) const {
  const double n = static_cast<double>(doc_count);
  const double d = static_cast<double>(doc_freq(term));
  return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
}

TermStats TermStats::from_documents(const std::vector<std::vector<std::string>>& docs) {
  TermStats stats;
  stats.doc_count = docs.size();
  std::size_t total = 0;
  for (const auto& doc : docs) {
    total += doc.size();
    std::unordered_set<std::string> seen(doc.begin(), doc.end());
    for (const auto& t : seen) ++stats.df[t];
  }
  stats.avg_doc_len = docs.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(docs.size());
  return stats;
}

TermStats TermStats::from_corpus(const std::vector<DialogueInstance>& corpus) {
  std::unordered_set<std::string> seen;
  std::vector<std::vector<std::string>> docs;
  for (const auto& inst : corpus) {
    for (const auto& c : inst.candidates()) {
      if (seen.insert(c.id()).second) docs.push_back(c.tokens());
    }
  }
  return from_documents(docs);
}

double bm25(std::span<const std::string> query, const TermCounts& doc_terms, std::size_t doc_len,
            const TermStats& stats, double k1, double b) {
  if (doc_terms.empty()) return 0.0;
  const double avg = stats.avg_doc_len > 0.0 ? stats.avg_doc_len : 1.0;
  const double norm = k1 * (1.0 - b + b * static_cast<double>(doc_len) / avg);
  double score = 0.0;
  for (const auto& q : query) {
    auto it = doc_terms.find(q);
    if (it == doc_terms.end()) continue;
    const double tf = it->second;
    score += stats.idf(q) * tf * (k1 + 1.0) / (tf + norm);
  }
  return score;
}

HashSlot hash_term(const std::string& term, int dim) {
  const std::uint64_t h = fnv1a64(term);
  return {static_cast<int>(h % static_cast<std::uint64_t>(dim)), (h >> 63) ? -1.0 : 1.0};
}

Eigen::VectorXd hashed_embedding(std::span<const std::string> tokens, int dim) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);
  for (const auto& t : tokens) {
    const HashSlot slot = hash_term(t, dim);
    v(slot.index) += slot.sign;
  }
  const double norm = v.norm();
  if (norm > 0.0) v /= norm;
  return v;
}

}  // namespace uqrank
