#include "uqrank/negative_sampling.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "uqrank/random.hpp"

namespace uqrank {

namespace {

std::vector<std::string> flatten(const std::vector<std::string>& context) {
  std::vector<std::string> out;
  for (const auto& u : context) {
    auto t = tokenize(u);
    out.insert(out.end(), t.begin(), t.end());
  }
  return out;
}

SampleResult top_m(const ResponsePool& pool, const std::vector<double>& scores, std::size_t m, const IdSet& exclude,
                   Provenance tag) {
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (!exclude.count(pool.response(i).id())) eligible.push_back(i);
  }
  if (eligible.size() < m) {
    throw Error("negative sampling: pool has " + std::to_string(eligible.size()) + " eligible responses, need " +
                std::to_string(m));
  }
  // Pool order is ascending id, so a stable sort settles ties by id.
  std::stable_sort(eligible.begin(), eligible.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  SampleResult out;
  for (std::size_t r = 0; r < m; ++r) {
    const auto& src = pool.response(eligible[r]);
    if (!(scores[eligible[r]] > 0.0)) out.padded = true;
    out.responses.emplace_back(src.id(), src.text(), tag);
  }
  return out;
}

constexpr const char* kIndexMagic = "#uqrank-pool-index v1";
constexpr const char* kEmbMagic = "#uqrank-pool-emb v1";

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_checked(const std::filesystem::path& path, const char* magic, const std::string& body) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write pool file " + path.string());
  os << magic << " checksum=" << hex64(fnv1a64(body)) << '\n' << body;
}

std::string read_checked(const std::filesystem::path& path, const char* magic) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open pool file " + path.string());
  std::string header;
  std::getline(is, header);
  const std::string prefix = std::string(magic) + " checksum=";
  if (header.rfind(prefix, 0) != 0) throw Error("pool file " + path.string() + ": bad header");
  std::ostringstream ss;
  ss << is.rdbuf();
  std::string body = ss.str();
  if (header.substr(prefix.size()) != hex64(fnv1a64(body))) {
    throw Error("pool file " + path.string() + ": checksum mismatch");
  }
  return body;
}

}  // namespace

ResponsePool ResponsePool::build(std::vector<CandidateResponse> responses) {
  ResponsePool pool;
  std::stable_sort(responses.begin(), responses.end(),
                   [](const CandidateResponse& a, const CandidateResponse& b) { return a.id() < b.id(); });
  for (auto& r : responses) {
    if (!pool.responses_.empty() && pool.responses_.back().id() == r.id()) continue;
    pool.responses_.push_back(std::move(r));
  }
  std::vector<std::vector<std::string>> docs;
  docs.reserve(pool.responses_.size());
  pool.embeddings_.resize(static_cast<Eigen::Index>(pool.responses_.size()), kEmbeddingDim);
  for (std::size_t i = 0; i < pool.responses_.size(); ++i) {
    const auto& tokens = pool.responses_[i].tokens();
    docs.push_back(tokens);
    pool.doc_len_.push_back(tokens.size());
    // std::map keeps posting construction independent of hash order.
    std::map<std::string, int> tf;
    for (const auto& t : tokens) ++tf[t];
    for (const auto& [term, count] : tf) pool.index_[term].push_back({i, count});
    pool.embeddings_.row(static_cast<Eigen::Index>(i)) = hashed_embedding(tokens).transpose();
  }
  pool.stats_ = TermStats::from_documents(docs);
  return pool;
}

ResponsePool ResponsePool::from_corpus(const std::vector<DialogueInstance>& corpus) {
  std::vector<CandidateResponse> all;
  for (const auto& inst : corpus) all.insert(all.end(), inst.candidates().begin(), inst.candidates().end());
  return build(std::move(all));
}

const std::vector<Posting>& ResponsePool::postings(const std::string& term) const {
  static const std::vector<Posting> kEmpty;
  auto it = index_.find(term);
  return it == index_.end() ? kEmpty : it->second;
}

std::vector<double> ResponsePool::bm25_scores(std::span<const std::string> query) const {
  std::vector<double> scores(size(), 0.0);
  const double avg = stats_.avg_doc_len > 0.0 ? stats_.avg_doc_len : 1.0;
  for (const auto& q : query) {
    const auto& plist = postings(q);
    if (plist.empty()) continue;
    const double idf = stats_.idf(q);
    for (const auto& p : plist) {
      const double norm = kBm25K1 * (1.0 - kBm25B + kBm25B * static_cast<double>(doc_len_[p.doc]) / avg);
      scores[p.doc] += idf * p.tf * (kBm25K1 + 1.0) / (p.tf + norm);
    }
  }
  return scores;
}

std::vector<double> ResponsePool::embedding_scores(std::span<const std::string> query) const {
  const Eigen::VectorXd q = hashed_embedding(query);
  const Eigen::VectorXd s = embeddings_ * q;
  return {s.data(), s.data() + s.size()};
}

void ResponsePool::save(const std::filesystem::path& prefix) const {
  std::ostringstream body;
  body << std::setprecision(17);
  body << "responses " << size() << '\n';
  for (const auto& r : responses_) {
    body << "R\t" << r.id() << '\t' << to_string(r.provenance()) << '\t' << nlohmann::json(r.text()).dump() << '\n';
  }
  std::vector<std::string> terms;
  terms.reserve(index_.size());
  for (const auto& [t, _] : index_) terms.push_back(t);
  std::sort(terms.begin(), terms.end());
  for (const auto& t : terms) {
    body << "T\t" << t;
    for (const auto& p : index_.at(t)) body << '\t' << p.doc << ':' << p.tf;
    body << '\n';
  }
  write_checked(std::filesystem::path(prefix.string() + ".index"), kIndexMagic, body.str());

  std::ostringstream emb;
  emb << std::setprecision(17);
  emb << "rows " << embeddings_.rows() << " dim " << embeddings_.cols() << '\n';
  for (Eigen::Index i = 0; i < embeddings_.rows(); ++i) {
    for (Eigen::Index j = 0; j < embeddings_.cols(); ++j) emb << (j ? " " : "") << embeddings_(i, j);
    emb << '\n';
  }
  write_checked(std::filesystem::path(prefix.string() + ".emb"), kEmbMagic, emb.str());
}

ResponsePool ResponsePool::load(const std::filesystem::path& prefix) {
  const std::string body = read_checked(std::filesystem::path(prefix.string() + ".index"), kIndexMagic);
  std::istringstream is(body);
  std::string line;
  std::vector<CandidateResponse> responses;
  std::unordered_map<std::string, std::vector<Posting>> stored;
  std::getline(is, line);
  while (std::getline(is, line)) {
    if (line.rfind("R\t", 0) == 0) {
      const auto a = line.find('\t', 2);
      const auto b = line.find('\t', a + 1);
      if (a == std::string::npos || b == std::string::npos) throw Error("pool index: malformed response line");
      responses.emplace_back(line.substr(2, a - 2), nlohmann::json::parse(line.substr(b + 1)).get<std::string>(),
                             provenance_from_string(line.substr(a + 1, b - a - 1)));
    } else if (line.rfind("T\t", 0) == 0) {
      std::istringstream ls(line.substr(2));
      std::string term;
      std::getline(ls, term, '\t');
      std::string cell;
      auto& plist = stored[term];
      while (std::getline(ls, cell, '\t')) {
        const auto colon = cell.find(':');
        if (colon == std::string::npos) throw Error("pool index: malformed posting");
        plist.push_back({std::stoul(cell.substr(0, colon)), std::stoi(cell.substr(colon + 1))});
      }
    }
  }
  ResponsePool pool = build(std::move(responses));
  if (stored.size() != pool.index_.size()) throw Error("pool index: stored postings do not match responses");
  for (const auto& [term, plist] : stored) {
    if (pool.postings(term) != plist) throw Error("pool index: postings for '" + term + "' do not match responses");
  }

  const std::string emb = read_checked(std::filesystem::path(prefix.string() + ".emb"), kEmbMagic);
  std::istringstream es(emb);
  std::string tag_rows, tag_dim;
  Eigen::Index rows = 0, dim = 0;
  es >> tag_rows >> rows >> tag_dim >> dim;
  if (rows != pool.embeddings_.rows() || dim != pool.embeddings_.cols()) {
    throw Error("pool embeddings: shape does not match the index");
  }
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < dim; ++j)
      if (!(es >> pool.embeddings_(i, j))) throw Error("pool embeddings: truncated");
  return pool;
}

SampleResult ns_random(const ResponsePool& pool, const std::vector<std::string>&, std::size_t m, std::uint64_t seed,
                       const IdSet& exclude) {
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (!exclude.count(pool.response(i).id())) eligible.push_back(i);
  }
  if (eligible.size() < m) {
    throw Error("ns_random: pool has " + std::to_string(eligible.size()) + " eligible responses, need " +
                std::to_string(m));
  }
  Rng rng(seed);
  SampleResult out;
  for (std::size_t pick : rng.sample_without_replacement(eligible.size(), m)) {
    const auto& src = pool.response(eligible[pick]);
    out.responses.emplace_back(src.id(), src.text(), Provenance::sampled_random);
  }
  return out;
}

SampleResult ns_lexical(const ResponsePool& pool, const std::vector<std::string>& context, std::size_t m,
                        const IdSet& exclude) {
  return top_m(pool, pool.bm25_scores(flatten(context)), m, exclude, Provenance::sampled_lexical);
}

SampleResult ns_embedding(const ResponsePool& pool, const std::vector<std::string>& context, std::size_t m,
                          const IdSet& exclude) {
  return top_m(pool, pool.embedding_scores(flatten(context)), m, exclude, Provenance::sampled_embedding);
}

std::string_view to_string(NsStrategy s) {
  switch (s) {
    case NsStrategy::random: return "random";
    case NsStrategy::bm25: return "bm25";
    case NsStrategy::embed: return "embed";
  }
  return "random";
}

NsStrategy ns_strategy_from_string(std::string_view name) {
  if (name == "random") return NsStrategy::random;
  if (name == "bm25") return NsStrategy::bm25;
  if (name == "embed") return NsStrategy::embed;
  throw Error("unknown negative-sampling strategy '" + std::string(name) + "' (expected random, bm25 or embed)");
}

SampleResult sample_negatives(NsStrategy strategy, const ResponsePool& pool, const std::vector<std::string>& context,
                              std::size_t m, std::uint64_t seed, const IdSet& exclude) {
  switch (strategy) {
    case NsStrategy::random: return ns_random(pool, context, m, seed, exclude);
    case NsStrategy::bm25: return ns_lexical(pool, context, m, exclude);
    case NsStrategy::embed: return ns_embedding(pool, context, m, exclude);
  }
  throw Error("unknown strategy");
}

DialogueInstance resample_negatives(const DialogueInstance& instance, const ResponsePool& pool, NsStrategy strategy,
                                    std::size_t m, std::uint64_t seed, bool* padded) {
  if (instance.relevant_count() != 1) {
    throw Error("resample_negatives: instance '" + instance.id() + "' must have exactly one relevant candidate");
  }
  const CandidateResponse& truth = instance.candidates()[instance.relevant_index()];
  IdSet exclude{truth.id()};
  SampleResult sampled =
      sample_negatives(strategy, pool, instance.context(), m, derive_seed(seed, "ns.draw"), exclude);
  if (padded) *padded = sampled.padded;
  Rng rng(derive_seed(seed, "ns.position"));
  const std::size_t slot = rng.below(m + 1);
  std::vector<CandidateResponse> cands = std::move(sampled.responses);
  std::vector<int> labels(m + 1, 0);
  cands.insert(cands.begin() + static_cast<std::ptrdiff_t>(slot),
               CandidateResponse(truth.id(), truth.text(), Provenance::ground_truth));
  labels[slot] = 1;
  return DialogueInstance(instance.id(), instance.context(), std::move(cands), std::move(labels));
}

std::vector<DialogueInstance> resample_corpus(const std::vector<DialogueInstance>& corpus, const ResponsePool& pool,
                                              NsStrategy strategy, std::size_t m, std::uint64_t seed,
                                              std::size_t* padded_count) {
  std::vector<DialogueInstance> out;
  out.reserve(corpus.size());
  std::size_t padded_total = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    bool padded = false;
    out.push_back(resample_negatives(corpus[i], pool, strategy, m, derive_seed(seed, "ns.instance", i), &padded));
    padded_total += padded ? 1 : 0;
  }
  if (padded_count) *padded_count = padded_total;
  return out;
}

}  // namespace uqrank
