#include "uqrank/core_data.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

namespace uqrank {

namespace {

bool is_word_byte(unsigned char c) {
  return c >= 0x80 || (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

[[noreturn]] void field_error(std::size_t line, std::string_view field, std::string_view what) {
  std::ostringstream os;
  os << "line " << line << ": field '" << field << "': " << what;
  throw Error(os.str());
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    if (is_word_byte(c)) {
      current.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::ground_truth: return "ground_truth";
    case Provenance::sampled_random: return "sampled_random";
    case Provenance::sampled_lexical: return "sampled_lexical";
    case Provenance::sampled_embedding: return "sampled_embedding";
  }
  return "ground_truth";
}

Provenance provenance_from_string(std::string_view name) {
  if (name == "ground_truth") return Provenance::ground_truth;
  if (name == "sampled_random") return Provenance::sampled_random;
  if (name == "sampled_lexical") return Provenance::sampled_lexical;
  if (name == "sampled_embedding") return Provenance::sampled_embedding;
  throw Error("unknown provenance '" + std::string(name) + "'");
}

CandidateResponse::CandidateResponse(std::string id, std::string text, Provenance provenance)
    : id_(std::move(id)), text_(std::move(text)), tokens_(tokenize(text_)), provenance_(provenance) {
  if (id_.empty()) throw Error("candidate id is empty");
  if (text_.empty()) throw Error("candidate '" + id_ + "' has empty text");
}

DialogueInstance::DialogueInstance(std::string id, std::vector<std::string> context,
                                   std::vector<CandidateResponse> candidates, std::vector<int> labels)
    : id_(std::move(id)),
      context_(std::move(context)),
      candidates_(std::move(candidates)),
      labels_(std::move(labels)) {
  if (id_.empty()) throw Error("instance id is empty");
  if (candidates_.empty()) throw Error("instance '" + id_ + "' has no candidates");
  if (candidates_.size() != labels_.size()) {
    throw Error("instance '" + id_ + "': " + std::to_string(candidates_.size()) + " candidates but " +
                std::to_string(labels_.size()) + " labels");
  }
  for (int y : labels_) {
    if (y != 0 && y != 1) throw Error("instance '" + id_ + "': labels must be 0 or 1");
  }
  std::unordered_set<std::string> seen;
  for (const auto& c : candidates_) {
    if (!seen.insert(c.id()).second) {
      throw Error("instance '" + id_ + "': duplicate candidate id '" + c.id() + "'");
    }
  }
  context_tokens_.reserve(context_.size());
  for (const auto& u : context_) {
    context_tokens_.push_back(tokenize(u));
    flat_context_.insert(flat_context_.end(), context_tokens_.back().begin(), context_tokens_.back().end());
  }
}

int DialogueInstance::relevant_count() const {
  return std::accumulate(labels_.begin(), labels_.end(), 0);
}

std::size_t DialogueInstance::relevant_index() const {
  auto it = std::find(labels_.begin(), labels_.end(), 1);
  return static_cast<std::size_t>(it - labels_.begin());
}

std::vector<std::string> DialogueInstance::candidate_ids() const {
  std::vector<std::string> ids;
  ids.reserve(candidates_.size());
  for (const auto& c : candidates_) ids.push_back(c.id());
  return ids;
}

namespace {

DialogueInstance parse_record(const nlohmann::json& j, std::size_t line, const CorpusParseOptions& opts) {
  if (!j.is_object()) field_error(line, "<record>", "expected a JSON object");
  auto require = [&](const char* key) -> const nlohmann::json& {
    auto it = j.find(key);
    if (it == j.end()) field_error(line, key, "missing");
    return *it;
  };
  const auto& id = require("id");
  if (!id.is_string()) field_error(line, "id", "expected a string");

  const auto& context = require("context");
  if (!context.is_array()) field_error(line, "context", "expected an array of strings");
  std::vector<std::string> utterances;
  for (const auto& u : context) {
    if (!u.is_string()) field_error(line, "context", "expected an array of strings");
    utterances.push_back(u.get<std::string>());
  }

  const auto& cands = require("candidates");
  if (!cands.is_array()) field_error(line, "candidates", "expected an array");
  std::vector<CandidateResponse> candidates;
  for (const auto& c : cands) {
    if (!c.is_object() || !c.contains("id") || !c.contains("text") || !c["id"].is_string() ||
        !c["text"].is_string()) {
      field_error(line, "candidates", "each candidate needs string 'id' and 'text'");
    }
    Provenance prov = Provenance::ground_truth;
    if (auto it = c.find("provenance"); it != c.end()) {
      if (!it->is_string()) field_error(line, "candidates.provenance", "expected a string");
      try {
        prov = provenance_from_string(it->get<std::string>());
      } catch (const Error& e) {
        field_error(line, "candidates.provenance", e.what());
      }
    }
    try {
      candidates.emplace_back(c["id"].get<std::string>(), c["text"].get<std::string>(), prov);
    } catch (const Error& e) {
      field_error(line, "candidates", e.what());
    }
  }

  const auto& labels_json = require("labels");
  if (!labels_json.is_array()) field_error(line, "labels", "expected an array of 0/1 integers");
  std::vector<int> labels;
  for (const auto& y : labels_json) {
    if (!y.is_number_integer() || (y.get<int>() != 0 && y.get<int>() != 1)) {
      field_error(line, "labels", "expected an array of 0/1 integers");
    }
    labels.push_back(y.get<int>());
  }
  if (labels.size() != candidates.size()) {
    field_error(line, "labels", "instance '" + id.get<std::string>() + "' has " + std::to_string(labels.size()) +
                                    " labels for " + std::to_string(candidates.size()) + " candidates");
  }
  if (candidates.size() < opts.min_candidates) {
    field_error(line, "candidates", "need at least " + std::to_string(opts.min_candidates) + " candidates");
  }
  if (opts.require_single_relevant && std::accumulate(labels.begin(), labels.end(), 0) != 1) {
    field_error(line, "labels", "exactly one candidate must be relevant");
  }
  try {
    return DialogueInstance(id.get<std::string>(), std::move(utterances), std::move(candidates), std::move(labels));
  } catch (const Error& e) {
    field_error(line, "candidates", e.what());
  }
}

}  // namespace

DialogueInstance parse_instance_json(const nlohmann::json& record, std::size_t line_no,
                                     const CorpusParseOptions& options) {
  return parse_record(record, line_no, options);
}

std::vector<DialogueInstance> parse_corpus(std::string_view content) {
  std::vector<DialogueInstance> out;
  std::unordered_set<std::string> ids;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < content.size()) {
    std::size_t end = content.find('\n', pos);
    if (end == std::string_view::npos) end = content.size();
    std::string_view line = content.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string_view::npos || line[first] == '#') continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      field_error(line_no, "<record>", std::string("malformed JSON: ") + e.what());
    }
    DialogueInstance inst = parse_record(j, line_no, CorpusParseOptions{});
    if (!ids.insert(inst.id()).second) {
      throw Error("line " + std::to_string(line_no) + ": duplicate instance id '" + inst.id() + "'");
    }
    out.push_back(std::move(inst));
  }
  return out;
}

std::vector<DialogueInstance> load_corpus(const std::filesystem::path& path, CorpusFormat) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open corpus file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_corpus(ss.str());
}

nlohmann::ordered_json instance_to_json(const DialogueInstance& instance) {
  nlohmann::ordered_json j;
  j["id"] = instance.id();
  j["context"] = instance.context();
  auto cands = nlohmann::ordered_json::array();
  for (const auto& c : instance.candidates()) {
    nlohmann::ordered_json cj;
    cj["id"] = c.id();
    cj["text"] = c.text();
    cj["provenance"] = std::string(to_string(c.provenance()));
    cands.push_back(std::move(cj));
  }
  j["candidates"] = std::move(cands);
  j["labels"] = instance.labels();
  return j;
}

std::string format_instance(const DialogueInstance& instance) { return instance_to_json(instance).dump(); }

void save_corpus(const std::filesystem::path& path, const std::vector<DialogueInstance>& corpus,
                 const std::string& header) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write corpus file " + path.string());
  if (!header.empty()) out << "# " << header << '\n';
  for (const auto& inst : corpus) out << format_instance(inst) << '\n';
}

DialogueInstance truncate_candidates(const DialogueInstance& instance, const std::vector<std::size_t>& keep) {
  if (keep.empty()) throw Error("truncate_candidates: keep set is empty");
  std::vector<std::size_t> idx = keep;
  std::sort(idx.begin(), idx.end());
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  if (idx.back() >= instance.size()) {
    throw Error("truncate_candidates: index " + std::to_string(idx.back()) + " out of range for instance '" +
                instance.id() + "'");
  }
  std::vector<CandidateResponse> cands;
  std::vector<int> labels;
  for (std::size_t i : idx) {
    cands.push_back(instance.candidates()[i]);
    labels.push_back(instance.labels()[i]);
  }
  return DialogueInstance(instance.id(), instance.context(), std::move(cands), std::move(labels));
}

std::string_view to_string(DistributionSource s) {
  switch (s) {
    case DistributionSource::deterministic: return "deterministic";
    case DistributionSource::ensemble: return "ensemble";
    case DistributionSource::dropout: return "dropout";
  }
  return "deterministic";
}

DistributionSource distribution_source_from_string(std::string_view name) {
  if (name == "deterministic") return DistributionSource::deterministic;
  if (name == "ensemble") return DistributionSource::ensemble;
  if (name == "dropout") return DistributionSource::dropout;
  throw Error("unknown distribution source '" + std::string(name) + "'");
}

void PredictiveDistribution::validate() const {
  if (scores.rows() < 1) throw Error("distribution '" + instance_id + "' has no samples");
  if (source == DistributionSource::deterministic && scores.rows() != 1) {
    throw Error("deterministic distribution '" + instance_id + "' must have exactly one sample");
  }
  if (static_cast<std::size_t>(scores.cols()) != candidate_ids.size()) {
    throw Error("distribution '" + instance_id + "': column count does not match candidate ids");
  }
  if (!sample_seeds.empty() && sample_seeds.size() != static_cast<std::size_t>(scores.rows())) {
    throw Error("distribution '" + instance_id + "': seed count does not match sample count");
  }
  if (!((scores.array() >= 0.0).all() && (scores.array() <= 1.0).all())) {
    throw Error("distribution '" + instance_id + "': scores must lie in [0, 1]");
  }
}

PredictiveDistribution PredictiveDistribution::select_columns(const std::vector<std::string>& ids) const {
  std::unordered_map<std::string, Eigen::Index> col;
  for (std::size_t j = 0; j < candidate_ids.size(); ++j) col.emplace(candidate_ids[j], static_cast<Eigen::Index>(j));
  PredictiveDistribution out{instance_id, ids, Eigen::MatrixXd(scores.rows(), static_cast<Eigen::Index>(ids.size())),
                             source, sample_seeds};
  for (std::size_t j = 0; j < ids.size(); ++j) {
    auto it = col.find(ids[j]);
    if (it == col.end()) {
      throw Error("distribution '" + instance_id + "' has no scores for candidate '" + ids[j] + "'");
    }
    out.scores.col(static_cast<Eigen::Index>(j)) = scores.col(it->second);
  }
  return out;
}

PredictiveDistribution PredictiveDistribution::aligned_to(const DialogueInstance& instance) const {
  if (instance.id() != instance_id) {
    throw Error("distribution for '" + instance_id + "' does not belong to instance '" + instance.id() + "'");
  }
  if (instance.size() != candidate_ids.size()) {
    throw Error("distribution '" + instance_id + "' has " + std::to_string(candidate_ids.size()) +
                " candidates, instance has " + std::to_string(instance.size()));
  }
  return select_columns(instance.candidate_ids());
}

RankedList make_ranked_list(std::string instance_id, const std::vector<std::string>& candidate_ids,
                            std::vector<double> scores) {
  if (candidate_ids.size() != scores.size()) throw Error("make_ranked_list: size mismatch");
  RankedList out{std::move(instance_id), std::vector<std::size_t>(scores.size()), std::move(scores),
                 TieBreak::by_candidate_id};
  std::iota(out.ordering.begin(), out.ordering.end(), std::size_t{0});
  const auto& s = out.final_scores;
  std::sort(out.ordering.begin(), out.ordering.end(), [&](std::size_t a, std::size_t b) {
    if (s[a] != s[b]) return s[a] > s[b];
    return candidate_ids[a] < candidate_ids[b];
  });
  return out;
}

}  // namespace uqrank
