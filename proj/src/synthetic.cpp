#include "uqrank/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "uqrank/random.hpp"

namespace uqrank {

namespace {

// Fixed permutation that decides which ranks rotate first; independent of the
// corpus seed so a given rotation fraction always renames the same words.
std::vector<std::size_t> rotation_order(std::size_t vocab_size) {
  std::vector<std::size_t> order(vocab_size);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(0x5eedULL);
  rng.shuffle(order);
  return order;
}

std::vector<bool> rotated_mask(std::size_t vocab_size, double rotation) {
  std::vector<bool> mask(vocab_size, false);
  const auto count = static_cast<std::size_t>(std::llround(rotation * static_cast<double>(vocab_size)));
  const auto order = rotation_order(vocab_size);
  for (std::size_t i = 0; i < count && i < vocab_size; ++i) mask[order[i]] = true;
  return mask;
}

class ZipfSampler {
 public:
  ZipfSampler(std::size_t n, double exponent) : cdf_(n) {
    double total = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      total += 1.0 / std::pow(static_cast<double>(r + 1), exponent);
      cdf_[r] = total;
    }
    for (auto& c : cdf_) c /= total;
  }

  std::size_t draw(Rng& rng) const {
    const double u = rng.uniform();
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    return it == cdf_.end() ? cdf_.size() - 1 : static_cast<std::size_t>(it - cdf_.begin());
  }

 private:
  std::vector<double> cdf_;
};

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

}  // namespace

std::string synthetic_word(std::size_t rank, std::size_t vocab_size, double rotation) {
  if (rotation > 0.0 && rotated_mask(vocab_size, rotation)[rank]) return "r" + std::to_string(rank);
  return "w" + std::to_string(rank);
}

void SyntheticCorpusSpec::validate() const {
  if (candidates < 2) throw Error("synthetic corpus: need at least 2 candidates");
  if (utterances_min < 1 || utterances_max < utterances_min) throw Error("synthetic corpus: bad utterance range");
  if (utterance_length_min < 1 || utterance_length_max < utterance_length_min) {
    throw Error("synthetic corpus: bad utterance length range");
  }
  if (response_length_min < 1 || response_length_max < response_length_min) {
    throw Error("synthetic corpus: bad response length range");
  }
  for (double f : {relevant_overlap, distractor_overlap, vocab_rotation}) {
    if (!(f >= 0.0 && f <= 1.0)) throw Error("synthetic corpus: fractions must lie in [0, 1]");
  }
  if (!(relevant_overlap > distractor_overlap)) {
    throw Error("synthetic corpus: relevant overlap must exceed distractor overlap");
  }
  if (!(zipf_exponent >= 0.0)) throw Error("synthetic corpus: zipf exponent must be non-negative");
  const auto max_context = static_cast<std::size_t>(utterances_max * utterance_length_max);
  if (vocab_size < max_context + static_cast<std::size_t>(response_length_max) + 1) {
    throw Error("synthetic corpus: vocabulary of " + std::to_string(vocab_size) +
                " words cannot keep non-overlapping response tokens outside a context of up to " +
                std::to_string(max_context) + " tokens");
  }
}

std::vector<DialogueInstance> generate_synthetic_corpus(const SyntheticCorpusSpec& spec) {
  spec.validate();
  const ZipfSampler zipf(spec.vocab_size, spec.zipf_exponent);
  const std::vector<bool> rotated = rotated_mask(spec.vocab_size, spec.vocab_rotation);
  auto word = [&](std::size_t rank) { return (rotated[rank] ? "r" : "w") + std::to_string(rank); };

  std::vector<DialogueInstance> corpus;
  corpus.reserve(spec.instances);
  const int width = std::max<int>(6, static_cast<int>(std::to_string(spec.instances).size()));
  for (std::size_t i = 0; i < spec.instances; ++i) {
    Rng rng(derive_seed(spec.seed, "synthetic.instance", i));
    std::string num = std::to_string(i);
    const std::string id = spec.id_prefix + "-" + std::string(static_cast<std::size_t>(width) - num.size(), '0') + num;

    std::vector<std::string> context;
    std::vector<std::size_t> context_ranks;
    const int utterances = static_cast<int>(rng.between(spec.utterances_min, spec.utterances_max));
    for (int u = 0; u < utterances; ++u) {
      const int len = static_cast<int>(rng.between(spec.utterance_length_min, spec.utterance_length_max));
      std::vector<std::string> words;
      for (int t = 0; t < len; ++t) {
        const std::size_t r = zipf.draw(rng);
        context_ranks.push_back(r);
        words.push_back(word(r));
      }
      context.push_back(join(words));
    }
    std::vector<std::size_t> distinct = context_ranks;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    const std::unordered_set<std::size_t> in_context(distinct.begin(), distinct.end());

    auto make_response = [&](double overlap) {
      const int len = static_cast<int>(rng.between(spec.response_length_min, spec.response_length_max));
      const int shared = static_cast<int>(std::lround(overlap * len));
      std::vector<std::string> words;
      for (int t = 0; t < len; ++t) {
        if (t < shared) {
          words.push_back(word(distinct[rng.below(distinct.size())]));
        } else {
          std::size_t r = zipf.draw(rng);
          while (in_context.count(r)) r = zipf.draw(rng);
          words.push_back(word(r));
        }
      }
      rng.shuffle(words);
      return join(words);
    };

    const auto k = static_cast<std::size_t>(spec.candidates);
    const std::size_t slot = rng.below(k);
    std::vector<CandidateResponse> cands;
    std::vector<int> labels(k, 0);
    for (std::size_t j = 0; j < k; ++j) {
      const bool relevant = j == slot;
      cands.emplace_back(id + "-c" + std::to_string(j), make_response(relevant ? spec.relevant_overlap : spec.distractor_overlap),
                         relevant ? Provenance::ground_truth : Provenance::sampled_random);
      labels[j] = relevant ? 1 : 0;
    }
    corpus.emplace_back(id, std::move(context), std::move(cands), std::move(labels));
  }
  return corpus;
}

}  // namespace uqrank
