#include "uqrank/ranker.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

namespace uqrank {

namespace {

using TermSet = std::unordered_set<std::string>;

double jaccard(const TermSet& a, const TermSet& b) {
  if (a.empty() && b.empty()) return 0.0;
  std::size_t inter = 0;
  for (const auto& t : a) inter += b.count(t);
  const std::size_t uni = a.size() + b.size() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

TermSet bigrams(std::span<const std::string> tokens) {
  TermSet out;
  for (std::size_t i = 1; i < tokens.size(); ++i) out.insert(tokens[i - 1] + '\x1f' + tokens[i]);
  return out;
}

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw Error(std::string("non-finite value in scorer: ") + what);
}

constexpr double kProbLow = std::numeric_limits<double>::min();
const double kProbHigh = std::nextafter(1.0, 0.0);

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

struct Activations {
  Eigen::VectorXd pre;     // W1 x + b1
  Eigen::VectorXd hidden;  // tanh(pre), dropout applied
  Eigen::Vector2d logits;
};

Activations run(const ScorerParameters& p, const FeatureVector& x, const DropoutMask* mask) {
  if (x.size() != p.input_dim()) {
    throw Error("feature dimension " + std::to_string(x.size()) + " does not match scorer input " +
                std::to_string(p.input_dim()));
  }
  Activations a;
  a.pre = p.w1 * x + p.b1;
  a.hidden = a.pre.array().tanh();
  if (mask != nullptr) {
    if (mask->size() != p.hidden_dim()) throw Error("dropout mask size does not match hidden width");
    a.hidden = a.hidden.cwiseProduct(*mask) / (1.0 - p.dropout_rate);
  }
  a.logits = p.w2 * a.hidden + p.b2;
  check_finite(a.logits(0), "logit");
  check_finite(a.logits(1), "logit");
  return a;
}

double probability(const Eigen::Vector2d& logits) {
  const double p = 1.0 / (1.0 + std::exp(logits(1) - logits(0)));
  return std::clamp(p, kProbLow, kProbHigh);
}

}  // namespace

FeatureVector extract_features(const std::vector<std::vector<std::string>>& context,
                               std::span<const std::string> response, const TermStats& stats) {
  FeatureVector f = FeatureVector::Zero(kFeatureDim);
  std::vector<std::string> flat;
  for (const auto& u : context) flat.insert(flat.end(), u.begin(), u.end());

  const TermSet context_terms(flat.begin(), flat.end());
  const TermSet response_terms(response.begin(), response.end());
  const std::span<const std::string> last =
      context.empty() ? std::span<const std::string>{} : std::span<const std::string>(context.back());

  f(kFeatBm25) = std::log1p(bm25(flat, count_terms(response), response.size(), stats));
  f(kFeatJaccardUnigram) = jaccard(response_terms, TermSet(last.begin(), last.end()));
  f(kFeatJaccardBigram) = jaccard(bigrams(response), bigrams(last));

  double idf_total = 0.0;
  double idf_shared = 0.0;
  std::size_t shared = 0;
  for (const auto& t : response_terms) {
    const double w = stats.idf(t);
    idf_total += w;
    if (context_terms.count(t)) {
      idf_shared += w;
      ++shared;
    }
  }
  f(kFeatIdfOverlap) = idf_total > 0.0 ? idf_shared / idf_total : 0.0;
  f(kFeatResponseLength) = std::log1p(static_cast<double>(response.size()));
  f(kFeatContextLength) = std::log1p(static_cast<double>(flat.size()));
  f(kFeatEmbeddingCosine) = hashed_embedding(flat).dot(hashed_embedding(response));
  f(kFeatContextCoverage) =
      context_terms.empty() ? 0.0 : static_cast<double>(shared) / static_cast<double>(context_terms.size());
  return f;
}

FeatureVector extract_features(const DialogueInstance& instance, std::size_t candidate, const TermStats& stats) {
  return extract_features(instance.context_tokens(), instance.candidates().at(candidate).tokens(), stats);
}

Eigen::MatrixXd extract_features(const DialogueInstance& instance, const TermStats& stats) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(instance.size()), kFeatureDim);
  for (std::size_t j = 0; j < instance.size(); ++j) {
    out.row(static_cast<Eigen::Index>(j)) = extract_features(instance, j, stats).transpose();
  }
  return out;
}

std::vector<double> ScorerParameters::flatten() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (Eigen::Index r = 0; r < w1.rows(); ++r)
    for (Eigen::Index c = 0; c < w1.cols(); ++c) flat.push_back(w1(r, c));
  for (Eigen::Index i = 0; i < b1.size(); ++i) flat.push_back(b1(i));
  for (Eigen::Index r = 0; r < w2.rows(); ++r)
    for (Eigen::Index c = 0; c < w2.cols(); ++c) flat.push_back(w2(r, c));
  for (Eigen::Index i = 0; i < b2.size(); ++i) flat.push_back(b2(i));
  return flat;
}

void ScorerParameters::assign(std::span<const double> flat) {
  if (flat.size() != parameter_count()) throw Error("parameter vector has the wrong length");
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < w1.rows(); ++r)
    for (Eigen::Index c = 0; c < w1.cols(); ++c) w1(r, c) = flat[k++];
  for (Eigen::Index i = 0; i < b1.size(); ++i) b1(i) = flat[k++];
  for (Eigen::Index r = 0; r < w2.rows(); ++r)
    for (Eigen::Index c = 0; c < w2.cols(); ++c) w2(r, c) = flat[k++];
  for (Eigen::Index i = 0; i < b2.size(); ++i) b2(i) = flat[k++];
}

void ScorerParameters::validate() const {
  if (w1.rows() != b1.size() || w2.cols() != w1.rows() || w2.rows() != 2 || b2.size() != 2) {
    throw Error("scorer parameters have inconsistent shapes");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw Error("dropout rate must lie in [0, 1)");
  if (!w1.allFinite() || !b1.allFinite() || !w2.allFinite() || !b2.allFinite()) {
    throw Error("scorer parameters contain non-finite values");
  }
}

ScorerParameters ScorerParameters::zeros(int input_dim, int hidden_dim, double dropout_rate) {
  ScorerParameters p;
  p.w1 = Eigen::MatrixXd::Zero(hidden_dim, input_dim);
  p.b1 = Eigen::VectorXd::Zero(hidden_dim);
  p.w2 = Eigen::MatrixXd::Zero(2, hidden_dim);
  p.b2 = Eigen::VectorXd::Zero(2);
  p.dropout_rate = dropout_rate;
  return p;
}

ScorerParameters ScorerParameters::initialize(int input_dim, int hidden_dim, double dropout_rate,
                                              std::uint64_t seed) {
  if (input_dim < 1 || hidden_dim < 1) throw Error("scorer dimensions must be positive");
  ScorerParameters p = zeros(input_dim, hidden_dim, dropout_rate);
  p.train_seed = seed;
  Rng rng(seed);
  const double s1 = 1.0 / std::sqrt(static_cast<double>(input_dim));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  for (Eigen::Index r = 0; r < p.w1.rows(); ++r)
    for (Eigen::Index c = 0; c < p.w1.cols(); ++c) p.w1(r, c) = rng.uniform(-0.5, 0.5) * s1;
  for (Eigen::Index i = 0; i < p.b1.size(); ++i) p.b1(i) = rng.uniform(-0.5, 0.5) * s1;
  for (Eigen::Index r = 0; r < p.w2.rows(); ++r)
    for (Eigen::Index c = 0; c < p.w2.cols(); ++c) p.w2(r, c) = rng.uniform(-0.5, 0.5) * s2;
  for (Eigen::Index i = 0; i < p.b2.size(); ++i) p.b2(i) = rng.uniform(-0.5, 0.5) * s2;
  p.validate();
  return p;
}

bool ScorerParameters::operator==(const ScorerParameters& o) const {
  return w1.rows() == o.w1.rows() && w1.cols() == o.w1.cols() && w1 == o.w1 && b1 == o.b1 && w2 == o.w2 &&
         b2 == o.b2 && dropout_rate == o.dropout_rate && train_seed == o.train_seed;
}

DropoutMask draw_mask(int hidden_dim, double dropout_rate, Rng& rng) {
  DropoutMask mask(hidden_dim);
  const double keep = 1.0 - dropout_rate;
  for (int i = 0; i < hidden_dim; ++i) mask(i) = rng.uniform() < keep ? 1.0 : 0.0;
  return mask;
}

double forward(const ScorerParameters& params, const FeatureVector& x) {
  return probability(run(params, x, nullptr).logits);
}

double forward(const ScorerParameters& params, const FeatureVector& x, const DropoutMask& mask) {
  return probability(run(params, x, &mask).logits);
}

double loss_and_gradient(const ScorerParameters& params, const FeatureVector& x, int label, const DropoutMask* mask,
                         ScorerParameters* grad) {
  const Activations a = run(params, x, mask);
  const double margin = a.logits(1) - a.logits(0);
  const double loss = label == 1 ? softplus(margin) : softplus(-margin);
  check_finite(loss, "loss");
  if (grad == nullptr) return loss;

  const double p = 1.0 / (1.0 + std::exp(margin));
  Eigen::Vector2d dz;
  dz(0) = p - label;
  dz(1) = -dz(0);

  grad->w2 = dz * a.hidden.transpose();
  grad->b2 = dz;
  Eigen::VectorXd dh = params.w2.transpose() * dz;
  if (mask != nullptr) dh = dh.cwiseProduct(*mask) / (1.0 - params.dropout_rate);
  const Eigen::VectorXd t = a.pre.array().tanh();
  const Eigen::VectorXd dpre = dh.array() * (1.0 - t.array().square());
  grad->w1 = dpre * x.transpose();
  grad->b1 = dpre;
  return loss;
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw Error("learning_rate must be >= 0");
  if (epochs < 1) throw Error("epochs must be positive");
  if (batch_size < 1) throw Error("batch_size must be positive");
  if (hidden_dim < 1) throw Error("hidden_dim must be positive");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw Error("dropout_rate must lie in [0, 1)");
}

TrainResult train(const std::vector<DialogueInstance>& corpus, const TrainConfig& cfg, std::uint64_t seed) {
  return train(corpus, TermStats::from_corpus(corpus), cfg, seed);
}

TrainResult train(const std::vector<DialogueInstance>& corpus, const TermStats& stats, const TrainConfig& cfg,
                  std::uint64_t seed) {
  cfg.validate();
  if (corpus.empty()) throw Error("train: corpus is empty");

  struct Example {
    std::size_t instance;
    std::size_t candidate;
  };
  std::vector<Eigen::MatrixXd> features;
  std::vector<std::size_t> relevant;
  std::vector<std::vector<std::size_t>> non_relevant(corpus.size());
  features.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& inst = corpus[i];
    if (inst.relevant_count() < 1 || inst.relevant_count() == static_cast<int>(inst.size())) {
      throw Error("train: instance '" + inst.id() + "' needs both relevant and non-relevant candidates");
    }
    features.push_back(extract_features(inst, stats));
    relevant.push_back(inst.relevant_index());
    for (std::size_t j = 0; j < inst.size(); ++j) {
      if (inst.labels()[j] == 0) non_relevant[i].push_back(j);
    }
  }

  TrainResult result;
  result.params = ScorerParameters::initialize(kFeatureDim, cfg.hidden_dim, cfg.dropout_rate,
                                               derive_seed(seed, "scorer.init"));
  result.params.train_seed = seed;
  ScorerParameters& params = result.params;
  ScorerParameters grad = ScorerParameters::zeros(kFeatureDim, cfg.hidden_dim);
  ScorerParameters step = grad;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng pair_rng(derive_seed(seed, "scorer.pairs", static_cast<std::uint64_t>(epoch)));
    Rng mask_rng(derive_seed(seed, "scorer.dropout", static_cast<std::uint64_t>(epoch)));

    std::vector<Example> pairs;
    std::size_t n_rel = 0;
    std::size_t n_non = 0;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      for (std::size_t j = 0; j < corpus[i].size(); ++j) {
        if (corpus[i].labels()[j] == 1) {
          pairs.push_back({i, j});
          ++n_rel;
        }
      }
      if (cfg.balance) {
        // One non-relevant pair per relevant pair.
        for (int r = 0; r < corpus[i].relevant_count(); ++r) {
          pairs.push_back({i, non_relevant[i][pair_rng.below(non_relevant[i].size())]});
          ++n_non;
        }
      } else {
        for (std::size_t j : non_relevant[i]) pairs.push_back({i, j});
        n_non += non_relevant[i].size();
      }
    }
    pair_rng.shuffle(pairs);
    result.relevant_pairs_per_epoch = n_rel;
    result.non_relevant_pairs_per_epoch = n_non;

    double epoch_loss = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < pairs.size(); start += static_cast<std::size_t>(cfg.batch_size), ++batch_index) {
      const std::size_t end = std::min(pairs.size(), start + static_cast<std::size_t>(cfg.batch_size));
      step.w1.setZero();
      step.b1.setZero();
      step.w2.setZero();
      step.b2.setZero();
      for (std::size_t e = start; e < end; ++e) {
        const auto& ex = pairs[e];
        const FeatureVector x = features[ex.instance].row(static_cast<Eigen::Index>(ex.candidate)).transpose();
        const int label = corpus[ex.instance].labels()[ex.candidate];
        double loss = 0.0;
        try {
          if (params.dropout_rate > 0.0) {
            const DropoutMask mask = draw_mask(cfg.hidden_dim, params.dropout_rate, mask_rng);
            loss = loss_and_gradient(params, x, label, &mask, &grad);
          } else {
            loss = loss_and_gradient(params, x, label, nullptr, &grad);
          }
        } catch (const Error& err) {
          throw Error("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                      std::to_string(batch_index) + ": " + err.what());
        }
        epoch_loss += loss;
        step.w1 += grad.w1;
        step.b1 += grad.b1;
        step.w2 += grad.w2;
        step.b2 += grad.b2;
      }
      const double scale = cfg.learning_rate / static_cast<double>(end - start);
      params.w1 -= scale * step.w1;
      params.b1 -= scale * step.b1;
      params.w2 -= scale * step.w2;
      params.b2 -= scale * step.b2;
      if (!params.w1.allFinite() || !params.w2.allFinite() || !params.b1.allFinite() || !params.b2.allFinite()) {
        throw Error("training diverged at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_index));
      }
    }
    result.epoch_loss.push_back(epoch_loss / static_cast<double>(pairs.size()));
  }
  return result;
}

double gradient_check(const ScorerParameters& params, const FeatureVector& x, int label) {
  const auto d = gradient_discrepancies(params, x, label);
  return d.empty() ? 0.0 : *std::max_element(d.begin(), d.end());
}

std::vector<double> gradient_discrepancies(const ScorerParameters& params, const FeatureVector& x, int label) {
  constexpr double kStep = 1e-5;
  ScorerParameters grad = params;
  loss_and_gradient(params, x, label, nullptr, &grad);
  const std::vector<double> analytic = grad.flatten();
  std::vector<double> theta = params.flatten();
  ScorerParameters probe = params;
  std::vector<double> out(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double saved = theta[i];
    theta[i] = saved + kStep;
    probe.assign(theta);
    const double up = loss_and_gradient(probe, x, label, nullptr, nullptr);
    theta[i] = saved - kStep;
    probe.assign(theta);
    const double down = loss_and_gradient(probe, x, label, nullptr, nullptr);
    theta[i] = saved;
    const double numeric = (up - down) / (2.0 * kStep);
    out[i] = std::abs(analytic[i] - numeric) / (std::abs(analytic[i]) + std::abs(numeric) + 1e-12);
  }
  return out;
}

namespace {
constexpr const char* kScorerMagic = "uqrank-scorer v1";

void write_block(std::ostream& os, const char* name, const std::vector<double>& values) {
  os << name;
  for (double v : values) os << ' ' << v;
  os << '\n';
}

std::vector<double> read_block(std::istream& is, const std::string& name, std::size_t count) {
  std::string line;
  if (!std::getline(is, line)) throw Error("scorer file truncated before '" + name + "'");
  std::istringstream ls(line);
  std::string tag;
  ls >> tag;
  if (tag != name) throw Error("scorer file: expected '" + name + "', found '" + tag + "'");
  std::vector<double> out;
  std::string token;
  while (ls >> token) {
    try {
      out.push_back(std::stod(token));
    } catch (const std::exception&) {
      throw Error("scorer file: bad number '" + token + "' in '" + name + "'");
    }
  }
  if (out.size() != count) {
    throw Error("scorer file: '" + name + "' has " + std::to_string(out.size()) + " values, expected " +
                std::to_string(count));
  }
  return out;
}
}  // namespace

void save_parameters(const std::filesystem::path& path, const ScorerParameters& params,
                     const std::string& config_hash) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write scorer file " + path.string());
  os << std::setprecision(17);
  os << kScorerMagic << '\n';
  if (!config_hash.empty()) os << "config " << config_hash << '\n';
  os << "d " << params.input_dim() << '\n'
     << "h " << params.hidden_dim() << '\n'
     << "dropout_rate " << params.dropout_rate << '\n'
     << "train_seed " << params.train_seed << '\n';
  const auto flat = params.flatten();
  const auto d = static_cast<std::size_t>(params.input_dim());
  const auto h = static_cast<std::size_t>(params.hidden_dim());
  auto it = flat.begin();
  auto take = [&](std::size_t n) {
    std::vector<double> v(it, it + static_cast<std::ptrdiff_t>(n));
    it += static_cast<std::ptrdiff_t>(n);
    return v;
  };
  write_block(os, "w1", take(h * d));
  write_block(os, "b1", take(h));
  write_block(os, "w2", take(2 * h));
  write_block(os, "b2", take(2));
}

ScorerParameters load_parameters(const std::filesystem::path& path, std::optional<int> expected_input_dim,
                                 std::optional<int> expected_hidden_dim) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open scorer file " + path.string());
  std::string line;
  std::getline(is, line);
  if (line != kScorerMagic) throw Error("not a scorer file (bad header): " + path.string());
  int d = 0;
  int h = 0;
  double rate = 0.0;
  std::uint64_t seed = 0;
  bool pending = false;
  auto header = [&](const char* key, auto& value) {
    std::string tag;
    if (!pending && !std::getline(is, line)) throw Error(std::string("scorer file truncated before '") + key + "'");
    pending = false;
    std::istringstream ls(line);
    if (!(ls >> tag >> value) || tag != key) throw Error(std::string("scorer file: bad '") + key + "' line");
  };
  if (!std::getline(is, line)) throw Error("scorer file truncated before 'd'");
  pending = line.rfind("config ", 0) != 0;
  header("d", d);
  header("h", h);
  header("dropout_rate", rate);
  header("train_seed", seed);
  if (d < 1 || h < 1) throw Error("scorer file: dimensions must be positive");
  if (expected_input_dim && *expected_input_dim != d) {
    throw Error("scorer file has d=" + std::to_string(d) + ", expected " + std::to_string(*expected_input_dim));
  }
  if (expected_hidden_dim && *expected_hidden_dim != h) {
    throw Error("scorer file has h=" + std::to_string(h) + ", expected " + std::to_string(*expected_hidden_dim));
  }
  ScorerParameters p = ScorerParameters::zeros(d, h, rate);
  p.train_seed = seed;
  const auto ud = static_cast<std::size_t>(d);
  const auto uh = static_cast<std::size_t>(h);
  std::vector<double> flat;
  for (auto [name, n] : {std::pair{"w1", uh * ud}, {"b1", uh}, {"w2", 2 * uh}, {"b2", std::size_t{2}}}) {
    auto block = read_block(is, name, n);
    flat.insert(flat.end(), block.begin(), block.end());
  }
  p.assign(flat);
  p.validate();
  return p;
}

}  // namespace uqrank
