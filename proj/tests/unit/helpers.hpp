#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "uqrank/core_data.hpp"
#include "uqrank/ranker.hpp"
#include "uqrank/random.hpp"

namespace testing {

// k candidates "c0".."c{k-1}" with the relevant one at `relevant` (or none
// when relevant >= k).
inline uqrank::DialogueInstance make_instance(const std::string& id, std::size_t k, std::size_t relevant,
                                              std::vector<std::string> context = {"hello there", "how are you"}) {
  std::vector<uqrank::CandidateResponse> cands;
  std::vector<int> labels;
  for (std::size_t j = 0; j < k; ++j) {
    cands.emplace_back("c" + std::to_string(j), "response number " + std::to_string(j),
                       j == relevant ? uqrank::Provenance::ground_truth : uqrank::Provenance::sampled_random);
    labels.push_back(j == relevant ? 1 : 0);
  }
  return uqrank::DialogueInstance(id, std::move(context), std::move(cands), std::move(labels));
}

inline Eigen::MatrixXd random_scores(uqrank::Rng& rng, Eigen::Index s, Eigen::Index k) {
  Eigen::MatrixXd m(s, k);
  for (Eigen::Index r = 0; r < s; ++r)
    for (Eigen::Index c = 0; c < k; ++c) m(r, c) = rng.uniform();
  return m;
}

inline uqrank::PredictiveDistribution make_distribution(const uqrank::DialogueInstance& inst, Eigen::MatrixXd scores,
                                                        uqrank::DistributionSource src) {
  uqrank::PredictiveDistribution d;
  d.instance_id = inst.id();
  d.candidate_ids = inst.candidate_ids();
  d.source = src;
  for (Eigen::Index r = 0; r < scores.rows(); ++r) d.sample_seeds.push_back(static_cast<std::uint64_t>(r));
  d.scores = std::move(scores);
  return d;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("uqrank-" + tag + "-" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::uint64_t ref_fnv(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// Signed hashed bag of tokens in 256 dimensions, unit length unless empty.
inline Eigen::VectorXd ref_embedding(const std::vector<std::string>& tokens) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(256);
  for (const auto& t : tokens) {
    const auto h = ref_fnv(t);
    v(static_cast<Eigen::Index>(h % 256)) += (h >> 63) ? -1.0 : 1.0;
  }
  return v.norm() > 0 ? Eigen::VectorXd(v / v.norm()) : v;
}

inline uqrank::ScorerParameters random_params(uqrank::Rng& rng, int d, int h, double rate = 0.0,
                                              double scale = 1.0) {
  auto p = uqrank::ScorerParameters::zeros(d, h, rate);
  std::vector<double> flat(p.parameter_count());
  for (auto& v : flat) v = rng.uniform(-scale, scale);
  p.assign(flat);
  return p;
}

// Scalar-by-scalar evaluation of the two-layer scorer. `mask` may be null.
inline double scalar_forward(const uqrank::ScorerParameters& p, const std::vector<double>& x,
                             const std::vector<double>* mask) {
  const int h = p.hidden_dim();
  const int d = p.input_dim();
  std::vector<double> hidden(static_cast<std::size_t>(h));
  for (int i = 0; i < h; ++i) {
    double s = p.b1(i);
    for (int j = 0; j < d; ++j) s += p.w1(i, j) * x[static_cast<std::size_t>(j)];
    double a = std::tanh(s);
    if (mask) a = a * (*mask)[static_cast<std::size_t>(i)] / (1.0 - p.dropout_rate);
    hidden[static_cast<std::size_t>(i)] = a;
  }
  double z0 = p.b2(0), z1 = p.b2(1);
  for (int i = 0; i < h; ++i) {
    z0 += p.w2(0, i) * hidden[static_cast<std::size_t>(i)];
    z1 += p.w2(1, i) * hidden[static_cast<std::size_t>(i)];
  }
  return std::exp(z0) / (std::exp(z0) + std::exp(z1));
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  out << content;
}

}  // namespace testing
