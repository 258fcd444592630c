#include "uqrank/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "uqrank/core_data.hpp"
#include "uqrank/random.hpp"

namespace uqrank {

struct TreeBuilder {
  const Eigen::MatrixXd& x;
  const std::vector<int>& y;
  int mtry;
  Rng rng;
  RandomForest::Tree tree;

  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double impurity = 0.0;
  };

  static double gini(std::size_t pos, std::size_t n) {
    if (n == 0) return 0.0;
    const double p = static_cast<double>(pos) / static_cast<double>(n);
    return 2.0 * p * (1.0 - p);
  }

  // Best threshold on one feature; feature = -1 when the feature is constant.
  Split best_on(int f, std::vector<std::size_t>& idx, std::size_t positives) const {
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      const double va = x(static_cast<Eigen::Index>(a), f);
      const double vb = x(static_cast<Eigen::Index>(b), f);
      return va != vb ? va < vb : a < b;
    });
    Split best;
    const std::size_t n = idx.size();
    std::size_t left_pos = 0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      left_pos += static_cast<std::size_t>(y[idx[i]]);
      const double v = x(static_cast<Eigen::Index>(idx[i]), f);
      const double next = x(static_cast<Eigen::Index>(idx[i + 1]), f);
      if (v == next) continue;
      const std::size_t nl = i + 1;
      const std::size_t nr = n - nl;
      const double imp = (static_cast<double>(nl) * gini(left_pos, nl) +
                          static_cast<double>(nr) * gini(positives - left_pos, nr)) /
                         static_cast<double>(n);
      if (best.feature < 0 || imp < best.impurity) {
        double mid = v + (next - v) / 2.0;
        if (!(mid < next)) mid = v;
        best = {f, mid, imp};
      }
    }
    return best;
  }

  int grow(std::vector<std::size_t> idx) {
    std::size_t positives = 0;
    for (std::size_t i : idx) positives += static_cast<std::size_t>(y[i]);
    const int node_id = static_cast<int>(tree.size());
    tree.push_back({});
    tree[node_id].label = 2 * positives > idx.size() ? 1 : 0;
    if (positives == 0 || positives == idx.size()) return node_id;

    std::vector<int> features(static_cast<std::size_t>(x.cols()));
    std::iota(features.begin(), features.end(), 0);
    rng.shuffle(features);
    Split best;
    // Past the first mtry features, keep looking only until some feature splits.
    for (std::size_t k = 0; k < features.size(); ++k) {
      if (static_cast<int>(k) >= mtry && best.feature >= 0) break;
      Split s = best_on(features[k], idx, positives);
      if (s.feature >= 0 && (best.feature < 0 || s.impurity < best.impurity)) best = s;
    }
    if (best.feature < 0) return node_id;

    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    for (std::size_t i : idx) {
      (x(static_cast<Eigen::Index>(i), best.feature) <= best.threshold ? left : right).push_back(i);
    }
    idx.clear();
    idx.shrink_to_fit();
    const int l = grow(std::move(left));
    const int r = grow(std::move(right));
    tree[node_id].feature = best.feature;
    tree[node_id].threshold = best.threshold;
    tree[node_id].left = l;
    tree[node_id].right = r;
    return node_id;
  }
};

RandomForest RandomForest::fit(const Eigen::MatrixXd& x, const std::vector<int>& y, const ForestConfig& cfg,
                               std::uint64_t seed) {
  if (x.rows() == 0 || static_cast<std::size_t>(x.rows()) != y.size()) throw Error("forest: bad training data shape");
  if (cfg.trees < 1) throw Error("forest: need at least one tree");
  const int d = static_cast<int>(x.cols());
  const int mtry = cfg.features_per_split > 0
                       ? std::min(cfg.features_per_split, d)
                       : std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(d)))));
  RandomForest forest;
  const std::size_t n = y.size();
  for (int t = 0; t < cfg.trees; ++t) {
    TreeBuilder builder{x, y, mtry, Rng(derive_seed(seed, "forest.tree", static_cast<std::uint64_t>(t))), {}};
    std::vector<std::size_t> sample(n);
    for (auto& s : sample) s = builder.rng.below(n);
    builder.grow(std::move(sample));
    forest.trees_.push_back(std::move(builder.tree));
  }
  return forest;
}

int RandomForest::predict_tree(const Tree& tree, const Eigen::Ref<const Eigen::VectorXd>& x) {
  int node = 0;
  while (tree[node].feature >= 0) {
    node = x(tree[node].feature) <= tree[node].threshold ? tree[node].left : tree[node].right;
  }
  return tree[node].label;
}

int RandomForest::predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  std::size_t votes = 0;
  for (const auto& t : trees_) votes += static_cast<std::size_t>(predict_tree(t, x));
  return 2 * votes > trees_.size() ? 1 : 0;
}

std::vector<int> RandomForest::predict_rows(const Eigen::MatrixXd& x) const {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) out.push_back(predict(x.row(i).transpose()));
  return out;
}

}  // namespace uqrank
