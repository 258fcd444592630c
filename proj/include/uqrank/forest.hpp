#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace uqrank {

struct ForestConfig {
  int trees = 100;
  // Features considered per split; 0 means floor(sqrt(d)), at least 1.
  int features_per_split = 0;
};

// Bagged, fully grown Gini trees for binary labels with majority voting.
class RandomForest {
 public:
  static RandomForest fit(const Eigen::MatrixXd& x, const std::vector<int>& y, const ForestConfig& cfg,
                          std::uint64_t seed);

  int predict(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  std::vector<int> predict_rows(const Eigen::MatrixXd& x) const;
  std::size_t tree_count() const { return trees_.size(); }

  bool operator==(const RandomForest&) const = default;

 private:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    int label = 0;
    bool operator==(const Node&) const = default;
  };
  using Tree = std::vector<Node>;

  static int predict_tree(const Tree& tree, const Eigen::Ref<const Eigen::VectorXd>& x);

  std::vector<Tree> trees_;
  friend struct TreeBuilder;
};

}  // namespace uqrank
