#pragma once

#include "powerprint/rng.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace powerprint {

/// How many candidate features each split considers.
enum class FeatureRule { Sqrt, Fixed, All };

struct ForestParams {
  int n_trees = 100;
  int max_depth = 0;  // 0: unlimited
  int min_samples_split = 2;
  FeatureRule feature_rule = FeatureRule::Sqrt;
  int fixed_features = 1;  // used with FeatureRule::Fixed
  bool bootstrap = true;

  Eigen::Index features_per_split(Eigen::Index n_features) const;
  void validate() const;

  friend bool operator==(const ForestParams&, const ForestParams&) = default;
};

/// key=value lines: n_trees, max_depth (integer or "unlimited"),
/// min_samples_split, features_per_split ("sqrt", "all" or k), bootstrap.
ForestParams read_forest_params(std::istream& in);
ForestParams load_forest_params(const std::filesystem::path& path);
void write_forest_params(const ForestParams& params, std::ostream& out);

/// 1 - sum_k p_k^2. Throws std::invalid_argument when the total is zero.
double gini_impurity(std::span<const int> label_counts);

/// Decreases closer than this are treated as ties.
inline constexpr double kSplitTieTolerance = 1e-12;

/// Threshold between two consecutive distinct values; always < hi.
double split_midpoint(double lo, double hi) noexcept;

struct Split {
  Eigen::Index feature = -1;
  double threshold = 0.0;
  double decrease = 0.0;  // parent Gini minus size-weighted child Gini
};

/// Best axis-aligned split of `rows` (duplicates allowed) over `features`.
///
/// Candidates are midpoints between consecutive distinct values; rows with
/// value <= threshold go left. Ties go to the lower feature index, then the
/// lower threshold. Returns nullopt when no split decreases impurity.
std::optional<Split> best_split(const Eigen::Ref<const Eigen::MatrixXd>& x, std::span<const int> labels,
                                int n_labels, std::span<const Eigen::Index> rows,
                                std::span<const Eigen::Index> features);

struct TreeNode {
  Eigen::Index feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::vector<int> label_counts;  // leaves only

  bool is_leaf() const noexcept { return feature < 0; }
  /// Most frequent label, lowest index on ties.
  int majority() const;

  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

/// Binary tree stored in pre-order; the root is nodes[0].
struct DecisionTree {
  std::vector<TreeNode> nodes;

  const TreeNode& leaf_for(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
  int predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const { return leaf_for(row).majority(); }
  int depth() const;

  friend bool operator==(const DecisionTree&, const DecisionTree&) = default;
};

struct ForestModel {
  std::vector<DecisionTree> trees;
  std::vector<std::string> labels;
  ForestParams params;
  std::vector<std::string> feature_names;
  Seed training_seed = 0;

  Eigen::Index n_features() const noexcept { return static_cast<Eigen::Index>(feature_names.size()); }

  friend bool operator==(const ForestModel&, const ForestModel&) = default;
};

/// Grows one tree on `rows` of the training data.
DecisionTree grow_tree(const Eigen::Ref<const Eigen::MatrixXd>& x, std::span<const int> labels, int n_labels,
                       std::vector<Eigen::Index> rows, const ForestParams& params, Rng& rng);

/// Bagged forest: each tree sees a bootstrap resample (when enabled) and a
/// fresh random feature subset at every split. Tree t draws from
/// derive_seed(seed, t), so the result does not depend on thread count.
ForestModel train(const Eigen::Ref<const Eigen::MatrixXd>& x, std::span<const int> labels,
                  std::vector<std::string> label_names, std::vector<std::string> feature_names,
                  const ForestParams& params, Seed seed);

struct ForestPrediction {
  int label = 0;
  Eigen::VectorXd vote_fractions;  // per vocabulary entry, sums to 1
};

/// Each tree votes its leaf majority; the modal vote wins, ties by vocabulary order.
ForestPrediction predict(const ForestModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& row);

/// Mean over trees of each feature's share of weighted Gini decrease,
/// normalized to sum to 1 (all zeros if no tree ever split).
Eigen::VectorXd importances(const ForestModel& model);

void write_forest(const ForestModel& model, std::ostream& out);
/// Reads what write_forest produced. Throws DataError.
ForestModel read_forest(std::istream& in);

}  // namespace powerprint
