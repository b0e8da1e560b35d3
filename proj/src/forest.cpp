#include "powerprint/forest.hpp"

#include "powerprint/parallel.hpp"
#include "powerprint/text.hpp"
#include "powerprint/trace.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace powerprint {

Eigen::Index ForestParams::features_per_split(Eigen::Index n_features) const {
  switch (feature_rule) {
    case FeatureRule::Sqrt:
      return std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::sqrt(static_cast<double>(n_features))));
    case FeatureRule::Fixed:
      return std::clamp<Eigen::Index>(fixed_features, 1, n_features);
    case FeatureRule::All:
      return n_features;
  }
  return n_features;
}

void ForestParams::validate() const {
  if (n_trees < 1) throw std::invalid_argument("n_trees must be positive");
  if (max_depth < 0) throw std::invalid_argument("max_depth must be positive or 0 (unlimited)");
  if (min_samples_split < 2) throw std::invalid_argument("min_samples_split must be at least 2");
  if (feature_rule == FeatureRule::Fixed && fixed_features < 1)
    throw std::invalid_argument("features_per_split must be positive");
}

ForestParams read_forest_params(std::istream& in) {
  ForestParams p;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto body = text::trim(raw);
    if (body.empty() || body.front() == '#') continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) throw DataError("expected key=value", line);
    const auto key = text::trim(body.substr(0, eq));
    const auto value = text::trim(body.substr(eq + 1));
    auto integer = [&] {
      const auto v = text::parse_int(value);
      if (!v || *v < 0 || *v > 1'000'000'000) throw DataError("expected a non-negative integer", line);
      return static_cast<int>(*v);
    };
    if (key == "n_trees") {
      p.n_trees = integer();
    } else if (key == "max_depth") {
      p.max_depth = value == "unlimited" ? 0 : integer();
    } else if (key == "min_samples_split") {
      p.min_samples_split = integer();
    } else if (key == "features_per_split") {
      if (value == "sqrt") {
        p.feature_rule = FeatureRule::Sqrt;
      } else if (value == "all") {
        p.feature_rule = FeatureRule::All;
      } else {
        p.feature_rule = FeatureRule::Fixed;
        p.fixed_features = integer();
      }
    } else if (key == "bootstrap") {
      if (value == "true" || value == "1") p.bootstrap = true;
      else if (value == "false" || value == "0") p.bootstrap = false;
      else throw DataError("bootstrap is true or false", line);
    } else {
      throw DataError("unknown forest key '" + std::string(key) + "'", line);
    }
  }
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }
  return p;
}

ForestParams load_forest_params(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open forest parameter file '" + path.string() + "'");
  return read_forest_params(in);
}

void write_forest_params(const ForestParams& p, std::ostream& out) {
  out << "n_trees=" << p.n_trees << '\n'
      << "max_depth=" << (p.max_depth == 0 ? std::string("unlimited") : std::to_string(p.max_depth)) << '\n'
      << "min_samples_split=" << p.min_samples_split << '\n'
      << "features_per_split="
      << (p.feature_rule == FeatureRule::Sqrt  ? std::string("sqrt")
          : p.feature_rule == FeatureRule::All ? std::string("all")
                                               : std::to_string(p.fixed_features))
      << '\n'
      << "bootstrap=" << (p.bootstrap ? "true" : "false") << '\n';
}

double gini_impurity(std::span<const int> label_counts) {
  long long total = 0;
  for (const int c : label_counts) {
    if (c < 0) throw std::invalid_argument("negative label count");
    total += c;
  }
  if (total == 0) throw std::invalid_argument("gini impurity of an empty node");
  double sum_sq = 0.0;
  for (const int c : label_counts) {
    const double p = static_cast<double>(c) / static_cast<double>(total);
    sum_sq += p * p;
  }
  return 1.0 - sum_sq;
}

double split_midpoint(double lo, double hi) noexcept {
  const double mid = lo + (hi - lo) / 2.0;
  return mid < hi ? mid : lo;
}

namespace {

/// Reusable buffers for scanning split candidates.
class SplitScanner {
 public:
  explicit SplitScanner(int n_labels) : left_(n_labels), right_(n_labels) {}

  std::optional<Split> scan(const Eigen::Ref<const Eigen::MatrixXd>& x, std::span<const int> labels,
                            std::span<const Eigen::Index> rows, std::span<const Eigen::Index> features) {
    const auto n = static_cast<long long>(rows.size());
    if (n < 2) return std::nullopt;

    std::fill(right_.begin(), right_.end(), 0);
    for (const auto r : rows) ++right_[static_cast<std::size_t>(labels[static_cast<std::size_t>(r)])];
    long long parent_sq = 0;
    for (const int c : right_) parent_sq += static_cast<long long>(c) * c;
    const double nd = static_cast<double>(n);
    const double parent_gini = 1.0 - static_cast<double>(parent_sq) / (nd * nd);
    if (parent_gini <= 0.0) return std::nullopt;

    std::optional<Split> best;
    for (const auto f : features) {
      pairs_.clear();
      for (const auto r : rows) pairs_.emplace_back(x(r, f), labels[static_cast<std::size_t>(r)]);
      std::sort(pairs_.begin(), pairs_.end());
      if (pairs_.front().first == pairs_.back().first) continue;

      std::fill(left_.begin(), left_.end(), 0);
      std::vector<int> right_counts(right_);
      long long sq_left = 0;
      long long sq_right = parent_sq;
      for (long long i = 0; i + 1 < n; ++i) {
        const auto label = static_cast<std::size_t>(pairs_[static_cast<std::size_t>(i)].second);
        sq_left += 2LL * left_[label] + 1;
        ++left_[label];
        sq_right -= 2LL * right_counts[label] - 1;
        --right_counts[label];
        const double v = pairs_[static_cast<std::size_t>(i)].first;
        const double next = pairs_[static_cast<std::size_t>(i + 1)].first;
        if (v == next) continue;
        const double nl = static_cast<double>(i + 1);
        const double nr = nd - nl;
        const double child = (nl * (1.0 - static_cast<double>(sq_left) / (nl * nl)) +
                              nr * (1.0 - static_cast<double>(sq_right) / (nr * nr))) / nd;
        const double decrease = parent_gini - child;
        if (decrease <= kSplitTieTolerance) continue;
        if (!best || decrease > best->decrease + kSplitTieTolerance)
          best = Split{f, split_midpoint(v, next), decrease};
      }
    }
    return best;
  }

 private:
  std::vector<std::pair<double, int>> pairs_;
  std::vector<int> left_;
  std::vector<int> right_;
};

std::vector<Eigen::Index> sorted_subset(Eigen::Index n_features, Eigen::Index k, Rng& rng) {
  std::vector<Eigen::Index> all(static_cast<std::size_t>(n_features));
  std::iota(all.begin(), all.end(), Eigen::Index{0});
  if (k < n_features) {
    for (Eigen::Index i = 0; i < k; ++i) {
      std::uniform_int_distribution<Eigen::Index> pick(i, n_features - 1);
      std::swap(all[static_cast<std::size_t>(i)], all[static_cast<std::size_t>(pick(rng))]);
    }
    all.resize(static_cast<std::size_t>(k));
    std::sort(all.begin(), all.end());
  }
  return all;
}

class TreeGrower {
 public:
  TreeGrower(const Eigen::Ref<const Eigen::MatrixXd>& x, std::span<const int> labels, int n_labels,
             const ForestParams& params, Rng& rng)
      : x_(x), labels_(labels), n_labels_(n_labels), params_(params), rng_(rng), scanner_(n_labels),
        per_split_(params.features_per_split(x.cols())) {}

  DecisionTree grow(std::vector<Eigen::Index> rows) {
    DecisionTree tree;
    build(tree, std::move(rows), 0);
    return tree;
  }

 private:
  int build(DecisionTree& tree, std::vector<Eigen::Index> rows, int depth) {
    const int index = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();

    std::optional<Split> split;
    const bool depth_ok = params_.max_depth == 0 || depth < params_.max_depth;
    if (depth_ok && static_cast<int>(rows.size()) >= params_.min_samples_split) {
      const auto features = sorted_subset(x_.cols(), per_split_, rng_);
      split = scanner_.scan(x_, labels_, rows, features);
    }
    if (!split) {
      auto& leaf = tree.nodes[static_cast<std::size_t>(index)];
      leaf.label_counts.assign(static_cast<std::size_t>(n_labels_), 0);
      for (const auto r : rows) ++leaf.label_counts[static_cast<std::size_t>(labels_[static_cast<std::size_t>(r)])];
      return index;
    }

    std::vector<Eigen::Index> left_rows;
    std::vector<Eigen::Index> right_rows;
    for (const auto r : rows) (x_(r, split->feature) <= split->threshold ? left_rows : right_rows).push_back(r);
    rows.clear();
    rows.shrink_to_fit();

    const int left = build(tree, std::move(left_rows), depth + 1);
    const int right = build(tree, std::move(right_rows), depth + 1);
    auto& node = tree.nodes[static_cast<std::size_t>(index)];
    node.feature = split->feature;
    node.threshold = split->threshold;
    node.left = left;
    node.right = right;
    return index;
  }

  const Eigen::Ref<const Eigen::MatrixXd>& x_;
  std::span<const int> labels_;
  int n_labels_;
  const ForestParams& params_;
  Rng& rng_;
  SplitScanner scanner_;
  Eigen::Index per_split_;
};

void check_training_data(const Eigen::Ref<const Eigen::MatrixXd>& x, std::span<const int> labels, int n_labels) {
  if (static_cast<std::size_t>(x.rows()) != labels.size())
    throw std::invalid_argument("feature rows and labels differ in length");
  for (const int l : labels)
    if (l < 0 || l >= n_labels) throw std::invalid_argument("label index outside the vocabulary");
  if (!x.allFinite()) throw std::invalid_argument("training features must be finite");
}

}  // namespace

std::optional<Split> best_split(const Eigen::Ref<const Eigen::MatrixXd>& x, std::span<const int> labels,
                                int n_labels, std::span<const Eigen::Index> rows,
                                std::span<const Eigen::Index> features) {
  check_training_data(x, labels, n_labels);
  for (const auto f : features)
    if (f < 0 || f >= x.cols()) throw std::out_of_range("feature index out of range");
  std::vector<Eigen::Index> sorted(features.begin(), features.end());
  std::sort(sorted.begin(), sorted.end());
  return SplitScanner(n_labels).scan(x, labels, rows, sorted);
}

int TreeNode::majority() const {
  return static_cast<int>(std::max_element(label_counts.begin(), label_counts.end()) - label_counts.begin());
}

const TreeNode& DecisionTree::leaf_for(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
  const TreeNode* node = &nodes.front();
  while (!node->is_leaf())
    node = &nodes[static_cast<std::size_t>(row(node->feature) <= node->threshold ? node->left : node->right)];
  return *node;
}

int DecisionTree::depth() const {
  std::vector<int> depth(nodes.size(), 0);
  int deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    deepest = std::max(deepest, depth[i]);
    if (!nodes[i].is_leaf()) {
      depth[static_cast<std::size_t>(nodes[i].left)] = depth[i] + 1;
      depth[static_cast<std::size_t>(nodes[i].right)] = depth[i] + 1;
    }
  }
  return deepest;
}

DecisionTree grow_tree(const Eigen::Ref<const Eigen::MatrixXd>& x, std::span<const int> labels, int n_labels,
                       std::vector<Eigen::Index> rows, const ForestParams& params, Rng& rng) {
  check_training_data(x, labels, n_labels);
  if (rows.empty()) throw std::invalid_argument("cannot grow a tree on zero rows");
  return TreeGrower(x, labels, n_labels, params, rng).grow(std::move(rows));
}

ForestModel train(const Eigen::Ref<const Eigen::MatrixXd>& x, std::span<const int> labels,
                  std::vector<std::string> label_names, std::vector<std::string> feature_names,
                  const ForestParams& params, Seed seed) {
  params.validate();
  const int n_labels = static_cast<int>(label_names.size());
  check_training_data(x, labels, n_labels);
  if (static_cast<Eigen::Index>(feature_names.size()) != x.cols())
    throw std::invalid_argument("feature name count does not match feature columns");
  if (x.rows() < 2) throw std::invalid_argument("training needs at least two rows");
  if (std::adjacent_find(labels.begin(), labels.end(), std::not_equal_to<>()) == labels.end())
    throw std::invalid_argument("training needs at least two distinct labels");

  ForestModel model{std::vector<DecisionTree>(static_cast<std::size_t>(params.n_trees)), std::move(label_names),
                    params, std::move(feature_names), seed};
  const Eigen::Index n = x.rows();
  parallel_for(model.trees.size(), [&](std::size_t t) {
    Rng rng(derive_seed(seed, t));
    std::vector<Eigen::Index> rows(static_cast<std::size_t>(n));
    if (params.bootstrap) {
      std::uniform_int_distribution<Eigen::Index> draw(0, n - 1);
      for (auto& r : rows) r = draw(rng);
    } else {
      std::iota(rows.begin(), rows.end(), Eigen::Index{0});
    }
    model.trees[t] = TreeGrower(x, labels, n_labels, params, rng).grow(std::move(rows));
  });
  return model;
}

ForestPrediction predict(const ForestModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  if (row.size() != model.n_features())
    throw std::invalid_argument("feature vector has " + std::to_string(row.size()) + " values, model expects " +
                                std::to_string(model.n_features()));
  Eigen::VectorXd votes = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.labels.size()));
  for (const auto& tree : model.trees) votes(tree.predict(row)) += 1.0;
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < votes.size(); ++i)
    if (votes(i) > votes(best)) best = i;
  return {static_cast<int>(best), votes / static_cast<double>(model.trees.size())};
}

namespace {
// Per-node subtree label counts, filled children-first (pre-order reversed).
std::vector<std::vector<int>> subtree_counts(const DecisionTree& tree, std::size_t n_labels) {
  std::vector<std::vector<int>> counts(tree.nodes.size());
  for (std::size_t i = tree.nodes.size(); i-- > 0;) {
    const auto& node = tree.nodes[i];
    if (node.is_leaf()) {
      counts[i] = node.label_counts;
    } else {
      counts[i].assign(n_labels, 0);
      for (std::size_t k = 0; k < n_labels; ++k)
        counts[i][k] = counts[static_cast<std::size_t>(node.left)][k] + counts[static_cast<std::size_t>(node.right)][k];
    }
  }
  return counts;
}

double total(const std::vector<int>& c) { return std::accumulate(c.begin(), c.end(), 0.0); }
}  // namespace

Eigen::VectorXd importances(const ForestModel& model) {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(model.n_features());
  for (const auto& tree : model.trees) {
    const auto counts = subtree_counts(tree, model.labels.size());
    const double root_n = total(counts[0]);
    Eigen::VectorXd per_tree = Eigen::VectorXd::Zero(model.n_features());
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
      const auto& node = tree.nodes[i];
      if (node.is_leaf()) continue;
      const auto& l = counts[static_cast<std::size_t>(node.left)];
      const auto& r = counts[static_cast<std::size_t>(node.right)];
      const double n = total(counts[i]);
      const double decrease = gini_impurity(counts[i]) - (total(l) * gini_impurity(l) + total(r) * gini_impurity(r)) / n;
      per_tree(node.feature) += (n / root_n) * std::max(0.0, decrease);
    }
    const double s = per_tree.sum();
    if (s > 0.0) sum += per_tree / s;
  }
  const double s = sum.sum();
  return s > 0.0 ? Eigen::VectorXd(sum / s) : sum;
}

// ---------------------------------------------------------------------------
// Serialization. Trees are written in pre-order: "N <feature> <threshold>" for
// internal nodes, "L <count>..." for leaves.
// ---------------------------------------------------------------------------

void write_forest(const ForestModel& model, std::ostream& out) {
  out << "[forest]\n";
  write_forest_params(model.params, out);
  out << "training_seed=" << model.training_seed << '\n'
      << "labels=" << text::join(model.labels, ",") << '\n'
      << "feature_names=" << text::join(model.feature_names, ",") << '\n'
      << "trees=" << model.trees.size() << '\n';
  for (std::size_t t = 0; t < model.trees.size(); ++t) {
    const auto& tree = model.trees[t];
    out << "tree " << t << " nodes=" << tree.nodes.size() << '\n';
    for (const auto& node : tree.nodes) {
      if (node.is_leaf()) {
        out << 'L';
        for (const int c : node.label_counts) out << ' ' << c;
      } else {
        out << "N " << node.feature << ' ' << text::format_double(node.threshold);
      }
      out << '\n';
    }
  }
  out << "[end forest]\n";
}

namespace {

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}
  std::string next(const char* what) {
    std::string line;
    if (!std::getline(in_, line)) throw DataError(std::string("unexpected end of model file, expected ") + what, line_ + 1);
    ++line_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  }
  std::string value(std::string_view key) {
    const auto line = next(std::string(key).c_str());
    if (line.rfind(std::string(key) + "=", 0) != 0) fail("expected '" + std::string(key) + "='");
    return line.substr(key.size() + 1);
  }
  [[noreturn]] void fail(const std::string& what) const { throw DataError(what, line_); }
  std::size_t line() const noexcept { return line_; }

 private:
  std::istream& in_;
  std::size_t line_ = 0;
};

std::vector<std::string> split_names(const std::string& s) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  for (const auto part : text::split(s, ',')) out.emplace_back(part);
  return out;
}

int parse_pre_order(std::vector<TreeNode>& nodes, std::size_t& cursor, const std::vector<std::string>& lines,
                    std::size_t n_labels, std::size_t n_features, const LineReader& reader) {
  if (cursor >= lines.size()) reader.fail("tree ends before its pre-order sequence is complete");
  const int index = static_cast<int>(cursor);
  const auto fields = text::split(lines[cursor++], ' ');
  if (fields[0] == "L") {
    if (fields.size() != n_labels + 1) reader.fail("leaf has the wrong number of label counts");
    auto& leaf = nodes[static_cast<std::size_t>(index)];
    for (std::size_t k = 0; k < n_labels; ++k) {
      const auto c = text::parse_int(fields[k + 1]);
      if (!c || *c < 0) reader.fail("invalid leaf count");
      leaf.label_counts.push_back(static_cast<int>(*c));
    }
    if (total(leaf.label_counts) < 1) reader.fail("empty leaf");
    return index;
  }
  if (fields[0] != "N" || fields.size() != 3) reader.fail("malformed tree node");
  const auto feature = text::parse_int(fields[1]);
  const auto threshold = text::parse_double(fields[2]);
  if (!feature || *feature < 0 || static_cast<std::size_t>(*feature) >= n_features || !threshold)
    reader.fail("invalid split node");
  const int left = parse_pre_order(nodes, cursor, lines, n_labels, n_features, reader);
  const int right = parse_pre_order(nodes, cursor, lines, n_labels, n_features, reader);
  auto& node = nodes[static_cast<std::size_t>(index)];
  node.feature = static_cast<Eigen::Index>(*feature);
  node.threshold = *threshold;
  node.left = left;
  node.right = right;
  return index;
}

}  // namespace

ForestModel read_forest(std::istream& in) {
  LineReader reader(in);
  if (reader.next("[forest]") != "[forest]") reader.fail("expected '[forest]'");
  std::string params_text;
  for (const char* key : {"n_trees", "max_depth", "min_samples_split", "features_per_split", "bootstrap"})
    params_text += std::string(key) + "=" + reader.value(key) + "\n";
  ForestModel model;
  {
    std::istringstream params_in(params_text);
    model.params = read_forest_params(params_in);
  }
  const auto seed = text::parse_uint(reader.value("training_seed"));
  if (!seed) reader.fail("invalid training seed");
  model.training_seed = *seed;
  model.labels = split_names(reader.value("labels"));
  model.feature_names = split_names(reader.value("feature_names"));
  const auto n_trees = text::parse_uint(reader.value("trees"));
  if (!n_trees || *n_trees != static_cast<std::uint64_t>(model.params.n_trees))
    reader.fail("tree count does not match n_trees");
  for (std::uint64_t t = 0; t < *n_trees; ++t) {
    const auto header = reader.next("tree header");
    const std::string prefix = "tree " + std::to_string(t) + " nodes=";
    if (header.rfind(prefix, 0) != 0) reader.fail("expected '" + prefix + "<count>'");
    const auto n_nodes = text::parse_uint(std::string_view(header).substr(prefix.size()));
    if (!n_nodes || *n_nodes == 0) reader.fail("invalid node count");
    std::vector<std::string> lines;
    for (std::uint64_t i = 0; i < *n_nodes; ++i) lines.push_back(reader.next("tree node"));
    DecisionTree tree;
    tree.nodes.resize(*n_nodes);
    std::size_t cursor = 0;
    parse_pre_order(tree.nodes, cursor, lines, model.labels.size(), model.feature_names.size(), reader);
    if (cursor != lines.size()) reader.fail("tree has nodes outside its pre-order sequence");
    model.trees.push_back(std::move(tree));
  }
  if (reader.next("[end forest]") != "[end forest]") reader.fail("expected '[end forest]'");
  return model;
}

}  // namespace powerprint
