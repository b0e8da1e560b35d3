#include "oracles.hpp"
#include "powerprint/forest.hpp"
#include "powerprint/trace.hpp"

#include <doctest.h>

#include <numeric>
#include <random>
#include <sstream>

using namespace powerprint;

namespace {

struct Data {
  Eigen::MatrixXd x;
  std::vector<int> labels;
  int k = 0;
};

// Small integer-valued features so duplicate values and exact ties are common.
Data make_data(std::uint64_t seed, int rows, int cols, int k, int range) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> v(0, range), l(0, k - 1);
  Data d{Eigen::MatrixXd(rows, cols), {}, k};
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) d.x(r, c) = v(rng) * 0.5;
    d.labels.push_back(l(rng));
  }
  return d;
}

std::vector<oracle::Vec> rows_of(const Eigen::MatrixXd& x) {
  std::vector<oracle::Vec> out;
  for (Eigen::Index r = 0; r < x.rows(); ++r) out.emplace_back(x.row(r).begin(), x.row(r).end());
  return out;
}

std::vector<Eigen::Index> iota(Eigen::Index n) {
  std::vector<Eigen::Index> v(static_cast<std::size_t>(n));
  std::iota(v.begin(), v.end(), Eigen::Index{0});
  return v;
}

DecisionTree leaf_tree(std::vector<int> counts) {
  DecisionTree t;
  t.nodes.push_back({-1, 0.0, -1, -1, std::move(counts)});
  return t;
}

ForestModel voting_model(const std::vector<int>& votes) {
  ForestModel m;
  m.labels = {"A", "B"};
  m.feature_names = {"f"};
  for (int v : votes) m.trees.push_back(leaf_tree(v == 0 ? std::vector<int>{1, 0} : std::vector<int>{0, 1}));
  m.params.n_trees = static_cast<int>(votes.size());
  return m;
}

}  // namespace

TEST_CASE("Gini impurity values") {
  CHECK(gini_impurity(std::vector<int>{3}) == 0.0);
  CHECK(gini_impurity(std::vector<int>{3, 0}) == 0.0);
  CHECK(gini_impurity(std::vector<int>{1, 1}) == doctest::Approx(0.5));
  CHECK(gini_impurity(std::vector<int>{2, 2, 2, 2}) == doctest::Approx(0.75));
  CHECK(gini_impurity(std::vector<int>{1, 2}) == doctest::Approx(oracle::gini({1, 2})));
  CHECK_THROWS_AS(gini_impurity(std::vector<int>{0, 0}), std::invalid_argument);
  CHECK_THROWS_AS(gini_impurity(std::vector<int>{1, -1}), std::invalid_argument);
}

TEST_CASE("split midpoint stays below the upper value") {
  CHECK(split_midpoint(1.0, 2.0) == 1.5);
  const double lo = 1.0;
  const double hi = std::nextafter(1.0, 2.0);
  CHECK(split_midpoint(lo, hi) == lo);
  CHECK(split_midpoint(-3.0, -1.0) == -2.0);
}

TEST_CASE("best split agrees with brute force") {
  for (std::uint64_t s = 0; s < 300; ++s) {
    const int rows = 2 + static_cast<int>(s % 24);
    const int cols = 1 + static_cast<int>(s % 4);
    const int k = 2 + static_cast<int>(s % 3);
    const auto d = make_data(s, rows, cols, k, 1 + static_cast<int>(s % 7));
    const auto idx = iota(rows);
    const auto features = iota(cols);
    const auto got = best_split(d.x, d.labels, k, idx, features);
    std::vector<std::size_t> uidx(idx.begin(), idx.end());
    const auto want = oracle::brute_split(rows_of(d.x), d.labels, uidx, k);
    REQUIRE(got.has_value() == want.has_value());
    if (!got) continue;
    CHECK(got->feature == want->feature);
    CHECK(got->threshold == want->threshold);
    CHECK(got->decrease == doctest::Approx(want->decrease).epsilon(1e-9));
  }
}

TEST_CASE("split tie rule prefers the lower feature then the lower threshold") {
  // Feature 0 and 1 separate equally well; feature 1 has two equal cuts.
  Eigen::MatrixXd x(4, 2);
  x << 0, 0,
       0, 1,
       1, 2,
       1, 3;
  const std::vector<int> y{0, 0, 1, 1};
  const auto both = iota(2);
  const auto s = best_split(x, y, 2, iota(4), both);
  REQUIRE(s);
  CHECK(s->feature == 0);
  CHECK(s->threshold == 0.5);
  CHECK(s->decrease == doctest::Approx(0.5));
  const std::vector<Eigen::Index> only1{1};
  const auto t = best_split(x, y, 2, iota(4), only1);
  REQUIRE(t);
  CHECK(t->threshold == 1.5);

  Eigen::MatrixXd z(4, 1);
  z << 0, 1, 2, 3;
  const std::vector<int> alt{0, 1, 1, 0};  // cuts at 0.5 and 2.5 tie
  const auto u = best_split(z, alt, 2, iota(4), std::vector<Eigen::Index>{0});
  REQUIRE(u);
  CHECK(u->threshold == 0.5);
}

TEST_CASE("no split for pure nodes, constant features or a single row") {
  Eigen::MatrixXd x(3, 1);
  x << 1, 2, 3;
  CHECK_FALSE(best_split(x, std::vector<int>{1, 1, 1}, 2, iota(3), iota(1)));
  CHECK_FALSE(best_split(Eigen::MatrixXd::Ones(3, 1), std::vector<int>{0, 1, 0}, 2, iota(3), iota(1)));
  CHECK_FALSE(best_split(x, std::vector<int>{0, 1, 0}, 2, std::vector<Eigen::Index>{1}, iota(1)));
}

TEST_CASE("grown trees match a brute-force recursive oracle") {
  ForestParams p;
  p.feature_rule = FeatureRule::All;
  p.bootstrap = false;
  for (std::uint64_t s = 0; s < 200; ++s) {
    const int rows = 2 + static_cast<int>(s % 24);
    const int cols = 1 + static_cast<int>((s / 3) % 4);
    const int k = 2 + static_cast<int>(s % 2);
    const auto d = make_data(s + 1000, rows, cols, k, 2 + static_cast<int>(s % 5));
    Rng rng(s);
    const auto tree = grow_tree(d.x, d.labels, k, iota(rows), p, rng);
    std::vector<oracle::Node> want;
    std::vector<std::size_t> all(static_cast<std::size_t>(rows));
    std::iota(all.begin(), all.end(), std::size_t{0});
    oracle::grow(want, rows_of(d.x), d.labels, all, k);
    REQUIRE(tree.nodes.size() == want.size());
    for (std::size_t i = 0; i < want.size(); ++i) {
      CHECK(tree.nodes[i].feature == want[i].feature);
      CHECK(tree.nodes[i].left == want[i].left);
      CHECK(tree.nodes[i].right == want[i].right);
      if (want[i].feature >= 0) CHECK(tree.nodes[i].threshold == want[i].threshold);
      else CHECK(tree.nodes[i].label_counts == want[i].counts);
    }
  }
}

TEST_CASE("children never raise weighted impurity") {
  ForestParams p;
  p.n_trees = 5;
  const auto d = make_data(77, 200, 6, 3, 20);
  const auto model = train(d.x, d.labels, {"a", "b", "c"}, {"0", "1", "2", "3", "4", "5"}, p, 5);
  for (const auto& tree : model.trees) {
    // Recount each node's rows from the leaves up.
    std::vector<std::vector<int>> counts(tree.nodes.size());
    for (std::size_t i = tree.nodes.size(); i-- > 0;) {
      const auto& n = tree.nodes[i];
      if (n.is_leaf()) {
        counts[i] = n.label_counts;
        continue;
      }
      const auto& l = counts[static_cast<std::size_t>(n.left)];
      const auto& r = counts[static_cast<std::size_t>(n.right)];
      counts[i].resize(3);
      for (int c = 0; c < 3; ++c) counts[i][static_cast<std::size_t>(c)] = l[static_cast<std::size_t>(c)] + r[static_cast<std::size_t>(c)];
      const double nl = std::accumulate(l.begin(), l.end(), 0.0);
      const double nr = std::accumulate(r.begin(), r.end(), 0.0);
      CHECK((nl * oracle::gini(l) + nr * oracle::gini(r)) / (nl + nr) < oracle::gini(counts[i]));
    }
  }
}

TEST_CASE("max_depth and min_samples_split") {
  const auto d = make_data(3, 100, 3, 3, 30);
  ForestParams p;
  p.n_trees = 4;
  p.max_depth = 2;
  for (const auto& t : train(d.x, d.labels, {"a", "b", "c"}, {"x", "y", "z"}, p, 1).trees) CHECK(t.depth() <= 2);
  p.max_depth = 0;
  p.min_samples_split = 40;
  for (const auto& t : train(d.x, d.labels, {"a", "b", "c"}, {"x", "y", "z"}, p, 1).trees) {
    std::vector<int> sizes(t.nodes.size(), 0);
    for (std::size_t i = t.nodes.size(); i-- > 0;) {
      const auto& n = t.nodes[i];
      if (n.is_leaf()) sizes[i] = std::accumulate(n.label_counts.begin(), n.label_counts.end(), 0);
      else {
        sizes[i] = sizes[static_cast<std::size_t>(n.left)] + sizes[static_cast<std::size_t>(n.right)];
        CHECK(sizes[i] >= 40);
      }
    }
  }
}

TEST_CASE("training is deterministic in the seed") {
  const auto d = make_data(8, 80, 5, 2, 50);
  ForestParams p;
  p.n_trees = 10;
  const std::vector<std::string> names{"a", "b", "c", "d", "e"};
  const auto m1 = train(d.x, d.labels, {"x", "y"}, names, p, 42);
  const auto m2 = train(d.x, d.labels, {"x", "y"}, names, p, 42);
  const auto m3 = train(d.x, d.labels, {"x", "y"}, names, p, 43);
  CHECK(m1 == m2);
  CHECK_FALSE(m1 == m3);
  CHECK(m1.trees.size() == 10);
}

TEST_CASE("votes and fractions") {
  const Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(1);
  const auto a = predict(voting_model({0, 0, 0, 1, 1}), row);
  CHECK(a.label == 0);
  CHECK(a.vote_fractions(0) == doctest::Approx(0.6));
  CHECK(a.vote_fractions(1) == doctest::Approx(0.4));
  const auto tie = predict(voting_model({1, 0, 1, 0}), row);
  CHECK(tie.label == 0);
  CHECK(predict(voting_model({1, 1, 0}), row).label == 1);
  CHECK_THROWS_AS(predict(voting_model({0}), Eigen::RowVectorXd::Zero(2)), std::invalid_argument);
  TreeNode tied{-1, 0.0, -1, -1, {2, 2, 1}};
  CHECK(tied.majority() == 0);
}

TEST_CASE("row routing uses <= threshold") {
  DecisionTree t;
  t.nodes.push_back({0, 1.0, 1, 2, {}});
  t.nodes.push_back({-1, 0.0, -1, -1, {1, 0}});
  t.nodes.push_back({-1, 0.0, -1, -1, {0, 1}});
  CHECK(t.predict(Eigen::RowVectorXd::Constant(1, 1.0)) == 0);
  CHECK(t.predict(Eigen::RowVectorXd::Constant(1, 1.0000001)) == 1);
  CHECK(t.depth() == 1);
}

TEST_CASE("importances follow the weighted decrease") {
  // Root splits on feature 1 (4 rows, {2,2} -> {2,0} and {0,2}): decrease 0.5.
  ForestModel m;
  m.labels = {"A", "B"};
  m.feature_names = {"f0", "f1", "f2"};
  DecisionTree t;
  t.nodes.push_back({1, 0.5, 1, 2, {}});
  t.nodes.push_back({-1, 0.0, -1, -1, {2, 0}});
  t.nodes.push_back({-1, 0.0, -1, -1, {0, 2}});
  m.trees.push_back(t);
  // Second tree: root on f0 gives {3,1}|{1,3}, then a clean split on f2 of the left child.
  DecisionTree u;
  u.nodes.push_back({0, 0.5, 1, 4, {}});
  u.nodes.push_back({2, 0.5, 2, 3, {}});
  u.nodes.push_back({-1, 0.0, -1, -1, {3, 0}});
  u.nodes.push_back({-1, 0.0, -1, -1, {0, 1}});
  u.nodes.push_back({-1, 0.0, -1, -1, {1, 3}});
  m.trees.push_back(u);
  m.params.n_trees = 2;
  const auto imp = importances(m);
  const double root = 0.5 - (4 * oracle::gini({3, 1}) + 4 * oracle::gini({1, 3})) / 8;
  const double child = (4.0 / 8.0) * oracle::gini({3, 1});
  const double f0 = 0.5 * root / (root + child);
  const double f2 = 0.5 * child / (root + child);
  CHECK(imp(0) == doctest::Approx(f0));
  CHECK(imp(1) == doctest::Approx(0.5));
  CHECK(imp(2) == doctest::Approx(f2));
  CHECK(imp.sum() == doctest::Approx(1.0));

  ForestModel stumps = voting_model({0, 1});
  CHECK(importances(stumps).isZero(0.0));
}

TEST_CASE("model text round trip") {
  const auto d = make_data(12, 60, 4, 3, 100);
  ForestParams p;
  p.n_trees = 7;
  p.max_depth = 5;
  p.feature_rule = FeatureRule::Fixed;
  p.fixed_features = 2;
  const auto m = train(d.x, d.labels, {"a", "b", "c"}, {"w", "x", "y", "z"}, p, 99);
  std::stringstream ss;
  write_forest(m, ss);
  const auto back = read_forest(ss);
  CHECK(back == m);
  for (int r = 0; r < 60; ++r) CHECK(predict(back, d.x.row(r)).label == predict(m, d.x.row(r)).label);
}

TEST_CASE("malformed model files") {
  const auto m = voting_model({0, 1});
  std::stringstream ss;
  write_forest(m, ss);
  std::string good = ss.str();
  auto fails = [](const std::string& s) {
    std::istringstream in(s);
    CHECK_THROWS_AS(read_forest(in), DataError);
  };
  fails(good.substr(0, good.size() / 2));
  std::string bad = good;
  bad.replace(bad.find("L 1 0"), 5, "L 1 x");
  fails(bad);
  bad = good;
  bad.replace(bad.find("trees=2"), 7, "trees=3");
  fails(bad);
  fails("");
}

TEST_CASE("forest params text") {
  ForestParams p;
  p.n_trees = 12;
  p.max_depth = 3;
  p.feature_rule = FeatureRule::All;
  p.bootstrap = false;
  std::stringstream ss;
  write_forest_params(p, ss);
  CHECK(read_forest_params(ss) == p);
  CHECK(p.features_per_split(96) == 96);
  CHECK(ForestParams{}.features_per_split(96) == 9);
  CHECK(ForestParams{}.features_per_split(1) == 1);
  std::istringstream bad("n_trees=0\n");
  CHECK_THROWS_AS(read_forest_params(bad), DataError);
  std::istringstream unknown("n_trees=3\ncolour=red\n");
  try {
    read_forest_params(unknown);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("training input checks") {
  const auto d = make_data(1, 10, 2, 2, 5);
  const ForestParams p;
  CHECK_THROWS_AS(train(d.x, std::vector<int>(10, 0), {"a", "b"}, {"x", "y"}, p, 1), std::invalid_argument);
  CHECK_THROWS_AS(train(d.x, d.labels, {"a", "b"}, {"x"}, p, 1), std::invalid_argument);
  Eigen::MatrixXd nan = d.x;
  nan(0, 0) = std::nan("");
  CHECK_THROWS_AS(train(nan, d.labels, {"a", "b"}, {"x", "y"}, p, 1), std::invalid_argument);
  std::vector<int> out_of_range = d.labels;
  out_of_range[0] = 5;
  CHECK_THROWS_AS(train(d.x, out_of_range, {"a", "b"}, {"x", "y"}, p, 1), std::invalid_argument);
}
