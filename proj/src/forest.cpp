#include "astif/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "astif/errors.hpp"
#include "astif/rng.hpp"

namespace astif {

namespace {

struct SplitResult {
    int feature = -1;
    double threshold = 0.0;
    double score = 0.0; // impurity decrease; <= 0 means no usable split
    std::size_t n_left = 0;
};

// Best variance-reduction split over all features, scanning sorted values
// with running sums. Ordering is fixed so fits are reproducible.
SplitResult best_regression_split(const DataMatrix& x, const std::vector<double>& y,
                                  const std::vector<std::size_t>& idx, int min_leaf,
                                  std::vector<std::size_t>& scratch) {
    const std::size_t n = idx.size();
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t i : idx) {
        sum += y[i];
        sum_sq += y[i] * y[i];
    }
    const double parent_sse = sum_sq - sum * sum / static_cast<double>(n);

    SplitResult best;
    for (std::size_t f = 0; f < x.cols; ++f) {
        scratch = idx;
        std::sort(scratch.begin(), scratch.end(), [&](std::size_t a, std::size_t b) {
            double va = x.at(a, f), vb = x.at(b, f);
            if (va != vb) return va < vb;
            return a < b;
        });
        double left_sum = 0.0, left_sq = 0.0;
        for (std::size_t pos = 0; pos + 1 < n; ++pos) {
            double yv = y[scratch[pos]];
            left_sum += yv;
            left_sq += yv * yv;
            double v = x.at(scratch[pos], f);
            double next = x.at(scratch[pos + 1], f);
            if (v == next) continue;
            std::size_t n_left = pos + 1;
            std::size_t n_right = n - n_left;
            if (n_left < static_cast<std::size_t>(min_leaf) ||
                n_right < static_cast<std::size_t>(min_leaf)) {
                continue;
            }
            double right_sum = sum - left_sum;
            double right_sq = sum_sq - left_sq;
            double sse = (left_sq - left_sum * left_sum / static_cast<double>(n_left)) +
                         (right_sq - right_sum * right_sum / static_cast<double>(n_right));
            double gain = parent_sse - sse;
            if (gain > best.score + 1e-15) {
                best.feature = static_cast<int>(f);
                best.threshold = 0.5 * (v + next);
                best.score = gain;
                best.n_left = n_left;
            }
        }
    }
    return best;
}

double entropy(std::size_t pos, std::size_t n) {
    if (pos == 0 || pos == n) return 0.0;
    double p = static_cast<double>(pos) / static_cast<double>(n);
    return -(p * std::log2(p) + (1.0 - p) * std::log2(1.0 - p));
}

SplitResult best_entropy_split(const DataMatrix& x, const std::vector<int>& y,
                               const std::vector<std::size_t>& idx, int min_leaf,
                               std::vector<std::size_t>& scratch) {
    const std::size_t n = idx.size();
    std::size_t total_pos = 0;
    for (std::size_t i : idx) total_pos += static_cast<std::size_t>(y[i]);
    const double parent = entropy(total_pos, n);

    SplitResult best;
    for (std::size_t f = 0; f < x.cols; ++f) {
        scratch = idx;
        std::sort(scratch.begin(), scratch.end(), [&](std::size_t a, std::size_t b) {
            double va = x.at(a, f), vb = x.at(b, f);
            if (va != vb) return va < vb;
            return a < b;
        });
        std::size_t left_pos = 0;
        for (std::size_t pos = 0; pos + 1 < n; ++pos) {
            left_pos += static_cast<std::size_t>(y[scratch[pos]]);
            double v = x.at(scratch[pos], f);
            double next = x.at(scratch[pos + 1], f);
            if (v == next) continue;
            std::size_t n_left = pos + 1;
            std::size_t n_right = n - n_left;
            if (n_left < static_cast<std::size_t>(min_leaf) ||
                n_right < static_cast<std::size_t>(min_leaf)) {
                continue;
            }
            double wl = static_cast<double>(n_left) / static_cast<double>(n);
            double child = wl * entropy(left_pos, n_left) +
                           (1.0 - wl) * entropy(total_pos - left_pos, n_right);
            double gain = parent - child;
            if (gain > best.score + 1e-12) {
                best.feature = static_cast<int>(f);
                best.threshold = 0.5 * (v + next);
                best.score = gain;
                best.n_left = n_left;
            }
        }
    }
    return best;
}

template <typename Target, typename LeafFn, typename SplitFn>
void grow_tree(std::vector<TreeNode>& nodes, const DataMatrix& x, const Target& y,
               std::vector<std::size_t> idx, int depth, const ForestParams& p,
               LeafFn make_leaf, SplitFn find_split, std::vector<std::size_t>& scratch) {
    int node_id = static_cast<int>(nodes.size());
    nodes.emplace_back();

    bool stop = depth >= p.max_depth || idx.size() < static_cast<std::size_t>(p.min_samples_split);
    SplitResult split;
    if (!stop) {
        split = find_split(idx, scratch);
        stop = split.feature < 0;
    }
    if (stop) {
        nodes[node_id].value = make_leaf(idx);
        return;
    }

    std::vector<std::size_t> left_idx, right_idx;
    left_idx.reserve(split.n_left);
    right_idx.reserve(idx.size() - split.n_left);
    for (std::size_t i : idx) {
        if (x.at(i, static_cast<std::size_t>(split.feature)) <= split.threshold) {
            left_idx.push_back(i);
        } else {
            right_idx.push_back(i);
        }
    }
    idx.clear();
    idx.shrink_to_fit();

    nodes[node_id].feature = split.feature;
    nodes[node_id].threshold = split.threshold;
    nodes[node_id].left = static_cast<int>(nodes.size());
    grow_tree(nodes, x, y, std::move(left_idx), depth + 1, p, make_leaf, find_split, scratch);
    nodes[node_id].right = static_cast<int>(nodes.size());
    grow_tree(nodes, x, y, std::move(right_idx), depth + 1, p, make_leaf, find_split, scratch);
}

double tree_eval(const std::vector<TreeNode>& nodes, std::span<const double> row) {
    int id = 0;
    while (nodes[id].feature >= 0) {
        const TreeNode& nd = nodes[id];
        id = row[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right;
    }
    return nodes[id].value;
}

std::vector<std::size_t> bootstrap_indices(std::size_t n, Rng& rng) {
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<std::size_t> idx(n);
    for (auto& i : idx) i = pick(rng);
    std::sort(idx.begin(), idx.end());
    return idx;
}

nlohmann::json trees_to_json(const std::vector<std::vector<TreeNode>>& trees) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& tree : trees) {
        nlohmann::json t = nlohmann::json::array();
        for (const auto& nd : tree) {
            t.push_back({nd.feature, nd.threshold, nd.left, nd.right, nd.value});
        }
        out.push_back(std::move(t));
    }
    return out;
}

std::vector<std::vector<TreeNode>> trees_from_json(const nlohmann::json& j) {
    std::vector<std::vector<TreeNode>> trees;
    for (const auto& t : j) {
        std::vector<TreeNode> tree;
        for (const auto& n : t) {
            TreeNode nd;
            nd.feature = n[0].get<int>();
            nd.threshold = n[1].get<double>();
            nd.left = n[2].get<int>();
            nd.right = n[3].get<int>();
            nd.value = n[4].get<double>();
            tree.push_back(nd);
        }
        trees.push_back(std::move(tree));
    }
    return trees;
}

} // namespace

void RandomForestRegressor::fit(const DataMatrix& x, const std::vector<double>& y,
                                std::uint64_t seed) {
    if (x.rows == 0 || x.rows != y.size()) throw DataError("forest fit: empty or mismatched data");
    trees_.clear();
    trees_.reserve(static_cast<std::size_t>(params_.n_trees));
    n_features_ = x.cols;
    std::vector<std::size_t> scratch;
    for (int t = 0; t < params_.n_trees; ++t) {
        Rng rng(derive_seed(seed, "tree-" + std::to_string(t)));
        auto idx = bootstrap_indices(x.rows, rng);
        std::vector<TreeNode> tree;
        grow_tree(
            tree, x, y, std::move(idx), 0, params_,
            [&y](const std::vector<std::size_t>& leaf) {
                double s = 0.0;
                for (std::size_t i : leaf) s += y[i];
                return s / static_cast<double>(leaf.size());
            },
            [&](const std::vector<std::size_t>& node_idx, std::vector<std::size_t>& sc) {
                return best_regression_split(x, y, node_idx, params_.min_samples_leaf, sc);
            },
            scratch);
        trees_.push_back(std::move(tree));
    }
}

double RandomForestRegressor::predict(std::span<const double> row) const {
    if (trees_.empty()) throw EngineError("forest predict: not trained");
    if (row.size() != n_features_) throw DataError("forest predict: feature width mismatch");
    double s = 0.0;
    for (const auto& tree : trees_) s += tree_eval(tree, row);
    return s / static_cast<double>(trees_.size());
}

std::vector<double> RandomForestRegressor::tree_predictions(std::span<const double> row) const {
    std::vector<double> out;
    out.reserve(trees_.size());
    for (const auto& tree : trees_) out.push_back(tree_eval(tree, row));
    return out;
}

nlohmann::json RandomForestRegressor::to_json() const {
    return {{"format", 1},
            {"kind", "regressor"},
            {"n_features", n_features_},
            {"params",
             {{"n_trees", params_.n_trees},
              {"max_depth", params_.max_depth},
              {"min_samples_split", params_.min_samples_split},
              {"min_samples_leaf", params_.min_samples_leaf}}},
            {"trees", trees_to_json(trees_)}};
}

RandomForestRegressor RandomForestRegressor::from_json(const nlohmann::json& j) {
    ForestParams p;
    p.n_trees = j["params"]["n_trees"].get<int>();
    p.max_depth = j["params"]["max_depth"].get<int>();
    p.min_samples_split = j["params"]["min_samples_split"].get<int>();
    p.min_samples_leaf = j["params"]["min_samples_leaf"].get<int>();
    RandomForestRegressor f(p);
    f.n_features_ = j["n_features"].get<std::size_t>();
    f.trees_ = trees_from_json(j["trees"]);
    return f;
}

void RandomForestClassifier::fit(const DataMatrix& x, const std::vector<int>& y,
                                 std::uint64_t seed) {
    if (x.rows == 0 || x.rows != y.size()) throw DataError("forest fit: empty or mismatched data");
    for (int v : y) {
        if (v != 0 && v != 1) throw DataError("classifier fit: labels must be 0/1");
    }
    trees_.clear();
    trees_.reserve(static_cast<std::size_t>(params_.n_trees));
    n_features_ = x.cols;
    std::vector<std::size_t> scratch;
    for (int t = 0; t < params_.n_trees; ++t) {
        Rng rng(derive_seed(seed, "tree-" + std::to_string(t)));
        auto idx = bootstrap_indices(x.rows, rng);
        std::vector<TreeNode> tree;
        grow_tree(
            tree, x, y, std::move(idx), 0, params_,
            [&y](const std::vector<std::size_t>& leaf) {
                std::size_t pos = 0;
                for (std::size_t i : leaf) pos += static_cast<std::size_t>(y[i]);
                // majority vote; exact tie resolves to class 0
                return pos * 2 > leaf.size() ? 1.0 : 0.0;
            },
            [&](const std::vector<std::size_t>& node_idx, std::vector<std::size_t>& sc) {
                return best_entropy_split(x, y, node_idx, params_.min_samples_leaf, sc);
            },
            scratch);
        trees_.push_back(std::move(tree));
    }
}

double RandomForestClassifier::predict_proba(std::span<const double> row) const {
    if (trees_.empty()) throw EngineError("classifier predict: not trained");
    if (row.size() != n_features_) throw DataError("classifier predict: feature width mismatch");
    double votes = 0.0;
    for (const auto& tree : trees_) votes += tree_eval(tree, row);
    return votes / static_cast<double>(trees_.size());
}

nlohmann::json RandomForestClassifier::to_json() const {
    return {{"format", 1},
            {"kind", "classifier"},
            {"n_features", n_features_},
            {"params",
             {{"n_trees", params_.n_trees},
              {"max_depth", params_.max_depth},
              {"min_samples_split", params_.min_samples_split},
              {"min_samples_leaf", params_.min_samples_leaf}}},
            {"trees", trees_to_json(trees_)}};
}

RandomForestClassifier RandomForestClassifier::from_json(const nlohmann::json& j) {
    ForestParams p;
    p.n_trees = j["params"]["n_trees"].get<int>();
    p.max_depth = j["params"]["max_depth"].get<int>();
    p.min_samples_split = j["params"]["min_samples_split"].get<int>();
    p.min_samples_leaf = j["params"]["min_samples_leaf"].get<int>();
    RandomForestClassifier f(p);
    f.n_features_ = j["n_features"].get<std::size_t>();
    f.trees_ = trees_from_json(j["trees"]);
    return f;
}

} // namespace astif
