#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "astif/types.hpp"

namespace astif {

struct TreeNode {
    int feature = -1; // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0; // leaf prediction (mean target or class vote)
};

struct ForestParams {
    int n_trees = 100;
    int max_depth = 20;
    int min_samples_split = 5;
    int min_samples_leaf = 2;
};

/// Bagged regression trees with variance-reduction splits. Prediction is the
/// plain mean over trees; deterministic for a fixed seed.
class RandomForestRegressor {
public:
    explicit RandomForestRegressor(ForestParams params = {}) : params_(params) {}

    void fit(const DataMatrix& x, const std::vector<double>& y, std::uint64_t seed);
    double predict(std::span<const double> row) const;
    std::vector<double> tree_predictions(std::span<const double> row) const;

    bool trained() const { return !trees_.empty(); }
    const ForestParams& params() const { return params_; }

    nlohmann::json to_json() const;
    static RandomForestRegressor from_json(const nlohmann::json& j);

private:
    ForestParams params_;
    std::vector<std::vector<TreeNode>> trees_;
    std::size_t n_features_ = 0;
};

/// Bagged classification trees with entropy splits over binary labels.
/// predict_proba is the fraction of trees voting class 1.
class RandomForestClassifier {
public:
    explicit RandomForestClassifier(ForestParams params = {}) : params_(params) {}

    void fit(const DataMatrix& x, const std::vector<int>& y, std::uint64_t seed);
    /// P(class 1), as the tree vote fraction.
    double predict_proba(std::span<const double> row) const;

    bool trained() const { return !trees_.empty(); }
    const ForestParams& params() const { return params_; }

    nlohmann::json to_json() const;
    static RandomForestClassifier from_json(const nlohmann::json& j);

private:
    ForestParams params_;
    std::vector<std::vector<TreeNode>> trees_;
    std::size_t n_features_ = 0;
};

} // namespace astif
