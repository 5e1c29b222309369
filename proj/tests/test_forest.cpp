#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "astif/errors.hpp"
#include "astif/forest.hpp"

using namespace astif;

namespace {

DataMatrix column_matrix(const std::vector<double>& x) {
    DataMatrix m(x.size(), 1);
    for (std::size_t i = 0; i < x.size(); ++i) m.at(i, 0) = x[i];
    return m;
}

} // namespace

TEST_CASE("regressor reproduces a constant target") {
    std::vector<double> x(50), y(50, 0.42);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i) / 50.0;
    RandomForestRegressor forest;
    forest.fit(column_matrix(x), y, 1);
    for (double q : {0.1, 0.5, 0.9}) {
        CHECK(forest.predict(std::vector<double>{q}) == doctest::Approx(0.42));
    }
}

TEST_CASE("regressor approximates the identity within MAE 0.05") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> x(200), y(200);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = unit(rng);
        y[i] = x[i];
    }
    ForestParams p;
    p.max_depth = 20;
    RandomForestRegressor forest(p);
    forest.fit(column_matrix(x), y, 3);

    double abs_err = 0.0;
    int n = 0;
    for (double q = 0.05; q <= 0.95; q += 0.01) {
        abs_err += std::abs(forest.predict(std::vector<double>{q}) - q);
        ++n;
    }
    CHECK(abs_err / n < 0.05);
}

TEST_CASE("regressor fits a step function away from the boundary") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> x(300), y(300);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = unit(rng);
        y[i] = x[i] > 0.5 ? 1.0 : 0.0;
    }
    RandomForestRegressor forest;
    forest.fit(column_matrix(x), y, 5);

    int correct = 0, total = 0;
    for (double q = 0.0; q <= 1.0; q += 0.005) {
        if (std::abs(q - 0.5) < 0.05) continue; // skip the boundary band
        double pred = forest.predict(std::vector<double>{q});
        double want = q > 0.5 ? 1.0 : 0.0;
        if (std::abs(pred - want) < 0.5) ++correct;
        ++total;
    }
    CHECK(static_cast<double>(correct) / total > 0.95);
}

TEST_CASE("single-tree and agreeing forests return the member value") {
    std::vector<double> x{0.1, 0.2, 0.8, 0.9};
    std::vector<double> y{0.3, 0.3, 0.3, 0.3};
    ForestParams p;
    p.n_trees = 1;
    RandomForestRegressor one(p);
    one.fit(column_matrix(x), y, 7);
    auto parts = one.tree_predictions(std::vector<double>{0.5});
    REQUIRE(parts.size() == 1);
    CHECK(one.predict(std::vector<double>{0.5}) == parts[0]);

    // mean of member predictions by construction
    RandomForestRegressor many;
    many.fit(column_matrix(x), y, 8);
    auto preds = many.tree_predictions(std::vector<double>{0.5});
    double mean = 0.0;
    for (double v : preds) mean += v;
    mean /= static_cast<double>(preds.size());
    CHECK(many.predict(std::vector<double>{0.5}) == doctest::Approx(mean).epsilon(1e-12));
}

TEST_CASE("regressor determinism and tree-order invariance") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    DataMatrix x(120, 3);
    std::vector<double> y(120);
    for (std::size_t i = 0; i < 120; ++i) {
        for (std::size_t c = 0; c < 3; ++c) x.at(i, c) = unit(rng);
        y[i] = x.at(i, 0) * 0.5 + x.at(i, 1) * 0.3 + unit(rng) * 0.01;
    }
    RandomForestRegressor a, b;
    a.fit(x, y, 42);
    b.fit(x, y, 42);
    std::vector<double> probe{0.3, 0.6, 0.2};
    CHECK(a.predict(probe) == b.predict(probe));

    auto parts = a.tree_predictions(probe);
    auto shuffled = parts;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    double mean_a = 0.0, mean_b = 0.0;
    for (double v : parts) mean_a += v;
    for (double v : shuffled) mean_b += v;
    CHECK(mean_a == doctest::Approx(mean_b).epsilon(1e-12));
}

TEST_CASE("regressor error paths") {
    RandomForestRegressor forest;
    CHECK_THROWS_AS(forest.fit(DataMatrix(), {}, 1), DataError);
    CHECK_THROWS_AS(forest.predict(std::vector<double>{0.5}), EngineError);
    std::vector<double> x{0.1, 0.9}, y{0.0, 1.0};
    forest.fit(column_matrix(x), y, 1);
    CHECK_THROWS_AS(forest.predict(std::vector<double>{0.5, 0.5}), DataError);
}

TEST_CASE("regressor JSON round trip preserves predictions") {
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> x(80), y(80);
    for (std::size_t i = 0; i < 80; ++i) {
        x[i] = unit(rng);
        y[i] = std::sin(x[i] * 3.0);
    }
    ForestParams p;
    p.n_trees = 10;
    RandomForestRegressor forest(p);
    forest.fit(column_matrix(x), y, 11);
    auto restored = RandomForestRegressor::from_json(forest.to_json());
    for (double q : {0.1, 0.4, 0.7}) {
        CHECK(restored.predict(std::vector<double>{q}) ==
              forest.predict(std::vector<double>{q}));
    }
}

TEST_CASE("classifier separates a clean rule and votes in fractions") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    DataMatrix x(200, 2);
    std::vector<int> y(200);
    for (std::size_t i = 0; i < 200; ++i) {
        x.at(i, 0) = unit(rng);
        x.at(i, 1) = unit(rng);
        y[i] = x.at(i, 0) > 0.5 ? 1 : 0;
    }
    ForestParams p;
    p.n_trees = 20;
    p.max_depth = 5;
    RandomForestClassifier clf(p);
    clf.fit(x, y, 13);
    CHECK(clf.predict_proba(std::vector<double>{0.9, 0.5}) > 0.9);
    CHECK(clf.predict_proba(std::vector<double>{0.1, 0.5}) < 0.1);
    double proba = clf.predict_proba(std::vector<double>{0.5, 0.5});
    CHECK(proba >= 0.0);
    CHECK(proba <= 1.0);
    // vote fractions are multiples of 1/20
    CHECK(std::abs(proba * 20.0 - std::round(proba * 20.0)) < 1e-9);
}

TEST_CASE("classifier rejects non-binary labels and is deterministic") {
    DataMatrix x(4, 1);
    for (std::size_t i = 0; i < 4; ++i) x.at(i, 0) = static_cast<double>(i);
    std::vector<int> bad{0, 1, 2, 1};
    RandomForestClassifier clf;
    CHECK_THROWS_AS(clf.fit(x, bad, 1), DataError);

    std::vector<int> y{0, 0, 1, 1};
    RandomForestClassifier a, b;
    a.fit(x, y, 5);
    b.fit(x, y, 5);
    CHECK(a.predict_proba(std::vector<double>{2.5}) == b.predict_proba(std::vector<double>{2.5}));
}
