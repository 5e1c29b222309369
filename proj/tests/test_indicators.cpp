#include <doctest.h>

#include <cmath>
#include <random>

#include "astif/errors.hpp"
#include "astif/indicators.hpp"

using namespace astif;

namespace {

TimeFrame scaled_frame(std::vector<std::string> names,
                       std::vector<std::vector<double>> columns, std::string target) {
    TimeFrame f;
    f.names = std::move(names);
    f.columns = std::move(columns);
    f.target_column = std::move(target);
    for (std::size_t r = 0; r < f.columns[0].size(); ++r) {
        f.dates.push_back(Date::from_ymd(2021, 1, 1) + static_cast<int>(r));
    }
    return f;
}

std::vector<double> random_walk(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> step(0.0, 0.01);
    std::vector<double> p(n);
    p[0] = 0.5;
    for (std::size_t i = 1; i < n; ++i) {
        p[i] = std::clamp(p[i - 1] * (1.0 + step(rng)), 0.01, 1.0);
    }
    return p;
}

IndicatorConfig empty_config() {
    IndicatorConfig cfg;
    cfg.momentum_lags.clear();
    cfg.sma_windows.clear();
    cfg.ema_windows.clear();
    cfg.vol_window = 0;
    cfg.rsi_period = 0;
    cfg.bollinger_window = 0;
    cfg.corr_window = 0;
    cfg.gepu_lags.clear();
    return cfg;
}

} // namespace

TEST_CASE("momentum") {
    auto constant = momentum({0.4, 0.4, 0.4, 0.4}, 2);
    for (std::size_t t = constant.warmup; t < 4; ++t) CHECK(constant.values[t] == 0.0);

    auto up = momentum({0.5, 0.6}, 1);
    CHECK(up.values[1] == doctest::Approx(0.2));
    auto down = momentum({0.4, 0.2}, 1);
    CHECK(down.values[1] == doctest::Approx(-0.5));
    CHECK(up.warmup == 1);

    CHECK_THROWS_AS(momentum({0.1, 0.2}, 2), DataError);
}

TEST_CASE("sma and ema") {
    auto c = sma({0.3, 0.3, 0.3}, 2);
    CHECK(c.values[1] == doctest::Approx(0.3));
    auto ce = ema({0.3, 0.3, 0.3}, 2);
    CHECK(ce.values[2] == doctest::Approx(0.3));

    auto s = sma({1, 2, 3, 4}, 2);
    CHECK(std::isnan(s.values[0]));
    CHECK(s.values[1] == doctest::Approx(1.5));
    CHECK(s.values[2] == doctest::Approx(2.5));
    CHECK(s.values[3] == doctest::Approx(3.5));

    // alpha = 2/3 for window 2, seeded with the first value
    auto e = ema({0.0, 1.0}, 2);
    CHECK(e.values[1] == doctest::Approx(2.0 / 3.0));

    CHECK_THROWS_AS(sma({1, 2}, 0), ConfigError);
}

TEST_CASE("rolling_volatility") {
    auto flat = rolling_volatility(std::vector<double>(10, 0.7), 3);
    for (std::size_t t = flat.warmup; t < 10; ++t) CHECK(flat.values[t] == doctest::Approx(0.0));

    // prices giving returns +0.1 then -0.1 inside a 2-return window
    std::vector<double> p{0.5, 0.55, 0.495};
    auto vol = rolling_volatility(p, 2);
    CHECK(vol.values[2] == doctest::Approx(std::sqrt(0.02)).epsilon(1e-9));

    // equal returns have zero sample deviation
    std::vector<double> geometric{0.2, 0.22, 0.242, 0.2662};
    auto zero = rolling_volatility(geometric, 3);
    CHECK(zero.values[3] == doctest::Approx(0.0).epsilon(1e-9));

    CHECK_THROWS_AS(rolling_volatility(p, 1), ConfigError);
}

TEST_CASE("rsi") {
    std::vector<double> rising{0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
    auto up = rsi(rising, 3);
    CHECK(up.values[5] == doctest::Approx(100.0));

    std::vector<double> falling{0.6, 0.5, 0.4, 0.3, 0.2, 0.1};
    auto down = rsi(falling, 3);
    CHECK(down.values[5] == doctest::Approx(0.0));

    // first window gains == losses -> RS = 1 -> 50
    std::vector<double> balanced{0.5, 0.6, 0.5};
    auto mid = rsi(balanced, 2);
    CHECK(mid.values[2] == doctest::Approx(50.0));

    // bounded in [0,100] on a random walk
    auto walk = random_walk(200, 3);
    auto r = rsi(walk, 14);
    for (std::size_t t = r.warmup; t < walk.size(); ++t) {
        CHECK(r.values[t] >= 0.0);
        CHECK(r.values[t] <= 100.0);
    }
}

TEST_CASE("bollinger") {
    auto flat = bollinger(std::vector<double>(5, 0.4), 3, 2.0);
    CHECK(flat.upper.values[4] == doctest::Approx(0.4));
    CHECK(flat.lower.values[4] == doctest::Approx(0.4));
    CHECK(flat.bandwidth.values[4] == doctest::Approx(0.0));

    std::vector<double> two{0.4, 0.6};
    auto bb = bollinger(two, 2, 2.0);
    const double sd = std::sqrt(0.02);
    CHECK(bb.upper.values[1] == doctest::Approx(0.5 + 2 * sd).epsilon(1e-9));
    CHECK(bb.lower.values[1] == doctest::Approx(0.5 - 2 * sd).epsilon(1e-9));

    auto degenerate = bollinger(two, 2, 0.0);
    CHECK(degenerate.upper.values[1] == doctest::Approx(0.5));
    CHECK(degenerate.lower.values[1] == doctest::Approx(0.5));

    // upper >= lower everywhere on a random walk
    auto walk = random_walk(100, 5);
    auto rb = bollinger(walk, 20, 2.0);
    for (std::size_t t = rb.upper.warmup; t < walk.size(); ++t) {
        CHECK(rb.upper.values[t] >= rb.lower.values[t]);
    }
}

TEST_CASE("cross_correlation") {
    auto walk = random_walk(60, 9);
    auto self = cross_correlation(walk, walk, 10);
    for (std::size_t t = self.warmup; t < walk.size(); ++t) {
        CHECK(self.values[t] == doctest::Approx(1.0).epsilon(1e-9));
    }
    std::vector<double> negated(walk.size());
    for (std::size_t i = 0; i < walk.size(); ++i) negated[i] = -walk[i];
    auto anti = cross_correlation(walk, negated, 10);
    for (std::size_t t = anti.warmup; t < walk.size(); ++t) {
        CHECK(anti.values[t] == doctest::Approx(-1.0).epsilon(1e-9));
    }

    auto half = cross_correlation({1, 2, 3}, {1, 3, 2}, 3);
    CHECK(half.values[2] == doctest::Approx(0.5));

    auto constant = cross_correlation({1, 1, 1, 2}, {1, 2, 3, 4}, 3);
    CHECK(constant.values[2] == 0.0);

    CHECK_THROWS_AS(cross_correlation({1, 2}, {1, 2, 3}, 3), DataError);

    // bounded and symmetric
    auto other = random_walk(60, 10);
    auto ab = cross_correlation(walk, other, 15);
    auto ba = cross_correlation(other, walk, 15);
    for (std::size_t t = ab.warmup; t < walk.size(); ++t) {
        CHECK(ab.values[t] >= -1.0);
        CHECK(ab.values[t] <= 1.0);
        CHECK(ab.values[t] == doctest::Approx(ba.values[t]).epsilon(1e-12));
    }
}

TEST_CASE("gepu_lags") {
    std::vector<double> g{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    auto zero = gepu_lags(g, {0});
    CHECK(zero[0].values == g);
    CHECK(zero[0].warmup == 0);

    auto one = gepu_lags({5, 6, 7}, {1});
    CHECK(std::isnan(one[0].values[0]));
    CHECK(one[0].values[1] == 5);
    CHECK(one[0].values[2] == 6);

    auto four = gepu_lags(g, {0, 1, 3, 7});
    CHECK(four.size() == 4);
    std::size_t max_warmup = 0;
    for (const auto& s : four) max_warmup = std::max(max_warmup, s.warmup);
    CHECK(max_warmup == 7);
}

TEST_CASE("build_features column arithmetic") {
    auto walk = random_walk(40, 21);
    auto other = random_walk(40, 22);
    auto frame = scaled_frame({"tgt", "aux"}, {walk, other}, "tgt");

    auto cfg = empty_config();
    cfg.momentum_lags = {1};
    cfg.corr_window = 5;
    auto fm = build_features(frame, cfg);
    // raw 2 + momentum 1 + correlation 1
    CHECK(fm.names.size() == 4);
    CHECK(fm.warmup == 5);
    CHECK(fm.values.rows == 40 - 5);
}

TEST_CASE("build_features with an empty config equals the scaled frame") {
    auto walk = random_walk(30, 23);
    auto frame = scaled_frame({"tgt"}, {walk}, "tgt");
    auto fm = build_features(frame, empty_config());
    CHECK(fm.names == std::vector<std::string>{"tgt"});
    CHECK(fm.warmup == 0);
    REQUIRE(fm.values.rows == 30);
    for (std::size_t r = 0; r < 30; ++r) CHECK(fm.values.at(r, 0) == walk[r]);
}

TEST_CASE("build_features default warmup follows the max lookback") {
    auto walk = random_walk(100, 24);
    auto aux = random_walk(100, 25);
    std::vector<double> gepu(100);
    for (std::size_t i = 0; i < 100; ++i) gepu[i] = 0.5 + 0.001 * static_cast<double>(i % 7);
    auto frame = scaled_frame({"tgt", "aux", "GEPU"}, {walk, aux, gepu}, "tgt");
    IndicatorConfig cfg; // defaults: corr 30, boll 20, rsi 14, lags {0,1,3,7}
    auto fm = build_features(frame, cfg);
    CHECK(cfg.max_lookback() == 30);
    CHECK(fm.warmup == 30);
    CHECK(fm.values.rows == 70);
    for (double v : fm.values.data) CHECK(std::isfinite(v));
}

TEST_CASE("build_features excludes side-channel columns") {
    auto walk = random_walk(50, 26);
    std::vector<double> side(50, 0.9);
    auto frame = scaled_frame({"tgt", "semantic_signal"}, {walk, side}, "tgt");
    auto cfg = empty_config();
    cfg.corr_window = 5;
    auto fm = build_features(frame, cfg, {"semantic_signal"});
    for (const auto& name : fm.names) {
        CHECK(name.find("semantic_signal") == std::string::npos);
    }
    CHECK(fm.names.size() == 1); // target only, no corr against the excluded column
}

TEST_CASE("build_features is deterministic and causal") {
    auto walk = random_walk(80, 27);
    auto aux = random_walk(80, 28);
    auto frame = scaled_frame({"tgt", "aux"}, {walk, aux}, "tgt");
    IndicatorConfig cfg;
    cfg.corr_window = 10;
    cfg.bollinger_window = 10;
    cfg.rsi_period = 7;
    cfg.vol_window = 5;
    cfg.sma_windows = {5};
    cfg.ema_windows = {5};
    cfg.momentum_lags = {1, 3};
    cfg.gepu_lags.clear();

    auto a = build_features(frame, cfg);
    auto b = build_features(frame, cfg);
    CHECK(a.values.data == b.values.data);

    // Perturb the last row only; earlier feature rows must be bit-identical.
    auto perturbed = frame;
    perturbed.columns[0][79] += 0.05;
    auto c = build_features(perturbed, cfg);
    for (std::size_t r = 0; r + 1 < a.values.rows; ++r) {
        for (std::size_t col = 0; col < a.values.cols; ++col) {
            CHECK(a.values.at(r, col) == c.values.at(r, col));
        }
    }

    CHECK_THROWS_AS(build_features(scaled_frame({"t"}, {{0.1, 0.2}}, "t"), cfg), DataError);
}
