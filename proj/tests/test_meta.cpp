#include <doctest.h>

#include <cmath>
#include <deque>
#include <random>

#include <nlohmann/json.hpp>

#include "astif/errors.hpp"
#include "astif/meta.hpp"

using namespace astif;

namespace {

ChannelPrediction pred(Channel source, double y, double conf) {
    ChannelPrediction p;
    p.source = source;
    p.y_hat = y;
    p.confidence = conf;
    p.uncertainty = 1.0 - conf;
    return p;
}

EpisodeRecord resolved_episode(double slm_y, double ml_y, double realized, int day) {
    EpisodeRecord e;
    e.date = Date::from_ymd(2021, 1, 1) + day;
    e.slm = pred(Channel::SLM, slm_y, 0.8);
    e.ml = pred(Channel::ML, ml_y, 0.8);
    e.p_t = realized;
    e.y_final = slm_y;
    e.realized = realized;
    e.label = make_label(std::abs(slm_y - realized), std::abs(ml_y - realized));
    return e;
}

// Synthetic episodes whose winner is a deterministic function of (z1, z2).
std::vector<EpisodeRecord> separable_episodes(std::size_t n, std::uint64_t seed,
                                              double margin = 0.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<EpisodeRecord> out;
    while (out.size() < n) {
        double z1 = unit(rng), z2 = unit(rng);
        if (std::abs(z1 - z2) < margin) continue;
        EpisodeRecord e;
        e.date = Date::from_ymd(2021, 1, 1) + static_cast<int>(out.size());
        const bool slm_wins = z1 > z2;
        // channel errors consistent with the winner so make_label agrees
        const double realized = 0.5;
        e.slm = pred(Channel::SLM, slm_wins ? 0.501 : 0.54, z1);
        e.ml = pred(Channel::ML, slm_wins ? 0.54 : 0.501, z2);
        e.p_t = realized;
        e.realized = realized;
        e.features = {z1, z2, 1.0 - z1, 1.0 - z2, 0.1, std::abs(z1 - z2),
                      std::abs(z1 - z2), 0.5, 0.5, 0.5, 0.5, 0.0};
        e.label = make_label(std::abs(e.slm->y_hat - realized),
                             std::abs(e.ml->y_hat - realized));
        e.y_final = slm_wins ? e.slm->y_hat : e.ml->y_hat;
        out.push_back(std::move(e));
    }
    return out;
}

} // namespace

TEST_CASE("extract_features components") {
    std::deque<EpisodeRecord> empty_history;
    MarketContext market;
    market.volatility = 0.02;
    market.trend_strength = 0.4;
    market.last_change = 0.01;

    // identical channels with equal confidence zero out the gaps
    auto same = extract_features(pred(Channel::SLM, 0.5, 0.8), pred(Channel::ML, 0.5, 0.8),
                                 market, empty_history);
    CHECK(same[4] == 0.0);
    CHECK(same[5] == 0.0);
    CHECK(same[6] == 0.0);
    CHECK(same[0] == doctest::Approx(0.8));
    CHECK(same[7] == doctest::Approx(0.02));
    CHECK(same[8] == doctest::Approx(0.4));
    CHECK(same[11] == doctest::Approx(0.01));

    // relative disagreement from the shared formula
    auto spread = extract_features(pred(Channel::SLM, 0.6, 0.9), pred(Channel::ML, 0.3, 0.7),
                                   market, empty_history);
    CHECK(spread[4] == doctest::Approx(0.5));
    CHECK(spread[5] == doctest::Approx(0.2));

    // accuracy terms initialize to 0.5 with no history
    CHECK(spread[9] == 0.5);
    CHECK(spread[10] == 0.5);

    // with history they average (1 - relative error), clipped to [0,1]
    std::deque<EpisodeRecord> history;
    history.push_back(resolved_episode(0.5, 0.4, 0.5, 0)); // slm exact, ml off by 20%
    auto with_hist = extract_features(pred(Channel::SLM, 0.5, 0.9),
                                      pred(Channel::ML, 0.5, 0.9), market, history);
    CHECK(with_hist[9] == doctest::Approx(1.0));
    CHECK(with_hist[10] == doctest::Approx(0.8));

    // degenerate zero-priced inputs stay finite
    auto degenerate = extract_features(pred(Channel::SLM, 0.0, 0.0),
                                       pred(Channel::ML, 0.0, 0.0), MarketContext{}, empty_history);
    for (double z : degenerate) CHECK(std::isfinite(z));
}

TEST_CASE("make_label picks the lower error, ties to ML") {
    CHECK(make_label(0.1, 0.2) == Channel::SLM);
    CHECK(make_label(0.2, 0.1) == Channel::ML);
    CHECK(make_label(0.1, 0.1) == Channel::ML);
    CHECK_THROWS_AS(make_label(-0.1, 0.1), DataError);

    // antisymmetric under swap except at exact ties
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> err(0.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        double a = err(rng), b = err(rng);
        if (a == b) continue;
        CHECK(make_label(a, b) != make_label(b, a));
    }
}

TEST_CASE("train_meta stays cold below the episode threshold") {
    auto episodes = separable_episodes(49, 1);
    MetaClassifier clf;
    clf.train(episodes, 7);
    CHECK_FALSE(clf.trained());
    CHECK_FALSE(clf.usable());
    CHECK_THROWS_AS(clf.select_probability(episodes[0].features), EngineError);
}

TEST_CASE("train_meta refuses single-class labels") {
    std::vector<EpisodeRecord> episodes;
    for (int i = 0; i < 60; ++i) {
        episodes.push_back(resolved_episode(0.52, 0.5, 0.5, i)); // ML always wins
    }
    MetaClassifier clf;
    clf.train(episodes, 7);
    CHECK_FALSE(clf.trained());
    CHECK(clf.skip_reason() == "single-class label set");
}

TEST_CASE("train_meta learns a separable rule above 0.9 holdout accuracy") {
    auto episodes = separable_episodes(200, 2);
    MetaClassifier clf;
    clf.train(episodes, 11);
    REQUIRE(clf.trained());
    CHECK(clf.validation_accuracy() > 0.9);
    CHECK_FALSE(clf.overfit());

    // vote probabilities sit in [0,1] and respond to the rule
    MetaFeatures hi{0.95, 0.05, 0.05, 0.95, 0.1, 0.9, 0.9, 0.5, 0.5, 0.5, 0.5, 0.0};
    MetaFeatures lo{0.05, 0.95, 0.95, 0.05, 0.1, 0.9, 0.9, 0.5, 0.5, 0.5, 0.5, 0.0};
    CHECK(clf.select_probability(hi) > 0.8);
    CHECK(clf.select_probability(lo) < 0.2);
}

TEST_CASE("train_meta flags label noise as overfit or near-chance validation") {
    // labels independent of features
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto episodes = separable_episodes(200, 4);
    for (auto& e : episodes) {
        e.label = unit(rng) < 0.5 ? Channel::SLM : Channel::ML;
    }
    MetaClassifier clf;
    clf.train(episodes, 13);
    REQUIRE(clf.trained());
    const bool flagged = clf.overfit();
    const bool near_chance = std::abs(clf.validation_accuracy() - 0.5) <= 0.15;
    CHECK((flagged || near_chance));
}

TEST_CASE("train_meta ignores the holdout labels during fitting") {
    auto episodes = separable_episodes(100, 6);
    MetaClassifier a, b;
    a.train(episodes, 17);
    // flip every holdout label; the fitted trees must not move
    const std::size_t n_train =
        episodes.size() - static_cast<std::size_t>(std::floor(episodes.size() * 0.30));
    auto tampered = episodes;
    for (std::size_t i = n_train; i < tampered.size(); ++i) {
        tampered[i].label = *tampered[i].label == Channel::SLM ? Channel::ML : Channel::SLM;
    }
    b.train(tampered, 17);
    REQUIRE(a.trained());
    REQUIRE(b.trained());
    MetaFeatures probe{0.7, 0.3, 0.3, 0.7, 0.2, 0.4, 0.4, 0.5, 0.5, 0.5, 0.5, 0.0};
    CHECK(a.select_probability(probe) == b.select_probability(probe));
    CHECK(a.train_accuracy() == b.train_accuracy());
    // validation accuracy flips with the tampered labels, proving it is
    // computed on the holdout rather than memorized
    CHECK(a.validation_accuracy() == doctest::Approx(1.0 - b.validation_accuracy()));
}

TEST_CASE("train_meta determinism") {
    auto episodes = separable_episodes(120, 8);
    MetaClassifier a, b;
    a.train(episodes, 23);
    b.train(episodes, 23);
    MetaFeatures probe{0.6, 0.4, 0.4, 0.6, 0.1, 0.2, 0.2, 0.5, 0.5, 0.5, 0.5, 0.0};
    CHECK(a.select_probability(probe) == b.select_probability(probe));
}

TEST_CASE("rule_select thresholds") {
    auto high = rule_select(pred(Channel::SLM, 0.5, 0.95), pred(Channel::ML, 0.5, 0.8));
    CHECK(high.first == Channel::SLM);
    CHECK(high.second == 0.75);

    ChannelPrediction uncertain_slm = pred(Channel::SLM, 0.5, 0.6);
    uncertain_slm.uncertainty = 0.4;
    ChannelPrediction steadier_ml = pred(Channel::ML, 0.5, 0.8);
    steadier_ml.uncertainty = 0.2;
    auto tiebreak = rule_select(uncertain_slm, steadier_ml);
    CHECK(tiebreak.first == Channel::ML);
    CHECK(tiebreak.second == 0.55);

    ChannelPrediction even_slm = pred(Channel::SLM, 0.5, 0.7);
    ChannelPrediction even_ml = pred(Channel::ML, 0.5, 0.7);
    auto tie = rule_select(even_slm, even_ml);
    CHECK(tie.first == Channel::ML);
    CHECK(tie.second == 0.55);
}

TEST_CASE("calibrate piecewise map") {
    CHECK(calibrate(0.5, 0.5, 0.5) == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(calibrate(1.0, 0.9, 0.9) == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(calibrate(1.0, 0.7, 0.7) == doctest::Approx(0.7).epsilon(1e-12));

    // cap and per-regime monotonicity
    for (double mean_conf : {0.3, 0.55, 0.65, 0.75, 0.85, 0.95}) {
        double prev = -1.0;
        for (int i = 0; i <= 1000; ++i) {
            double p = static_cast<double>(i) / 1000.0;
            double c = calibrate(p, mean_conf, mean_conf);
            CHECK(c >= 0.0);
            CHECK(c <= 0.85);
            CHECK(c >= prev);
            prev = c;
        }
    }
}

TEST_CASE("episode record JSON round trip") {
    auto e = resolved_episode(0.52, 0.48, 0.5, 3);
    e.sanity_flags = {"slm-sanity-fail"};
    e.phase = "test";
    e.calibrated_confidence = 0.62;
    auto j = e.to_json();
    auto back = EpisodeRecord::from_json(j);
    CHECK(back.date == e.date);
    CHECK(back.slm->y_hat == e.slm->y_hat);
    CHECK(back.ml->y_hat == e.ml->y_hat);
    CHECK(*back.realized == *e.realized);
    CHECK(*back.label == *e.label);
    CHECK(back.sanity_flags == e.sanity_flags);
    CHECK(back.calibrated_confidence == e.calibrated_confidence);

    // unresolved episode keeps nulls
    EpisodeRecord open;
    open.date = Date::from_ymd(2021, 2, 1);
    open.phase = "test";
    auto j2 = open.to_json();
    auto back2 = EpisodeRecord::from_json(j2);
    CHECK_FALSE(back2.realized.has_value());
    CHECK_FALSE(back2.label.has_value());
    CHECK_FALSE(back2.slm.has_value());
}

TEST_CASE("meta classifier JSON round trip") {
    auto episodes = separable_episodes(100, 9);
    MetaClassifier clf;
    clf.train(episodes, 29);
    REQUIRE(clf.trained());
    auto restored = MetaClassifier::from_json(clf.to_json());
    MetaFeatures probe{0.8, 0.2, 0.2, 0.8, 0.1, 0.6, 0.6, 0.5, 0.5, 0.5, 0.5, 0.0};
    CHECK(restored.select_probability(probe) == clf.select_probability(probe));
    CHECK(restored.validation_accuracy() == clf.validation_accuracy());
}
