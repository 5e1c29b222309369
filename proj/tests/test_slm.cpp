#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <regex>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "astif/errors.hpp"
#include "astif/slm.hpp"

using namespace astif;

TEST_CASE("build_windows staggers endpoints") {
    auto ranges = build_windows(10, 8, 3);
    REQUIRE(ranges.size() == 3);
    CHECK(ranges[0].begin == 3);
    CHECK(ranges[0].end == 10);
    CHECK(ranges[1].begin == 2);
    CHECK(ranges[1].end == 9);
    CHECK(ranges[2].begin == 1);
    CHECK(ranges[2].end == 8);

    auto single = build_windows(10, 8, 1);
    REQUIRE(single.size() == 1);
    CHECK(single[0].begin == 3);
    CHECK(single[0].end == 10);

    CHECK_THROWS_AS(build_windows(8 + 3 - 2, 8, 3), DataError);
}

TEST_CASE("build_prompt formats both channels") {
    std::vector<double> window{0.5, 0.51, 0.49, 0.52, 0.53, 0.52, 0.5, 0.55};
    PromptContext ctx;
    ctx.asset = "FET";
    ctx.cross_asset_changes = {{"BTC", 0.85}, {"ETH", -0.42}};
    ctx.sentiment_levels = {{"panic_index", 0.62}};
    auto bundle = build_prompt(window, ctx, 0);

    // exactly 8 six-decimal numbers in the numeric channel
    std::regex number_re(R"([01]\.[0-9]{6})");
    auto begin = std::sregex_iterator(bundle.numeric_channel.begin(),
                                      bundle.numeric_channel.end(), number_re);
    CHECK(std::distance(begin, std::sregex_iterator()) == 8);

    // narrative cites the last-step change and window volatility
    CHECK(bundle.semantic_channel.find("+10.00%") != std::string::npos);
    CHECK(bundle.semantic_channel.find("Window volatility") != std::string::npos);
    CHECK(bundle.semantic_channel.find("BTC +0.85%") != std::string::npos);
    CHECK(bundle.semantic_channel.find("panic_index 0.62") != std::string::npos);
    CHECK(bundle.semantic_channel.find("PREDICTION:") != std::string::npos);

    // constant window reads zero change and zero volatility
    std::vector<double> flat(8, 0.4);
    auto quiet = build_prompt(flat, PromptContext{}, 1);
    CHECK(quiet.semantic_channel.find("+0.00%") != std::string::npos);
    CHECK(quiet.semantic_channel.find("0.0000") != std::string::npos);

    // missing context simply omits those clauses
    CHECK(quiet.semantic_channel.find("Cross-asset") == std::string::npos);
    CHECK(quiet.semantic_channel.find("Sentiment") == std::string::npos);
}

TEST_CASE("parse_slm_reply accepts both grammars") {
    auto line = parse_slm_reply("PREDICTION: 1.25% CONFIDENCE: 0.8");
    REQUIRE(line.has_value());
    CHECK(line->first == doctest::Approx(1.25));
    CHECK(line->second == doctest::Approx(0.8));

    auto negative = parse_slm_reply("Sure!\nPREDICTION: -0.50% CONFIDENCE: 0.35\n");
    REQUIRE(negative.has_value());
    CHECK(negative->first == doctest::Approx(-0.5));

    auto json_form = parse_slm_reply(R"({"prediction_pct": -0.5, "confidence": 0.6})");
    REQUIRE(json_form.has_value());
    CHECK(json_form->first == doctest::Approx(-0.5));
    CHECK(json_form->second == doctest::Approx(0.6));

    auto wrapped = parse_slm_reply(
        "Here is my answer:\n{\"prediction\": 2.0, \"confidence\": 0.9} hope it helps");
    REQUIRE(wrapped.has_value());
    CHECK(wrapped->first == doctest::Approx(2.0));

    CHECK_FALSE(parse_slm_reply("the market looks bullish today").has_value());
    CHECK_FALSE(parse_slm_reply("").has_value());
}

TEST_CASE("validate_response rejects hallucinated magnitudes") {
    SlmResponse r;
    r.ok = true;
    r.return_pct = 120.0;
    r.confidence = 0.9;
    validate_response(r);
    CHECK_FALSE(r.ok);

    SlmResponse clamped;
    clamped.ok = true;
    clamped.return_pct = 3.0;
    clamped.confidence = 1.7;
    validate_response(clamped);
    CHECK(clamped.ok);
    CHECK(clamped.confidence == 1.0);
}

TEST_CASE("stub oracle modes") {
    std::vector<double> window{0.5, 0.55};

    StubOracle perfect(StubMode::Perfect, 0.0, 1);
    StubContext ctx;
    ctx.truth_pct = 2.0;
    auto p = perfect.respond(window, ctx);
    CHECK(p.ok);
    CHECK(p.return_pct == doctest::Approx(2.0));
    CHECK(p.confidence == doctest::Approx(0.95));

    StubOracle momentum(StubMode::Momentum, 0.0, 1);
    auto m = momentum.respond(window, ctx);
    CHECK(m.return_pct == doctest::Approx(10.0));
    CHECK(m.confidence == doctest::Approx(0.6));

    // noisy with sigma 0 degenerates to perfect
    StubOracle zero_noise(StubMode::Noisy, 0.0, 1);
    auto z = zero_noise.respond(window, ctx);
    CHECK(z.return_pct == doctest::Approx(2.0));
    CHECK(z.confidence == doctest::Approx(0.95));

    // noise scale hook attenuates the configured sigma
    StubOracle noisy_a(StubMode::Noisy, 5.0, 7);
    StubOracle noisy_b(StubMode::Noisy, 5.0, 7);
    StubContext strong = ctx;
    strong.noise_scale = 0.0;
    auto quiet = noisy_a.respond(window, strong);
    CHECK(quiet.return_pct == doctest::Approx(2.0));
    auto loud = noisy_b.respond(window, ctx);
    CHECK(loud.return_pct != doctest::Approx(2.0));

    // deterministic stream under a fixed seed
    StubOracle s1(StubMode::Noisy, 2.0, 99);
    StubOracle s2(StubMode::Noisy, 2.0, 99);
    for (int i = 0; i < 10; ++i) {
        CHECK(s1.respond(window, ctx).return_pct == s2.respond(window, ctx).return_pct);
    }
}

TEST_CASE("ensemble_slm weighted averaging") {
    auto mk = [](double pct, double conf) {
        SlmResponse r;
        r.ok = true;
        r.return_pct = pct;
        r.confidence = conf;
        return r;
    };

    // symmetric returns cancel exactly
    auto sym = ensemble_slm({mk(2, 1), mk(-2, 1)}, 0.5);
    REQUIRE(sym.has_value());
    CHECK(sym->y_hat == 0.5);
    CHECK(sym->confidence == doctest::Approx(1.0));
    CHECK(sym->uncertainty == doctest::Approx(0.0));

    // confidence-weighted mean then multiplicative map
    auto weighted = ensemble_slm({mk(4, 3), mk(0, 1)}, 0.5);
    REQUIRE(weighted.has_value());
    CHECK(weighted->y_hat == doctest::Approx(0.515));

    // single response
    auto single = ensemble_slm({mk(10, 0.7)}, 0.5);
    REQUIRE(single.has_value());
    CHECK(single->y_hat == doctest::Approx(0.55));
    CHECK(single->confidence == doctest::Approx(0.7));
    CHECK(single->uncertainty == doctest::Approx(0.3));

    // failures are dropped; all-failed reports unavailable
    SlmResponse failed;
    failed.ok = false;
    auto mixed = ensemble_slm({failed, mk(2, 0.5)}, 0.5);
    REQUIRE(mixed.has_value());
    CHECK(mixed->y_hat == doctest::Approx(0.505));
    CHECK_FALSE(ensemble_slm({failed, failed}, 0.5).has_value());

    // convexity of the weighted mean and weight-normalization invariance
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> pct(-10.0, 10.0);
    std::uniform_real_distribution<double> conf(0.05, 1.0);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<SlmResponse> rs;
        double lo = 1e9, hi = -1e9;
        for (int k = 0; k < 3; ++k) {
            rs.push_back(mk(pct(rng), conf(rng)));
            lo = std::min(lo, rs.back().return_pct);
            hi = std::max(hi, rs.back().return_pct);
        }
        auto e = ensemble_slm(rs, 0.5);
        REQUIRE(e.has_value());
        const double implied_return = (e->y_hat / 0.5 - 1.0) * 100.0;
        CHECK(implied_return >= lo - 1e-9);
        CHECK(implied_return <= hi + 1e-9);

        auto scaled = rs;
        for (auto& r : scaled) r.confidence *= 3.0;
        auto e2 = ensemble_slm(scaled, 0.5);
        CHECK(e2->y_hat == doctest::Approx(e->y_hat).epsilon(1e-12));
        CHECK(e2->confidence == doctest::Approx(3.0 * e->confidence).epsilon(1e-12));
    }

    // implied price is clipped to the scaled domain
    auto clipped = ensemble_slm({mk(50, 1)}, 0.9);
    CHECK(clipped->y_hat == 1.0);
}

TEST_CASE("client records live exchanges and replays them offline") {
    namespace fs = std::filesystem;

    httplib::Server server;
    int hits = 0;
    server.Post("/v1/chat/completions", [&hits](const httplib::Request&, httplib::Response& res) {
        ++hits;
        nlohmann::json body = {
            {"choices",
             {{{"message",
                {{"role", "assistant"}, {"content", "PREDICTION: 1.25% CONFIDENCE: 0.8"}}}}}}};
        res.set_content(body.dump(), "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread server_thread([&server] { server.listen_after_bind(); });
    server.wait_until_ready();

    auto bundle = build_prompt(
        std::vector<double>{0.5, 0.51, 0.52, 0.5, 0.49, 0.5, 0.51, 0.52}, PromptContext{}, 0);
    auto record_path = (fs::temp_directory_path() / "slm_record_test.jsonl").string();
    std::error_code ec;
    fs::remove(record_path, ec);
    {
        SlmClientConfig cfg;
        cfg.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1";
        cfg.record_path = record_path;
        cfg.timeout_s = 5;
        SlmClient client(cfg);
        auto r = client.query(bundle);
        CHECK(r.ok);
        CHECK(r.return_pct == doctest::Approx(1.25));
        CHECK(r.confidence == doctest::Approx(0.8));
    }
    server.stop();
    server_thread.join();
    CHECK(hits == 1);

    // offline replay serves the recorded response
    SlmClientConfig replay_cfg;
    replay_cfg.replay_path = record_path;
    SlmClient replay_client(replay_cfg);
    auto replayed = replay_client.query(bundle);
    CHECK(replayed.ok);
    CHECK(replayed.return_pct == doctest::Approx(1.25));

    // replay miss is a sentinel failure, not a crash
    auto other = build_prompt(std::vector<double>(8, 0.3), PromptContext{}, 2);
    auto miss = replay_client.query(other);
    CHECK_FALSE(miss.ok);
}

TEST_CASE("client returns a sentinel after exhausting retries on garbage") {
    httplib::Server server;
    int hits = 0;
    server.Post("/v1/chat/completions", [&hits](const httplib::Request&, httplib::Response& res) {
        ++hits;
        nlohmann::json body = {
            {"choices",
             {{{"message", {{"role", "assistant"}, {"content", "prose with no numbers"}}}}}}};
        res.set_content(body.dump(), "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread server_thread([&server] { server.listen_after_bind(); });
    server.wait_until_ready();

    SlmClientConfig cfg;
    cfg.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1";
    cfg.retries = 2;
    cfg.timeout_s = 5;
    SlmClient client(cfg);
    auto bundle = build_prompt(std::vector<double>(8, 0.4), PromptContext{}, 0);
    auto r = client.query(bundle);
    CHECK_FALSE(r.ok);
    CHECK(hits == 3); // initial attempt + 2 retries

    server.stop();
    server_thread.join();
}

TEST_CASE("client config validation") {
    SlmClientConfig cfg;
    cfg.temperature = 0.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.temperature = 0.0;
    cfg.timeout_s = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
