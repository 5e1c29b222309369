#include "astif/slm.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <regex>
#include <sstream>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "astif/errors.hpp"

namespace astif {

namespace {

constexpr double kMaxAbsReturnPct = 50.0;

double floored(double v) { return std::max(v, kEpsilon); }

std::string format(const char* fmt, double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), fmt, v);
    return buf;
}

std::string prompt_key(const PromptBundle& b) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](std::string_view s) {
        for (char c : s) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ull;
        }
    };
    mix(b.numeric_channel);
    mix("\x1f");
    mix(b.semantic_channel);
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

double window_last_change_pct(std::span<const double> window) {
    const std::size_t n = window.size();
    if (n < 2) return 0.0;
    return (window[n - 1] - window[n - 2]) / floored(window[n - 2]) * 100.0;
}

double window_volatility(std::span<const double> window) {
    const std::size_t n = window.size();
    if (n < 3) return 0.0;
    std::vector<double> r;
    r.reserve(n - 1);
    for (std::size_t i = 1; i < n; ++i) {
        r.push_back((window[i] - window[i - 1]) / floored(window[i - 1]));
    }
    double mean = 0.0;
    for (double v : r) mean += v;
    mean /= static_cast<double>(r.size());
    double ss = 0.0;
    for (double v : r) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / static_cast<double>(r.size() - 1));
}

} // namespace

std::vector<WindowRange> build_windows(std::size_t t, int w, int k) {
    if (w < 2) throw ConfigError("build_windows: window length must be >= 2");
    if (k < 1) throw ConfigError("build_windows: window count must be >= 1");
    if (t < static_cast<std::size_t>(w + k - 1)) {
        throw DataError("build_windows: insufficient history at index " + std::to_string(t));
    }
    std::vector<WindowRange> out;
    out.reserve(static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j) {
        std::size_t end = t - static_cast<std::size_t>(j);
        out.push_back(WindowRange{end - static_cast<std::size_t>(w) + 1, end});
    }
    return out;
}

PromptBundle build_prompt(std::span<const double> window, const PromptContext& ctx,
                          int window_id) {
    if (window.size() < 2) throw DataError("build_prompt: window too short");
    PromptBundle bundle;
    bundle.window_id = window_id;

    std::ostringstream numeric;
    for (std::size_t i = 0; i < window.size(); ++i) {
        if (i) numeric << ", ";
        numeric << format("%.6f", window[i]);
    }
    bundle.numeric_channel = numeric.str();

    const double change = window_last_change_pct(window);
    const double vol = window_volatility(window);
    std::ostringstream semantic;
    semantic << "Asset " << (ctx.asset.empty() ? "series" : ctx.asset)
             << ", daily scaled prices. Last step change: " << format("%+.2f", change)
             << "%. Window volatility: " << format("%.4f", vol) << ".";
    if (!ctx.cross_asset_changes.empty()) {
        semantic << " Cross-asset moves:";
        bool first = true;
        for (const auto& [name, pct] : ctx.cross_asset_changes) {
            semantic << (first ? " " : ", ") << name << " " << format("%+.2f", pct) << "%";
            first = false;
        }
        semantic << ".";
    }
    if (!ctx.sentiment_levels.empty()) {
        semantic << " Sentiment levels:";
        bool first = true;
        for (const auto& [name, level] : ctx.sentiment_levels) {
            semantic << (first ? " " : ", ") << name << " " << format("%.2f", level);
            first = false;
        }
        semantic << ".";
    }
    semantic << " Predict the next-step percent return. Reply with one line exactly as"
             << " \"PREDICTION: <signed percent>% CONFIDENCE: <number in [0,1]>\".";
    bundle.semantic_channel = semantic.str();
    return bundle;
}

std::optional<std::pair<double, double>> parse_slm_reply(const std::string& text) {
    static const std::regex prediction_re(
        R"(PREDICTION\s*[:=]\s*([+-]?[0-9]*\.?[0-9]+)\s*%?)", std::regex::icase);
    static const std::regex confidence_re(
        R"(CONFIDENCE\s*[:=]\s*([+-]?[0-9]*\.?[0-9]+))", std::regex::icase);
    std::smatch mp, mc;
    if (std::regex_search(text, mp, prediction_re) && std::regex_search(text, mc, confidence_re)) {
        return std::make_pair(std::stod(mp[1].str()), std::stod(mc[1].str()));
    }

    // JSON fallback: first balanced object in the text.
    auto start = text.find('{');
    auto stop = text.rfind('}');
    if (start != std::string::npos && stop != std::string::npos && stop > start) {
        auto j = nlohmann::json::parse(text.substr(start, stop - start + 1), nullptr, false);
        if (j.is_object()) {
            double pct = 0.0;
            bool have_pct = false;
            for (const char* key : {"prediction_pct", "prediction", "return_pct"}) {
                if (j.contains(key) && j[key].is_number()) {
                    pct = j[key].get<double>();
                    have_pct = true;
                    break;
                }
            }
            if (have_pct && j.contains("confidence") && j["confidence"].is_number()) {
                return std::make_pair(pct, j["confidence"].get<double>());
            }
        }
    }
    return std::nullopt;
}

void validate_response(SlmResponse& response) {
    if (!response.ok) return;
    if (!std::isfinite(response.return_pct) || std::abs(response.return_pct) > kMaxAbsReturnPct) {
        response.ok = false;
        response.error = "prediction out of range: " + std::to_string(response.return_pct);
        return;
    }
    if (!std::isfinite(response.confidence)) {
        response.ok = false;
        response.error = "non-finite confidence";
        return;
    }
    response.confidence = std::clamp(response.confidence, 0.0, 1.0);
}

void SlmClientConfig::validate() const {
    if (temperature != 0.0) throw ConfigError("slm config: temperature must be exactly 0");
    if (timeout_s <= 0.0) throw ConfigError("slm config: timeout must be > 0");
    if (max_tokens < 1) throw ConfigError("slm config: max_tokens must be >= 1");
    if (retries < 0) throw ConfigError("slm config: retries must be >= 0");
}

SlmClient::SlmClient(SlmClientConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    if (!cfg_.replay_path.empty()) {
        std::ifstream in(cfg_.replay_path);
        if (!in) throw DataError("cannot open replay file: " + cfg_.replay_path);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            auto j = nlohmann::json::parse(line, nullptr, false);
            if (j.is_object() && j.contains("key") && j.contains("response")) {
                replay_[j["key"].get<std::string>()] = j["response"].get<std::string>();
            }
        }
    }
    if (!cfg_.record_path.empty()) {
        auto out = std::make_unique<std::ofstream>(cfg_.record_path, std::ios::app);
        if (!*out) throw DataError("cannot open record file: " + cfg_.record_path);
        record_ = std::move(out);
    }
}

SlmClient::~SlmClient() = default;

std::string SlmClient::fetch(const PromptBundle& bundle, std::string& error) {
    if (!cfg_.replay_path.empty()) {
        auto it = replay_.find(prompt_key(bundle));
        if (it == replay_.end()) {
            error = "replay miss for prompt key " + prompt_key(bundle);
            return {};
        }
        return it->second;
    }
    if (cfg_.endpoint.empty()) {
        error = "no endpoint configured";
        return {};
    }

    // Split "scheme://host:port/prefix" into client base and path prefix.
    std::string base = cfg_.endpoint;
    std::string prefix;
    auto scheme_end = base.find("://");
    auto path_start = base.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    if (path_start != std::string::npos) {
        prefix = base.substr(path_start);
        base = base.substr(0, path_start);
        while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    }

    httplib::Client client(base);
    client.set_connection_timeout(std::chrono::duration<double>(cfg_.timeout_s));
    client.set_read_timeout(std::chrono::duration<double>(cfg_.timeout_s));

    nlohmann::json body = {
        {"model", cfg_.model},
        {"messages",
         {{{"role", "system"},
           {"content",
            "You are a quantitative forecasting assistant. Given a scaled price window and a "
            "market narrative, predict the next-step percent return in the requested format."}},
          {{"role", "user"},
           {"content", "Numeric channel (scaled prices, 6-decimal): " + bundle.numeric_channel +
                           "\nSemantic channel: " + bundle.semantic_channel}}}},
        {"temperature", cfg_.temperature},
        {"max_tokens", cfg_.max_tokens}};

    auto res = client.Post(prefix + "/chat/completions", body.dump(), "application/json");
    if (!res) {
        error = "http error: " + httplib::to_string(res.error());
        return {};
    }
    if (res->status != 200) {
        error = "http status " + std::to_string(res->status);
        return {};
    }
    auto j = nlohmann::json::parse(res->body, nullptr, false);
    if (!j.is_object() || !j.contains("choices") || j["choices"].empty()) {
        error = "malformed completion response";
        return {};
    }
    const auto& choice = j["choices"][0];
    if (!choice.contains("message") || !choice["message"].contains("content")) {
        error = "completion without message content";
        return {};
    }
    std::string content = choice["message"]["content"].get<std::string>();
    if (record_) {
        nlohmann::json line = {{"key", prompt_key(bundle)},
                               {"numeric", bundle.numeric_channel},
                               {"semantic", bundle.semantic_channel},
                               {"response", content}};
        (*record_) << line.dump() << "\n";
        record_->flush();
    }
    return content;
}

SlmResponse SlmClient::query(const PromptBundle& bundle) {
    SlmResponse response;
    const auto start = std::chrono::steady_clock::now();
    for (int attempt = 0; attempt <= cfg_.retries; ++attempt) {
        std::string error;
        std::string content = fetch(bundle, error);
        if (content.empty() && !error.empty()) {
            response.error = error;
            continue;
        }
        response.raw_text = content;
        auto parsed = parse_slm_reply(content);
        if (!parsed) {
            response.error = "unparseable response";
            continue;
        }
        response.return_pct = parsed->first;
        response.confidence = parsed->second;
        response.ok = true;
        validate_response(response);
        if (response.ok) break;
    }
    response.latency_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
            .count();
    return response;
}

std::optional<StubMode> stub_mode_from_string(std::string_view s) {
    if (s == "perfect") return StubMode::Perfect;
    if (s == "noisy") return StubMode::Noisy;
    if (s == "momentum") return StubMode::Momentum;
    return std::nullopt;
}

StubOracle::StubOracle(StubMode mode, double sigma, std::uint64_t seed)
    : mode_(mode), sigma_(sigma), rng_(derive_seed(seed, "stub-noise")) {
    if (sigma < 0.0) throw ConfigError("stub: sigma must be >= 0");
}

SlmResponse StubOracle::respond(std::span<const double> window, const StubContext& ctx) {
    SlmResponse r;
    r.ok = true;
    switch (mode_) {
    case StubMode::Perfect:
        r.return_pct = ctx.truth_pct;
        r.confidence = 0.95;
        break;
    case StubMode::Noisy: {
        std::normal_distribution<double> noise(0.0, 1.0);
        const double sigma_eff = sigma_ * ctx.noise_scale;
        r.return_pct = ctx.truth_pct + sigma_eff * noise(rng_);
        r.confidence = std::clamp(0.95 / (1.0 + sigma_eff), 0.05, 0.95);
        break;
    }
    case StubMode::Momentum:
        r.return_pct = window_last_change_pct(window);
        r.confidence = 0.6;
        break;
    }
    char buf[96];
    std::snprintf(buf, sizeof(buf), "PREDICTION: %.6f%% CONFIDENCE: %.4f", r.return_pct,
                  r.confidence);
    r.raw_text = buf;
    validate_response(r);
    return r;
}

std::optional<ChannelPrediction> ensemble_slm(const std::vector<SlmResponse>& responses,
                                              double p_t) {
    double weighted = 0.0, weight = 0.0, conf_sum = 0.0, plain = 0.0;
    std::size_t n_ok = 0;
    ChannelPrediction out;
    out.source = Channel::SLM;
    for (std::size_t k = 0; k < responses.size(); ++k) {
        const auto& r = responses[k];
        if (!r.ok) continue;
        ++n_ok;
        weighted += r.confidence * r.return_pct;
        weight += r.confidence;
        conf_sum += r.confidence;
        plain += r.return_pct;
        out.parts.emplace_back("window_" + std::to_string(k), r.return_pct);
    }
    if (n_ok == 0) return std::nullopt;

    const double mean_return =
        weight > kEpsilon ? weighted / weight : plain / static_cast<double>(n_ok);
    out.confidence = conf_sum / static_cast<double>(n_ok);
    out.uncertainty = 1.0 - std::min(out.confidence, 1.0);
    out.y_hat = std::clamp(p_t * (1.0 + mean_return / 100.0), 0.0, 1.0);
    return out;
}

} // namespace astif
