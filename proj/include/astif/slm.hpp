#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "astif/channel.hpp"
#include "astif/rng.hpp"
#include "astif/types.hpp"

namespace astif {

/// Inclusive index range of one prompt window.
struct WindowRange {
    std::size_t begin = 0;
    std::size_t end = 0;
};

/// K windows of length w ending at t, t-1, ..., t-K+1.
std::vector<WindowRange> build_windows(std::size_t t, int w, int k);

/// Narrative inputs that accompany the price window.
struct PromptContext {
    std::string asset;
    std::vector<std::pair<std::string, double>> cross_asset_changes; // last-step pct change
    std::vector<std::pair<std::string, double>> sentiment_levels;    // scaled level
};

struct PromptBundle {
    std::string numeric_channel;  // w prices, 6-decimal
    std::string semantic_channel; // templated narrative
    int window_id = 0;
};

PromptBundle build_prompt(std::span<const double> window, const PromptContext& ctx,
                          int window_id);

struct SlmResponse {
    double return_pct = 0.0;
    double confidence = 0.0;
    std::string raw_text;
    double latency_ms = 0.0;
    bool ok = false;
    std::string error;
};

struct SlmClientConfig {
    std::string endpoint; // base URL, e.g. http://localhost:1234/v1
    std::string model = "gemma-3-1b-it";
    double temperature = 0.0;
    int max_tokens = 150; // 600 for reasoning models
    double timeout_s = 30.0;
    int retries = 2;
    std::string record_path; // append request/response pairs here
    std::string replay_path; // serve responses from here instead of the network

    void validate() const; // throws ConfigError
};

/// Extracts (return percent, confidence) from either the line grammar
/// "PREDICTION: <x>% CONFIDENCE: <c>" or an equivalent JSON object.
std::optional<std::pair<double, double>> parse_slm_reply(const std::string& text);

/// Marks out-of-range predictions (|pct| > 50, non-finite) as failures and
/// clamps confidence into [0,1].
void validate_response(SlmResponse& response);

/// Chat-completions client with bounded retry and a request/response replay
/// log for offline re-runs.
class SlmClient {
public:
    explicit SlmClient(SlmClientConfig cfg);
    ~SlmClient();
    SlmClient(const SlmClient&) = delete;
    SlmClient& operator=(const SlmClient&) = delete;

    SlmResponse query(const PromptBundle& bundle);

    const SlmClientConfig& config() const { return cfg_; }

private:
    SlmClientConfig cfg_;
    std::map<std::string, std::string> replay_;
    std::unique_ptr<std::ostream> record_;

    std::string fetch(const PromptBundle& bundle, std::string& error);
};

enum class StubMode { Perfect, Noisy, Momentum };
std::optional<StubMode> stub_mode_from_string(std::string_view s);

/// Per-step inputs the harness feeds the stub.
struct StubContext {
    double truth_pct = 0.0;   // realized next-step return, or a configured proxy
    double noise_scale = 1.0; // multiplies sigma; lets tests vary noise by regime
};

/// Deterministic test double for the language model.
class StubOracle {
public:
    StubOracle(StubMode mode, double sigma, std::uint64_t seed);

    SlmResponse respond(std::span<const double> window, const StubContext& ctx);
    StubMode mode() const { return mode_; }

private:
    StubMode mode_;
    double sigma_;
    Rng rng_;
};

/// Confidence-weighted ensemble over the window responses, mapped to a scaled
/// price from p_t. Returns nullopt when no window succeeded.
std::optional<ChannelPrediction> ensemble_slm(const std::vector<SlmResponse>& responses,
                                              double p_t);

} // namespace astif
