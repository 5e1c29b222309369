#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "astif/channel.hpp"
#include "astif/forest.hpp"
#include "astif/types.hpp"

namespace astif {

/// 12-dim selector input: channel confidences/uncertainties, disagreement,
/// their gaps, market volatility, trend strength, recent per-channel
/// accuracies, and price momentum.
using MetaFeatures = std::array<double, 12>;

/// Market slice the feature extractor reads at one step.
struct MarketContext {
    double volatility = 0.0;     // trailing return volatility
    double trend_strength = 0.0; // |corr(price, time index)| over the corr window
    double last_change = 0.0;    // last-step simple return
};

/// One walk-forward step, resolved once the next value is known.
struct EpisodeRecord {
    Date date;
    MetaFeatures features{};
    std::optional<ChannelPrediction> slm;
    std::optional<ChannelPrediction> ml;
    double p_t = 0.0;
    double y_final = 0.0;
    Channel selected = Channel::ML;
    std::string override_tag = "none";
    double raw_probability = 0.0;        // probability of the chosen channel
    double calibrated_confidence = 0.0;  // capped at the configured maximum
    std::optional<double> realized;      // filled at t+1
    std::optional<Channel> label;        // winning channel, set with realized
    std::vector<std::string> sanity_flags;
    std::string phase; // "validation" or "test"

    bool resolved() const { return realized.has_value(); }

    nlohmann::json to_json() const;
    static EpisodeRecord from_json(const nlohmann::json& j);
};

struct MetaParams {
    std::size_t episode_threshold = 50;
    double holdout = 0.30;
    double gap_threshold = 0.15;
    double confidence_cap = 0.85;
    int trees = 20;
    int max_depth = 5;
    int min_samples_split = 5;
    int min_samples_leaf = 2;
    std::size_t accuracy_window = 10;

    void validate() const; // throws ConfigError
};

/// Extracts the 12-dim features. `history` supplies recent resolved episodes
/// for the per-channel accuracy terms (0.5 when none exist).
MetaFeatures extract_features(const ChannelPrediction& slm, const ChannelPrediction& ml,
                              const MarketContext& market,
                              const std::deque<EpisodeRecord>& history,
                              std::size_t accuracy_window = 10);

/// Winning channel from retrospective absolute errors; exact ties go to ML.
Channel make_label(double slm_err, double ml_err);

/// Relative absolute error of a channel prediction against the realized value.
double relative_error(double y_hat, double realized);

/// Trained selection classifier plus its anti-overfitting bookkeeping.
class MetaClassifier {
public:
    explicit MetaClassifier(MetaParams params = {});

    /// Fits on the chronologically earliest (1 - holdout) share of resolved
    /// episodes and scores the rest. Stays untrained below the episode
    /// threshold or when labels are single-class.
    void train(const std::vector<EpisodeRecord>& resolved, std::uint64_t seed);

    bool trained() const { return trained_; }
    bool overfit() const { return overfit_; }
    bool usable() const { return trained_ && !overfit_; }
    double train_accuracy() const { return train_accuracy_; }
    double validation_accuracy() const { return validation_accuracy_; }
    double cross_entropy() const { return cross_entropy_; }
    const std::string& skip_reason() const { return skip_reason_; }

    /// Fraction of trees voting SLM. Requires a usable classifier.
    double select_probability(const MetaFeatures& z) const;

    const MetaParams& params() const { return params_; }

    nlohmann::json to_json() const;
    static MetaClassifier from_json(const nlohmann::json& j);

private:
    MetaParams params_;
    RandomForestClassifier forest_;
    bool trained_ = false;
    bool overfit_ = false;
    double train_accuracy_ = 0.0;
    double validation_accuracy_ = 0.0;
    double cross_entropy_ = 0.0;
    std::string skip_reason_;
};

/// Cold-start selection: high-confidence SLM gate, then lower-uncertainty
/// tiebreak (ties to ML). Returns the channel and its raw probability.
std::pair<Channel, double> rule_select(const ChannelPrediction& slm,
                                       const ChannelPrediction& ml);

/// Piecewise regime-dependent confidence map, capped at `cap`.
double calibrate(double p_raw, double c_slm, double c_ml, double cap = 0.85);

} // namespace astif
