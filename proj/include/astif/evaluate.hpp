#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "astif/engine.hpp"
#include "astif/meta.hpp"
#include "astif/timeframe.hpp"

namespace astif {

struct Metrics {
    double mae = 0.0;
    double rmse = 0.0;
    std::optional<double> r_squared; // absent when truth variance is zero
};

Metrics metrics(const std::vector<double>& truth, const std::vector<double>& predictions);

/// Relative MAE reduction in percent: 100 * (baseline - candidate) / baseline.
double improvement(double baseline_mae, double candidate_mae);

struct ReliabilityBin {
    double mean_confidence = 0.0;
    double observed_accuracy = 0.0;
    std::size_t count = 0;
};

struct ReliabilityResult {
    std::vector<ReliabilityBin> bins; // non-empty bins only
    double calibration_error = 0.0;
};

/// Buckets resolved episodes by calibrated confidence into equal-width bins.
/// A record counts as correct when its relative error is within the threshold.
ReliabilityResult reliability(const std::vector<EpisodeRecord>& records, int bins = 10,
                              double correctness_threshold = 0.05);

/// Fraction of resolved episodes where the selected channel beat the other;
/// ties count as failures.
double meta_decision_quality(const std::vector<EpisodeRecord>& records);

struct SplitSizes {
    std::size_t fit = 0;
    std::size_t validation = 0;
    std::size_t test = 0;
};

struct EvalReport {
    std::string variant = "full";
    double mae = 0.0;
    double rmse = 0.0;
    std::optional<double> r_squared;
    double calibration_error = 0.0;
    std::vector<ReliabilityBin> bins;
    double meta_decision_quality = 0.0;
    std::map<std::string, std::size_t> channel_usage;
    std::map<std::string, std::size_t> override_counts;
    std::size_t n = 0;       // emitted test forecasts
    std::size_t skipped = 0; // steps with no viable channel
    double slm_only_mae = 0.0;
    double ml_only_mae = 0.0;
    SplitSizes splits;
    bool meta_trained = false;
    bool meta_overfit = false;

    nlohmann::json to_json() const;
};

struct ForecastRow {
    Date date;
    double p_t = 0.0;
    double y_hat = 0.0;
    Channel chosen = Channel::ML;
    double calibrated_confidence = 0.0;
    std::string override_tag;
};

struct WalkForwardResult {
    EvalReport report;
    std::vector<EpisodeRecord> episodes; // validation then test
    std::vector<ForecastRow> forecasts;  // test steps only
    nlohmann::json models;               // serialized model artifacts
};

/// Chronological train/validation/test walk: trains the channels, replays the
/// validation slice to seed the meta-selector, then steps through the test
/// slice emitting one forecast per row.
WalkForwardResult walk_forward(const TimeFrame& scaled, const RunConfig& cfg);

/// Same walk with one component removed. `Full` is exactly walk_forward.
WalkForwardResult ablate(const TimeFrame& scaled, const RunConfig& cfg, AblationVariant variant);

enum class SweepAxis { Window, Ensemble };
std::optional<SweepAxis> sweep_axis_from_string(std::string_view s);

struct SweepRow {
    double value = 0.0;
    double mae = 0.0;
    double rmse = 0.0;
};

/// One walk-forward run per value with everything else fixed.
std::vector<SweepRow> sensitivity_sweep(const TimeFrame& scaled, const RunConfig& cfg,
                                        SweepAxis axis, const std::vector<int>& values);

void write_forecast_csv(const std::vector<ForecastRow>& rows, const std::string& path);
void write_episode_log(const std::vector<EpisodeRecord>& episodes, const std::string& path);
std::vector<EpisodeRecord> read_episode_log(const std::string& path);
void write_reliability_csv(const std::vector<ReliabilityBin>& bins, const std::string& path);
void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& axis,
                     const std::string& path);

} // namespace astif
