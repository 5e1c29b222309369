#pragma once

#include <deque>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "astif/config.hpp"
#include "astif/integrate.hpp"
#include "astif/lstm.hpp"
#include "astif/meta.hpp"
#include "astif/slm.hpp"
#include "astif/timeframe.hpp"

namespace astif {

enum class AblationVariant { Full, NoSlm, NoLstm, NoUncertainty, NoMeta };
const char* to_string(AblationVariant v);
std::optional<AblationVariant> variant_from_string(std::string_view s);

/// Scaled dataset plus the scaler that produced it. Columns listed as
/// semantic-only bypass scaling and keep their raw values.
struct DatasetBundle {
    TimeFrame scaled;
    ScalerParams scaler;
};

/// Aligns raw frames, fits the scaler on the leading training share only, and
/// transforms the full frame.
DatasetBundle ingest_frame(const TimeFrame& raw, const RunConfig& cfg);
DatasetBundle ingest_dataset(const RunConfig& cfg); // loads the configured CSVs
DatasetBundle load_bundle(const std::string& dir, const RunConfig& cfg);
void write_bundle(const DatasetBundle& bundle, const std::string& dir,
                  const std::string& date_column = "date");

/// Walk-forward forecasting state: trained channels, episode history, and the
/// meta-selector. Steps are strictly sequential in t.
class ForecastEngine {
public:
    ForecastEngine(TimeFrame scaled, RunConfig cfg,
                   AblationVariant variant = AblationVariant::Full);

    /// Trains the temporal channel on rows [0, fit_end) with early stopping
    /// monitored on targets in [fit_end, train_end).
    void fit(std::size_t fit_end, std::size_t train_end);

    /// Earliest t with enough history for sequences and prompt windows.
    std::size_t min_step_index() const;

    /// Forecasts row t+1 from information at rows <= t. Returns nullopt when
    /// both channels are unavailable (the step is skipped, never fatal).
    std::optional<EpisodeRecord> step(std::size_t t);

    /// Fills realized truth and the winning-channel label.
    void resolve(EpisodeRecord& episode, double realized) const;

    void append_episode(EpisodeRecord episode);
    void train_meta();

    const std::deque<EpisodeRecord>& episodes() const { return episodes_; }
    const MetaClassifier& meta() const { return meta_; }
    const RunConfig& config() const { return cfg_; }
    AblationVariant variant() const { return variant_; }
    std::size_t rows() const { return target_.size(); }
    double target_at(std::size_t t) const { return target_[t]; }
    const std::vector<Date>& dates() const { return frame_.dates; }

    nlohmann::json models_to_json() const;

private:
    TimeFrame frame_;
    RunConfig cfg_;
    AblationVariant variant_;
    std::vector<double> target_;
    FeatureMatrix features_;
    std::optional<LstmNetwork> lstm_;
    RandomForestRegressor forest_;
    MetaClassifier meta_;
    std::optional<StubOracle> stub_;
    std::optional<SlmClient> client_;
    std::deque<EpisodeRecord> episodes_;
    std::vector<std::string> narrative_assets_;
    std::vector<std::string> narrative_sentiment_;
    bool fitted_ = false;

    std::optional<ChannelPrediction> ml_channel(std::size_t t) const;
    std::optional<ChannelPrediction> slm_channel(std::size_t t);
    MarketContext market_context(std::size_t t) const;
    double stub_truth_pct(std::size_t t) const;
    double stub_noise_scale(std::size_t t) const;
};

} // namespace astif
