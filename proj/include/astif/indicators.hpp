#pragma once

#include <set>
#include <string>
#include <vector>

#include "astif/timeframe.hpp"
#include "astif/types.hpp"

namespace astif {

/// A derived series aligned to its input. Entries before `warmup` are NaN.
struct Series {
    std::vector<double> values;
    std::size_t warmup = 0;
};

struct BollingerBands {
    Series upper;
    Series lower;
    Series bandwidth;
};

/// Indicator windows and lags. Empty sets / zero windows disable a family.
struct IndicatorConfig {
    std::set<int> momentum_lags{1, 2, 3, 5, 7};
    std::set<int> sma_windows{5, 10, 20};
    std::set<int> ema_windows{5, 10, 20};
    int vol_window = 10;
    int rsi_period = 14;
    int bollinger_window = 20;
    double bollinger_width = 2.0;
    int corr_window = 30;
    std::set<int> gepu_lags{0, 1, 3, 7};
    std::string gepu_column = "GEPU";

    /// Largest lookback across enabled indicators; rows to trim as warmup.
    std::size_t max_lookback() const;
    void validate() const; // throws ConfigError
};

/// Model-ready feature table: raw scaled columns plus indicators, warmup trimmed.
struct FeatureMatrix {
    std::vector<Date> dates;
    std::vector<std::string> names;
    DataMatrix values;
    std::size_t warmup = 0;

    std::size_t column_index(const std::string& name) const; // throws DataError
};

Series momentum(const std::vector<double>& series, int k);
Series sma(const std::vector<double>& series, int window);
Series ema(const std::vector<double>& series, int window);
/// Sample standard deviation of simple returns over a trailing window of
/// `window` returns.
Series rolling_volatility(const std::vector<double>& series, int window);
/// Wilder-smoothed RSI in [0,100]. All-gain windows read 100, all-loss 0,
/// flat windows 50.
Series rsi(const std::vector<double>& series, int period);
Series ema_from_alpha(const std::vector<double>& series, double alpha);
BollingerBands bollinger(const std::vector<double>& series, int window, double width);
/// Trailing-window Pearson correlation in [-1,1]; constant windows read 0.
Series cross_correlation(const std::vector<double>& a, const std::vector<double>& b, int window);
/// One shifted column per lag, warmup = max lag.
std::vector<Series> gepu_lags(const std::vector<double>& gepu, const std::set<int>& lags);

/// Assembles the full feature table: raw columns in frame order, then derived
/// features sorted by name. `exclude` columns stay out of the matrix entirely
/// (side channels routed to the semantic predictor only).
FeatureMatrix build_features(const TimeFrame& frame, const IndicatorConfig& cfg,
                             const std::vector<std::string>& exclude = {});

} // namespace astif
