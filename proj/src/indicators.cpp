#include "astif/indicators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "astif/errors.hpp"

namespace astif {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Series make_series(std::size_t n, std::size_t warmup) {
    Series s;
    s.values.assign(n, kNaN);
    s.warmup = warmup;
    return s;
}

double floored(double v) { return std::max(v, kEpsilon); }

/// Simple returns (p_t - p_{t-1}) / p_{t-1}, first entry NaN.
std::vector<double> simple_returns(const std::vector<double>& p) {
    std::vector<double> r(p.size(), kNaN);
    for (std::size_t t = 1; t < p.size(); ++t) {
        r[t] = (p[t] - p[t - 1]) / floored(p[t - 1]);
    }
    return r;
}

double sample_std(const double* begin, std::size_t n) {
    if (n < 2) return 0.0;
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += begin[i];
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double d = begin[i] - mean;
        ss += d * d;
    }
    return std::sqrt(ss / static_cast<double>(n - 1));
}

} // namespace

Series momentum(const std::vector<double>& series, int k) {
    if (k < 1) throw ConfigError("momentum: lag must be >= 1");
    if (static_cast<std::size_t>(k) >= series.size()) {
        throw DataError("momentum: lag >= series length");
    }
    auto out = make_series(series.size(), static_cast<std::size_t>(k));
    for (std::size_t t = static_cast<std::size_t>(k); t < series.size(); ++t) {
        double base = floored(series[t - k]);
        out.values[t] = (series[t] - series[t - k]) / base;
    }
    return out;
}

Series sma(const std::vector<double>& series, int window) {
    if (window < 1) throw ConfigError("sma: window must be >= 1");
    if (static_cast<std::size_t>(window) > series.size()) {
        throw DataError("sma: window exceeds series length");
    }
    auto out = make_series(series.size(), static_cast<std::size_t>(window - 1));
    double sum = 0.0;
    for (std::size_t t = 0; t < series.size(); ++t) {
        sum += series[t];
        if (t >= static_cast<std::size_t>(window)) sum -= series[t - window];
        if (t + 1 >= static_cast<std::size_t>(window)) {
            out.values[t] = sum / window;
        }
    }
    return out;
}

Series ema(const std::vector<double>& series, int window) {
    if (window < 1) throw ConfigError("ema: window must be >= 1");
    return ema_from_alpha(series, 2.0 / (window + 1.0));
}

Series ema_from_alpha(const std::vector<double>& series, double alpha) {
    if (series.empty()) throw DataError("ema: empty series");
    auto out = make_series(series.size(), 0);
    double v = series[0];
    out.values[0] = v;
    for (std::size_t t = 1; t < series.size(); ++t) {
        v = alpha * series[t] + (1.0 - alpha) * v;
        out.values[t] = v;
    }
    return out;
}

Series rolling_volatility(const std::vector<double>& series, int window) {
    if (window < 2) throw ConfigError("rolling_volatility: window must be >= 2");
    if (static_cast<std::size_t>(window) >= series.size()) {
        throw DataError("rolling_volatility: window exceeds return count");
    }
    auto returns = simple_returns(series);
    auto out = make_series(series.size(), static_cast<std::size_t>(window));
    for (std::size_t t = static_cast<std::size_t>(window); t < series.size(); ++t) {
        // window trailing returns end at t (returns[t-window+1 .. t])
        out.values[t] = sample_std(&returns[t - window + 1], static_cast<std::size_t>(window));
    }
    return out;
}

Series rsi(const std::vector<double>& series, int period) {
    if (period < 1) throw ConfigError("rsi: period must be >= 1");
    if (static_cast<std::size_t>(period) >= series.size()) {
        throw DataError("rsi: period exceeds series length");
    }
    auto out = make_series(series.size(), static_cast<std::size_t>(period));
    double avg_gain = 0.0, avg_loss = 0.0;
    for (int t = 1; t <= period; ++t) {
        double d = series[t] - series[t - 1];
        avg_gain += std::max(d, 0.0);
        avg_loss += std::max(-d, 0.0);
    }
    avg_gain /= period;
    avg_loss /= period;
    auto value_of = [](double gain, double loss) {
        if (gain < kEpsilon && loss < kEpsilon) return 50.0;
        if (loss < kEpsilon) return 100.0;
        if (gain < kEpsilon) return 0.0;
        return 100.0 - 100.0 / (1.0 + gain / loss);
    };
    out.values[period] = value_of(avg_gain, avg_loss);
    for (std::size_t t = static_cast<std::size_t>(period) + 1; t < series.size(); ++t) {
        double d = series[t] - series[t - 1];
        avg_gain = (avg_gain * (period - 1) + std::max(d, 0.0)) / period;
        avg_loss = (avg_loss * (period - 1) + std::max(-d, 0.0)) / period;
        out.values[t] = value_of(avg_gain, avg_loss);
    }
    return out;
}

BollingerBands bollinger(const std::vector<double>& series, int window, double width) {
    if (window < 2) throw ConfigError("bollinger: window must be >= 2");
    if (width < 0.0) throw ConfigError("bollinger: width must be >= 0");
    if (static_cast<std::size_t>(window) > series.size()) {
        throw DataError("bollinger: window exceeds series length");
    }
    BollingerBands bb;
    std::size_t warmup = static_cast<std::size_t>(window - 1);
    bb.upper = make_series(series.size(), warmup);
    bb.lower = make_series(series.size(), warmup);
    bb.bandwidth = make_series(series.size(), warmup);
    for (std::size_t t = warmup; t < series.size(); ++t) {
        const double* begin = &series[t - warmup];
        double mean = 0.0;
        for (int i = 0; i < window; ++i) mean += begin[i];
        mean /= window;
        double sd = sample_std(begin, static_cast<std::size_t>(window));
        bb.upper.values[t] = mean + width * sd;
        bb.lower.values[t] = mean - width * sd;
        bb.bandwidth.values[t] = (bb.upper.values[t] - bb.lower.values[t]) / floored(mean);
    }
    return bb;
}

Series cross_correlation(const std::vector<double>& a, const std::vector<double>& b, int window) {
    if (a.size() != b.size()) throw DataError("cross_correlation: length mismatch");
    if (window < 3) throw ConfigError("cross_correlation: window must be >= 3");
    if (static_cast<std::size_t>(window) > a.size()) {
        throw DataError("cross_correlation: window exceeds series length");
    }
    std::size_t warmup = static_cast<std::size_t>(window - 1);
    auto out = make_series(a.size(), warmup);
    for (std::size_t t = warmup; t < a.size(); ++t) {
        std::size_t start = t - warmup;
        double ma = 0.0, mb = 0.0;
        for (int i = 0; i < window; ++i) {
            ma += a[start + i];
            mb += b[start + i];
        }
        ma /= window;
        mb /= window;
        double cov = 0.0, va = 0.0, vb = 0.0;
        for (int i = 0; i < window; ++i) {
            double da = a[start + i] - ma;
            double db = b[start + i] - mb;
            cov += da * db;
            va += da * da;
            vb += db * db;
        }
        if (va < kEpsilon * kEpsilon || vb < kEpsilon * kEpsilon) {
            out.values[t] = 0.0; // constant window carries no information
        } else {
            out.values[t] = std::clamp(cov / std::sqrt(va * vb), -1.0, 1.0);
        }
    }
    return out;
}

std::vector<Series> gepu_lags(const std::vector<double>& gepu, const std::set<int>& lags) {
    std::vector<Series> out;
    if (lags.empty()) return out;
    int max_lag = *lags.rbegin();
    if (max_lag < 0) throw ConfigError("gepu_lags: negative lag");
    if (static_cast<std::size_t>(max_lag) >= gepu.size()) {
        throw DataError("gepu_lags: max lag >= series length");
    }
    for (int k : lags) {
        auto s = make_series(gepu.size(), static_cast<std::size_t>(k));
        for (std::size_t t = static_cast<std::size_t>(k); t < gepu.size(); ++t) {
            s.values[t] = gepu[t - k];
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::size_t IndicatorConfig::max_lookback() const {
    std::size_t m = 0;
    auto bump = [&m](int v) { m = std::max<std::size_t>(m, v > 0 ? static_cast<std::size_t>(v) : 0); };
    for (int k : momentum_lags) bump(k);
    for (int w : sma_windows) bump(w);
    for (int w : ema_windows) bump(w);
    bump(vol_window);
    bump(rsi_period);
    bump(bollinger_window);
    bump(corr_window);
    for (int k : gepu_lags) bump(k);
    return m;
}

void IndicatorConfig::validate() const {
    for (int k : momentum_lags) {
        if (k < 1) throw ConfigError("indicator config: momentum lag must be >= 1");
    }
    for (int w : sma_windows) {
        if (w < 1) throw ConfigError("indicator config: sma window must be >= 1");
    }
    for (int w : ema_windows) {
        if (w < 1) throw ConfigError("indicator config: ema window must be >= 1");
    }
    if (vol_window != 0 && vol_window < 2) {
        throw ConfigError("indicator config: volatility window must be >= 2");
    }
    if (rsi_period < 0) throw ConfigError("indicator config: rsi period must be >= 0");
    if (bollinger_window != 0 && bollinger_window < 2) {
        throw ConfigError("indicator config: bollinger window must be >= 2");
    }
    if (bollinger_window != 0 && bollinger_width <= 0.0) {
        throw ConfigError("indicator config: bollinger width must be > 0");
    }
    if (corr_window != 0 && corr_window < 3) {
        throw ConfigError("indicator config: correlation window must be >= 3");
    }
    for (int k : gepu_lags) {
        if (k < 0) throw ConfigError("indicator config: gepu lag must be >= 0");
    }
}

std::size_t FeatureMatrix::column_index(const std::string& name) const {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw DataError("feature matrix: no such column " + name);
    return static_cast<std::size_t>(it - names.begin());
}

FeatureMatrix build_features(const TimeFrame& frame, const IndicatorConfig& cfg,
                             const std::vector<std::string>& exclude) {
    cfg.validate();
    if (frame.target_column.empty() || !frame.has_column(frame.target_column)) {
        throw DataError("build_features: target column missing");
    }
    auto excluded = [&exclude](const std::string& n) {
        return std::find(exclude.begin(), exclude.end(), n) != exclude.end();
    };
    const auto& target = frame.column(frame.target_column);
    const std::size_t n = frame.rows();
    const std::size_t warmup = cfg.max_lookback();
    if (warmup >= n) throw DataError("build_features: indicator lookback exceeds series length");

    std::vector<std::string> raw_names;
    std::vector<const std::vector<double>*> raw_cols;
    for (std::size_t c = 0; c < frame.n_cols(); ++c) {
        if (excluded(frame.names[c])) continue;
        raw_names.push_back(frame.names[c]);
        raw_cols.push_back(&frame.columns[c]);
    }

    // Derived features, keyed by name so assembly order is deterministic.
    std::map<std::string, Series> derived;
    for (int k : cfg.momentum_lags) {
        derived["mom_" + std::to_string(k)] = momentum(target, k);
    }
    for (int w : cfg.sma_windows) {
        derived["sma_" + std::to_string(w)] = sma(target, w);
    }
    for (int w : cfg.ema_windows) {
        derived["ema_" + std::to_string(w)] = ema(target, w);
    }
    if (cfg.vol_window > 0) {
        derived["vol_" + std::to_string(cfg.vol_window)] = rolling_volatility(target, cfg.vol_window);
    }
    if (cfg.rsi_period > 0) {
        derived["rsi_" + std::to_string(cfg.rsi_period)] = rsi(target, cfg.rsi_period);
    }
    if (cfg.bollinger_window > 0) {
        auto bb = bollinger(target, cfg.bollinger_window, cfg.bollinger_width);
        std::string suffix = std::to_string(cfg.bollinger_window);
        derived["boll_upper_" + suffix] = std::move(bb.upper);
        derived["boll_lower_" + suffix] = std::move(bb.lower);
        derived["boll_bw_" + suffix] = std::move(bb.bandwidth);
    }
    if (cfg.corr_window > 0) {
        for (std::size_t c = 0; c < frame.n_cols(); ++c) {
            const std::string& name = frame.names[c];
            if (name == frame.target_column || name == cfg.gepu_column || excluded(name)) continue;
            derived["corr_" + name + "_" + std::to_string(cfg.corr_window)] =
                cross_correlation(target, frame.columns[c], cfg.corr_window);
        }
    }
    if (!cfg.gepu_lags.empty() && frame.has_column(cfg.gepu_column)) {
        auto lagged = gepu_lags(frame.column(cfg.gepu_column), cfg.gepu_lags);
        std::size_t i = 0;
        for (int k : cfg.gepu_lags) {
            derived[cfg.gepu_column + "_lag_" + std::to_string(k)] = std::move(lagged[i++]);
        }
    }

    FeatureMatrix fm;
    fm.warmup = warmup;
    fm.dates.assign(frame.dates.begin() + warmup, frame.dates.end());
    fm.names = raw_names;
    for (const auto& [name, s] : derived) fm.names.push_back(name);
    fm.values = DataMatrix(n - warmup, fm.names.size());

    for (std::size_t r = 0; r < fm.values.rows; ++r) {
        std::size_t src = r + warmup;
        std::size_t col = 0;
        for (const auto* raw : raw_cols) fm.values.at(r, col++) = (*raw)[src];
        for (const auto& [name, s] : derived) fm.values.at(r, col++) = s.values[src];
    }

    for (double v : fm.values.data) {
        if (!std::isfinite(v)) throw EngineError("build_features: non-finite value after warmup");
    }
    return fm;
}

} // namespace astif
