#include "astif/meta.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "astif/errors.hpp"

namespace astif {

namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

/// Mean of (1 - relative absolute error) over the channel's recent resolved
/// episodes, 0.5 when none exist.
double recent_accuracy(const std::deque<EpisodeRecord>& history, Channel channel,
                       std::size_t window) {
    double sum = 0.0;
    std::size_t count = 0;
    for (auto it = history.rbegin(); it != history.rend() && count < window; ++it) {
        if (!it->resolved()) continue;
        const auto& pred = channel == Channel::SLM ? it->slm : it->ml;
        if (!pred) continue;
        sum += clamp01(1.0 - relative_error(pred->y_hat, *it->realized));
        ++count;
    }
    return count == 0 ? 0.5 : sum / static_cast<double>(count);
}

nlohmann::json prediction_to_json(const ChannelPrediction& p) {
    nlohmann::json parts = nlohmann::json::array();
    for (const auto& [name, value] : p.parts) parts.push_back({name, value});
    return {{"y_hat", p.y_hat},
            {"confidence", p.confidence},
            {"uncertainty", p.uncertainty},
            {"source", to_string(p.source)},
            {"parts", parts}};
}

ChannelPrediction prediction_from_json(const nlohmann::json& j) {
    ChannelPrediction p;
    p.y_hat = j["y_hat"].get<double>();
    p.confidence = j["confidence"].get<double>();
    p.uncertainty = j["uncertainty"].get<double>();
    p.source = *channel_from_string(j["source"].get<std::string>());
    for (const auto& item : j["parts"]) {
        p.parts.emplace_back(item[0].get<std::string>(), item[1].get<double>());
    }
    return p;
}

} // namespace

double relative_error(double y_hat, double realized) {
    return std::abs(y_hat - realized) / std::max(std::abs(realized), kEpsilon);
}

MetaFeatures extract_features(const ChannelPrediction& slm, const ChannelPrediction& ml,
                              const MarketContext& market,
                              const std::deque<EpisodeRecord>& history,
                              std::size_t accuracy_window) {
    MetaFeatures z{};
    z[0] = clamp01(slm.confidence);
    z[1] = clamp01(ml.confidence);
    z[2] = clamp01(slm.uncertainty);
    z[3] = clamp01(ml.uncertainty);
    z[4] = clamp01(std::abs(slm.y_hat - ml.y_hat) /
                   std::max(std::max(slm.y_hat, ml.y_hat), kEpsilon));
    z[5] = clamp01(std::abs(slm.confidence - ml.confidence));
    z[6] = clamp01(std::abs(slm.uncertainty - ml.uncertainty));
    z[7] = std::isfinite(market.volatility) ? market.volatility : 0.0;
    z[8] = std::isfinite(market.trend_strength) ? market.trend_strength : 0.0;
    z[9] = recent_accuracy(history, Channel::SLM, accuracy_window);
    z[10] = recent_accuracy(history, Channel::ML, accuracy_window);
    z[11] = std::isfinite(market.last_change) ? market.last_change : 0.0;
    return z;
}

Channel make_label(double slm_err, double ml_err) {
    if (slm_err < 0.0 || ml_err < 0.0) throw DataError("make_label: errors must be >= 0");
    return slm_err < ml_err ? Channel::SLM : Channel::ML;
}

void MetaParams::validate() const {
    if (holdout <= 0.0 || holdout >= 1.0) throw ConfigError("meta: holdout must be in (0,1)");
    if (gap_threshold < 0.0) throw ConfigError("meta: gap threshold must be >= 0");
    if (confidence_cap <= 0.0 || confidence_cap > 1.0) {
        throw ConfigError("meta: confidence cap must be in (0,1]");
    }
    if (trees < 1 || max_depth < 1) throw ConfigError("meta: trees and depth must be >= 1");
    if (accuracy_window < 1) throw ConfigError("meta: accuracy window must be >= 1");
}

MetaClassifier::MetaClassifier(MetaParams params) : params_(params) {
    params_.validate();
    ForestParams fp;
    fp.n_trees = params_.trees;
    fp.max_depth = params_.max_depth;
    fp.min_samples_split = params_.min_samples_split;
    fp.min_samples_leaf = params_.min_samples_leaf;
    forest_ = RandomForestClassifier(fp);
}

void MetaClassifier::train(const std::vector<EpisodeRecord>& resolved, std::uint64_t seed) {
    trained_ = false;
    overfit_ = false;
    skip_reason_.clear();

    std::vector<const EpisodeRecord*> usable;
    for (const auto& e : resolved) {
        if (e.resolved() && e.label.has_value()) usable.push_back(&e);
    }
    if (usable.size() < params_.episode_threshold) {
        skip_reason_ = "episode count below threshold";
        return;
    }

    const std::size_t n = usable.size();
    const std::size_t n_train =
        n - static_cast<std::size_t>(std::floor(static_cast<double>(n) * params_.holdout));
    if (n_train == 0 || n_train == n) {
        skip_reason_ = "degenerate holdout split";
        return;
    }

    DataMatrix x(n_train, 12);
    std::vector<int> y(n_train);
    bool has_slm = false, has_ml = false;
    for (std::size_t i = 0; i < n_train; ++i) {
        for (std::size_t f = 0; f < 12; ++f) x.at(i, f) = usable[i]->features[f];
        y[i] = *usable[i]->label == Channel::SLM ? 1 : 0;
        (y[i] ? has_slm : has_ml) = true;
    }
    if (!has_slm || !has_ml) {
        skip_reason_ = "single-class label set";
        return;
    }

    forest_.fit(x, y, seed);
    trained_ = true;

    auto accuracy_over = [this, &usable](std::size_t begin, std::size_t end) {
        std::size_t hits = 0;
        for (std::size_t i = begin; i < end; ++i) {
            double p = forest_.predict_proba(
                std::span<const double>(usable[i]->features.data(), 12));
            Channel choice = p > 0.5 ? Channel::SLM : Channel::ML;
            if (choice == *usable[i]->label) ++hits;
        }
        return static_cast<double>(hits) / static_cast<double>(end - begin);
    };
    train_accuracy_ = accuracy_over(0, n_train);
    validation_accuracy_ = accuracy_over(n_train, n);
    overfit_ = (train_accuracy_ - validation_accuracy_) > params_.gap_threshold;

    // Cross-entropy on the holdout, reported as a diagnostic.
    double ce = 0.0;
    for (std::size_t i = n_train; i < n; ++i) {
        double p = forest_.predict_proba(std::span<const double>(usable[i]->features.data(), 12));
        p = std::clamp(p, 1e-6, 1.0 - 1e-6);
        ce -= *usable[i]->label == Channel::SLM ? std::log(p) : std::log(1.0 - p);
    }
    cross_entropy_ = ce / static_cast<double>(n - n_train);
}

double MetaClassifier::select_probability(const MetaFeatures& z) const {
    if (!usable()) throw EngineError("meta classifier: not usable (untrained or overfit)");
    return forest_.predict_proba(std::span<const double>(z.data(), z.size()));
}

std::pair<Channel, double> rule_select(const ChannelPrediction& slm,
                                       const ChannelPrediction& ml) {
    if (slm.confidence >= 0.9 && slm.uncertainty < 0.2) return {Channel::SLM, 0.75};
    if (slm.uncertainty < ml.uncertainty) return {Channel::SLM, 0.55};
    return {Channel::ML, 0.55};
}

double calibrate(double p_raw, double c_slm, double c_ml, double cap) {
    const double mean_conf = 0.5 * (c_slm + c_ml);
    double calibrated;
    if (mean_conf < 0.6) {
        calibrated = 0.4 + 0.2 * (p_raw - 0.5);
    } else if (mean_conf < 0.8) {
        calibrated = 0.3 + 0.4 * p_raw;
    } else {
        calibrated = 0.2 + 0.6 * p_raw;
    }
    return std::clamp(calibrated, 0.0, cap);
}

nlohmann::json EpisodeRecord::to_json() const {
    nlohmann::json j = {{"date", date.to_string()},
                        {"features", features},
                        {"p_t", p_t},
                        {"y_final", y_final},
                        {"selected", to_string(selected)},
                        {"override", override_tag},
                        {"raw_probability", raw_probability},
                        {"calibrated_confidence", calibrated_confidence},
                        {"sanity_flags", sanity_flags},
                        {"phase", phase}};
    j["slm"] = slm ? prediction_to_json(*slm) : nlohmann::json(nullptr);
    j["ml"] = ml ? prediction_to_json(*ml) : nlohmann::json(nullptr);
    j["realized"] = realized ? nlohmann::json(*realized) : nlohmann::json(nullptr);
    j["label"] = label ? nlohmann::json(to_string(*label)) : nlohmann::json(nullptr);
    return j;
}

EpisodeRecord EpisodeRecord::from_json(const nlohmann::json& j) {
    EpisodeRecord e;
    auto date = Date::parse(j["date"].get<std::string>());
    if (!date) throw DataError("episode json: bad date");
    e.date = *date;
    auto feats = j["features"].get<std::vector<double>>();
    if (feats.size() != 12) throw DataError("episode json: expected 12 features");
    std::copy(feats.begin(), feats.end(), e.features.begin());
    e.p_t = j["p_t"].get<double>();
    e.y_final = j["y_final"].get<double>();
    e.selected = *channel_from_string(j["selected"].get<std::string>());
    e.override_tag = j["override"].get<std::string>();
    e.raw_probability = j["raw_probability"].get<double>();
    e.calibrated_confidence = j["calibrated_confidence"].get<double>();
    e.sanity_flags = j["sanity_flags"].get<std::vector<std::string>>();
    e.phase = j["phase"].get<std::string>();
    if (!j["slm"].is_null()) e.slm = prediction_from_json(j["slm"]);
    if (!j["ml"].is_null()) e.ml = prediction_from_json(j["ml"]);
    if (!j["realized"].is_null()) e.realized = j["realized"].get<double>();
    if (!j["label"].is_null()) e.label = channel_from_string(j["label"].get<std::string>());
    return e;
}

nlohmann::json MetaClassifier::to_json() const {
    return {{"format", 1},
            {"trained", trained_},
            {"overfit", overfit_},
            {"train_accuracy", train_accuracy_},
            {"validation_accuracy", validation_accuracy_},
            {"cross_entropy", cross_entropy_},
            {"skip_reason", skip_reason_},
            {"params",
             {{"episode_threshold", params_.episode_threshold},
              {"holdout", params_.holdout},
              {"gap_threshold", params_.gap_threshold},
              {"confidence_cap", params_.confidence_cap},
              {"trees", params_.trees},
              {"max_depth", params_.max_depth},
              {"min_samples_split", params_.min_samples_split},
              {"min_samples_leaf", params_.min_samples_leaf},
              {"accuracy_window", params_.accuracy_window}}},
            {"forest", trained_ ? forest_.to_json() : nlohmann::json(nullptr)}};
}

MetaClassifier MetaClassifier::from_json(const nlohmann::json& j) {
    MetaParams p;
    const auto& pj = j["params"];
    p.episode_threshold = pj["episode_threshold"].get<std::size_t>();
    p.holdout = pj["holdout"].get<double>();
    p.gap_threshold = pj["gap_threshold"].get<double>();
    p.confidence_cap = pj["confidence_cap"].get<double>();
    p.trees = pj["trees"].get<int>();
    p.max_depth = pj["max_depth"].get<int>();
    p.min_samples_split = pj["min_samples_split"].get<int>();
    p.min_samples_leaf = pj["min_samples_leaf"].get<int>();
    p.accuracy_window = pj["accuracy_window"].get<std::size_t>();
    MetaClassifier clf(p);
    clf.trained_ = j["trained"].get<bool>();
    clf.overfit_ = j["overfit"].get<bool>();
    clf.train_accuracy_ = j["train_accuracy"].get<double>();
    clf.validation_accuracy_ = j["validation_accuracy"].get<double>();
    clf.cross_entropy_ = j["cross_entropy"].get<double>();
    clf.skip_reason_ = j["skip_reason"].get<std::string>();
    if (!j["forest"].is_null()) clf.forest_ = RandomForestClassifier::from_json(j["forest"]);
    return clf;
}

} // namespace astif
