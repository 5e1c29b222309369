#include "astif/config.hpp"

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "astif/errors.hpp"

namespace astif {

namespace {

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

std::set<int> read_int_set(const nlohmann::json& j, const char* key, std::set<int> fallback) {
    if (!j.contains(key)) return fallback;
    auto v = j.at(key).get<std::vector<int>>();
    return std::set<int>(v.begin(), v.end());
}

} // namespace

void RunConfig::validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("config: alpha must be in (0,1)");
    if (tau_max <= 0.0) throw ConfigError("config: tau_max must be > 0");
    if (window < 2) throw ConfigError("config: window must be >= 2");
    if (ensemble < 1) throw ConfigError("config: ensemble must be >= 1");
    if (train_fraction <= 0.0 || train_fraction >= 1.0) {
        throw ConfigError("config: train_fraction must be in (0,1)");
    }
    if (val_fraction_of_train <= 0.0 || val_fraction_of_train > 0.5) {
        throw ConfigError("config: val_fraction_of_train must be in (0, 0.5]");
    }
    if (forward_context_fraction <= 0.0 || forward_context_fraction >= 1.0) {
        throw ConfigError("config: forward_context_fraction must be in (0,1)");
    }
    if (fill_policy != "forward-fill" && fill_policy != "drop-row") {
        throw ConfigError("config: fill_policy must be forward-fill or drop-row");
    }
    if (!stub_mode.empty() && !stub_mode_from_string(stub_mode)) {
        throw ConfigError("config: unknown stub mode '" + stub_mode + "'");
    }
    if (stub_sigma < 0.0) throw ConfigError("config: stub_sigma must be >= 0");
    if (patience_cv < 1) throw ConfigError("config: patience_cv must be >= 1");
    indicators.validate();
    train.validate();
    slm.validate();
    meta.validate();
    if (forest.n_trees < 1 || forest.max_depth < 1) {
        throw ConfigError("config: forest trees and depth must be >= 1");
    }
}

nlohmann::json RunConfig::to_json() const {
    nlohmann::json j;
    j["data"] = {{"prices_csv", prices_csv}, {"gepu_csv", gepu_csv},
                 {"bundle_dir", bundle_dir}, {"target", target},
                 {"date_column", date_column}, {"fill_policy", fill_policy}};
    j["indicators"] = {
        {"momentum_lags", std::vector<int>(indicators.momentum_lags.begin(),
                                           indicators.momentum_lags.end())},
        {"sma_windows",
         std::vector<int>(indicators.sma_windows.begin(), indicators.sma_windows.end())},
        {"ema_windows",
         std::vector<int>(indicators.ema_windows.begin(), indicators.ema_windows.end())},
        {"vol_window", indicators.vol_window},
        {"rsi_period", indicators.rsi_period},
        {"bollinger_window", indicators.bollinger_window},
        {"bollinger_width", indicators.bollinger_width},
        {"corr_window", indicators.corr_window},
        {"gepu_lags", std::vector<int>(indicators.gepu_lags.begin(), indicators.gepu_lags.end())},
        {"gepu_column", indicators.gepu_column}};
    j["train"] = {{"sequence_length", train.sequence_length},
                  {"learning_rate", train.learning_rate},
                  {"batch_size", train.batch_size},
                  {"patience", train.patience},
                  {"patience_cv", patience_cv},
                  {"max_epochs", train.max_epochs},
                  {"dropout", train.dropout}};
    j["forest"] = {{"trees", forest.n_trees},
                   {"max_depth", forest.max_depth},
                   {"min_samples_split", forest.min_samples_split},
                   {"min_samples_leaf", forest.min_samples_leaf}};
    j["slm"] = {{"endpoint", slm.endpoint},     {"model", slm.model},
                {"temperature", slm.temperature}, {"max_tokens", slm.max_tokens},
                {"timeout_s", slm.timeout_s},   {"retries", slm.retries},
                {"record_path", slm.record_path}, {"replay_path", slm.replay_path},
                {"stub", stub_mode},            {"stub_sigma", stub_sigma}};
    j["meta"] = {{"episode_threshold", meta.episode_threshold},
                 {"holdout", meta.holdout},
                 {"gap_threshold", meta.gap_threshold},
                 {"confidence_cap", meta.confidence_cap},
                 {"trees", meta.trees},
                 {"max_depth", meta.max_depth},
                 {"min_samples_split", meta.min_samples_split},
                 {"min_samples_leaf", meta.min_samples_leaf},
                 {"accuracy_window", meta.accuracy_window}};
    j["integrate"] = {{"tau_max", tau_max}, {"alpha", alpha}};
    j["semantic"] = {{"window", window},
                     {"ensemble", ensemble},
                     {"sentiment_columns", sentiment_columns},
                     {"semantic_only_columns", semantic_only_columns},
                     {"stub_truth_source", stub_truth_source},
                     {"stub_noise_scale_column", stub_noise_scale_column}};
    j["split"] = {{"train_fraction", train_fraction},
                  {"val_fraction_of_train", val_fraction_of_train},
                  {"forward_mode", forward_mode},
                  {"forward_context_fraction", forward_context_fraction}};
    j["seed"] = seed;
    j["out_dir"] = out_dir;
    return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    RunConfig c;
    if (j.contains("data")) {
        const auto& d = j["data"];
        read(d, "prices_csv", c.prices_csv);
        read(d, "gepu_csv", c.gepu_csv);
        read(d, "bundle_dir", c.bundle_dir);
        read(d, "target", c.target);
        read(d, "date_column", c.date_column);
        read(d, "fill_policy", c.fill_policy);
    }
    if (j.contains("indicators")) {
        const auto& d = j["indicators"];
        c.indicators.momentum_lags = read_int_set(d, "momentum_lags", c.indicators.momentum_lags);
        c.indicators.sma_windows = read_int_set(d, "sma_windows", c.indicators.sma_windows);
        c.indicators.ema_windows = read_int_set(d, "ema_windows", c.indicators.ema_windows);
        read(d, "vol_window", c.indicators.vol_window);
        read(d, "rsi_period", c.indicators.rsi_period);
        read(d, "bollinger_window", c.indicators.bollinger_window);
        read(d, "bollinger_width", c.indicators.bollinger_width);
        read(d, "corr_window", c.indicators.corr_window);
        c.indicators.gepu_lags = read_int_set(d, "gepu_lags", c.indicators.gepu_lags);
        read(d, "gepu_column", c.indicators.gepu_column);
    }
    if (j.contains("train")) {
        const auto& d = j["train"];
        read(d, "sequence_length", c.train.sequence_length);
        read(d, "learning_rate", c.train.learning_rate);
        read(d, "batch_size", c.train.batch_size);
        read(d, "patience", c.train.patience);
        read(d, "patience_cv", c.patience_cv);
        read(d, "max_epochs", c.train.max_epochs);
        read(d, "dropout", c.train.dropout);
    }
    if (j.contains("forest")) {
        const auto& d = j["forest"];
        read(d, "trees", c.forest.n_trees);
        read(d, "max_depth", c.forest.max_depth);
        read(d, "min_samples_split", c.forest.min_samples_split);
        read(d, "min_samples_leaf", c.forest.min_samples_leaf);
    }
    if (j.contains("slm")) {
        const auto& d = j["slm"];
        read(d, "endpoint", c.slm.endpoint);
        read(d, "model", c.slm.model);
        read(d, "temperature", c.slm.temperature);
        read(d, "max_tokens", c.slm.max_tokens);
        read(d, "timeout_s", c.slm.timeout_s);
        read(d, "retries", c.slm.retries);
        read(d, "record_path", c.slm.record_path);
        read(d, "replay_path", c.slm.replay_path);
        read(d, "stub", c.stub_mode);
        read(d, "stub_sigma", c.stub_sigma);
    }
    if (j.contains("meta")) {
        const auto& d = j["meta"];
        read(d, "episode_threshold", c.meta.episode_threshold);
        read(d, "holdout", c.meta.holdout);
        read(d, "gap_threshold", c.meta.gap_threshold);
        read(d, "confidence_cap", c.meta.confidence_cap);
        read(d, "trees", c.meta.trees);
        read(d, "max_depth", c.meta.max_depth);
        read(d, "min_samples_split", c.meta.min_samples_split);
        read(d, "min_samples_leaf", c.meta.min_samples_leaf);
        read(d, "accuracy_window", c.meta.accuracy_window);
    }
    if (j.contains("integrate")) {
        read(j["integrate"], "tau_max", c.tau_max);
        read(j["integrate"], "alpha", c.alpha);
    }
    if (j.contains("semantic")) {
        const auto& d = j["semantic"];
        read(d, "window", c.window);
        read(d, "ensemble", c.ensemble);
        read(d, "sentiment_columns", c.sentiment_columns);
        read(d, "semantic_only_columns", c.semantic_only_columns);
        read(d, "stub_truth_source", c.stub_truth_source);
        read(d, "stub_noise_scale_column", c.stub_noise_scale_column);
    }
    if (j.contains("split")) {
        const auto& d = j["split"];
        read(d, "train_fraction", c.train_fraction);
        read(d, "val_fraction_of_train", c.val_fraction_of_train);
        read(d, "forward_mode", c.forward_mode);
        read(d, "forward_context_fraction", c.forward_context_fraction);
    }
    read(j, "seed", c.seed);
    read(j, "out_dir", c.out_dir);
    return c;
}

RunConfig RunConfig::from_json_text(const std::string& text) {
    auto j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config: invalid JSON document");
    return from_json(j);
}

RunConfig RunConfig::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json_text(text);
}

} // namespace astif
