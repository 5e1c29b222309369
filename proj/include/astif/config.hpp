#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "astif/forest.hpp"
#include "astif/indicators.hpp"
#include "astif/lstm.hpp"
#include "astif/meta.hpp"
#include "astif/slm.hpp"

namespace astif {

/// Full experiment configuration. Every constant defaults to its documented
/// value and everything is overridable through the JSON document or CLI flags.
struct RunConfig {
    // data
    std::string prices_csv;
    std::string gepu_csv;
    std::string bundle_dir; // pre-scaled dataset bundle; overrides the CSVs
    std::string target;
    std::string date_column = "date";
    std::string fill_policy = "forward-fill"; // or "drop-row"

    IndicatorConfig indicators;
    TrainSpec train;
    int patience_cv = 15;
    ForestParams forest; // 100 trees, depth 20

    SlmClientConfig slm;
    std::string stub_mode;  // "", "perfect", "noisy", "momentum"
    double stub_sigma = 2.0;

    MetaParams meta;

    double tau_max = 0.5;
    double alpha = 0.7;

    int window = 8;   // w, prompt window length
    int ensemble = 3; // K, staggered windows

    std::vector<std::string> sentiment_columns;
    std::vector<std::string> semantic_only_columns; // fed to the SLM, hidden from ML features
    std::string stub_truth_source = "realized";     // or a column name
    std::string stub_noise_scale_column;            // column of [0,1] strengths; scale = 1 - value

    double train_fraction = 0.8;
    double val_fraction_of_train = 0.1;
    bool forward_mode = false;
    double forward_context_fraction = 0.1;

    std::uint64_t seed = 42;
    std::string out_dir = "out";

    void validate() const; // throws ConfigError before any side effect

    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig from_json_text(const std::string& text);
    static RunConfig load_file(const std::string& path);
};

} // namespace astif
