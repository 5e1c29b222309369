#include "astif/driver.hpp"

#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "astif/errors.hpp"

namespace astif {

namespace {

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << text;
}

void write_run_artifacts(const WalkForwardResult& result, const RunConfig& cfg,
                         const std::string& dir) {
    std::filesystem::create_directories(dir);
    write_text(dir + "/report.json", result.report.to_json().dump(2) + "\n");
    write_forecast_csv(result.forecasts, dir + "/forecast.csv");
    write_episode_log(result.episodes, dir + "/episodes.jsonl");
    write_reliability_csv(result.report.bins, dir + "/reliability.csv");
    write_text(dir + "/models.json", result.models.dump() + "\n");
    write_text(dir + "/config.json", cfg.to_json().dump(2) + "\n");
}

} // namespace

SynthSpec synth_spec_from_json(const nlohmann::json& j) {
    SynthSpec spec;
    if (j.contains("length")) spec.length = j["length"].get<std::size_t>();
    if (j.contains("regimes")) {
        spec.regimes.clear();
        for (const auto& rj : j["regimes"]) {
            SynthRegime r;
            r.duration = rj.value("duration", std::size_t{0});
            r.drift = rj.value("drift", 0.0);
            r.volatility = rj.value("volatility", 0.0);
            r.semantic_strength = rj.value("semantic_strength", 0.0);
            spec.regimes.push_back(r);
        }
    }
    if (j.contains("correlated_assets")) {
        spec.correlated_assets = j["correlated_assets"].get<std::size_t>();
    }
    if (j.contains("correlation")) spec.correlation = j["correlation"].get<double>();
    if (j.contains("aux_volatility")) spec.aux_volatility = j["aux_volatility"].get<double>();
    if (j.contains("semantic_noise_pct")) {
        spec.semantic_noise_pct = j["semantic_noise_pct"].get<double>();
    }
    if (j.contains("include_gepu")) spec.include_gepu = j["include_gepu"].get<bool>();
    if (j.contains("include_sentiment")) {
        spec.include_sentiment = j["include_sentiment"].get<bool>();
    }
    if (j.contains("seed")) spec.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("target_name")) spec.target_name = j["target_name"].get<std::string>();
    if (j.contains("start")) {
        auto d = Date::parse(j["start"].get<std::string>());
        if (!d) throw ConfigError("synth spec: unparseable start date");
        spec.start = *d;
    }
    return spec;
}

DatasetBundle obtain_dataset(const RunConfig& cfg) {
    if (!cfg.bundle_dir.empty()) return load_bundle(cfg.bundle_dir, cfg);
    return ingest_dataset(cfg);
}

nlohmann::json cmd_ingest(const RunConfig& cfg) {
    cfg.validate();
    DatasetBundle bundle = ingest_dataset(cfg);
    const std::string dir = cfg.out_dir + "/dataset";
    write_bundle(bundle, dir, cfg.date_column);
    return {{"bundle_dir", dir},
            {"rows", bundle.scaled.rows()},
            {"columns", bundle.scaled.names},
            {"target", bundle.scaled.target_column}};
}

nlohmann::json cmd_run(const RunConfig& cfg) {
    cfg.validate();
    DatasetBundle bundle = obtain_dataset(cfg);
    WalkForwardResult result = walk_forward(bundle.scaled, cfg);
    std::filesystem::create_directories(cfg.out_dir);
    write_run_artifacts(result, cfg, cfg.out_dir);
    write_text(cfg.out_dir + "/scaler.json", bundle.scaler.to_json().dump(2) + "\n");
    return result.report.to_json();
}

nlohmann::json cmd_ablate(const RunConfig& cfg, const std::vector<AblationVariant>& variants) {
    cfg.validate();
    if (variants.empty()) throw ConfigError("ablate: no variants requested");
    DatasetBundle bundle = obtain_dataset(cfg);
    std::filesystem::create_directories(cfg.out_dir);

    nlohmann::json reports = nlohmann::json::object();
    std::string summary_csv = "variant,mae,rmse,n\n";
    for (AblationVariant v : variants) {
        WalkForwardResult result = ablate(bundle.scaled, cfg, v);
        const std::string dir = cfg.out_dir + "/" + to_string(v);
        write_run_artifacts(result, cfg, dir);
        reports[to_string(v)] = result.report.to_json();
        char line[160];
        std::snprintf(line, sizeof(line), "%s,%.12g,%.12g,%zu\n", to_string(v),
                      result.report.mae, result.report.rmse, result.report.n);
        summary_csv += line;
    }
    write_text(cfg.out_dir + "/ablation_summary.csv", summary_csv);
    return {{"variants", reports}};
}

nlohmann::json cmd_sweep(const RunConfig& cfg, SweepAxis axis, const std::vector<int>& values) {
    cfg.validate();
    DatasetBundle bundle = obtain_dataset(cfg);
    auto rows = sensitivity_sweep(bundle.scaled, cfg, axis, values);
    std::filesystem::create_directories(cfg.out_dir);
    const std::string axis_name = axis == SweepAxis::Window ? "window" : "ensemble";
    write_sweep_csv(rows, axis_name, cfg.out_dir + "/sweep_" + axis_name + ".csv");
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : rows) {
        out.push_back({{axis_name, r.value}, {"mae", r.mae}, {"rmse", r.rmse}});
    }
    return {{"axis", axis_name}, {"rows", out}};
}

nlohmann::json cmd_synth(const RunConfig& cfg, const SynthSpec& spec,
                         const std::string& out_csv) {
    TimeFrame frame = generate(spec);
    auto parent = std::filesystem::path(out_csv).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    write_csv(frame, out_csv, cfg.date_column);
    return {{"path", out_csv}, {"rows", frame.rows()}, {"columns", frame.names}};
}

} // namespace astif
