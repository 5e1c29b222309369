// Command-line front end for the forecasting engine. All work happens behind
// the C API; this binary only assembles configuration and prints results.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "astif.h"

namespace {

struct CommonFlags {
    std::string config_path;
    std::string data;
    std::string gepu;
    std::string bundle;
    std::string target;
    std::string stub;
    std::string record;
    std::string replay;
    std::string out;
    long long seed = -1;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "JSON configuration file");
    cmd->add_option("--data", flags.data, "prices CSV path");
    cmd->add_option("--gepu", flags.gepu, "GEPU CSV path merged on dates");
    cmd->add_option("--bundle", flags.bundle, "pre-scaled dataset bundle directory");
    cmd->add_option("--target", flags.target, "target column to forecast");
    cmd->add_option("--stub", flags.stub, "SLM stub mode: perfect, noisy, or momentum");
    cmd->add_option("--record", flags.record, "append SLM request/response pairs to this file");
    cmd->add_option("--replay", flags.replay, "serve SLM responses from this file");
    cmd->add_option("--out", flags.out, "output directory");
    cmd->add_option("--seed", flags.seed, "master random seed");
}

// Layer CLI flags over the config document.
std::string resolve_config(const CommonFlags& flags) {
    nlohmann::json j = nlohmann::json::object();
    if (!flags.config_path.empty()) {
        std::ifstream in(flags.config_path);
        if (!in) throw CLI::ValidationError("--config", "cannot open " + flags.config_path);
        j = nlohmann::json::parse(in, nullptr, false);
        if (j.is_discarded()) {
            throw CLI::ValidationError("--config", flags.config_path + " is not valid JSON");
        }
    }
    if (!flags.data.empty()) j["data"]["prices_csv"] = flags.data;
    if (!flags.gepu.empty()) j["data"]["gepu_csv"] = flags.gepu;
    if (!flags.bundle.empty()) j["data"]["bundle_dir"] = flags.bundle;
    if (!flags.target.empty()) j["data"]["target"] = flags.target;
    if (!flags.stub.empty()) j["slm"]["stub"] = flags.stub;
    if (!flags.record.empty()) j["slm"]["record_path"] = flags.record;
    if (!flags.replay.empty()) j["slm"]["replay_path"] = flags.replay;
    if (!flags.out.empty()) j["out_dir"] = flags.out;
    if (flags.seed >= 0) j["seed"] = flags.seed;
    return j.dump();
}

struct EngineHandle {
    astif_engine* engine = nullptr;
    ~EngineHandle() { astif_engine_destroy(engine); }
};

int open_engine(const CommonFlags& flags, EngineHandle& handle) {
    const std::string config = resolve_config(flags);
    int rc = astif_engine_create(config.c_str(), &handle.engine);
    if (rc != ASTIF_OK) {
        std::cerr << "error: " << astif_last_error() << "\n";
    }
    return rc;
}

int report_call(astif_engine* engine, int rc, char* payload, bool print_payload) {
    if (rc != ASTIF_OK) {
        std::cerr << "error: " << astif_engine_last_error(engine) << "\n";
        astif_string_free(payload);
        return rc;
    }
    if (print_payload && payload != nullptr) std::cout << payload << "\n";
    astif_string_free(payload);
    return ASTIF_OK;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adaptive semantic-temporal forecasting engine"};
    app.require_subcommand(1);

    CommonFlags flags;
    bool quiet = false;
    app.add_flag("--quiet", quiet, "suppress result JSON on stdout");

    auto* ingest = app.add_subcommand("ingest", "Load, align, and scale the input CSVs");
    add_common_flags(ingest, flags);

    auto* run = app.add_subcommand("run", "Walk-forward evaluation with the full system");
    add_common_flags(run, flags);

    auto* ablate = app.add_subcommand("ablate", "Run component-ablation variants");
    add_common_flags(ablate, flags);
    std::string variants = "all";
    ablate->add_option("--variants", variants,
                       "comma list of full,no_slm,no_lstm,no_uncertainty,no_meta or 'all'");

    auto* sweep = app.add_subcommand("sweep", "Sensitivity sweep over window or ensemble size");
    add_common_flags(sweep, flags);
    std::string axis;
    std::string values;
    sweep->add_option("--axis", axis, "window or ensemble")->required();
    sweep->add_option("--values", values, "comma-separated integer values")->required();

    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset CSV");
    add_common_flags(synth, flags);
    std::string spec_path;
    std::string synth_out = "synthetic.csv";
    synth->add_option("--spec", spec_path, "synthetic spec JSON file");
    synth->add_option("--csv", synth_out, "output CSV path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? 0 : ASTIF_ERR_CONFIG;
    }

    EngineHandle handle;
    int rc = open_engine(flags, handle);
    if (rc != ASTIF_OK) return rc;

    char* payload = nullptr;
    if (ingest->parsed()) {
        rc = astif_engine_ingest(handle.engine, &payload);
    } else if (run->parsed()) {
        rc = astif_engine_run(handle.engine, &payload);
    } else if (ablate->parsed()) {
        rc = astif_engine_ablate(handle.engine, variants.c_str(), &payload);
    } else if (sweep->parsed()) {
        rc = astif_engine_sweep(handle.engine, axis.c_str(), values.c_str(), &payload);
    } else if (synth->parsed()) {
        std::string spec = "{}";
        if (!spec_path.empty()) {
            std::ifstream in(spec_path);
            if (!in) {
                std::cerr << "error: cannot open spec file " << spec_path << "\n";
                return ASTIF_ERR_CONFIG;
            }
            std::stringstream ss;
            ss << in.rdbuf();
            spec = ss.str();
        }
        rc = astif_engine_synth(handle.engine, spec.c_str(), synth_out.c_str(), &payload);
    }
    return report_call(handle.engine, rc, payload, !quiet);
}
