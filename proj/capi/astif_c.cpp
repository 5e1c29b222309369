#include "astif.h"

#include <cstdlib>
#include <cstring>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "astif/driver.hpp"
#include "astif/errors.hpp"

namespace {

thread_local std::string g_create_error;

std::vector<std::string> split_csv_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out != nullptr) std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

} // namespace

struct astif_engine {
    astif::RunConfig config;
    std::string last_error;

    template <typename Fn>
    int guarded(Fn&& fn, char** out_json) {
        last_error.clear();
        try {
            nlohmann::json result = fn();
            if (out_json != nullptr) *out_json = dup_string(result.dump(2));
            return ASTIF_OK;
        } catch (const astif::ConfigError& e) {
            last_error = e.what();
            return ASTIF_ERR_CONFIG;
        } catch (const astif::DataError& e) {
            last_error = e.what();
            return ASTIF_ERR_DATA;
        } catch (const std::exception& e) {
            last_error = e.what();
            return ASTIF_ERR_RUNTIME;
        }
    }
};

extern "C" {

const char* astif_version(void) { return "0.1.0"; }

int astif_engine_create(const char* config_json, astif_engine** out_engine) {
    if (out_engine == nullptr) return ASTIF_ERR_CONFIG;
    *out_engine = nullptr;
    g_create_error.clear();
    try {
        auto engine = new astif_engine;
        engine->config = config_json != nullptr && config_json[0] != '\0'
                             ? astif::RunConfig::from_json_text(config_json)
                             : astif::RunConfig{};
        engine->config.validate();
        *out_engine = engine;
        return ASTIF_OK;
    } catch (const astif::ConfigError& e) {
        g_create_error = e.what();
        return ASTIF_ERR_CONFIG;
    } catch (const std::exception& e) {
        g_create_error = e.what();
        return ASTIF_ERR_RUNTIME;
    }
}

void astif_engine_destroy(astif_engine* engine) { delete engine; }

const char* astif_engine_last_error(const astif_engine* engine) {
    return engine != nullptr ? engine->last_error.c_str() : "";
}

const char* astif_last_error(void) { return g_create_error.c_str(); }

int astif_engine_ingest(astif_engine* engine, char** summary_json) {
    if (engine == nullptr) return ASTIF_ERR_CONFIG;
    return engine->guarded([engine] { return astif::cmd_ingest(engine->config); }, summary_json);
}

int astif_engine_run(astif_engine* engine, char** report_json) {
    if (engine == nullptr) return ASTIF_ERR_CONFIG;
    return engine->guarded([engine] { return astif::cmd_run(engine->config); }, report_json);
}

int astif_engine_ablate(astif_engine* engine, const char* variants, char** summary_json) {
    if (engine == nullptr) return ASTIF_ERR_CONFIG;
    return engine->guarded(
        [engine, variants]() -> nlohmann::json {
            std::string request = variants != nullptr ? variants : "all";
            std::vector<astif::AblationVariant> list;
            if (request == "all") {
                list = {astif::AblationVariant::Full, astif::AblationVariant::NoSlm,
                        astif::AblationVariant::NoLstm, astif::AblationVariant::NoUncertainty,
                        astif::AblationVariant::NoMeta};
            } else {
                for (const auto& name : split_csv_list(request)) {
                    auto v = astif::variant_from_string(name);
                    if (!v) throw astif::ConfigError("unknown ablation variant '" + name + "'");
                    list.push_back(*v);
                }
            }
            return astif::cmd_ablate(engine->config, list);
        },
        summary_json);
}

int astif_engine_sweep(astif_engine* engine, const char* axis, const char* values,
                       char** table_json) {
    if (engine == nullptr) return ASTIF_ERR_CONFIG;
    return engine->guarded(
        [engine, axis, values]() -> nlohmann::json {
            auto parsed_axis =
                astif::sweep_axis_from_string(axis != nullptr ? axis : "");
            if (!parsed_axis) {
                throw astif::ConfigError("sweep axis must be 'window' or 'ensemble'");
            }
            std::vector<int> parsed_values;
            for (const auto& v : split_csv_list(values != nullptr ? values : "")) {
                try {
                    parsed_values.push_back(std::stoi(v));
                } catch (const std::exception&) {
                    throw astif::ConfigError("sweep value '" + v + "' is not an integer");
                }
            }
            if (parsed_values.empty()) throw astif::ConfigError("sweep: no values given");
            return astif::cmd_sweep(engine->config, *parsed_axis, parsed_values);
        },
        table_json);
}

int astif_engine_synth(astif_engine* engine, const char* spec_json, const char* out_csv,
                       char** summary_json) {
    if (engine == nullptr) return ASTIF_ERR_CONFIG;
    return engine->guarded(
        [engine, spec_json, out_csv]() -> nlohmann::json {
            if (out_csv == nullptr || out_csv[0] == '\0') {
                throw astif::ConfigError("synth: output path required");
            }
            auto j = nlohmann::json::parse(spec_json != nullptr ? spec_json : "{}", nullptr,
                                           false);
            if (j.is_discarded()) throw astif::ConfigError("synth: invalid spec JSON");
            auto spec = astif::synth_spec_from_json(j);
            return astif::cmd_synth(engine->config, spec, out_csv);
        },
        summary_json);
}

void astif_string_free(char* s) { std::free(s); }

} // extern "C"
