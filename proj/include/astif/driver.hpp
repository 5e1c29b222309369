#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "astif/config.hpp"
#include "astif/engine.hpp"
#include "astif/evaluate.hpp"
#include "astif/synth.hpp"

namespace astif {

SynthSpec synth_spec_from_json(const nlohmann::json& j);

/// Scaled dataset per the config: a saved bundle when bundle_dir is set,
/// otherwise a fresh ingest of the configured CSVs.
DatasetBundle obtain_dataset(const RunConfig& cfg);

/// Ingest command: writes the dataset bundle under <out_dir>/dataset.
nlohmann::json cmd_ingest(const RunConfig& cfg);

/// Full walk-forward run; writes report.json, forecast.csv, episodes.jsonl,
/// reliability.csv, models.json, and the resolved config under out_dir.
nlohmann::json cmd_run(const RunConfig& cfg);

/// One run per variant; per-variant artifacts under <out_dir>/<variant> plus a
/// comparison table.
nlohmann::json cmd_ablate(const RunConfig& cfg, const std::vector<AblationVariant>& variants);

nlohmann::json cmd_sweep(const RunConfig& cfg, SweepAxis axis, const std::vector<int>& values);

/// Writes a synthetic frame in the CSV format ingest consumes.
nlohmann::json cmd_synth(const RunConfig& cfg, const SynthSpec& spec, const std::string& out_csv);

} // namespace astif
