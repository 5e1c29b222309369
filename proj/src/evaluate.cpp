#include "astif/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "astif/errors.hpp"

namespace astif {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

} // namespace

Metrics metrics(const std::vector<double>& truth, const std::vector<double>& predictions) {
    if (truth.size() != predictions.size()) throw DataError("metrics: length mismatch");
    if (truth.size() < 2) throw DataError("metrics: need at least 2 points");
    const auto n = static_cast<double>(truth.size());
    double abs_sum = 0.0, sq_sum = 0.0, mean = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const double d = truth[i] - predictions[i];
        abs_sum += std::abs(d);
        sq_sum += d * d;
        mean += truth[i];
    }
    mean /= n;
    double ss_tot = 0.0;
    for (double y : truth) ss_tot += (y - mean) * (y - mean);

    Metrics m;
    m.mae = abs_sum / n;
    m.rmse = std::sqrt(sq_sum / n);
    if (ss_tot > 0.0) m.r_squared = 1.0 - sq_sum / ss_tot;
    return m;
}

double improvement(double baseline_mae, double candidate_mae) {
    if (baseline_mae <= 0.0) throw DataError("improvement: baseline must be > 0");
    return 100.0 * (baseline_mae - candidate_mae) / baseline_mae;
}

ReliabilityResult reliability(const std::vector<EpisodeRecord>& records, int bins,
                              double correctness_threshold) {
    if (bins < 1) throw ConfigError("reliability: bins must be >= 1");
    struct Accum {
        double conf_sum = 0.0;
        std::size_t correct = 0;
        std::size_t count = 0;
    };
    std::vector<Accum> acc(static_cast<std::size_t>(bins));
    std::size_t n = 0;
    for (const auto& e : records) {
        if (!e.resolved()) continue;
        ++n;
        const double c = std::clamp(e.calibrated_confidence, 0.0, 1.0);
        auto b = std::min<std::size_t>(static_cast<std::size_t>(c * bins),
                                       static_cast<std::size_t>(bins - 1));
        acc[b].conf_sum += c;
        acc[b].count += 1;
        if (relative_error(e.y_final, *e.realized) <= correctness_threshold) {
            acc[b].correct += 1;
        }
    }
    if (n == 0) throw DataError("reliability: no resolved records");

    ReliabilityResult out;
    double ce = 0.0;
    for (const auto& a : acc) {
        if (a.count == 0) continue;
        ReliabilityBin bin;
        bin.count = a.count;
        bin.mean_confidence = a.conf_sum / static_cast<double>(a.count);
        bin.observed_accuracy = static_cast<double>(a.correct) / static_cast<double>(a.count);
        ce += std::abs(bin.mean_confidence - bin.observed_accuracy) *
              static_cast<double>(a.count) / static_cast<double>(n);
        out.bins.push_back(bin);
    }
    out.calibration_error = ce;
    return out;
}

double meta_decision_quality(const std::vector<EpisodeRecord>& records) {
    std::size_t wins = 0, comparable = 0;
    for (const auto& e : records) {
        if (!e.resolved() || !e.slm || !e.ml) continue;
        ++comparable;
        const double slm_err = std::abs(e.slm->y_hat - *e.realized);
        const double ml_err = std::abs(e.ml->y_hat - *e.realized);
        const double sel_err = e.selected == Channel::SLM ? slm_err : ml_err;
        const double alt_err = e.selected == Channel::SLM ? ml_err : slm_err;
        if (sel_err < alt_err) ++wins;
    }
    if (comparable == 0) throw DataError("meta_decision_quality: no comparable records");
    return static_cast<double>(wins) / static_cast<double>(comparable);
}

WalkForwardResult ablate(const TimeFrame& scaled, const RunConfig& cfg,
                         AblationVariant variant) {
    const std::size_t n = scaled.rows();
    const double train_share = cfg.forward_mode ? cfg.forward_context_fraction
                                                : cfg.train_fraction;
    const auto train_end =
        static_cast<std::size_t>(std::floor(static_cast<double>(n) * train_share));
    const auto val_size = static_cast<std::size_t>(
        std::floor(static_cast<double>(train_end) * cfg.val_fraction_of_train));
    if (val_size == 0) throw DataError("walk_forward: validation slice is empty");
    const std::size_t fit_end = train_end - val_size;
    if (train_end + 2 > n) throw DataError("walk_forward: test slice is empty");

    ForecastEngine engine(scaled, cfg, variant);
    engine.fit(fit_end, train_end);

    WalkForwardResult result;
    result.report.variant = to_string(variant);
    result.report.splits = SplitSizes{fit_end, val_size, n - train_end};

    const std::size_t first_step = engine.min_step_index();

    // Validation replay: seed the episode store and the meta-selector. Every
    // resolution here uses rows strictly inside the training portion.
    for (std::size_t t = std::max(first_step, fit_end - 1); t + 1 < train_end; ++t) {
        auto episode = engine.step(t);
        if (!episode) continue;
        episode->phase = "validation";
        engine.resolve(*episode, engine.target_at(t + 1));
        engine.append_episode(*episode);
        result.episodes.push_back(std::move(*episode));
    }
    if (variant != AblationVariant::NoMeta && variant != AblationVariant::NoSlm) {
        engine.train_meta();
    }
    result.models = engine.models_to_json();

    std::vector<double> truth, predicted;
    std::vector<EpisodeRecord> test_episodes;
    double slm_abs = 0.0, ml_abs = 0.0;
    std::size_t slm_n = 0, ml_n = 0;
    for (std::size_t t = train_end - 1; t + 1 < n; ++t) {
        auto episode = engine.step(t);
        if (!episode) {
            result.report.skipped += 1;
            continue;
        }
        episode->phase = "test";
        const double realized = engine.target_at(t + 1);
        engine.resolve(*episode, realized);
        engine.append_episode(*episode);

        truth.push_back(realized);
        predicted.push_back(episode->y_final);
        if (episode->slm) {
            slm_abs += std::abs(episode->slm->y_hat - realized);
            ++slm_n;
        }
        if (episode->ml) {
            ml_abs += std::abs(episode->ml->y_hat - realized);
            ++ml_n;
        }
        result.report.channel_usage[to_string(episode->selected)] += 1;
        result.report.override_counts[episode->override_tag] += 1;

        ForecastRow row;
        row.date = episode->date;
        row.p_t = episode->p_t;
        row.y_hat = episode->y_final;
        row.chosen = episode->selected;
        row.calibrated_confidence = episode->calibrated_confidence;
        row.override_tag = episode->override_tag;
        result.forecasts.push_back(row);

        test_episodes.push_back(*episode);
        result.episodes.push_back(std::move(*episode));
    }

    if (truth.size() >= 2) {
        Metrics m = metrics(truth, predicted);
        result.report.mae = m.mae;
        result.report.rmse = m.rmse;
        result.report.r_squared = m.r_squared;
    }
    result.report.n = truth.size();
    result.report.slm_only_mae = slm_n ? slm_abs / static_cast<double>(slm_n) : 0.0;
    result.report.ml_only_mae = ml_n ? ml_abs / static_cast<double>(ml_n) : 0.0;
    if (!test_episodes.empty()) {
        auto rel = reliability(test_episodes);
        result.report.calibration_error = rel.calibration_error;
        result.report.bins = std::move(rel.bins);
        bool comparable = std::any_of(test_episodes.begin(), test_episodes.end(),
                                      [](const EpisodeRecord& e) { return e.slm && e.ml; });
        if (comparable) {
            result.report.meta_decision_quality = meta_decision_quality(test_episodes);
        }
    }
    result.report.meta_trained = engine.meta().trained();
    result.report.meta_overfit = engine.meta().overfit();
    return result;
}

WalkForwardResult walk_forward(const TimeFrame& scaled, const RunConfig& cfg) {
    return ablate(scaled, cfg, AblationVariant::Full);
}

std::optional<SweepAxis> sweep_axis_from_string(std::string_view s) {
    if (s == "window") return SweepAxis::Window;
    if (s == "ensemble") return SweepAxis::Ensemble;
    return std::nullopt;
}

std::vector<SweepRow> sensitivity_sweep(const TimeFrame& scaled, const RunConfig& cfg,
                                        SweepAxis axis, const std::vector<int>& values) {
    if (values.empty()) throw ConfigError("sweep: no values given");
    std::vector<SweepRow> rows;
    rows.reserve(values.size());
    for (int v : values) {
        RunConfig run_cfg = cfg;
        if (axis == SweepAxis::Window) {
            run_cfg.window = v;
        } else {
            run_cfg.ensemble = v;
        }
        auto result = walk_forward(scaled, run_cfg);
        rows.push_back(SweepRow{static_cast<double>(v), result.report.mae, result.report.rmse});
    }
    return rows;
}

nlohmann::json EvalReport::to_json() const {
    nlohmann::json bins_json = nlohmann::json::array();
    for (const auto& b : bins) {
        bins_json.push_back({{"mean_confidence", b.mean_confidence},
                             {"observed_accuracy", b.observed_accuracy},
                             {"count", b.count}});
    }
    return {{"variant", variant},
            {"mae", mae},
            {"rmse", rmse},
            {"r_squared", r_squared ? nlohmann::json(*r_squared) : nlohmann::json(nullptr)},
            {"calibration_error", calibration_error},
            {"reliability_bins", bins_json},
            {"meta_decision_quality", meta_decision_quality},
            {"channel_usage", channel_usage},
            {"override_counts", override_counts},
            {"n", n},
            {"skipped", skipped},
            {"slm_only_mae", slm_only_mae},
            {"ml_only_mae", ml_only_mae},
            {"splits",
             {{"fit", splits.fit}, {"validation", splits.validation}, {"test", splits.test}}},
            {"meta_trained", meta_trained},
            {"meta_overfit", meta_overfit}};
}

void write_forecast_csv(const std::vector<ForecastRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << "date,p_t,y_hat,chosen,calibrated_confidence,override\n";
    for (const auto& r : rows) {
        out << r.date.to_string() << ',' << fmt(r.p_t) << ',' << fmt(r.y_hat) << ','
            << to_string(r.chosen) << ',' << fmt(r.calibrated_confidence) << ','
            << r.override_tag << '\n';
    }
}

void write_episode_log(const std::vector<EpisodeRecord>& episodes, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    for (const auto& e : episodes) out << e.to_json().dump() << '\n';
}

std::vector<EpisodeRecord> read_episode_log(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::vector<EpisodeRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) throw DataError("episode log: invalid JSON line");
        out.push_back(EpisodeRecord::from_json(j));
    }
    return out;
}

void write_reliability_csv(const std::vector<ReliabilityBin>& bins, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << "mean_confidence,observed_accuracy,count\n";
    for (const auto& b : bins) {
        out << fmt(b.mean_confidence) << ',' << fmt(b.observed_accuracy) << ',' << b.count
            << '\n';
    }
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& axis,
                     const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << axis << ",mae,rmse\n";
    for (const auto& r : rows) {
        out << fmt(r.value) << ',' << fmt(r.mae) << ',' << fmt(r.rmse) << '\n';
    }
}

} // namespace astif
