#include "astif/engine.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "astif/errors.hpp"

namespace astif {

namespace {

double floored(double v) { return std::max(v, kEpsilon); }

double last_change(const std::vector<double>& series, std::size_t t) {
    if (t == 0) return 0.0;
    return (series[t] - series[t - 1]) / floored(series[t - 1]);
}

bool contains(const std::vector<std::string>& v, const std::string& s) {
    return std::find(v.begin(), v.end(), s) != v.end();
}

} // namespace

const char* to_string(AblationVariant v) {
    switch (v) {
    case AblationVariant::Full: return "full";
    case AblationVariant::NoSlm: return "no_slm";
    case AblationVariant::NoLstm: return "no_lstm";
    case AblationVariant::NoUncertainty: return "no_uncertainty";
    case AblationVariant::NoMeta: return "no_meta";
    }
    return "full";
}

std::optional<AblationVariant> variant_from_string(std::string_view s) {
    if (s == "full") return AblationVariant::Full;
    if (s == "no_slm") return AblationVariant::NoSlm;
    if (s == "no_lstm") return AblationVariant::NoLstm;
    if (s == "no_uncertainty") return AblationVariant::NoUncertainty;
    if (s == "no_meta") return AblationVariant::NoMeta;
    return std::nullopt;
}

DatasetBundle ingest_frame(const TimeFrame& raw, const RunConfig& cfg) {
    if (raw.rows() < 4) throw DataError("ingest: too few rows");
    TimeFrame frame = raw;
    if (!cfg.target.empty()) frame.target_column = cfg.target;
    if (frame.target_column.empty() || !frame.has_column(frame.target_column)) {
        throw DataError("ingest: target column '" + frame.target_column + "' not found");
    }

    const auto train_rows =
        static_cast<std::size_t>(std::floor(static_cast<double>(frame.rows()) *
                                            (cfg.forward_mode ? cfg.forward_context_fraction
                                                              : cfg.train_fraction)));
    if (train_rows < 2) throw DataError("ingest: training slice too small to fit a scaler");

    DatasetBundle bundle;
    bundle.scaler = fit_scaler(frame.slice_rows(0, train_rows));
    bundle.scaled = transform(frame, bundle.scaler);
    // Semantic-only side channels keep their raw values.
    for (const auto& name : cfg.semantic_only_columns) {
        if (frame.has_column(name)) {
            bundle.scaled.column(name) = frame.column(name);
        }
    }
    return bundle;
}

DatasetBundle ingest_dataset(const RunConfig& cfg) {
    if (cfg.prices_csv.empty()) throw ConfigError("ingest: no prices csv configured");
    std::vector<TimeFrame> frames;
    frames.push_back(load_csv(cfg.prices_csv, cfg.date_column));
    if (!cfg.gepu_csv.empty()) frames.push_back(load_csv(cfg.gepu_csv, cfg.date_column));
    FillPolicy policy =
        cfg.fill_policy == "drop-row" ? FillPolicy::DropRow : FillPolicy::ForwardFill;
    TimeFrame merged = frames.size() == 1 ? std::move(frames[0]) : align_and_fill(frames, policy);
    return ingest_frame(merged, cfg);
}

void write_bundle(const DatasetBundle& bundle, const std::string& dir,
                  const std::string& date_column) {
    std::filesystem::create_directories(dir);
    write_csv(bundle.scaled, dir + "/scaled.csv", date_column);
    std::ofstream scaler_out(dir + "/scaler.json");
    if (!scaler_out) throw DataError("cannot write " + dir + "/scaler.json");
    scaler_out << bundle.scaler.to_json().dump(2) << "\n";
    nlohmann::json meta = {{"target", bundle.scaled.target_column}};
    std::ofstream meta_out(dir + "/dataset.json");
    meta_out << meta.dump(2) << "\n";
}

DatasetBundle load_bundle(const std::string& dir, const RunConfig& cfg) {
    DatasetBundle bundle;
    bundle.scaled = load_csv(dir + "/scaled.csv", cfg.date_column);
    std::ifstream scaler_in(dir + "/scaler.json");
    if (!scaler_in) throw DataError("bundle: missing " + dir + "/scaler.json");
    nlohmann::json sj = nlohmann::json::parse(scaler_in, nullptr, false);
    if (sj.is_discarded()) throw DataError("bundle: invalid scaler.json");
    bundle.scaler = ScalerParams::from_json(sj);
    std::ifstream meta_in(dir + "/dataset.json");
    if (meta_in) {
        nlohmann::json mj = nlohmann::json::parse(meta_in, nullptr, false);
        if (mj.is_object() && mj.contains("target")) {
            bundle.scaled.target_column = mj["target"].get<std::string>();
        }
    }
    if (!cfg.target.empty()) bundle.scaled.target_column = cfg.target;
    return bundle;
}

ForecastEngine::ForecastEngine(TimeFrame scaled, RunConfig cfg, AblationVariant variant)
    : frame_(std::move(scaled)), cfg_(std::move(cfg)), variant_(variant),
      forest_(cfg_.forest), meta_(cfg_.meta) {
    cfg_.validate();
    if (frame_.target_column.empty() || !frame_.has_column(frame_.target_column)) {
        throw DataError("engine: target column missing");
    }
    target_ = frame_.column(frame_.target_column);
    features_ = build_features(frame_, cfg_.indicators, cfg_.semantic_only_columns);

    for (const auto& name : frame_.names) {
        if (name == frame_.target_column) continue;
        if (contains(cfg_.semantic_only_columns, name)) continue;
        if (name == cfg_.indicators.gepu_column || contains(cfg_.sentiment_columns, name)) {
            narrative_sentiment_.push_back(name);
        } else {
            narrative_assets_.push_back(name);
        }
    }

    if (variant_ != AblationVariant::NoSlm) {
        if (!cfg_.stub_mode.empty()) {
            stub_.emplace(*stub_mode_from_string(cfg_.stub_mode), cfg_.stub_sigma, cfg_.seed);
        } else {
            SlmClientConfig client_cfg = cfg_.slm;
            if (const char* env = std::getenv("ASTIF_SLM_ENDPOINT")) {
                client_cfg.endpoint = env;
            }
            if (client_cfg.endpoint.empty() && client_cfg.replay_path.empty()) {
                throw ConfigError("engine: no SLM endpoint, replay file, or stub configured");
            }
            client_.emplace(std::move(client_cfg));
        }
    }
}

std::size_t ForecastEngine::min_step_index() const {
    const std::size_t seq_need =
        features_.warmup + static_cast<std::size_t>(cfg_.train.sequence_length) - 1;
    const std::size_t slm_need =
        static_cast<std::size_t>(cfg_.window) + static_cast<std::size_t>(cfg_.ensemble) - 1;
    return std::max(seq_need, slm_need);
}

void ForecastEngine::fit(std::size_t fit_end, std::size_t train_end) {
    const std::size_t warmup = features_.warmup;
    const auto seq_len = static_cast<std::size_t>(cfg_.train.sequence_length);
    if (train_end > rows() || fit_end >= train_end) throw DataError("engine fit: bad split");
    if (fit_end < warmup + seq_len + 2) {
        throw DataError("engine fit: fit slice too small for warmup and sequences");
    }

    // Sequences over the training portion; the chronological tail past fit_end
    // is the early-stopping slice.
    const std::size_t feat_rows = train_end - warmup;
    FeatureMatrix train_feats;
    train_feats.warmup = warmup;
    train_feats.names = features_.names;
    train_feats.dates.assign(features_.dates.begin(), features_.dates.begin() + feat_rows);
    train_feats.values = DataMatrix(feat_rows, features_.values.cols);
    std::copy(features_.values.data.begin(),
              features_.values.data.begin() + feat_rows * features_.values.cols,
              train_feats.values.data.begin());
    std::vector<double> feat_target(target_.begin() + warmup, target_.begin() + train_end);

    auto sequences = make_sequences(train_feats, feat_target, cfg_.train.sequence_length);
    const std::size_t n_val = train_end - fit_end;
    if (n_val == 0 || n_val >= sequences.inputs.size()) {
        throw DataError("engine fit: empty or oversized validation slice");
    }
    TrainSpec spec = cfg_.train;
    spec.seed = derive_seed(cfg_.seed, "lstm");
    const double vf = static_cast<double>(n_val) / static_cast<double>(sequences.inputs.size());
    lstm_ = lstm_train(sequences, spec, vf);

    // Forest pairs: feature row j predicts the target at row j+1; fit rows only.
    const std::size_t n_pairs = fit_end - warmup - 1;
    DataMatrix x(n_pairs, features_.values.cols);
    std::vector<double> y(n_pairs);
    for (std::size_t j = 0; j < n_pairs; ++j) {
        auto row = features_.values.row(j);
        std::copy(row.begin(), row.end(), x.data.begin() + j * x.cols);
        y[j] = target_[j + warmup + 1];
    }
    forest_.fit(x, y, derive_seed(cfg_.seed, "forest"));
    fitted_ = true;
}

MarketContext ForecastEngine::market_context(std::size_t t) const {
    MarketContext ctx;
    ctx.last_change = last_change(target_, t);

    const int vol_window = cfg_.indicators.vol_window >= 2 ? cfg_.indicators.vol_window : 10;
    const std::size_t n_ret = std::min<std::size_t>(static_cast<std::size_t>(vol_window), t);
    if (n_ret >= 2) {
        double mean = 0.0;
        std::vector<double> r(n_ret);
        for (std::size_t i = 0; i < n_ret; ++i) {
            std::size_t idx = t - n_ret + 1 + i;
            r[i] = (target_[idx] - target_[idx - 1]) / floored(target_[idx - 1]);
            mean += r[i];
        }
        mean /= static_cast<double>(n_ret);
        double ss = 0.0;
        for (double v : r) ss += (v - mean) * (v - mean);
        ctx.volatility = std::sqrt(ss / static_cast<double>(n_ret - 1));
    }

    const int corr_window = cfg_.indicators.corr_window >= 3 ? cfg_.indicators.corr_window : 30;
    const std::size_t cw = std::min<std::size_t>(static_cast<std::size_t>(corr_window), t + 1);
    if (cw >= 3) {
        double mp = 0.0;
        const double mt = (static_cast<double>(cw) - 1.0) / 2.0;
        for (std::size_t i = 0; i < cw; ++i) mp += target_[t - cw + 1 + i];
        mp /= static_cast<double>(cw);
        double cov = 0.0, vp = 0.0, vt = 0.0;
        for (std::size_t i = 0; i < cw; ++i) {
            double dp = target_[t - cw + 1 + i] - mp;
            double dt = static_cast<double>(i) - mt;
            cov += dp * dt;
            vp += dp * dp;
            vt += dt * dt;
        }
        if (vp > kEpsilon * kEpsilon) {
            ctx.trend_strength = std::clamp(std::abs(cov / std::sqrt(vp * vt)), 0.0, 1.0);
        }
    }
    return ctx;
}

std::optional<ChannelPrediction> ForecastEngine::ml_channel(std::size_t t) const {
    const std::size_t warmup = features_.warmup;
    const auto seq_len = static_cast<std::size_t>(cfg_.train.sequence_length);
    if (t < warmup + seq_len - 1) return std::nullopt;
    const std::size_t ft = t - warmup;

    DataMatrix seq(seq_len, features_.values.cols);
    for (std::size_t s = 0; s < seq_len; ++s) {
        auto row = features_.values.row(ft - seq_len + 1 + s);
        std::copy(row.begin(), row.end(), seq.data.begin() + s * seq.cols);
    }
    const double lstm_pred = lstm_->forward(seq);
    const double rf_pred = forest_.predict(features_.values.row(ft));
    if (!std::isfinite(lstm_pred) || !std::isfinite(rf_pred)) return std::nullopt;

    if (variant_ == AblationVariant::NoLstm) {
        return combine_ml_unchecked(lstm_pred, rf_pred, 0.0);
    }
    return combine_ml(lstm_pred, rf_pred, cfg_.alpha);
}

double ForecastEngine::stub_truth_pct(std::size_t t) const {
    if (cfg_.stub_truth_source == "realized") {
        return (target_[t + 1] - target_[t]) / floored(target_[t]) * 100.0;
    }
    return frame_.column(cfg_.stub_truth_source)[t];
}

double ForecastEngine::stub_noise_scale(std::size_t t) const {
    if (cfg_.stub_noise_scale_column.empty()) return 1.0;
    double strength = frame_.column(cfg_.stub_noise_scale_column)[t];
    return 1.0 - std::clamp(strength, 0.0, 1.0);
}

std::optional<ChannelPrediction> ForecastEngine::slm_channel(std::size_t t) {
    auto windows = build_windows(t, cfg_.window, cfg_.ensemble);
    std::vector<SlmResponse> responses;
    responses.reserve(windows.size());
    for (std::size_t k = 0; k < windows.size(); ++k) {
        const auto& range = windows[k];
        std::span<const double> window(target_.data() + range.begin,
                                       range.end - range.begin + 1);
        if (stub_) {
            StubContext ctx;
            ctx.truth_pct = stub_truth_pct(t);
            ctx.noise_scale = stub_noise_scale(t);
            responses.push_back(stub_->respond(window, ctx));
        } else {
            PromptContext ctx;
            ctx.asset = frame_.target_column;
            for (const auto& name : narrative_assets_) {
                const auto& col = frame_.column(name);
                ctx.cross_asset_changes.emplace_back(
                    name, last_change(col, range.end) * 100.0);
            }
            for (const auto& name : narrative_sentiment_) {
                ctx.sentiment_levels.emplace_back(name, frame_.column(name)[range.end]);
            }
            responses.push_back(
                client_->query(build_prompt(window, ctx, static_cast<int>(k))));
        }
    }
    return ensemble_slm(responses, target_[t]);
}

std::optional<EpisodeRecord> ForecastEngine::step(std::size_t t) {
    if (!fitted_) throw EngineError("engine step: fit() must run first");
    if (t < min_step_index() || t + 1 >= rows()) {
        throw DataError("engine step: index outside steppable range");
    }

    EpisodeRecord episode;
    episode.date = frame_.dates[t + 1];
    episode.p_t = target_[t];
    episode.phase = "test";

    std::optional<ChannelPrediction> ml = ml_channel(t);
    std::optional<ChannelPrediction> slm;
    if (variant_ != AblationVariant::NoSlm) slm = slm_channel(t);

    if (!ml) episode.sanity_flags.push_back("ml-unavailable");
    if (!slm && variant_ != AblationVariant::NoSlm) {
        episode.sanity_flags.push_back("slm-unavailable");
    }
    if (!ml && !slm) return std::nullopt;

    if (variant_ == AblationVariant::NoUncertainty) {
        for (auto* channel : {&slm, &ml}) {
            if (*channel) {
                (*channel)->confidence = 1.0;
                (*channel)->uncertainty = 0.0;
            }
        }
    }

    const MarketContext market = market_context(t);
    Channel choice = Channel::ML;
    double p_raw = 0.5;
    if (slm && ml) {
        episode.features =
            extract_features(*slm, *ml, market, episodes_, cfg_.meta.accuracy_window);
        if (variant_ != AblationVariant::NoMeta) {
            if (meta_.usable()) {
                const double p_slm = meta_.select_probability(episode.features);
                choice = p_slm > 0.5 ? Channel::SLM : Channel::ML;
                p_raw = choice == Channel::SLM ? p_slm : 1.0 - p_slm;
            } else {
                std::tie(choice, p_raw) = rule_select(*slm, *ml);
            }
        }
    } else {
        choice = slm ? Channel::SLM : Channel::ML;
        p_raw = 0.5;
    }

    const double c_slm = slm ? slm->confidence : (ml ? ml->confidence : 0.0);
    const double c_ml = ml ? ml->confidence : (slm ? slm->confidence : 0.0);
    const double calibrated = calibrate(p_raw, c_slm, c_ml, cfg_.meta.confidence_cap);

    std::optional<FinalForecast> final;
    if (variant_ == AblationVariant::NoMeta && slm && ml) {
        // Static ensemble: unweighted average of the channel prices, still
        // subject to the sanity checks.
        const double blend = 0.5 * (slm->y_hat + ml->y_hat);
        auto verdict = sanity_check(blend, target_[t], cfg_.tau_max);
        FinalForecast f;
        f.p_t = target_[t];
        f.calibrated_confidence = calibrated;
        f.chosen = Channel::ML;
        if (verdict.valid) {
            f.y_hat = blend;
            f.override_tag = Override::None;
        } else {
            const double capped = blend >= target_[t] ? target_[t] * (1.0 + cfg_.tau_max)
                                                      : target_[t] * (1.0 - cfg_.tau_max);
            f.y_hat = std::clamp(capped, 0.0, 1.0);
            f.override_tag = Override::Capped;
        }
        episode.sanity_flags.push_back("static-blend");
        final = f;
    } else {
        final = decide(slm, ml, choice, calibrated, target_[t], cfg_.tau_max);
    }
    if (!final) return std::nullopt;

    if (slm && !sanity_check(slm->y_hat, target_[t], cfg_.tau_max).valid) {
        episode.sanity_flags.push_back("slm-sanity-fail");
    }
    if (ml && !sanity_check(ml->y_hat, target_[t], cfg_.tau_max).valid) {
        episode.sanity_flags.push_back("ml-sanity-fail");
    }

    episode.slm = std::move(slm);
    episode.ml = std::move(ml);
    episode.selected = final->chosen;
    episode.override_tag = to_string(final->override_tag);
    episode.raw_probability = p_raw;
    episode.calibrated_confidence = final->calibrated_confidence;
    episode.y_final = final->y_hat;
    return episode;
}

void ForecastEngine::resolve(EpisodeRecord& episode, double realized) const {
    episode.realized = realized;
    if (episode.slm && episode.ml) {
        episode.label = make_label(std::abs(episode.slm->y_hat - realized),
                                   std::abs(episode.ml->y_hat - realized));
    }
}

void ForecastEngine::append_episode(EpisodeRecord episode) {
    episodes_.push_back(std::move(episode));
}

void ForecastEngine::train_meta() {
    std::vector<EpisodeRecord> resolved(episodes_.begin(), episodes_.end());
    meta_.train(resolved, derive_seed(cfg_.seed, "meta"));
}

nlohmann::json ForecastEngine::models_to_json() const {
    return {{"format", 1},
            {"lstm", lstm_ ? lstm_->to_json() : nlohmann::json(nullptr)},
            {"forest", forest_.trained() ? forest_.to_json() : nlohmann::json(nullptr)},
            {"meta", meta_.to_json()}};
}

} // namespace astif
