#include "astif/integrate.hpp"

#include <algorithm>
#include <cmath>

#include "astif/errors.hpp"

namespace astif {

const char* to_string(Override o) {
    switch (o) {
    case Override::None: return "none";
    case Override::SanityOverride: return "sanity-override";
    case Override::ChannelUnavailable: return "channel-unavailable";
    case Override::Capped: return "capped";
    }
    return "none";
}

SanityVerdict sanity_check(double y_hat, double p_t, double tau_max) {
    if (p_t < 0.0 || p_t > 1.0) throw DataError("sanity_check: p_t outside [0,1]");
    SanityVerdict v;
    v.in_bounds = std::isfinite(y_hat) && y_hat >= 0.0 && y_hat <= 1.0;
    v.relative_deviation = std::abs(y_hat - p_t) / std::max(p_t, kEpsilon);
    v.within_step = std::isfinite(v.relative_deviation) && v.relative_deviation <= tau_max;
    v.valid = v.in_bounds && v.within_step;
    return v;
}

std::optional<FinalForecast> decide(const std::optional<ChannelPrediction>& slm,
                                    const std::optional<ChannelPrediction>& ml,
                                    Channel meta_choice, double calibrated, double p_t,
                                    double tau_max) {
    if (!slm && !ml) return std::nullopt;

    auto pick = [&](Channel c) -> const std::optional<ChannelPrediction>& {
        return c == Channel::SLM ? slm : ml;
    };
    const Channel other_channel = meta_choice == Channel::SLM ? Channel::ML : Channel::SLM;
    const auto& chosen = pick(meta_choice);
    const auto& other = pick(other_channel);

    FinalForecast out;
    out.p_t = p_t;
    out.calibrated_confidence = calibrated;

    const bool one_missing = !chosen || !other;
    if (chosen) {
        auto v = sanity_check(chosen->y_hat, p_t, tau_max);
        if (v.valid) {
            out.y_hat = chosen->y_hat;
            out.chosen = meta_choice;
            out.override_tag = one_missing ? Override::ChannelUnavailable : Override::None;
            return out;
        }
    }
    if (other) {
        auto v = sanity_check(other->y_hat, p_t, tau_max);
        if (v.valid) {
            out.y_hat = other->y_hat;
            out.chosen = other_channel;
            out.override_tag =
                one_missing ? Override::ChannelUnavailable : Override::SanityOverride;
            return out;
        }
    }

    // Both candidates failed (or only one exists and it failed): keep the one
    // with the smaller relative deviation, then cap it to the step boundary in
    // the direction of the predicted move and clip to the domain.
    Channel cap_channel = meta_choice;
    const ChannelPrediction* src = chosen ? &*chosen : nullptr;
    if (!src) {
        cap_channel = other_channel;
        src = &*other;
    } else if (other) {
        double dev_chosen = sanity_check(chosen->y_hat, p_t, tau_max).relative_deviation;
        double dev_other = sanity_check(other->y_hat, p_t, tau_max).relative_deviation;
        if (dev_other < dev_chosen) {
            cap_channel = other_channel;
            src = &*other;
        }
    }
    const double capped =
        src->y_hat >= p_t ? p_t * (1.0 + tau_max) : p_t * (1.0 - tau_max);
    out.y_hat = std::clamp(capped, 0.0, 1.0);
    out.chosen = cap_channel;
    out.override_tag = Override::Capped;
    return out;
}

} // namespace astif
