#pragma once

#include <optional>
#include <string>

#include "astif/channel.hpp"
#include "astif/types.hpp"

namespace astif {

/// Feasibility verdict for one candidate forecast.
struct SanityVerdict {
    bool in_bounds = false;   // y_hat in [0,1]
    bool within_step = false; // |y_hat - p_t| / p_t <= tau_max
    bool valid = false;
    double relative_deviation = 0.0;
};

enum class Override { None, SanityOverride, ChannelUnavailable, Capped };
const char* to_string(Override o);

struct FinalForecast {
    double y_hat = 0.0;
    Channel chosen = Channel::ML;
    double calibrated_confidence = 0.0;
    Override override_tag = Override::None;
    double p_t = 0.0;
};

SanityVerdict sanity_check(double y_hat, double p_t, double tau_max = 0.5);

/// Emits the meta-chosen channel when it passes sanity, the other channel as a
/// sanity override when only it passes, and otherwise the smaller-deviation
/// channel capped to the step boundary. A missing channel behaves like a
/// failed sanity check. Both channels missing yields nullopt (step skipped).
std::optional<FinalForecast> decide(const std::optional<ChannelPrediction>& slm,
                                    const std::optional<ChannelPrediction>& ml,
                                    Channel meta_choice, double calibrated, double p_t,
                                    double tau_max = 0.5);

} // namespace astif
