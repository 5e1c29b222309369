#include "astif/channel.hpp"

#include <algorithm>
#include <cmath>

#include "astif/errors.hpp"

namespace astif {

ChannelPrediction combine_ml_unchecked(double lstm_pred, double rf_pred, double alpha) {
    ChannelPrediction out;
    out.source = Channel::ML;
    out.y_hat = alpha * lstm_pred + (1.0 - alpha) * rf_pred;
    const double denom = std::max(std::max(lstm_pred, rf_pred), kEpsilon);
    out.uncertainty = std::clamp(std::abs(lstm_pred - rf_pred) / denom, 0.0, 1.0);
    if (lstm_pred < kEpsilon && rf_pred < kEpsilon) out.uncertainty = 1.0;
    out.confidence = 1.0 - out.uncertainty;
    out.parts = {{"LSTM", lstm_pred}, {"RF", rf_pred}};
    return out;
}

ChannelPrediction combine_ml(double lstm_pred, double rf_pred, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("combine_ml: alpha must be in (0,1)");
    if (!std::isfinite(lstm_pred) || !std::isfinite(rf_pred)) {
        throw DataError("combine_ml: non-finite member prediction");
    }
    return combine_ml_unchecked(lstm_pred, rf_pred, alpha);
}

} // namespace astif
