#pragma once

#include <string>
#include <utility>
#include <vector>

#include "astif/types.hpp"

namespace astif {

/// One predictor's next-step output in the scaled domain.
struct ChannelPrediction {
    double y_hat = 0.0;       // scaled price in [0,1]
    double confidence = 0.0;  // in [0,1]
    double uncertainty = 0.0; // in [0,1]
    Channel source = Channel::ML;
    std::vector<std::pair<std::string, double>> parts; // member predictions
};

/// Blends the LSTM and forest predictions with weight `alpha` on the LSTM and
/// derives uncertainty from their normalized disagreement.
ChannelPrediction combine_ml(double lstm_pred, double rf_pred, double alpha);

/// Ablation variant of the blend that tolerates boundary weights (0 or 1).
ChannelPrediction combine_ml_unchecked(double lstm_pred, double rf_pred, double alpha);

} // namespace astif
