#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "astif/indicators.hpp"
#include "astif/rng.hpp"
#include "astif/types.hpp"

namespace astif {

/// Chronological (sequence, next-step target) pairs for the temporal learner.
struct SequenceSet {
    std::vector<DataMatrix> inputs; // each L x d
    std::vector<double> targets;
    std::size_t sequence_length = 0;
    std::size_t feature_dim = 0;
};

/// Sample i covers feature rows [i, i+L); its target is `target[i+L]`.
SequenceSet make_sequences(const FeatureMatrix& features, const std::vector<double>& target,
                           int sequence_length);

struct TrainSpec {
    int sequence_length = 10;
    double learning_rate = 0.001;
    int batch_size = 32;
    int patience = 25;   // 15 for cross-validation runs, 25 for final training
    int max_epochs = 200;
    double dropout = 0.2;
    std::uint64_t seed = 0;

    void validate() const; // throws ConfigError
};

/// Stacked LSTM regressor. Default stack is 64-32-16 with per-feature batch
/// normalization and dropout between layers and a scalar affine head on the
/// final hidden state. Inference is a pure function of (weights, input).
class LstmNetwork {
public:
    LstmNetwork() = default;
    LstmNetwork(std::size_t input_dim, std::vector<std::size_t> hidden_sizes, double dropout,
                std::uint64_t seed);

    /// Deterministic inference on one L x d sequence.
    double forward(const DataMatrix& sequence) const;

    struct BatchResult {
        double loss = 0.0;
        std::vector<double> gradients; // d loss / d parameter, flattened
    };
    /// Mean squared error over a batch in training mode (batch-statistics
    /// normalization, optional dropout). Gradients cover every trainable
    /// parameter in flat order.
    BatchResult batch_loss_and_gradients(const std::vector<const DataMatrix*>& batch,
                                         const std::vector<double>& targets,
                                         bool update_running_stats, Rng* dropout_rng);

    std::size_t parameter_count() const;
    double get_parameter(std::size_t i) const;
    void set_parameter(std::size_t i, double v);
    void apply_adam_step(const std::vector<double>& gradients, double lr, std::size_t step,
                         std::vector<double>& m, std::vector<double>& v);

    std::size_t input_dim() const { return input_dim_; }
    const std::vector<std::size_t>& hidden_sizes() const { return hidden_; }

    nlohmann::json to_json() const;
    static LstmNetwork from_json(const nlohmann::json& j);

private:
    struct Layer {
        Eigen::MatrixXd w; // 4H x (I+H), gate blocks ordered f, i, g, o
        Eigen::VectorXd b;
    };
    struct BatchNorm {
        Eigen::VectorXd gamma, beta;
        Eigen::VectorXd running_mean, running_var;
    };

    std::size_t input_dim_ = 0;
    std::vector<std::size_t> hidden_;
    double dropout_ = 0.0;
    std::vector<Layer> layers_;
    std::vector<BatchNorm> norms_; // between consecutive layers
    Eigen::VectorXd head_w_;
    double head_b_ = 0.0;

    static constexpr double kBnEps = 1e-5;
    static constexpr double kBnMomentum = 0.1;

    template <typename Fn> void visit_parameters(Fn&& fn);
    template <typename Fn> void visit_parameters(Fn&& fn) const;

    friend struct LstmBatchWorkspace;
};

/// Trains with Adam on MSE, early-stopping on the chronological tail slice of
/// the provided samples, and returns the best-validation snapshot.
LstmNetwork lstm_train(const SequenceSet& data, const TrainSpec& spec, double val_fraction,
                       std::vector<std::size_t> hidden_sizes = {64, 32, 16});

} // namespace astif
