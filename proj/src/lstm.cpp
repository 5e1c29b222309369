#include "astif/lstm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "astif/errors.hpp"

namespace astif {

namespace {

Eigen::ArrayXXd sigmoid(const Eigen::ArrayXXd& a) {
    return 1.0 / (1.0 + (-a).exp());
}

} // namespace

SequenceSet make_sequences(const FeatureMatrix& features, const std::vector<double>& target,
                           int sequence_length) {
    if (sequence_length < 1) throw ConfigError("make_sequences: sequence length must be >= 1");
    if (target.size() != features.values.rows) {
        throw DataError("make_sequences: target length must match feature rows");
    }
    const std::size_t n = features.values.rows;
    const std::size_t len = static_cast<std::size_t>(sequence_length);
    if (n < len + 1) throw DataError("make_sequences: too few rows");

    SequenceSet out;
    out.sequence_length = len;
    out.feature_dim = features.values.cols;
    out.inputs.reserve(n - len);
    out.targets.reserve(n - len);
    for (std::size_t i = 0; i + len < n; ++i) {
        DataMatrix seq(len, features.values.cols);
        for (std::size_t t = 0; t < len; ++t) {
            auto row = features.values.row(i + t);
            std::copy(row.begin(), row.end(), seq.data.begin() + t * seq.cols);
        }
        out.inputs.push_back(std::move(seq));
        out.targets.push_back(target[i + len]);
    }
    return out;
}

void TrainSpec::validate() const {
    if (sequence_length < 1) throw ConfigError("train spec: sequence length must be >= 1");
    if (learning_rate <= 0.0) throw ConfigError("train spec: learning rate must be > 0");
    if (batch_size < 1) throw ConfigError("train spec: batch size must be >= 1");
    if (patience < 1) throw ConfigError("train spec: patience must be >= 1");
    if (max_epochs < 1) throw ConfigError("train spec: max epochs must be >= 1");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("train spec: dropout must be in [0,1)");
}

LstmNetwork::LstmNetwork(std::size_t input_dim, std::vector<std::size_t> hidden_sizes,
                         double dropout, std::uint64_t seed)
    : input_dim_(input_dim), hidden_(std::move(hidden_sizes)), dropout_(dropout) {
    if (input_dim_ == 0 || hidden_.empty()) throw ConfigError("lstm: empty dimensions");
    if (dropout_ < 0.0 || dropout_ >= 1.0) throw ConfigError("lstm: dropout must be in [0,1)");

    Rng rng(derive_seed(seed, "lstm-init"));
    std::size_t in = input_dim_;
    for (std::size_t h : hidden_) {
        Layer layer;
        const std::size_t fan_in = in + h;
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        layer.w = Eigen::MatrixXd(4 * h, fan_in);
        for (Eigen::Index r = 0; r < layer.w.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.w.cols(); ++c) layer.w(r, c) = dist(rng);
        }
        layer.b = Eigen::VectorXd::Zero(4 * static_cast<Eigen::Index>(h));
        layers_.push_back(std::move(layer));
        in = h;
    }
    for (std::size_t l = 0; l + 1 < hidden_.size(); ++l) {
        BatchNorm bn;
        const auto h = static_cast<Eigen::Index>(hidden_[l]);
        bn.gamma = Eigen::VectorXd::Ones(h);
        bn.beta = Eigen::VectorXd::Zero(h);
        bn.running_mean = Eigen::VectorXd::Zero(h);
        bn.running_var = Eigen::VectorXd::Ones(h);
        norms_.push_back(std::move(bn));
    }
    const std::size_t last = hidden_.back();
    const double bound = 1.0 / std::sqrt(static_cast<double>(last));
    std::uniform_real_distribution<double> dist(-bound, bound);
    head_w_ = Eigen::VectorXd(static_cast<Eigen::Index>(last));
    for (Eigen::Index i = 0; i < head_w_.size(); ++i) head_w_(i) = dist(rng);
    head_b_ = 0.0;
}

double LstmNetwork::forward(const DataMatrix& sequence) const {
    if (sequence.cols != input_dim_) throw DataError("lstm forward: feature width mismatch");
    if (sequence.rows == 0) throw DataError("lstm forward: empty sequence");
    const std::size_t steps = sequence.rows;

    // Current layer input, one column vector per timestep.
    std::vector<Eigen::VectorXd> x(steps);
    for (std::size_t t = 0; t < steps; ++t) {
        x[t] = Eigen::Map<const Eigen::VectorXd>(sequence.data.data() + t * sequence.cols,
                                                 static_cast<Eigen::Index>(sequence.cols));
    }

    Eigen::VectorXd h_last;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const Layer& layer = layers_[l];
        const auto hdim = static_cast<Eigen::Index>(hidden_[l]);
        Eigen::VectorXd h = Eigen::VectorXd::Zero(hdim);
        Eigen::VectorXd c = Eigen::VectorXd::Zero(hdim);
        std::vector<Eigen::VectorXd> out(steps);
        for (std::size_t t = 0; t < steps; ++t) {
            Eigen::VectorXd z(layer.w.cols());
            z << x[t], h;
            Eigen::ArrayXd a = (layer.w * z + layer.b).array();
            Eigen::ArrayXd f = 1.0 / (1.0 + (-a.segment(0, hdim)).exp());
            Eigen::ArrayXd i = 1.0 / (1.0 + (-a.segment(hdim, hdim)).exp());
            Eigen::ArrayXd g = a.segment(2 * hdim, hdim).tanh();
            Eigen::ArrayXd o = 1.0 / (1.0 + (-a.segment(3 * hdim, hdim)).exp());
            c = (f * c.array() + i * g).matrix();
            h = (o * c.array().tanh()).matrix();
            out[t] = h;
        }
        if (l + 1 < layers_.size()) {
            const BatchNorm& bn = norms_[l];
            Eigen::ArrayXd inv_std = (bn.running_var.array() + kBnEps).sqrt().inverse();
            for (std::size_t t = 0; t < steps; ++t) {
                out[t] = (((out[t] - bn.running_mean).array() * inv_std) * bn.gamma.array() +
                          bn.beta.array())
                             .matrix();
            }
        }
        x = std::move(out);
        h_last = h;
    }
    return head_w_.dot(h_last) + head_b_;
}

namespace {

// Per-layer forward cache for backpropagation through time.
struct LayerCache {
    std::vector<Eigen::MatrixXd> z;     // (I+H) x B per step
    std::vector<Eigen::ArrayXXd> f, i, g, o;
    std::vector<Eigen::ArrayXXd> c_prev, tanh_c;
    std::vector<Eigen::MatrixXd> h_raw; // layer output before normalization
};

struct NormCache {
    Eigen::ArrayXd mean, inv_std;            // per feature
    std::vector<Eigen::ArrayXXd> x_hat;      // normalized values per step
    std::vector<Eigen::ArrayXXd> x_centered; // x - mean per step
};

} // namespace

struct LstmBatchWorkspace {
    static LstmNetwork::BatchResult run(LstmNetwork& net,
                                        const std::vector<const DataMatrix*>& batch,
                                        const std::vector<double>& targets,
                                        bool update_running_stats, Rng* dropout_rng) {
        const std::size_t bsz = batch.size();
        if (bsz == 0 || bsz != targets.size()) throw DataError("lstm batch: empty or mismatched");
        const std::size_t steps = batch[0]->rows;
        for (const auto* s : batch) {
            if (s->rows != steps || s->cols != net.input_dim_) {
                throw DataError("lstm batch: inconsistent sequence shape");
            }
        }
        const std::size_t n_layers = net.layers_.size();

        // Inputs as one (dim x B) matrix per timestep.
        std::vector<Eigen::MatrixXd> x(steps);
        for (std::size_t t = 0; t < steps; ++t) {
            x[t] = Eigen::MatrixXd(static_cast<Eigen::Index>(net.input_dim_),
                                   static_cast<Eigen::Index>(bsz));
            for (std::size_t bcol = 0; bcol < bsz; ++bcol) {
                x[t].col(static_cast<Eigen::Index>(bcol)) = Eigen::Map<const Eigen::VectorXd>(
                    batch[bcol]->data.data() + t * batch[bcol]->cols,
                    static_cast<Eigen::Index>(batch[bcol]->cols));
            }
        }

        std::vector<LayerCache> caches(n_layers);
        std::vector<NormCache> norm_caches(net.norms_.size());
        std::vector<std::vector<Eigen::ArrayXXd>> drop_masks(net.norms_.size());
        Eigen::MatrixXd h_final;

        for (std::size_t l = 0; l < n_layers; ++l) {
            const auto& layer = net.layers_[l];
            const auto hdim = static_cast<Eigen::Index>(net.hidden_[l]);
            LayerCache& cache = caches[l];
            cache.z.resize(steps);
            cache.f.resize(steps);
            cache.i.resize(steps);
            cache.g.resize(steps);
            cache.o.resize(steps);
            cache.c_prev.resize(steps);
            cache.tanh_c.resize(steps);
            cache.h_raw.resize(steps);

            Eigen::MatrixXd h = Eigen::MatrixXd::Zero(hdim, static_cast<Eigen::Index>(bsz));
            Eigen::ArrayXXd c = Eigen::ArrayXXd::Zero(hdim, static_cast<Eigen::Index>(bsz));
            for (std::size_t t = 0; t < steps; ++t) {
                Eigen::MatrixXd z(layer.w.cols(), static_cast<Eigen::Index>(bsz));
                z << x[t], h;
                Eigen::MatrixXd a = layer.w * z;
                a.colwise() += layer.b;
                cache.z[t] = std::move(z);
                cache.c_prev[t] = c;
                cache.f[t] = sigmoid(a.topRows(hdim).array());
                cache.i[t] = sigmoid(a.middleRows(hdim, hdim).array());
                cache.g[t] = a.middleRows(2 * hdim, hdim).array().tanh();
                cache.o[t] = sigmoid(a.bottomRows(hdim).array());
                c = cache.f[t] * c + cache.i[t] * cache.g[t];
                cache.tanh_c[t] = c.tanh();
                h = (cache.o[t] * cache.tanh_c[t]).matrix();
                cache.h_raw[t] = h;
            }
            if (l + 1 == n_layers) {
                h_final = h;
                break;
            }

            // Batch normalization over every (sample, timestep) element.
            auto& bn = net.norms_[l];
            NormCache& nc = norm_caches[l];
            const double m = static_cast<double>(steps * bsz);
            Eigen::ArrayXd mean = Eigen::ArrayXd::Zero(hdim);
            for (std::size_t t = 0; t < steps; ++t) mean += cache.h_raw[t].array().rowwise().sum();
            mean /= m;
            Eigen::ArrayXd var = Eigen::ArrayXd::Zero(hdim);
            nc.x_centered.resize(steps);
            for (std::size_t t = 0; t < steps; ++t) {
                nc.x_centered[t] = cache.h_raw[t].array().colwise() - mean;
                var += nc.x_centered[t].square().rowwise().sum();
            }
            var /= m;
            nc.mean = mean;
            nc.inv_std = (var + LstmNetwork::kBnEps).sqrt().inverse();
            if (update_running_stats) {
                bn.running_mean = ((1.0 - LstmNetwork::kBnMomentum) * bn.running_mean.array() +
                                   LstmNetwork::kBnMomentum * mean)
                                      .matrix();
                bn.running_var = ((1.0 - LstmNetwork::kBnMomentum) * bn.running_var.array() +
                                  LstmNetwork::kBnMomentum * var)
                                     .matrix();
            }
            nc.x_hat.resize(steps);
            std::vector<Eigen::MatrixXd> next(steps);
            drop_masks[l].resize(steps);
            const double keep = 1.0 - net.dropout_;
            std::uniform_real_distribution<double> unit(0.0, 1.0);
            for (std::size_t t = 0; t < steps; ++t) {
                nc.x_hat[t] = nc.x_centered[t].colwise() * nc.inv_std;
                Eigen::ArrayXXd y =
                    (nc.x_hat[t].colwise() * bn.gamma.array()).colwise() + bn.beta.array();
                if (dropout_rng != nullptr && net.dropout_ > 0.0) {
                    Eigen::ArrayXXd mask(hdim, static_cast<Eigen::Index>(bsz));
                    for (Eigen::Index r = 0; r < mask.rows(); ++r) {
                        for (Eigen::Index cidx = 0; cidx < mask.cols(); ++cidx) {
                            mask(r, cidx) = unit(*dropout_rng) < keep ? 1.0 / keep : 0.0;
                        }
                    }
                    drop_masks[l][t] = mask;
                    y *= mask;
                }
                next[t] = y.matrix();
            }
            x = std::move(next);
        }

        // Head and loss.
        Eigen::VectorXd preds =
            (net.head_w_.transpose() * h_final).transpose().array() + net.head_b_;
        double loss = 0.0;
        Eigen::VectorXd dpred(preds.size());
        for (Eigen::Index bcol = 0; bcol < preds.size(); ++bcol) {
            double diff = preds(bcol) - targets[static_cast<std::size_t>(bcol)];
            loss += diff * diff;
            dpred(bcol) = 2.0 * diff / static_cast<double>(bsz);
        }
        loss /= static_cast<double>(bsz);
        if (!std::isfinite(loss)) throw EngineError("lstm: non-finite training loss");

        // Backward.
        struct LayerGrads {
            Eigen::MatrixXd dw;
            Eigen::VectorXd db;
        };
        std::vector<LayerGrads> layer_grads(n_layers);
        std::vector<Eigen::VectorXd> dgamma(net.norms_.size()), dbeta(net.norms_.size());
        Eigen::VectorXd dhead_w = h_final * dpred;
        double dhead_b = dpred.sum();

        // Gradient flowing into each layer's outputs, per timestep.
        std::vector<Eigen::MatrixXd> dh_out(steps);
        for (std::size_t t = 0; t < steps; ++t) {
            dh_out[t] = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(net.hidden_.back()),
                                              static_cast<Eigen::Index>(bsz));
        }
        dh_out[steps - 1] = net.head_w_ * dpred.transpose();

        for (std::size_t li = n_layers; li-- > 0;) {
            const auto& layer = net.layers_[li];
            const LayerCache& cache = caches[li];
            const auto hdim = static_cast<Eigen::Index>(net.hidden_[li]);
            const auto in_dim = layer.w.cols() - hdim;

            LayerGrads& grads = layer_grads[li];
            grads.dw = Eigen::MatrixXd::Zero(layer.w.rows(), layer.w.cols());
            grads.db = Eigen::VectorXd::Zero(layer.b.size());

            std::vector<Eigen::MatrixXd> dx(steps);
            Eigen::ArrayXXd dh_next = Eigen::ArrayXXd::Zero(hdim, static_cast<Eigen::Index>(bsz));
            Eigen::ArrayXXd dc_next = Eigen::ArrayXXd::Zero(hdim, static_cast<Eigen::Index>(bsz));
            for (std::size_t t = steps; t-- > 0;) {
                Eigen::ArrayXXd dh = dh_out[t].array() + dh_next;
                Eigen::ArrayXXd dov = dh * cache.tanh_c[t];
                Eigen::ArrayXXd dc = dc_next + dh * cache.o[t] * (1.0 - cache.tanh_c[t].square());
                Eigen::ArrayXXd df = dc * cache.c_prev[t];
                Eigen::ArrayXXd di = dc * cache.g[t];
                Eigen::ArrayXXd dg = dc * cache.i[t];

                Eigen::MatrixXd da(4 * hdim, static_cast<Eigen::Index>(bsz));
                da.topRows(hdim) = (df * cache.f[t] * (1.0 - cache.f[t])).matrix();
                da.middleRows(hdim, hdim) = (di * cache.i[t] * (1.0 - cache.i[t])).matrix();
                da.middleRows(2 * hdim, hdim) = (dg * (1.0 - cache.g[t].square())).matrix();
                da.bottomRows(hdim) = (dov * cache.o[t] * (1.0 - cache.o[t])).matrix();

                grads.dw.noalias() += da * cache.z[t].transpose();
                grads.db += da.rowwise().sum();

                Eigen::MatrixXd dz = layer.w.transpose() * da;
                dx[t] = dz.topRows(in_dim);
                dh_next = dz.bottomRows(hdim).array();
                dc_next = dc * cache.f[t];
            }

            if (li == 0) break;

            // Route dx through dropout and batch normalization into the layer below.
            const std::size_t nl = li - 1;
            const auto& bn = net.norms_[nl];
            const NormCache& nc = norm_caches[nl];
            const auto below = static_cast<Eigen::Index>(net.hidden_[nl]);
            const double m = static_cast<double>(steps * bsz);

            std::vector<Eigen::ArrayXXd> dy(steps);
            for (std::size_t t = 0; t < steps; ++t) {
                dy[t] = dx[t].array();
                if (!drop_masks[nl].empty() && drop_masks[nl][t].size() > 0) {
                    dy[t] *= drop_masks[nl][t];
                }
            }
            dgamma[nl] = Eigen::VectorXd::Zero(below);
            dbeta[nl] = Eigen::VectorXd::Zero(below);
            Eigen::ArrayXd dvar = Eigen::ArrayXd::Zero(below);
            Eigen::ArrayXd dmean = Eigen::ArrayXd::Zero(below);
            Eigen::ArrayXd sum_centered = Eigen::ArrayXd::Zero(below);
            std::vector<Eigen::ArrayXXd> dxhat(steps);
            for (std::size_t t = 0; t < steps; ++t) {
                dgamma[nl] += (dy[t] * nc.x_hat[t]).rowwise().sum().matrix();
                dbeta[nl] += dy[t].rowwise().sum().matrix();
                dxhat[t] = dy[t].colwise() * bn.gamma.array();
                dvar += (dxhat[t] * nc.x_centered[t]).rowwise().sum();
                dmean -= (dxhat[t].colwise() * nc.inv_std).rowwise().sum();
                sum_centered += nc.x_centered[t].rowwise().sum();
            }
            dvar *= -0.5 * nc.inv_std.cube();
            dmean += dvar * (-2.0 / m) * sum_centered;
            for (std::size_t t = 0; t < steps; ++t) {
                dh_out[t] = ((dxhat[t].colwise() * nc.inv_std) +
                             (nc.x_centered[t].colwise() * (dvar * (2.0 / m))))
                                .matrix();
                dh_out[t].array().colwise() += dmean / m;
            }
        }

        // Flatten gradients in the same order as visit_parameters.
        LstmNetwork::BatchResult result;
        result.loss = loss;
        result.gradients.reserve(net.parameter_count());
        auto append = [&result](const double* data, std::size_t n) {
            result.gradients.insert(result.gradients.end(), data, data + n);
        };
        for (std::size_t l = 0; l < n_layers; ++l) {
            append(layer_grads[l].dw.data(), static_cast<std::size_t>(layer_grads[l].dw.size()));
            append(layer_grads[l].db.data(), static_cast<std::size_t>(layer_grads[l].db.size()));
            if (l < net.norms_.size()) {
                append(dgamma[l].data(), static_cast<std::size_t>(dgamma[l].size()));
                append(dbeta[l].data(), static_cast<std::size_t>(dbeta[l].size()));
            }
        }
        append(dhead_w.data(), static_cast<std::size_t>(dhead_w.size()));
        append(&dhead_b, 1);
        return result;
    }
};

LstmNetwork::BatchResult LstmNetwork::batch_loss_and_gradients(
    const std::vector<const DataMatrix*>& batch, const std::vector<double>& targets,
    bool update_running_stats, Rng* dropout_rng) {
    return LstmBatchWorkspace::run(*this, batch, targets, update_running_stats, dropout_rng);
}

template <typename Fn>
void LstmNetwork::visit_parameters(Fn&& fn) {
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        fn(layers_[l].w.data(), static_cast<std::size_t>(layers_[l].w.size()));
        fn(layers_[l].b.data(), static_cast<std::size_t>(layers_[l].b.size()));
        if (l < norms_.size()) {
            fn(norms_[l].gamma.data(), static_cast<std::size_t>(norms_[l].gamma.size()));
            fn(norms_[l].beta.data(), static_cast<std::size_t>(norms_[l].beta.size()));
        }
    }
    fn(head_w_.data(), static_cast<std::size_t>(head_w_.size()));
    fn(&head_b_, 1);
}

template <typename Fn>
void LstmNetwork::visit_parameters(Fn&& fn) const {
    const_cast<LstmNetwork*>(this)->visit_parameters(
        [&fn](double* data, std::size_t n) { fn(static_cast<const double*>(data), n); });
}

std::size_t LstmNetwork::parameter_count() const {
    std::size_t n = 0;
    visit_parameters([&n](const double*, std::size_t k) { n += k; });
    return n;
}

double LstmNetwork::get_parameter(std::size_t i) const {
    double out = 0.0;
    std::size_t off = 0;
    visit_parameters([&](const double* data, std::size_t n) {
        if (i >= off && i < off + n) out = data[i - off];
        off += n;
    });
    if (i >= off) throw ConfigError("lstm: parameter index out of range");
    return out;
}

void LstmNetwork::set_parameter(std::size_t i, double v) {
    std::size_t off = 0;
    bool done = false;
    visit_parameters([&](double* data, std::size_t n) {
        if (i >= off && i < off + n) {
            data[i - off] = v;
            done = true;
        }
        off += n;
    });
    if (!done) throw ConfigError("lstm: parameter index out of range");
}

void LstmNetwork::apply_adam_step(const std::vector<double>& gradients, double lr,
                                  std::size_t step, std::vector<double>& m,
                                  std::vector<double>& v) {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const std::size_t total = parameter_count();
    if (gradients.size() != total) throw EngineError("adam: gradient size mismatch");
    if (m.size() != total) m.assign(total, 0.0);
    if (v.size() != total) v.assign(total, 0.0);
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(step));
    std::size_t off = 0;
    visit_parameters([&](double* data, std::size_t n) {
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t i = off + k;
            m[i] = b1 * m[i] + (1.0 - b1) * gradients[i];
            v[i] = b2 * v[i] + (1.0 - b2) * gradients[i] * gradients[i];
            data[k] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
        }
        off += n;
    });
}

LstmNetwork lstm_train(const SequenceSet& data, const TrainSpec& spec, double val_fraction,
                       std::vector<std::size_t> hidden_sizes) {
    spec.validate();
    if (val_fraction <= 0.0 || val_fraction > 0.5) {
        throw ConfigError("lstm_train: val fraction must be in (0, 0.5]");
    }
    const std::size_t n = data.inputs.size();
    if (n < 2) throw DataError("lstm_train: need at least 2 samples");
    std::size_t n_val = std::max<std::size_t>(1, static_cast<std::size_t>(
                                                     std::floor(static_cast<double>(n) * val_fraction)));
    if (n_val >= n) throw DataError("lstm_train: validation slice swallows all samples");
    const std::size_t n_train = n - n_val;

    LstmNetwork net(data.feature_dim, hidden_sizes, spec.dropout, spec.seed);
    std::vector<double> adam_m, adam_v;
    std::size_t adam_step = 0;

    auto val_loss = [&net, &data, n_train, n]() {
        double s = 0.0;
        for (std::size_t i = n_train; i < n; ++i) {
            double d = net.forward(data.inputs[i]) - data.targets[i];
            s += d * d;
        }
        return s / static_cast<double>(n - n_train);
    };

    LstmNetwork best = net;
    double best_loss = std::numeric_limits<double>::infinity();
    int stale = 0;

    std::vector<std::size_t> order(n_train);
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < spec.max_epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(spec.seed, "shuffle-" + std::to_string(epoch)));
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        Rng dropout_rng(derive_seed(spec.seed, "dropout-" + std::to_string(epoch)));

        for (std::size_t start = 0; start < n_train;
             start += static_cast<std::size_t>(spec.batch_size)) {
            const std::size_t stop =
                std::min(n_train, start + static_cast<std::size_t>(spec.batch_size));
            std::vector<const DataMatrix*> batch;
            std::vector<double> targets;
            batch.reserve(stop - start);
            targets.reserve(stop - start);
            for (std::size_t k = start; k < stop; ++k) {
                batch.push_back(&data.inputs[order[k]]);
                targets.push_back(data.targets[order[k]]);
            }
            auto res = net.batch_loss_and_gradients(batch, targets, true,
                                                    spec.dropout > 0.0 ? &dropout_rng : nullptr);
            ++adam_step;
            net.apply_adam_step(res.gradients, spec.learning_rate, adam_step, adam_m, adam_v);
        }

        double vloss = val_loss();
        if (!std::isfinite(vloss)) throw EngineError("lstm_train: non-finite validation loss");
        if (vloss < best_loss - 1e-12) {
            best_loss = vloss;
            best = net;
            stale = 0;
        } else if (++stale >= spec.patience) {
            break;
        }
    }
    return best;
}

nlohmann::json LstmNetwork::to_json() const {
    auto vec_json = [](const Eigen::VectorXd& v) {
        return std::vector<double>(v.data(), v.data() + v.size());
    };
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : layers_) {
        layers.push_back({{"rows", l.w.rows()},
                          {"cols", l.w.cols()},
                          {"w", std::vector<double>(l.w.data(), l.w.data() + l.w.size())},
                          {"b", vec_json(l.b)}});
    }
    nlohmann::json norms = nlohmann::json::array();
    for (const auto& bn : norms_) {
        norms.push_back({{"gamma", vec_json(bn.gamma)},
                         {"beta", vec_json(bn.beta)},
                         {"running_mean", vec_json(bn.running_mean)},
                         {"running_var", vec_json(bn.running_var)}});
    }
    return {{"format", 1},
            {"input_dim", input_dim_},
            {"hidden", hidden_},
            {"dropout", dropout_},
            {"layers", layers},
            {"norms", norms},
            {"head_w", vec_json(head_w_)},
            {"head_b", head_b_}};
}

LstmNetwork LstmNetwork::from_json(const nlohmann::json& j) {
    LstmNetwork net;
    net.input_dim_ = j["input_dim"].get<std::size_t>();
    net.hidden_ = j["hidden"].get<std::vector<std::size_t>>();
    net.dropout_ = j["dropout"].get<double>();
    auto to_vec = [](const nlohmann::json& arr) {
        auto v = arr.get<std::vector<double>>();
        return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()))
            .eval();
    };
    for (const auto& lj : j["layers"]) {
        Layer l;
        auto w = lj["w"].get<std::vector<double>>();
        l.w = Eigen::Map<const Eigen::MatrixXd>(w.data(), lj["rows"].get<Eigen::Index>(),
                                                lj["cols"].get<Eigen::Index>());
        l.b = to_vec(lj["b"]);
        net.layers_.push_back(std::move(l));
    }
    for (const auto& nj : j["norms"]) {
        BatchNorm bn;
        bn.gamma = to_vec(nj["gamma"]);
        bn.beta = to_vec(nj["beta"]);
        bn.running_mean = to_vec(nj["running_mean"]);
        bn.running_var = to_vec(nj["running_var"]);
        net.norms_.push_back(std::move(bn));
    }
    net.head_w_ = to_vec(j["head_w"]);
    net.head_b_ = j["head_b"].get<double>();
    return net;
}

} // namespace astif
