#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include <nlohmann/json.hpp>

#include "astif/errors.hpp"
#include "astif/lstm.hpp"

using namespace astif;

namespace {

DataMatrix random_sequence(std::size_t steps, std::size_t dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    DataMatrix m(steps, dim);
    for (auto& v : m.data) v = unit(rng);
    return m;
}

FeatureMatrix as_features(const DataMatrix& values) {
    FeatureMatrix fm;
    fm.values = values;
    for (std::size_t c = 0; c < values.cols; ++c) fm.names.push_back("f" + std::to_string(c));
    for (std::size_t r = 0; r < values.rows; ++r) {
        fm.dates.push_back(Date::from_ymd(2021, 1, 1) + static_cast<int>(r));
    }
    return fm;
}

// Plain scalar reimplementation of the stacked cell equations for inference
// mode, reconstructed from the flattened parameter vector.
double oracle_forward(const LstmNetwork& net, const DataMatrix& seq) {
    const std::size_t input_dim = net.input_dim();
    const auto& hidden = net.hidden_sizes();
    std::size_t off = 0;
    auto take = [&net, &off]() { return net.get_parameter(off++); };

    auto sigmoid = [](double a) { return 1.0 / (1.0 + std::exp(-a)); };

    std::vector<std::vector<double>> x(seq.rows);
    for (std::size_t t = 0; t < seq.rows; ++t) {
        auto row = seq.row(t);
        x[t].assign(row.begin(), row.end());
    }

    std::vector<double> h_last;
    for (std::size_t l = 0; l < hidden.size(); ++l) {
        const std::size_t in_dim = l == 0 ? input_dim : hidden[l - 1];
        const std::size_t h_dim = hidden[l];
        const std::size_t w_rows = 4 * h_dim;
        const std::size_t w_cols = in_dim + h_dim;
        // column-major storage
        std::vector<double> w(w_rows * w_cols);
        for (std::size_t c = 0; c < w_cols; ++c) {
            for (std::size_t r = 0; r < w_rows; ++r) w[c * w_rows + r] = take();
        }
        std::vector<double> b(w_rows);
        for (auto& v : b) v = take();

        std::vector<double> h(h_dim, 0.0), cell(h_dim, 0.0);
        std::vector<std::vector<double>> out(seq.rows);
        for (std::size_t t = 0; t < seq.rows; ++t) {
            std::vector<double> z(w_cols);
            for (std::size_t i = 0; i < in_dim; ++i) z[i] = x[t][i];
            for (std::size_t i = 0; i < h_dim; ++i) z[in_dim + i] = h[i];
            std::vector<double> a(w_rows);
            for (std::size_t r = 0; r < w_rows; ++r) {
                double s = b[r];
                for (std::size_t c = 0; c < w_cols; ++c) s += w[c * w_rows + r] * z[c];
                a[r] = s;
            }
            for (std::size_t i = 0; i < h_dim; ++i) {
                const double f = sigmoid(a[i]);
                const double in_gate = sigmoid(a[h_dim + i]);
                const double g = std::tanh(a[2 * h_dim + i]);
                const double o = sigmoid(a[3 * h_dim + i]);
                cell[i] = f * cell[i] + in_gate * g;
                h[i] = o * std::tanh(cell[i]);
            }
            out[t] = h;
        }
        if (l + 1 < hidden.size()) {
            // inter-layer normalization with fresh running stats (mean 0, var 1)
            std::vector<double> gamma(h_dim), beta(h_dim);
            for (auto& v : gamma) v = take();
            for (auto& v : beta) v = take();
            const double inv = 1.0 / std::sqrt(1.0 + 1e-5);
            for (auto& step : out) {
                for (std::size_t i = 0; i < h_dim; ++i) {
                    step[i] = step[i] * inv * gamma[i] + beta[i];
                }
            }
            h = out.back();
        }
        x = std::move(out);
        h_last = x.back();
    }
    std::vector<double> head_w(hidden.back());
    for (auto& v : head_w) v = take();
    double head_b = take();
    double y = head_b;
    for (std::size_t i = 0; i < hidden.back(); ++i) y += head_w[i] * h_last[i];
    return y;
}

} // namespace

TEST_CASE("make_sequences counting and locality") {
    auto fm = as_features(random_sequence(11, 3, 1));
    std::vector<double> target(11);
    for (std::size_t i = 0; i < 11; ++i) target[i] = static_cast<double>(i);
    auto one = make_sequences(fm, target, 10);
    CHECK(one.inputs.size() == 1);
    CHECK(one.targets == std::vector<double>{10});

    auto fm15 = as_features(random_sequence(15, 3, 2));
    std::vector<double> target15(15);
    for (std::size_t i = 0; i < 15; ++i) target15[i] = static_cast<double>(i);
    auto five = make_sequences(fm15, target15, 10);
    CHECK(five.inputs.size() == 5);
    CHECK(five.targets == std::vector<double>{10, 11, 12, 13, 14});

    // perturbing row 12 touches only samples whose window contains row 12
    auto perturbed = fm15;
    perturbed.values.at(12, 0) += 1.0;
    auto five_p = make_sequences(perturbed, target15, 10);
    for (std::size_t s = 0; s < 5; ++s) {
        const bool contains_12 = s + 10 > 12 && s <= 12;
        CHECK((five.inputs[s].data != five_p.inputs[s].data) == contains_12);
    }

    CHECK_THROWS_AS(make_sequences(fm, target, 11), DataError);
}

TEST_CASE("forward with all-zero parameters returns the head bias") {
    LstmNetwork net(3, {4, 3, 2}, 0.0, 7);
    for (std::size_t i = 0; i < net.parameter_count(); ++i) net.set_parameter(i, 0.0);
    auto seq = random_sequence(6, 3, 3);
    CHECK(net.forward(seq) == doctest::Approx(0.0).epsilon(1e-12));

    // set only the head bias (last parameter)
    net.set_parameter(net.parameter_count() - 1, 0.37);
    CHECK(net.forward(seq) == doctest::Approx(0.37).epsilon(1e-12));
}

TEST_CASE("forward is deterministic in inference mode") {
    LstmNetwork net(4, {5, 4, 3}, 0.2, 42);
    auto seq = random_sequence(8, 4, 4);
    CHECK(net.forward(seq) == net.forward(seq));
}

TEST_CASE("forward matches an independent gate-equation oracle") {
    LstmNetwork net(3, {2, 2, 2}, 0.0, 42);
    auto seq = random_sequence(5, 3, 5);
    CHECK(net.forward(seq) == doctest::Approx(oracle_forward(net, seq)).epsilon(1e-12));

    LstmNetwork wide(4, {6, 5, 3}, 0.0, 11);
    auto seq2 = random_sequence(7, 4, 6);
    CHECK(wide.forward(seq2) == doctest::Approx(oracle_forward(wide, seq2)).epsilon(1e-12));
}

TEST_CASE("analytic gradients match central finite differences") {
    LstmNetwork net(3, {2, 2, 2}, 0.0, 42);
    std::vector<DataMatrix> seqs;
    std::vector<const DataMatrix*> batch;
    std::vector<double> targets;
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int s = 0; s < 5; ++s) {
        seqs.push_back(random_sequence(4, 3, 100 + static_cast<std::uint64_t>(s)));
        targets.push_back(unit(rng));
    }
    for (const auto& s : seqs) batch.push_back(&s);

    auto analytic = net.batch_loss_and_gradients(batch, targets, false, nullptr);
    const double step = 1e-5;
    double worst = 0.0;
    for (std::size_t i = 0; i < net.parameter_count(); ++i) {
        const double saved = net.get_parameter(i);
        net.set_parameter(i, saved + step);
        const double up = net.batch_loss_and_gradients(batch, targets, false, nullptr).loss;
        net.set_parameter(i, saved - step);
        const double down = net.batch_loss_and_gradients(batch, targets, false, nullptr).loss;
        net.set_parameter(i, saved);
        const double fd = (up - down) / (2.0 * step);
        const double denom = std::max({std::abs(fd), std::abs(analytic.gradients[i]), 1e-7});
        worst = std::max(worst, std::abs(fd - analytic.gradients[i]) / denom);
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("training learns a constant target") {
    const double constant = 0.42;
    const std::size_t n = 120;
    auto fm = as_features(random_sequence(n, 4, 9));
    std::vector<double> target(n, constant);
    auto data = make_sequences(fm, target, 5);

    TrainSpec spec;
    spec.sequence_length = 5;
    spec.max_epochs = 200;
    spec.patience = 25;
    spec.dropout = 0.1;
    spec.seed = 3;
    auto net = lstm_train(data, spec, 0.2, {8, 6, 4});

    auto held_out = random_sequence(5, 4, 999);
    CHECK(std::abs(net.forward(held_out) - constant) < 0.02);
}

TEST_CASE("training is reproducible under a fixed seed") {
    auto fm = as_features(random_sequence(60, 3, 10));
    std::vector<double> target(60);
    for (std::size_t i = 0; i < 60; ++i) target[i] = 0.3 + 0.01 * static_cast<double>(i % 5);
    auto data = make_sequences(fm, target, 4);

    TrainSpec spec;
    spec.sequence_length = 4;
    spec.max_epochs = 12;
    spec.patience = 12;
    spec.dropout = 0.2;
    spec.seed = 17;
    auto a = lstm_train(data, spec, 0.2, {4, 3, 2});
    auto b = lstm_train(data, spec, 0.2, {4, 3, 2});

    auto probe = random_sequence(4, 3, 55);
    CHECK(a.forward(probe) == b.forward(probe));
    for (std::size_t i = 0; i < a.parameter_count(); ++i) {
        CHECK(a.get_parameter(i) == b.get_parameter(i));
    }
}

TEST_CASE("training validates its inputs") {
    auto fm = as_features(random_sequence(20, 2, 12));
    std::vector<double> target(20, 0.5);
    auto data = make_sequences(fm, target, 4);
    TrainSpec spec;
    spec.sequence_length = 4;
    CHECK_THROWS_AS(lstm_train(data, spec, 0.0), ConfigError);
    CHECK_THROWS_AS(lstm_train(data, spec, 0.9), ConfigError);
    spec.learning_rate = -1;
    CHECK_THROWS_AS(lstm_train(data, spec, 0.2), ConfigError);
}

TEST_CASE("network JSON round trip preserves inference") {
    LstmNetwork net(3, {4, 3, 2}, 0.2, 21);
    auto seq = random_sequence(6, 3, 22);
    auto restored = LstmNetwork::from_json(net.to_json());
    CHECK(restored.forward(seq) == net.forward(seq));
}
