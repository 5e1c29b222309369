#include "astif/synth.hpp"

#include <algorithm>
#include <cmath>

#include "astif/errors.hpp"
#include "astif/rng.hpp"

namespace astif {

void SynthSpec::validate() const {
    if (length < 2) throw ConfigError("synth: length must be >= 2");
    if (regimes.empty()) throw ConfigError("synth: at least one regime required");
    std::size_t total = 0;
    for (const auto& r : regimes) {
        if (r.volatility < 0.0) throw ConfigError("synth: volatility must be >= 0");
        if (r.semantic_strength < 0.0 || r.semantic_strength > 1.0) {
            throw ConfigError("synth: semantic strength must be in [0,1]");
        }
        total += r.duration;
    }
    if (total != length) throw ConfigError("synth: regime durations must sum to length");
    if (correlation < -1.0 || correlation > 1.0) {
        throw ConfigError("synth: correlation must be in [-1,1]");
    }
    if (aux_volatility < 0.0) throw ConfigError("synth: aux volatility must be >= 0");
    if (semantic_noise_pct < 0.0) throw ConfigError("synth: semantic noise must be >= 0");
}

TimeFrame generate(const SynthSpec& spec) {
    spec.validate();
    const std::size_t n = spec.length;

    std::vector<std::size_t> regime_of(n);
    {
        std::size_t row = 0;
        for (std::size_t r = 0; r < spec.regimes.size(); ++r) {
            for (std::size_t k = 0; k < spec.regimes[r].duration; ++k) regime_of[row++] = r;
        }
    }

    Rng price_rng(derive_seed(spec.seed, "synth-price"));
    Rng aux_rng(derive_seed(spec.seed, "synth-aux"));
    Rng signal_rng(derive_seed(spec.seed, "synth-signal"));
    Rng macro_rng(derive_seed(spec.seed, "synth-macro"));
    std::normal_distribution<double> gauss(0.0, 1.0);

    // Target walk. Returns into row t use the regime of row t.
    std::vector<double> returns(n, 0.0);
    std::vector<double> price(n);
    price[0] = 100.0;
    for (std::size_t t = 1; t < n; ++t) {
        const auto& reg = spec.regimes[regime_of[t]];
        double r = reg.drift + reg.volatility * gauss(price_rng);
        r = std::max(r, -0.99); // keep prices strictly positive
        returns[t] = r;
        price[t] = price[t - 1] * (1.0 + r);
    }

    TimeFrame frame;
    frame.target_column = spec.target_name;
    frame.dates.resize(n);
    for (std::size_t t = 0; t < n; ++t) frame.dates[t] = spec.start + static_cast<int>(t);
    frame.names.push_back(spec.target_name);
    frame.columns.push_back(price);

    const double rho = spec.correlation;
    const double mix = std::sqrt(std::max(0.0, 1.0 - rho * rho));
    for (std::size_t a = 0; a < spec.correlated_assets; ++a) {
        std::vector<double> aux(n);
        aux[0] = 50.0 + 25.0 * static_cast<double>(a);
        for (std::size_t t = 1; t < n; ++t) {
            double r = rho * returns[t] + mix * spec.aux_volatility * gauss(aux_rng);
            r = std::max(r, -0.99);
            aux[t] = aux[t - 1] * (1.0 + r);
        }
        frame.names.push_back("AUX" + std::to_string(a + 1));
        frame.columns.push_back(std::move(aux));
    }

    if (spec.include_gepu) {
        std::vector<double> gepu(n);
        gepu[0] = 100.0;
        for (std::size_t t = 1; t < n; ++t) {
            gepu[t] = std::max(1.0, gepu[t - 1] + 2.0 * gauss(macro_rng));
        }
        frame.names.push_back("GEPU");
        frame.columns.push_back(std::move(gepu));
    }
    if (spec.include_sentiment) {
        std::vector<double> panic(n);
        panic[0] = 0.5;
        for (std::size_t t = 1; t < n; ++t) {
            panic[t] = std::clamp(panic[t - 1] + 0.05 * gauss(macro_rng), 0.0, 1.0);
        }
        frame.names.push_back("panic_index");
        frame.columns.push_back(std::move(panic));
    }

    // Side channels for the stub oracle. The signal at row t anticipates the
    // return into row t+1; the final row has nothing left to anticipate.
    std::vector<double> signal(n, 0.0);
    std::vector<double> strength(n, 0.0);
    for (std::size_t t = 0; t + 1 < n; ++t) {
        const double lambda = spec.regimes[regime_of[t + 1]].semantic_strength;
        strength[t] = lambda;
        signal[t] = lambda * returns[t + 1] * 100.0 +
                    (1.0 - lambda) * spec.semantic_noise_pct * gauss(signal_rng);
    }
    frame.names.push_back("semantic_signal");
    frame.columns.push_back(std::move(signal));
    frame.names.push_back("semantic_strength");
    frame.columns.push_back(std::move(strength));

    return frame;
}

} // namespace astif
