#pragma once

#include <cstdint>
#include <vector>

#include "astif/timeframe.hpp"
#include "astif/types.hpp"

namespace astif {

/// One block of the generated walk. `semantic_strength` in [0,1] controls how
/// well the semantic side channel anticipates the next-step move.
struct SynthRegime {
    std::size_t duration = 0;
    double drift = 0.0;      // mean per-step return
    double volatility = 0.0; // per-step return standard deviation
    double semantic_strength = 0.0;
};

struct SynthSpec {
    std::size_t length = 0;
    std::vector<SynthRegime> regimes;
    std::size_t correlated_assets = 2;
    double correlation = 0.7;   // return correlation of auxiliary assets
    double aux_volatility = 0.01;
    double semantic_noise_pct = 5.0; // signal noise where strength < 1
    bool include_gepu = true;
    bool include_sentiment = true;
    std::uint64_t seed = 0;
    Date start = Date::from_ymd(2020, 1, 1);
    std::string target_name = "ASSET";

    void validate() const; // throws ConfigError
};

/// Geometric random walk per regime plus correlated auxiliary assets, a GEPU
/// proxy, a sentiment proxy, and two semantic side channels:
///   semantic_signal   - strength * next-step return (pct) + (1-strength) * noise
///   semantic_strength - the regime strength itself, for stub noise scaling
/// Deterministic for a fixed seed.
TimeFrame generate(const SynthSpec& spec);

} // namespace astif
