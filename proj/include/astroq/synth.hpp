// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "astroq/matrix.hpp"

namespace astroq {

/// xoshiro256++ seeded through splitmix64. Chosen because the update rule is
/// fully specified by integer operations, so identical seeds give identical
/// streams on every platform.
class Xoshiro256pp {
public:
    explicit Xoshiro256pp(std::uint64_t seed);

    std::uint64_t next();

    /// Uniform double in [0, 1): top 53 bits of next().
    double uniform();

    /// Standard normal via the Marsaglia polar method (two values per
    /// accepted pair; the second is cached).
    double normal();

private:
    std::uint64_t state_[4];
    double cached_normal_ = 0.0;
    bool has_cached_ = false;
};

/// Synthetic layer shape and outlier structure. Weights are standard normal
/// with a heavy-tail mixture (each entry scaled x8 with probability
/// weight_tail); activations are standard normal with
/// ceil(outlier_channel_fraction * c_in) randomly chosen channels scaled by
/// outlier_scale.
struct SynthParams {
    std::size_t rows = 256;
    std::size_t c_in = 128;
    std::size_t c_out = 8;
    double outlier_channel_fraction = 1.0 / 64.0;
    double outlier_scale = 10.0;
    double weight_tail = 0.05;
};

struct SynthData {
    DenseMatrix weights; // c_in x c_out
    DenseMatrix acts;    // rows x c_in
    std::vector<std::size_t> outlier_channels;
};

/// Deterministic given (params, seed). Draw order: weight entries row-major
/// (normal, then the tail coin), activation entries row-major, then the
/// outlier channel choice by partial Fisher-Yates. Throws
/// std::invalid_argument for outlier_channel_fraction outside [0, 0.5],
/// weight_tail outside [0, 1] or zero dimensions.
SynthData gen_synthetic(const SynthParams& params, std::uint64_t seed);

} // namespace astroq
