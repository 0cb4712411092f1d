// SPDX-License-Identifier: Apache-2.0
#include "astroq/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace astroq {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

} // namespace

Xoshiro256pp::Xoshiro256pp(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& s : state_) {
        s = splitmix64(sm);
    }
}

std::uint64_t Xoshiro256pp::next() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
}

double Xoshiro256pp::uniform() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

double Xoshiro256pp::normal() {
    if (has_cached_) {
        has_cached_ = false;
        return cached_normal_;
    }
    double u, v, s;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double factor = std::sqrt(-2.0 * std::log(s) / s);
    cached_normal_ = v * factor;
    has_cached_ = true;
    return u * factor;
}

SynthData gen_synthetic(const SynthParams& params, std::uint64_t seed) {
    if (params.rows == 0 || params.c_in == 0 || params.c_out == 0) {
        throw std::invalid_argument("gen_synthetic: dimensions must be positive");
    }
    if (params.outlier_channel_fraction < 0.0 ||
        params.outlier_channel_fraction > 0.5) {
        throw std::invalid_argument(
            "gen_synthetic: outlier_channel_fraction must lie in [0, 0.5]");
    }
    if (params.weight_tail < 0.0 || params.weight_tail > 1.0) {
        throw std::invalid_argument(
            "gen_synthetic: weight_tail must lie in [0, 1]");
    }
    if (!(params.outlier_scale > 0.0)) {
        throw std::invalid_argument(
            "gen_synthetic: outlier_scale must be positive");
    }

    Xoshiro256pp rng(seed);
    SynthData out;

    out.weights = DenseMatrix(params.c_in, params.c_out);
    for (double& w : out.weights.data()) {
        const double z = rng.normal();
        const double coin = rng.uniform();
        w = (coin < params.weight_tail) ? 8.0 * z : z;
    }

    out.acts = DenseMatrix(params.rows, params.c_in);
    for (double& a : out.acts.data()) {
        a = rng.normal();
    }

    const std::size_t n_outliers = static_cast<std::size_t>(std::ceil(
        params.outlier_channel_fraction * static_cast<double>(params.c_in)));
    if (n_outliers > 0) {
        std::vector<std::size_t> idx(params.c_in);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        // partial Fisher-Yates; channels are drawn even at scale 1 so the
        // stream layout does not depend on the scale
        for (std::size_t i = 0; i < n_outliers; ++i) {
            const std::size_t j =
                i + static_cast<std::size_t>(rng.next() % (params.c_in - i));
            std::swap(idx[i], idx[j]);
        }
        out.outlier_channels.assign(
            idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_outliers));
        std::sort(out.outlier_channels.begin(), out.outlier_channels.end());
        if (params.outlier_scale != 1.0) {
            for (std::size_t c : out.outlier_channels) {
                for (std::size_t i = 0; i < params.rows; ++i) {
                    out.acts(i, c) *= params.outlier_scale;
                }
            }
        }
    }
    return out;
}

} // namespace astroq
