// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "astroq/matrix.hpp"

namespace astroq {

/// Symmetric uniform quantization settings: bit-width b in [2, 8] and the
/// contiguous group size along the input dimension.
struct QuantConfig {
    int bits = 3;
    std::size_t group_size = 128;

    int qmax() const { return (1 << (bits - 1)) - 1; }
    int qmin() const { return -(1 << (bits - 1)); }

    /// Throws ConfigError for bits outside [2, 8] or group_size == 0.
    void validate() const;
};

/// Partition of the input dimension c_in into num_groups contiguous blocks
/// of group_size. Group k covers input indices [k*g, (k+1)*g).
struct GroupScheme {
    std::size_t c_in = 0;
    std::size_t group_size = 0;
    std::size_t num_groups = 0;

    /// Throws ConfigError when g does not divide c_in (no ragged groups).
    static GroupScheme create(std::size_t c_in, std::size_t group_size);

    std::size_t group_of(std::size_t input_index) const {
        return input_index / group_size;
    }
    std::size_t group_begin(std::size_t k) const { return k * group_size; }
};

/// Integer codes, stored unpacked as one int8 per weight.
struct CodeMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::int8_t> data;

    CodeMatrix() = default;
    CodeMatrix(std::size_t r, std::size_t c)
        : rows(r), cols(c), data(r * c, 0) {}

    std::int8_t operator()(std::size_t i, std::size_t j) const {
        return data[i * cols + j];
    }
    std::int8_t& operator()(std::size_t i, std::size_t j) {
        return data[i * cols + j];
    }
};

/// A quantized layer: per-element codes (c_in x c_out), per-(group, output
/// channel) scales (num_groups x c_out), and the config that produced them.
struct QuantizedLayer {
    CodeMatrix codes;
    DenseMatrix scales;
    QuantConfig config;

    GroupScheme scheme() const;
};

/// max(|w|) / (2^{b-1} - 1); 0 for the all-zero vector. The result is
/// rounded to float32 precision so serialized layers round-trip bit-exactly.
double group_scale(std::span<const double> w, int bits);

struct GroupQuantResult {
    std::vector<std::int8_t> codes;
    double scale = 0.0;
};

/// Round-to-nearest quantization of one group vector: clamp(round(w/s)) with
/// ties rounded half away from zero. Zero-scale groups produce all-zero codes.
GroupQuantResult quantize_group(std::span<const double> w, int bits);

/// RTN quantization of a full layer, independently per (group, output
/// channel). cfg.group_size must divide W's row count.
QuantizedLayer rtn_quantize(const DenseMatrix& weights, const QuantConfig& cfg);

/// Entry (i, j) = codes(i, j) * scales(group_of(i), j).
DenseMatrix dequantize(const QuantizedLayer& q);

} // namespace astroq
