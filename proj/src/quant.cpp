// SPDX-License-Identifier: Apache-2.0
#include "astroq/quant.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "astroq/errors.hpp"

namespace astroq {

void QuantConfig::validate() const {
    if (bits < 2 || bits > 8) {
        throw ConfigError("bit-width must lie in [2, 8], got " +
                          std::to_string(bits));
    }
    if (group_size == 0) {
        throw ConfigError("group size must be positive");
    }
}

GroupScheme GroupScheme::create(std::size_t c_in, std::size_t group_size) {
    if (c_in == 0 || group_size == 0) {
        throw ConfigError("group scheme: dimensions must be positive");
    }
    if (c_in % group_size != 0) {
        throw ConfigError("group size " + std::to_string(group_size) +
                          " does not divide input dimension C_in = " +
                          std::to_string(c_in));
    }
    return GroupScheme{c_in, group_size, c_in / group_size};
}

GroupScheme QuantizedLayer::scheme() const {
    if (scales.rows() == 0 || codes.rows % scales.rows() != 0) {
        throw ConfigError("quantized layer: " + std::to_string(scales.rows()) +
                          " scale rows do not partition " +
                          std::to_string(codes.rows) + " code rows");
    }
    return GroupScheme::create(codes.rows, codes.rows / scales.rows());
}

double group_scale(std::span<const double> w, int bits) {
    double max_abs = 0.0;
    for (double x : w) {
        max_abs = std::max(max_abs, std::fabs(x));
    }
    if (max_abs == 0.0) {
        return 0.0;
    }
    const int qmax = (1 << (bits - 1)) - 1;
    // Round to f32 precision: scales are stored as float32 on disk and the
    // container round-trip must be lossless.
    return static_cast<double>(
        static_cast<float>(max_abs / static_cast<double>(qmax)));
}

GroupQuantResult quantize_group(std::span<const double> w, int bits) {
    GroupQuantResult out;
    out.scale = group_scale(w, bits);
    out.codes.assign(w.size(), 0);
    if (out.scale == 0.0) {
        return out;
    }
    const int qmax = (1 << (bits - 1)) - 1;
    const int qmin = -(1 << (bits - 1));
    for (std::size_t i = 0; i < w.size(); ++i) {
        // std::round: ties away from zero.
        const long long c = std::llround(w[i] / out.scale);
        const long long clamped =
            std::clamp<long long>(c, qmin, qmax);
        out.codes[i] = static_cast<std::int8_t>(clamped);
    }
    return out;
}

QuantizedLayer rtn_quantize(const DenseMatrix& weights, const QuantConfig& cfg) {
    cfg.validate();
    const GroupScheme scheme = GroupScheme::create(weights.rows(), cfg.group_size);
    const std::size_t c_out = weights.cols();

    QuantizedLayer q;
    q.config = cfg;
    q.codes = CodeMatrix(weights.rows(), c_out);
    q.scales = DenseMatrix(scheme.num_groups, c_out);

    std::vector<double> buf(cfg.group_size);
    for (std::size_t j = 0; j < c_out; ++j) {
        for (std::size_t k = 0; k < scheme.num_groups; ++k) {
            const std::size_t base = scheme.group_begin(k);
            for (std::size_t r = 0; r < cfg.group_size; ++r) {
                buf[r] = weights(base + r, j);
            }
            const GroupQuantResult gq = quantize_group(buf, cfg.bits);
            q.scales(k, j) = gq.scale;
            for (std::size_t r = 0; r < cfg.group_size; ++r) {
                q.codes(base + r, j) = gq.codes[r];
            }
        }
    }
    return q;
}

DenseMatrix dequantize(const QuantizedLayer& q) {
    const GroupScheme scheme = q.scheme();
    DenseMatrix out(q.codes.rows, q.codes.cols);
    for (std::size_t i = 0; i < q.codes.rows; ++i) {
        const std::size_t k = scheme.group_of(i);
        for (std::size_t j = 0; j < q.codes.cols; ++j) {
            out(i, j) = static_cast<double>(q.codes(i, j)) * q.scales(k, j);
        }
    }
    return out;
}

} // namespace astroq
