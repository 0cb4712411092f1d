// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "astroq/errors.hpp"
#include "astroq/quant.hpp"
#include "oracles.hpp"

using astroq::DenseMatrix;
using astroq::QuantConfig;

TEST_CASE("group_scale") {
    const std::vector<double> w = {0.6, -0.9, 0.3};
    CHECK(astroq::group_scale(w, 3) == doctest::Approx(0.3).epsilon(1e-6));

    const std::vector<double> zeros(5, 0.0);
    CHECK(astroq::group_scale(zeros, 3) == 0.0);

    const std::vector<double> one = {1.0};
    CHECK(astroq::group_scale(one, 2) == 1.0); // 1.0/(2^1 - 1), exact
}

TEST_CASE("quantize_group round-trips the hand example") {
    const std::vector<double> w = {0.6, -0.9, 0.3};
    const auto q = astroq::quantize_group(w, 3);
    CHECK(q.codes == std::vector<std::int8_t>{2, -3, 1});
    CHECK(q.scale == doctest::Approx(0.3).epsilon(1e-6));
    for (std::size_t i = 0; i < w.size(); ++i) {
        CHECK(static_cast<double>(q.codes[i]) * q.scale ==
              doctest::Approx(w[i]).epsilon(1e-6));
    }
}

TEST_CASE("quantize_group zero vector") {
    const std::vector<double> w(4, 0.0);
    const auto q = astroq::quantize_group(w, 4);
    CHECK(q.scale == 0.0);
    for (auto c : q.codes) {
        CHECK(c == 0);
    }
}

TEST_CASE("quantize_group symmetric extremes never saturate the low clamp") {
    // scale = 1.0, so -1.0 maps to code -1, inside [-2, 1]
    const std::vector<double> w = {-1.0, 1.0};
    const auto q = astroq::quantize_group(w, 2);
    CHECK(q.scale == 1.0);
    CHECK(q.codes == std::vector<std::int8_t>{-1, 1});
}

TEST_CASE("rtn_quantize composes quantize_group") {
    DenseMatrix w(2, 1, {0.6, -0.9});
    const auto q = astroq::rtn_quantize(w, QuantConfig{3, 2});
    CHECK(q.codes(0, 0) == 2);
    CHECK(q.codes(1, 0) == -3);
    CHECK(q.scales(0, 0) == doctest::Approx(0.3).epsilon(1e-6));

    const DenseMatrix dq = astroq::dequantize(q);
    CHECK(dq(0, 0) == doctest::Approx(0.6).epsilon(1e-6));
    CHECK(dq(1, 0) == doctest::Approx(-0.9).epsilon(1e-6));
}

TEST_CASE("grid-representable weights dequantize exactly") {
    // both columns have max 1.5, so the scale is exactly 0.5 in f32 and
    // every entry is a multiple of it within the 3-bit range
    DenseMatrix w(4, 2, {1.5, -0.5, 0.5, 1.5, -1.5, 0.0, 1.0, -1.0});
    const auto q = astroq::rtn_quantize(w, QuantConfig{3, 4});
    const DenseMatrix dq = astroq::dequantize(q);
    for (std::size_t i = 0; i < w.data().size(); ++i) {
        CHECK(dq.data()[i] == w.data()[i]);
    }
}

TEST_CASE("all-zero codes dequantize to the exact zero matrix") {
    const auto q = astroq::rtn_quantize(DenseMatrix(8, 3), QuantConfig{3, 4});
    const DenseMatrix dq = astroq::dequantize(q);
    for (double v : dq.data()) {
        CHECK(v == 0.0);
    }
    for (double s : q.scales.data()) {
        CHECK(s == 0.0);
    }
}

TEST_CASE("per-element error is at most half the group scale") {
    oracles::TestRng rng(21);
    DenseMatrix w = oracles::random_matrix(rng, 128, 4, 1.7);
    const QuantConfig cfg{4, 64};
    const auto q = astroq::rtn_quantize(w, cfg);
    const DenseMatrix dq = astroq::dequantize(q);
    const auto scheme = q.scheme();
    for (std::size_t i = 0; i < w.rows(); ++i) {
        for (std::size_t j = 0; j < w.cols(); ++j) {
            const double s = q.scales(scheme.group_of(i), j);
            CHECK(std::fabs(w(i, j) - dq(i, j)) <= s / 2.0 + 1e-15);
        }
    }
}

TEST_CASE("the extreme element of each group maps to +-qmax") {
    oracles::TestRng rng(31);
    DenseMatrix w = oracles::random_matrix(rng, 64, 3);
    const QuantConfig cfg{3, 16};
    const auto q = astroq::rtn_quantize(w, cfg);
    const auto scheme = q.scheme();
    for (std::size_t j = 0; j < w.cols(); ++j) {
        for (std::size_t k = 0; k < scheme.num_groups; ++k) {
            double best = 0.0;
            std::size_t best_i = 0;
            for (std::size_t r = 0; r < cfg.group_size; ++r) {
                const std::size_t i = scheme.group_begin(k) + r;
                if (std::fabs(w(i, j)) > best) {
                    best = std::fabs(w(i, j));
                    best_i = i;
                }
            }
            const int code = q.codes(best_i, j);
            CHECK(std::abs(code) == cfg.qmax());
            CHECK((code > 0) == (w(best_i, j) > 0));
        }
    }
}

TEST_CASE("quantization is idempotent on its own output") {
    oracles::TestRng rng(41);
    DenseMatrix w = oracles::random_matrix(rng, 32, 4, 2.5);
    const QuantConfig cfg{3, 8};
    const auto q1 = astroq::rtn_quantize(w, cfg);
    const DenseMatrix dq1 = astroq::dequantize(q1);
    const auto q2 = astroq::rtn_quantize(dq1, cfg);
    CHECK(q1.codes.data == q2.codes.data);
    CHECK(q1.scales.data() == q2.scales.data());
    const DenseMatrix dq2 = astroq::dequantize(q2);
    CHECK(dq1.data() == dq2.data());
}

TEST_CASE("determinism: identical inputs give identical codes") {
    oracles::TestRng rng(51);
    DenseMatrix w = oracles::random_matrix(rng, 64, 2);
    const auto a = astroq::rtn_quantize(w, QuantConfig{4, 32});
    const auto b = astroq::rtn_quantize(w, QuantConfig{4, 32});
    CHECK(a.codes.data == b.codes.data);
    CHECK(a.scales.data() == b.scales.data());
}

TEST_CASE("indivisible group size is a configuration error naming both sizes") {
    DenseMatrix w(10, 1);
    try {
        (void)astroq::rtn_quantize(w, QuantConfig{3, 4});
        FAIL("expected ConfigError");
    } catch (const astroq::ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("10") != std::string::npos);
        CHECK(msg.find('4') != std::string::npos);
    }
}

TEST_CASE("bit-width outside [2, 8] is rejected") {
    DenseMatrix w(4, 1);
    CHECK_THROWS_AS((void)astroq::rtn_quantize(w, QuantConfig{1, 4}),
                    astroq::ConfigError);
    CHECK_THROWS_AS((void)astroq::rtn_quantize(w, QuantConfig{9, 4}),
                    astroq::ConfigError);
}

TEST_CASE("rounding ties go half away from zero") {
    // scale 1.0 exactly; 0.5 -> 1, -0.5 -> -1, 2.5 -> 3 (qmax for b=3)
    const std::vector<double> w = {3.0, 0.5, -0.5, 2.5};
    const auto q = astroq::quantize_group(w, 3);
    CHECK(q.scale == 1.0);
    CHECK(q.codes == std::vector<std::int8_t>{3, 1, -1, 3});
}
