// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "astroq/analysis.hpp"
#include "astroq/container.hpp"
#include "astroq/synth.hpp"

namespace astroq {

enum class Mode { astro, uniform, none };
enum class Backend { rtn, gptq };

std::string to_string(Mode m);
std::string to_string(Backend b);
Mode mode_from_string(const std::string& s);
Backend backend_from_string(const std::string& s);

struct PipelineConfig {
    int bits = 3;
    std::size_t group_size = 128;
    double beta = 3e-5;
    std::size_t iters = 200;
    Mode mode = Mode::astro;
    Backend backend = Backend::rtn;
    double damping_ratio = 0.01;
    double step_size_scale = 1.0;
    std::uint64_t seed = 0;
    SynthParams synth;
};

struct PipelineResult {
    DenseMatrix weights_orig;
    DenseMatrix weights_new;
    QuantizedLayer quantized;
    LayerReport report;
};

/// End-to-end run: load (or generate) -> compute scheme and alpha ->
/// reconstruct (skipped when mode == none) -> quantize with the chosen
/// backend -> write the quantized container ("codes", "scales" and a JSON
/// "meta" entry) -> write the report JSON. Outputs are written atomically.
PipelineResult run_pipeline(const PipelineConfig& cfg,
                            const std::optional<std::string>& weights_path,
                            const std::optional<std::string>& acts_path,
                            const std::string& out_path,
                            const std::string& report_path);

/// In-memory variant used by run_pipeline and the tests; performs no I/O.
PipelineResult run_pipeline_in_memory(const PipelineConfig& cfg,
                                      const DenseMatrix& weights,
                                      const DenseMatrix& acts);

/// Report-only run on existing artifacts. The quantized container does not
/// retain the reconstructed full-precision weights, so the dequantized
/// matrix stands in for them in the report.
LayerReport analyze_files(const std::string& weights_path,
                          const std::string& acts_path,
                          const std::string& quantized_path,
                          std::size_t group_size,
                          const std::string& report_path);

/// Report + config serialization (UTF-8 JSON, stable key order).
std::string report_to_json(const LayerReport& report, const PipelineConfig& cfg,
                           std::size_t rows, std::size_t c_in,
                           std::size_t c_out);

void write_text_atomic(const std::string& path, const std::string& text);

/// Quantized-layer container round-trip used by the pipeline and `analyze`.
std::vector<Tensor> quantized_to_tensors(const QuantizedLayer& q,
                                         const PipelineConfig& cfg);
QuantizedLayer quantized_from_tensors(const std::vector<Tensor>& tensors,
                                      std::size_t group_size);

} // namespace astroq
