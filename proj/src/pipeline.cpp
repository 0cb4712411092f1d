// SPDX-License-Identifier: Apache-2.0
#include "astroq/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "astroq/errors.hpp"
#include "astroq/gptq.hpp"
#include "astroq/reg.hpp"

namespace astroq {

using ordered_json = nlohmann::ordered_json;

std::string to_string(Mode m) {
    switch (m) {
    case Mode::astro: return "astro";
    case Mode::uniform: return "uniform";
    case Mode::none: return "none";
    }
    return "unknown";
}

std::string to_string(Backend b) {
    return b == Backend::rtn ? "rtn" : "gptq";
}

Mode mode_from_string(const std::string& s) {
    if (s == "astro") return Mode::astro;
    if (s == "uniform") return Mode::uniform;
    if (s == "none") return Mode::none;
    throw ConfigError("unknown mode '" + s + "' (expected astro|uniform|none)");
}

Backend backend_from_string(const std::string& s) {
    if (s == "rtn") return Backend::rtn;
    if (s == "gptq") return Backend::gptq;
    throw ConfigError("unknown backend '" + s + "' (expected rtn|gptq)");
}

namespace {

DenseMatrix load_named_matrix(const std::string& path, const std::string& name) {
    const std::vector<Tensor> tensors = read_container(path);
    for (const Tensor& t : tensors) {
        if (t.name == name) {
            return t.to_matrix();
        }
    }
    // fall back to the only 2-D float tensor in the file
    const Tensor* sole = nullptr;
    for (const Tensor& t : tensors) {
        if (t.dtype == DType::f32 && t.dims.size() == 2) {
            if (sole != nullptr) {
                throw FormatError("container '" + path + "': no tensor named '" +
                                  name + "' and multiple 2-D float32 candidates");
            }
            sole = &t;
        }
    }
    if (sole == nullptr) {
        throw FormatError("container '" + path + "': no tensor named '" + name +
                          "' and no 2-D float32 tensor to fall back on");
    }
    return sole->to_matrix();
}

std::string meta_json(const QuantizedLayer& q, const PipelineConfig& cfg) {
    ordered_json meta;
    meta["bits"] = q.config.bits;
    meta["group_size"] = q.config.group_size;
    meta["mode"] = to_string(cfg.mode);
    meta["backend"] = to_string(cfg.backend);
    meta["beta"] = cfg.beta;
    meta["iters"] = cfg.iters;
    meta["seed"] = cfg.seed;
    return meta.dump();
}

} // namespace

std::vector<Tensor> quantized_to_tensors(const QuantizedLayer& q,
                                         const PipelineConfig& cfg) {
    std::vector<Tensor> tensors;

    Tensor codes;
    codes.name = "codes";
    codes.dtype = DType::i8;
    codes.dims = {static_cast<std::uint32_t>(q.codes.rows),
                  static_cast<std::uint32_t>(q.codes.cols)};
    codes.i8 = q.codes.data;
    tensors.push_back(std::move(codes));

    tensors.push_back(Tensor::from_matrix("scales", q.scales));
    tensors.push_back(Tensor::from_bytes("meta", meta_json(q, cfg)));
    return tensors;
}

QuantizedLayer quantized_from_tensors(const std::vector<Tensor>& tensors,
                                      std::size_t group_size) {
    const Tensor& codes = find_tensor(tensors, "codes");
    const Tensor& scales = find_tensor(tensors, "scales");
    const Tensor& meta = find_tensor(tensors, "meta");
    if (codes.dtype != DType::i8 || codes.dims.size() != 2) {
        throw FormatError("quantized container: 'codes' must be 2-D int8");
    }

    std::string meta_str(meta.i8.begin(), meta.i8.end());
    int bits = 0;
    try {
        const auto parsed = nlohmann::json::parse(meta_str);
        bits = parsed.at("bits").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("quantized container: bad meta entry: ") +
                          e.what());
    }

    QuantizedLayer q;
    q.config.bits = bits;
    q.config.group_size = group_size;
    q.config.validate();
    q.codes = CodeMatrix(codes.dims[0], codes.dims[1]);
    q.codes.data = codes.i8;
    q.scales = scales.to_matrix();

    const GroupScheme scheme = GroupScheme::create(q.codes.rows, group_size);
    if (q.scales.rows() != scheme.num_groups || q.scales.cols() != q.codes.cols) {
        throw ConfigError("quantized container: scales shape " +
                          std::to_string(q.scales.rows()) + "x" +
                          std::to_string(q.scales.cols()) +
                          " does not match codes with group size " +
                          std::to_string(group_size));
    }
    for (std::int8_t c : q.codes.data) {
        if (c < q.config.qmin() || c > q.config.qmax()) {
            throw FormatError("quantized container: code " + std::to_string(c) +
                              " outside the " + std::to_string(bits) +
                              "-bit clamp range");
        }
    }
    return q;
}

std::string report_to_json(const LayerReport& report, const PipelineConfig& cfg,
                           std::size_t rows, std::size_t c_in,
                           std::size_t c_out) {
    ordered_json j;
    j["recon_error"] = report.recon_error;
    j["bound"] = report.bound;
    j["fidelity_ratio"] = report.fidelity_ratio;
    j["group_stats"] = ordered_json::array();
    for (const GroupStat& gs : report.group_stats) {
        ordered_json g;
        g["k"] = gs.k;
        g["activation_norm"] = gs.activation_norm;
        g["alpha"] = gs.alpha;
        g["max_abs_before"] = gs.max_abs_before;
        g["max_abs_after"] = gs.max_abs_after;
        g["reduction_pct"] = gs.reduction_pct;
        j["group_stats"].push_back(std::move(g));
    }
    ordered_json c;
    c["bits"] = report.bits;
    c["group_size"] = report.group_size;
    c["num_groups"] = report.num_groups;
    c["rows"] = rows;
    c["c_in"] = c_in;
    c["c_out"] = c_out;
    c["mode"] = to_string(cfg.mode);
    c["backend"] = to_string(cfg.backend);
    c["beta"] = cfg.beta;
    c["iters"] = cfg.iters;
    c["seed"] = cfg.seed;
    c["damping_ratio"] = cfg.damping_ratio;
    c["step_size_scale"] = cfg.step_size_scale;
    j["config"] = std::move(c);
    return j.dump(2) + "\n";
}

void write_text_atomic(const std::string& path, const std::string& text) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::runtime_error("cannot open '" + tmp + "' for writing");
        }
        out << text;
        if (!out) {
            throw std::runtime_error("write to '" + tmp + "' failed");
        }
    }
    std::filesystem::rename(tmp, path);
}

PipelineResult run_pipeline_in_memory(const PipelineConfig& cfg,
                                      const DenseMatrix& weights,
                                      const DenseMatrix& acts) {
    QuantConfig qcfg{cfg.bits, cfg.group_size};
    qcfg.validate();
    if (acts.cols() != weights.rows()) {
        throw ConfigError("pipeline: activation columns (" +
                          std::to_string(acts.cols()) +
                          ") do not match weight rows (" +
                          std::to_string(weights.rows()) + ")");
    }
    const GroupScheme scheme = GroupScheme::create(weights.rows(), cfg.group_size);

    PipelineResult result;
    result.weights_orig = weights;

    AlphaVector alpha;
    if (cfg.mode == Mode::astro) {
        alpha = compute_alpha(acts, scheme, RegMode::astro);
    } else {
        alpha.values.assign(scheme.num_groups, 1.0);
    }

    if (cfg.mode == Mode::none) {
        result.weights_new = weights;
    } else {
        RegConfig reg{cfg.beta, cfg.iters,
                      cfg.mode == Mode::astro ? RegMode::astro : RegMode::uniform,
                      cfg.step_size_scale};
        result.weights_new = reconstruct_layer(acts, weights, scheme, reg).weights;
    }

    result.quantized = cfg.backend == Backend::rtn
                           ? rtn_quantize(result.weights_new, qcfg)
                           : gptq_quantize(result.weights_new, acts, qcfg,
                                           cfg.damping_ratio);
    result.report = layer_report(acts, weights, result.weights_new,
                                 result.quantized, alpha, scheme);
    return result;
}

PipelineResult run_pipeline(const PipelineConfig& cfg,
                            const std::optional<std::string>& weights_path,
                            const std::optional<std::string>& acts_path,
                            const std::string& out_path,
                            const std::string& report_path) {
    DenseMatrix weights;
    DenseMatrix acts;
    if (weights_path.has_value() != acts_path.has_value()) {
        throw ConfigError("pipeline: weights and activations must either both "
                          "come from files or both be synthesized");
    }
    if (weights_path.has_value()) {
        weights = load_named_matrix(*weights_path, "weights");
        acts = load_named_matrix(*acts_path, "acts");
    } else {
        SynthData synth = gen_synthetic(cfg.synth, cfg.seed);
        weights = std::move(synth.weights);
        acts = std::move(synth.acts);
    }

    PipelineResult result = run_pipeline_in_memory(cfg, weights, acts);
    write_container(quantized_to_tensors(result.quantized, cfg), out_path);
    write_text_atomic(report_path,
                      report_to_json(result.report, cfg, acts.rows(),
                                     weights.rows(), weights.cols()));
    return result;
}

LayerReport analyze_files(const std::string& weights_path,
                          const std::string& acts_path,
                          const std::string& quantized_path,
                          std::size_t group_size,
                          const std::string& report_path) {
    const DenseMatrix weights = load_named_matrix(weights_path, "weights");
    const DenseMatrix acts = load_named_matrix(acts_path, "acts");
    const std::vector<Tensor> tensors = read_container(quantized_path);
    const QuantizedLayer q = quantized_from_tensors(tensors, group_size);

    if (q.codes.rows != weights.rows() || q.codes.cols != weights.cols()) {
        throw ConfigError("analyze: quantized shape " +
                          std::to_string(q.codes.rows) + "x" +
                          std::to_string(q.codes.cols) +
                          " does not match weights " +
                          std::to_string(weights.rows()) + "x" +
                          std::to_string(weights.cols()));
    }
    const GroupScheme scheme = GroupScheme::create(weights.rows(), group_size);

    PipelineConfig cfg;
    cfg.bits = q.config.bits;
    cfg.group_size = group_size;
    std::string meta_str;
    {
        const Tensor& meta = find_tensor(tensors, "meta");
        meta_str.assign(meta.i8.begin(), meta.i8.end());
    }
    AlphaVector alpha;
    alpha.values.assign(scheme.num_groups, 1.0);
    try {
        const auto parsed = nlohmann::json::parse(meta_str);
        cfg.mode = mode_from_string(parsed.value("mode", "none"));
        cfg.backend = backend_from_string(parsed.value("backend", "rtn"));
        cfg.beta = parsed.value("beta", cfg.beta);
        cfg.iters = parsed.value("iters", cfg.iters);
        cfg.seed = parsed.value("seed", cfg.seed);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("analyze: bad meta entry: ") + e.what());
    }
    if (cfg.mode == Mode::astro) {
        alpha = compute_alpha(acts, scheme, RegMode::astro);
    }

    // The container stores only codes and scales, so the dequantized matrix
    // stands in for the reconstructed weights.
    const DenseMatrix dq = dequantize(q);
    const LayerReport report = layer_report(acts, weights, dq, q, alpha, scheme);
    write_text_atomic(report_path,
                      report_to_json(report, cfg, acts.rows(), weights.rows(),
                                     weights.cols()));
    return report;
}

} // namespace astroq
