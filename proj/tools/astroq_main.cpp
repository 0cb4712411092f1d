// SPDX-License-Identifier: Apache-2.0
//
// astroq: weight-only post-training quantization with activation-guided
// outlier suppression. Subcommands: quantize, analyze, gen-synth, project-l1.

#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "astroq/container.hpp"
#include "astroq/errors.hpp"
#include "astroq/pipeline.hpp"
#include "astroq/reg.hpp"
#include "astroq/synth.hpp"

namespace {

struct QuantizeArgs {
    std::string weights;
    std::string acts;
    bool synth = false;
    std::string mode = "astro";
    std::string backend = "rtn";
    std::string out;
    std::string report;
    astroq::PipelineConfig cfg;
};

struct GenSynthArgs {
    astroq::SynthParams params;
    std::uint64_t seed = 0;
    std::string out_weights;
    std::string out_acts;
};

struct ProjectArgs {
    std::string input;
    double radius = 1.0;
    std::string out;
};

struct AnalyzeArgs {
    std::string weights;
    std::string acts;
    std::string quantized;
    std::size_t group = 128;
    std::string report;
};

void add_synth_flags(CLI::App* cmd, astroq::SynthParams& p) {
    cmd->add_option("--rows", p.rows, "Calibration rows N")
        ->capture_default_str();
    cmd->add_option("--cin", p.c_in, "Input channels C_in")
        ->capture_default_str();
    cmd->add_option("--cout", p.c_out, "Output channels C_out")
        ->capture_default_str();
    cmd->add_option("--outlier-frac", p.outlier_channel_fraction,
                    "Fraction of activation channels boosted")
        ->capture_default_str();
    cmd->add_option("--outlier-scale", p.outlier_scale,
                    "Scale applied to boosted channels")
        ->capture_default_str();
    cmd->add_option("--weight-tail", p.weight_tail,
                    "Probability of the x8 heavy-tail weight mixture")
        ->capture_default_str();
}

int run_quantize(const QuantizeArgs& args) {
    astroq::PipelineConfig cfg = args.cfg;
    cfg.mode = astroq::mode_from_string(args.mode);
    cfg.backend = astroq::backend_from_string(args.backend);

    std::optional<std::string> weights_path;
    std::optional<std::string> acts_path;
    if (!args.synth) {
        if (args.weights.empty() || args.acts.empty()) {
            throw astroq::ConfigError(
                "quantize: provide --weights and --acts, or --synth");
        }
        weights_path = args.weights;
        acts_path = args.acts;
    }
    astroq::run_pipeline(cfg, weights_path, acts_path, args.out, args.report);
    return 0;
}

int run_gen_synth(const GenSynthArgs& args) {
    const astroq::SynthData data = astroq::gen_synthetic(args.params, args.seed);
    astroq::write_container({astroq::Tensor::from_matrix("weights", data.weights)},
                            args.out_weights);
    astroq::write_container({astroq::Tensor::from_matrix("acts", data.acts)},
                            args.out_acts);
    return 0;
}

int run_project_l1(const ProjectArgs& args) {
    const std::vector<astroq::Tensor> tensors =
        astroq::read_container(args.input);
    const astroq::Tensor* input = nullptr;
    for (const astroq::Tensor& t : tensors) {
        if (t.dtype == astroq::DType::f32) {
            input = &t;
            break;
        }
    }
    if (input == nullptr) {
        throw astroq::FormatError("project-l1: no float32 tensor in '" +
                                  args.input + "'");
    }
    std::vector<double> v(input->f32.begin(), input->f32.end());
    const std::vector<double> w = astroq::project_l1_ball(v, args.radius);

    astroq::Tensor out;
    out.name = "projected";
    out.dtype = astroq::DType::f32;
    out.dims = {static_cast<std::uint32_t>(w.size())};
    out.f32.assign(w.begin(), w.end());
    astroq::write_container({out}, args.out);
    return 0;
}

int run_analyze(const AnalyzeArgs& args) {
    astroq::analyze_files(args.weights, args.acts, args.quantized, args.group,
                          args.report);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Group-wise weight quantization with activation-guided "
                 "outlier suppression"};
    app.require_subcommand(1);

    QuantizeArgs q;
    CLI::App* quantize =
        app.add_subcommand("quantize", "Reconstruct, quantize and report");
    auto* weights_opt =
        quantize->add_option("--weights", q.weights, "Weights container (float32)");
    auto* acts_opt =
        quantize->add_option("--acts", q.acts, "Calibration activations container");
    quantize->add_flag("--synth", q.synth, "Generate synthetic weights/acts")
        ->excludes(weights_opt)
        ->excludes(acts_opt);
    quantize->add_option("--bits", q.cfg.bits, "Bit-width b in [2, 8]")
        ->capture_default_str();
    quantize->add_option("--group", q.cfg.group_size, "Group size g")
        ->capture_default_str();
    quantize
        ->add_option("--mode", q.mode,
                     "Regularization mode: astro|uniform|none")
        ->check(CLI::IsMember({"astro", "uniform", "none"}))
        ->capture_default_str();
    quantize->add_option("--backend", q.backend, "Quantizer backend: rtn|gptq")
        ->check(CLI::IsMember({"rtn", "gptq"}))
        ->capture_default_str();
    quantize->add_option("--beta", q.cfg.beta, "Regularization strength")
        ->capture_default_str();
    quantize->add_option("--iters", q.cfg.iters, "PGD iteration count")
        ->capture_default_str();
    quantize->add_option("--damping", q.cfg.damping_ratio, "GPTQ damping ratio")
        ->capture_default_str();
    quantize->add_option("--step-scale", q.cfg.step_size_scale,
                         "Multiplier on the 1/lambda_max step size")
        ->capture_default_str();
    quantize->add_option("--seed", q.cfg.seed, "Seed for synthetic data")
        ->capture_default_str();
    add_synth_flags(quantize, q.cfg.synth);
    quantize->add_option("--out", q.out, "Quantized container output path")
        ->required();
    quantize->add_option("--report", q.report, "Report JSON output path")
        ->required();

    AnalyzeArgs a;
    CLI::App* analyze = app.add_subcommand(
        "analyze", "Report on existing weights/acts/quantized artifacts");
    analyze->add_option("--weights", a.weights, "Weights container")->required();
    analyze->add_option("--acts", a.acts, "Activations container")->required();
    analyze->add_option("--quantized", a.quantized, "Quantized container")
        ->required();
    analyze->add_option("--group", a.group, "Group size g")
        ->capture_default_str();
    analyze->add_option("--report", a.report, "Report JSON output path")
        ->required();

    GenSynthArgs g;
    CLI::App* gen = app.add_subcommand(
        "gen-synth", "Write a deterministic synthetic weights/acts pair");
    add_synth_flags(gen, g.params);
    gen->add_option("--seed", g.seed, "Generator seed")->capture_default_str();
    gen->add_option("--out-weights", g.out_weights, "Weights container path")
        ->required();
    gen->add_option("--out-acts", g.out_acts, "Activations container path")
        ->required();

    ProjectArgs p;
    CLI::App* proj = app.add_subcommand(
        "project-l1", "Project a vector onto the L1 ball of a given radius");
    proj->add_option("--input", p.input, "Input container (float32 vector)")
        ->required();
    proj->add_option("--radius", p.radius, "Ball radius (> 0)")
        ->capture_default_str();
    proj->add_option("--out", p.out, "Output container path")->required();

    CLI11_PARSE(app, argc, argv);

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        if (quantize->parsed()) {
            return run_quantize(q);
        }
        if (analyze->parsed()) {
            return run_analyze(a);
        }
        if (gen->parsed()) {
            return run_gen_synth(g);
        }
        if (proj->parsed()) {
            return run_project_l1(p);
        }
    } catch (const std::exception& e) {
        nlohmann::ordered_json err;
        err["error"] = e.what();
        err["command"] = command;
        std::cerr << err.dump() << "\n";
        return 1;
    }
    return 0;
}
