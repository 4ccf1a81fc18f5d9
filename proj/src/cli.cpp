#include "hsir/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "hsir/cube.hpp"
#include "hsir/degradation.hpp"
#include "hsir/errors.hpp"
#include "hsir/metrics.hpp"
#include "hsir/run_config.hpp"
#include "hsir/sampler.hpp"
#include "hsir/synth.hpp"
#include "hsir/vs2m.hpp"

namespace hsir {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

CubeDims parse_dims(const std::string& text) {
    CubeDims d;
    char x1 = 0, x2 = 0;
    char tail = 0;
    if (std::sscanf(text.c_str(), "%zu%c%zu%c%zu%c", &d.rows, &x1, &d.cols, &x2, &d.bands, &tail) != 5 || x1 != 'x' ||
        x2 != 'x') {
        throw ContractError("--dims expects IxJxK, got '" + text + "'");
    }
    if (d.size() == 0) throw ContractError("--dims must be positive");
    return d;
}

std::string format_metric(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

fs::path sidecar_for(const fs::path& obs) { return fs::path(obs.string() + ".json"); }

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

HSICube as_unit(const HSICube& cube) {
    return cube.range() == RangeTag::unit01 ? cube : signed_to_unit_clamped(cube);
}

// ---------------------------------------------------------------------------

struct SynthArgs {
    std::string dims = "32x32x8";
    std::size_t rank = 3;
    double smoothness = 3.0;
    std::uint64_t seed = 0;
    std::string out;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
    SynthSpec spec;
    spec.dims = parse_dims(a.dims);
    spec.rank = a.rank;
    spec.smoothness = a.smoothness;
    spec.seed = a.seed;
    const auto scene = make_synthetic(spec);

    const fs::path path(a.out);
    save_cube(scene.cube, path);

    std::vector<double> abundance_values;
    for (const auto& s : scene.abundances) abundance_values.insert(abundance_values.end(), s.begin(), s.end());
    const CubeDims abundance_dims{spec.dims.rows, spec.dims.cols, spec.rank};
    std::vector<double> clamped(abundance_values.size());
    for (std::size_t n = 0; n < clamped.size(); ++n) clamped[n] = std::clamp(abundance_values[n], 0.0, 1.0);
    save_cube(HSICube::from_doubles(abundance_dims, RangeTag::unit01, clamped), path.string() + ".abund.hsic");
    write_text(path.string() + ".endmembers.json", json{{"endmembers", scene.endmembers}}.dump(2) + "\n");

    out << "wrote " << path.string() << " (" << to_string(spec.dims) << ", rank " << spec.rank << ")\n";
    return exit_ok;
}

// ---------------------------------------------------------------------------

struct DegradeArgs {
    std::string gt;
    std::string task = "denoise";
    double sigma = 0.1;
    double rate = 0.3;
    std::size_t scale = 2;
    std::uint64_t seed = 0;
    std::string out;
    std::string mask_out;
};

int cmd_degrade(const DegradeArgs& a, std::ostream& out) {
    const Task task = parse_task(a.task);
    if (!(a.sigma >= 0.0)) throw ContractError("--sigma must be >= 0");
    const auto gt = load_cube(a.gt);
    if (gt.range() != RangeTag::unit01) throw ContractError("ground truth must be a unit01 cube");
    const auto x = scale_to_signed(gt).to_doubles();
    const NoiseSpec noise{2.0 * a.sigma, a.seed};
    const fs::path obs_path(a.out);

    json sidecar;
    sidecar["task"] = to_string(task);
    sidecar["sigma"] = a.sigma;
    sidecar["sigma_y"] = noise.sigma_y;
    sidecar["seed"] = a.seed;
    sidecar["dims"] = {gt.dims().rows, gt.dims().cols, gt.dims().bands};

    switch (task) {
    case Task::denoise: {
        const auto op = DegradationOperator::denoise(gt.dims());
        const auto y = add_noise(op.apply(x), noise);
        save_cube(HSICube::from_doubles(gt.dims(), RangeTag::raw, y), obs_path);
        break;
    }
    case Task::complete: {
        const auto mask = make_bernoulli_mask(gt.dims(), a.rate, a.seed);
        const auto op = DegradationOperator::completion(gt.dims(), mask);
        const auto y = add_noise(op.apply(x), noise);
        save_cube(HSICube::from_doubles(gt.dims(), RangeTag::raw, op.apply_transpose(y)), obs_path);
        const fs::path mask_path = a.mask_out.empty() ? fs::path(obs_path.string() + ".mask.hsic") : fs::path(a.mask_out);
        std::vector<float> mask_values(mask.begin(), mask.end());
        save_cube(HSICube(gt.dims(), RangeTag::unit01, std::move(mask_values)), mask_path);
        sidecar["rate"] = a.rate;
        sidecar["mask"] = fs::absolute(mask_path).string();
        break;
    }
    case Task::sr: {
        const auto op = DegradationOperator::sr_block(gt.dims(), a.scale);
        const auto y = add_noise(op.apply(x), noise);
        save_cube(HSICube::from_doubles(op.output_dims(), RangeTag::raw, y), obs_path);
        sidecar["scale"] = a.scale;
        break;
    }
    }
    write_text(sidecar_for(obs_path), sidecar.dump(2) + "\n");
    out << "wrote " << obs_path.string() << " (" << to_string(task) << ")\n";
    return exit_ok;
}

// ---------------------------------------------------------------------------

struct RestoreArgs {
    std::string obs;
    std::string sidecar;
    std::string config;
    std::string out;
    std::string checkpoint;
    bool ablate_no_diffusion = false;
    bool print_config = false;
};

int cmd_restore(const RestoreArgs& a, std::ostream& out, std::ostream& err) {
    RunConfig cfg = a.config.empty() ? RunConfig{} : load_run_config(a.config);
    if (a.print_config) {
        out << format_run_config(cfg);
        return exit_ok;
    }
    if (a.obs.empty() || a.out.empty()) throw ContractError("restore needs --obs and -o");

    const fs::path obs_path(a.obs);
    const fs::path sidecar_path = a.sidecar.empty() ? sidecar_for(obs_path) : fs::path(a.sidecar);
    std::ifstream sidecar_in(sidecar_path);
    if (!sidecar_in) throw ParseError("cannot open sidecar " + sidecar_path.string());
    json sidecar;
    try {
        sidecar = json::parse(sidecar_in);
    } catch (const json::exception& e) {
        throw ParseError("sidecar " + sidecar_path.string() + ": " + e.what());
    }

    Task task;
    CubeDims dims;
    std::size_t scale = 0;
    std::string mask_path;
    try {
        task = parse_task(sidecar.at("task").get<std::string>());
        const auto d = sidecar.at("dims");
        dims = {d.at(0).get<std::size_t>(), d.at(1).get<std::size_t>(), d.at(2).get<std::size_t>()};
        cfg.sigma = sidecar.at("sigma").get<double>();
        if (task == Task::sr) scale = sidecar.at("scale").get<std::size_t>();
        if (task == Task::complete) mask_path = sidecar.at("mask").get<std::string>();
    } catch (const json::exception& e) {
        throw ParseError("sidecar " + sidecar_path.string() + ": " + e.what());
    }
    if (cfg.explicit_keys.count("task") && cfg.task != task) {
        throw ContractError("config task '" + std::string(to_string(cfg.task)) + "' does not match observation task '" +
                            std::string(to_string(task)) + "'");
    }
    cfg.adopt_task(task);
    const auto sampler_cfg = cfg.sampler_config();
    sampler_cfg.validate();

    const auto obs = load_cube(obs_path);
    std::optional<DegradationOperator> op;
    std::vector<double> y;
    switch (task) {
    case Task::denoise:
        if (obs.dims() != dims) throw ContractError("observation dims do not match sidecar");
        op = DegradationOperator::denoise(dims);
        y = obs.to_doubles();
        break;
    case Task::complete: {
        if (obs.dims() != dims) throw ContractError("observation dims do not match sidecar");
        const auto mask_cube = load_cube(mask_path);
        if (mask_cube.dims() != dims) throw ContractError("mask dims do not match sidecar");
        std::vector<std::uint8_t> mask(mask_cube.values().size());
        for (std::size_t n = 0; n < mask.size(); ++n) mask[n] = mask_cube.values()[n] > 0.5f ? 1 : 0;
        op = DegradationOperator::completion(dims, mask);
        y = op->apply(obs.to_doubles());
        break;
    }
    case Task::sr:
        op = DegradationOperator::sr_block(dims, scale);
        if (obs.dims() != op->output_dims()) throw ContractError("observation dims do not match scale");
        y = obs.to_doubles();
        break;
    }

    const ProgressFn progress = [&err](const Progress& p) {
        char line[128];
        std::snprintf(line, sizeof line, "t=%zu loss=%.6g elapsed=%.3f\n", p.t, p.loss, p.elapsed_seconds);
        err << line;
    };
    const auto result = a.ablate_no_diffusion ? restore_no_diffusion(y, *op, sampler_cfg, std::nullopt, progress)
                                              : restore(y, *op, sampler_cfg, progress);

    const auto restored = scale_to_unit(HSICube::from_doubles(dims, RangeTag::signed11, result.x));
    save_cube(restored, a.out);
    if (!a.checkpoint.empty()) save_checkpoint(result.model, a.checkpoint);
    out << "wrote " << a.out << "\n";
    return exit_ok;
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
    std::string ref;
    std::string est;
    bool per_cube = false;
};

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
    const auto ref = as_unit(load_cube(a.ref));
    const auto est = as_unit(load_cube(a.est));
    if (ref.dims() != est.dims()) {
        throw ContractError("dims mismatch: " + to_string(ref.dims()) + " vs " + to_string(est.dims()));
    }
    const auto report = evaluate(ref, est);
    if (a.per_cube) {
        out << "PSNR=" << format_metric(psnr_cube(ref, est)) << " MSSIM=" << format_metric(report.mssim) << "\n";
    } else {
        out << "MPSNR=" << format_metric(report.mpsnr) << " MSSIM=" << format_metric(report.mssim) << "\n";
    }
    return exit_ok;
}

struct ExportArgs {
    std::string cube;
    std::size_t band = 0;
    std::string out;
};

int cmd_export_png(const ExportArgs& a, std::ostream& out) {
    const auto cube = as_unit(load_cube(a.cube));
    export_band_png(cube, a.band, a.out);
    out << "wrote " << a.out << "\n";
    return exit_ok;
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Hyperspectral cube restoration by self-supervised reverse diffusion"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic low-rank ground-truth cube");
    synth_cmd->add_option("--dims", synth.dims, "IxJxK")->capture_default_str();
    synth_cmd->add_option("--rank", synth.rank, "Number of endmembers")->capture_default_str();
    synth_cmd->add_option("--smoothness", synth.smoothness, "Abundance blur std (pixels)")->capture_default_str();
    synth_cmd->add_option("--seed", synth.seed)->capture_default_str();
    synth_cmd->add_option("-o,--out", synth.out, "Output cube")->required();

    DegradeArgs degrade;
    auto* degrade_cmd = app.add_subcommand("degrade", "Apply a degradation and noise to a ground-truth cube");
    degrade_cmd->add_option("--gt", degrade.gt, "Ground-truth cube (unit01)")->required();
    degrade_cmd->add_option("--task", degrade.task, "denoise | complete | sr")->capture_default_str();
    degrade_cmd->add_option("--sigma", degrade.sigma, "Noise std in [0,1] units")->capture_default_str();
    degrade_cmd->add_option("--rate", degrade.rate, "Completion sampling rate")->capture_default_str();
    degrade_cmd->add_option("--scale", degrade.scale, "Super-resolution factor (2, 4, 8)")->capture_default_str();
    degrade_cmd->add_option("--seed", degrade.seed)->capture_default_str();
    degrade_cmd->add_option("-o,--out", degrade.out, "Observation cube")->required();
    degrade_cmd->add_option("--mask-out", degrade.mask_out, "Mask path (completion)");

    RestoreArgs restore_args;
    auto* restore_cmd = app.add_subcommand("restore", "Restore an observation");
    restore_cmd->add_option("--obs", restore_args.obs, "Observation cube");
    restore_cmd->add_option("--sidecar", restore_args.sidecar, "Observation sidecar (default <obs>.json)");
    restore_cmd->add_option("--config", restore_args.config, "key=value run configuration");
    restore_cmd->add_option("-o,--out", restore_args.out, "Restored cube (unit01)");
    restore_cmd->add_option("--checkpoint", restore_args.checkpoint, "Write final generator parameters here");
    restore_cmd->add_flag("--ablate-no-diffusion", restore_args.ablate_no_diffusion,
                          "Fit the generators directly to the observation");
    restore_cmd->add_flag("--print-config", restore_args.print_config, "Print the effective configuration and exit");

    EvaluateArgs evaluate_args;
    auto* evaluate_cmd = app.add_subcommand("evaluate", "MPSNR / MSSIM of an estimate against a reference");
    evaluate_cmd->add_option("--ref", evaluate_args.ref)->required();
    evaluate_cmd->add_option("--est", evaluate_args.est)->required();
    evaluate_cmd->add_flag("--per-cube", evaluate_args.per_cube, "PSNR from a single MSE over all voxels");

    ExportArgs export_args;
    auto* export_cmd = app.add_subcommand("export-png", "Write one band as an 8-bit grayscale PNG");
    export_cmd->add_option("--cube", export_args.cube)->required();
    export_cmd->add_option("--band", export_args.band)->capture_default_str();
    export_cmd->add_option("-o,--out", export_args.out)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // Prints the help of the subcommand that asked for it, or the error.
        return app.exit(e, out, err) == 0 ? exit_ok : exit_usage;
    }

    try {
        if (synth_cmd->parsed()) return cmd_synth(synth, out);
        if (degrade_cmd->parsed()) return cmd_degrade(degrade, out);
        if (restore_cmd->parsed()) return cmd_restore(restore_args, out, err);
        if (evaluate_cmd->parsed()) return cmd_evaluate(evaluate_args, out);
        if (export_cmd->parsed()) return cmd_export_png(export_args, out);
    } catch (const InfeasibleConfigError& e) {
        err << "infeasible configuration: sigma_t0 = " << e.sigma_t0() << " < sigma_y / s_i = " << e.sigma_y_over_s()
            << "\n  " << e.what() << "\n";
        return exit_infeasible;
    } catch (const ContractError& e) {
        err << "error: " << e.what() << "\n";
        return exit_usage;
    } catch (const ParseError& e) {
        err << "error: " << e.what() << "\n";
        return exit_usage;
    } catch (const BoundsError& e) {
        err << "error: " << e.what() << "\n";
        return exit_usage;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return exit_internal;
    }
    return exit_usage;
}

} // namespace hsir
