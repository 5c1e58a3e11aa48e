// SPDX-License-Identifier: MIT
//
// ganctl command-line interface.
//
//   ganctl train          one training run, trace to CSV/JSON
//   ganctl compare        ADAM vs LADAM sweep over base rates and seeds
//   ganctl simulate-sde   controlled training SDE, path to CSV
//   ganctl solve-hjb      learning-rate game value/policy on a grid
//   ganctl solve-batch-hjb  batch-size control value/policy on a grid
//   ganctl demo <name>    explosion | spiral | convexity | newton
//   ganctl divergence-check  learning-rate divergence thresholds
//
// Every config key can come from --config FILE (key = value lines) and be
// overridden by the flag of the same name. Exit codes: 0 success,
// 2 configuration error, 3 explosion, 4 CFL failure.
#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "ganctl/control.hpp"
#include "ganctl/demos.hpp"
#include "ganctl/harness.hpp"

using namespace ganctl;

namespace {

const std::vector<std::string> kConfigKeys = {
    "target",       "target_mean",  "target_std",   "target_shift", "target_dof",
    "train_size",   "optimizer",    "base_lr",      "u_min",        "u_max",
    "batch_x",      "batch_z",      "epochs",       "n_w_max",      "seed",
    "w0",           "theta0",       "band_lo",      "band_hi",      "sde_mode",
    "sde_horizon",  "sde_dt",       "eta_w",        "eta_theta",    "u_w",
    "u_theta",      "m_scale",      "sde_paths",    "fixed_batch",  "surface",
    "lq_alpha",     "lq_beta",      "lq_sigma_w",   "lq_sigma_theta",
    "hjb_w_lo",     "hjb_w_hi",     "hjb_n_w",      "hjb_theta_lo", "hjb_theta_hi",
    "hjb_n_theta",  "hjb_horizon",  "hjb_n_t",      "hjb_max_steps", "m_max",       "anchor_w",
    "anchor_theta", "slice_w_index", "slice_theta_index", "gamma",  "q_w",
    "q_theta",      "out",          "format"};

// Registers one string option per config key on the (sub)command; values
// apply to cfg in flag order, after any --config file has loaded.
void mirror_config_keys(CLI::App* cmd, ExperimentConfig& cfg) {
    for (const auto& key : kConfigKeys) {
        cmd->add_option_function<std::string>(
               "--" + key, [&cfg, key](const std::string& v) { apply_config_key(cfg, key, v); })
            ->group("Config keys");
    }
}

std::shared_ptr<const DriftDiffusionField> build_field(const ExperimentConfig& cfg,
                                                       std::uint64_t seed) {
    if (cfg.surface == "lq") {
        return std::make_shared<QuadraticField>(
            QuadraticSurface::scalar(-cfg.lq_alpha, cfg.lq_beta),
            Eigen::MatrixXd::Constant(1, 1, cfg.lq_sigma_w),
            Eigen::MatrixXd::Constant(1, 1, cfg.lq_sigma_theta));
    }
    // Frozen-batch slice of the toy model around the configured anchor.
    Batch batch;
    batch.xs = sample_dist(cfg.target, cfg.fixed_batch, Rng::stream(seed, 40).raw());
    batch.zs = sample_dist(DistSpec::standard_normal(), cfg.fixed_batch, Rng::stream(seed, 41).raw());
    auto slice = std::make_shared<SlicedSurface>(
        std::make_shared<VanillaGanSurface>(), ParamPoint{cfg.anchor_w, cfg.anchor_theta},
        cfg.slice_w_index, cfg.slice_theta_index);
    return std::make_shared<SurfaceField>(std::move(slice), std::move(batch));
}

std::ostream& open_out(std::ofstream& file, const std::string& path) {
    if (path.empty()) return std::cout;
    file.open(path, std::ios::binary);
    if (!file) throw ConfigError("cannot open output file '" + path + "'");
    return file;
}

GridSpec grid_from_config(const ExperimentConfig& cfg) {
    GridSpec spec;
    spec.w_lo = cfg.hjb_w_lo;
    spec.w_hi = cfg.hjb_w_hi;
    spec.n_w = cfg.hjb_n_w;
    spec.theta_lo = cfg.hjb_theta_lo;
    spec.theta_hi = cfg.hjb_theta_hi;
    spec.n_theta = cfg.hjb_n_theta;
    spec.horizon = cfg.hjb_horizon;
    spec.n_t = cfg.hjb_n_t;
    spec.max_time_steps = cfg.hjb_max_steps;
    return spec;
}

void write_solution(const HjbSolution& sol, const ExperimentConfig& cfg) {
    if (cfg.out_path.empty()) {
        write_value_grid_csv(sol.value, 0, std::cout);
        return;
    }
    std::ofstream value_out(cfg.out_path + ".value.csv", std::ios::binary);
    std::ofstream policy_out(cfg.out_path + ".policy.csv", std::ios::binary);
    if (!value_out || !policy_out)
        throw ConfigError("cannot open output files at '" + cfg.out_path + "'");
    write_value_grid_csv(sol.value, 0, value_out);
    write_control_field_csv(sol.policy, sol.value, 0, policy_out);
}

int run(int argc, char** argv) {
    CLI::App app{"stochastic-control toolkit for adaptive minimax training"};
    app.require_subcommand(1);
    ExperimentConfig cfg;

    // Config file loads before flag overrides, wherever it appears.
    std::string config_path;
    for (int i = 1; i + 1 < argc; ++i)
        if (std::string(argv[i]) == "--config") config_path = argv[i + 1];
    if (!config_path.empty()) cfg = load_config_file(config_path);

    std::string demo_name;
    auto* train_cmd = app.add_subcommand("train", "single training run");
    auto* compare_cmd = app.add_subcommand("compare", "ADAM vs LADAM sweep");
    auto* sde_cmd = app.add_subcommand("simulate-sde", "simulate the controlled training SDE");
    auto* hjb_cmd = app.add_subcommand("solve-hjb", "learning-rate game grid solve");
    auto* batch_cmd = app.add_subcommand("solve-batch-hjb", "batch-size control grid solve");
    auto* demo_cmd = app.add_subcommand("demo", "pedagogical reproductions");
    demo_cmd->add_option("name", demo_name, "explosion | spiral | convexity | newton")
        ->required();
    auto* div_cmd = app.add_subcommand("divergence-check", "learning-rate divergence thresholds");

    for (auto* cmd : {train_cmd, compare_cmd, sde_cmd, hjb_cmd, batch_cmd, demo_cmd, div_cmd}) {
        std::string ignored;
        cmd->add_option("--config", ignored, "config file (key = value lines)");
        mirror_config_keys(cmd, cfg);
    }

    app.parse(argc, argv);
    cfg.validate();
    std::ofstream file;

    if (*train_cmd) {
        const auto trace = run_training(cfg, cfg.optimizer, cfg.base_lrs.front(), cfg.seeds.front());
        if (!cfg.out_path.empty()) {
            emit(trace, cfg.format, cfg.out_path);
        } else if (cfg.format == "csv") {
            write_trace_csv(trace, std::cout);
        } else {
            std::cout << trace_to_json(trace).dump(2) << '\n';
        }
        if (trace.exploded) {
            std::cerr << "training exploded after " << trace.records.back().epoch << " epochs\n";
            return static_cast<int>(ExitCode::explosion);
        }
        return 0;
    }

    if (*compare_cmd) {
        const auto report = compare_optimizers(cfg);
        if (!cfg.out_path.empty()) {
            emit(report, cfg.format, cfg.out_path);
        } else if (cfg.format == "csv") {
            write_report_csv(report, std::cout);
        } else {
            std::cout << report_to_json(report).dump(2) << '\n';
        }
        return 0;
    }

    if (*sde_cmd) {
        const auto field = build_field(cfg, cfg.seeds.front());
        ParamPoint q0;
        if (field->dim_w() == 1) {
            q0.w = cfg.q_w.head(1);
            q0.theta = cfg.q_theta.head(1);
        } else {
            q0.w = cfg.anchor_w;
            q0.theta = cfg.anchor_theta;
        }
        SdeConfig sde{field, cfg.sde_horizon, cfg.sde_dt, cfg.seeds.front(), cfg.eta_w,
                      cfg.eta_theta};
        const bool batch_mode = cfg.sde_mode == "batch";
        const SdePath path = batch_mode
                                 ? simulate_batch_sde(sde, q0, constant_batch_policy(cfg.m_scale))
                                 : simulate_lr_sde(sde, q0, constant_lr_policy(cfg.u_w, cfg.u_theta));
        write_path_csv(path, open_out(file, cfg.out_path), batch_mode);
        if (path.exploded) {
            std::cerr << "SDE path exploded at t = " << path.times.back() << '\n';
            return static_cast<int>(ExitCode::explosion);
        }
        return 0;
    }

    if (*hjb_cmd) {
        const auto field = build_field(cfg, cfg.seeds.front());
        const auto sol = solve_isaac_bellman(*field, grid_from_config(cfg),
                                             ControlBounds{cfg.u_min, cfg.u_max}, cfg.eta_w,
                                             cfg.eta_theta);
        write_solution(sol, cfg);
        std::cerr << "solved with " << sol.n_t_effective << " time steps\n";
        return 0;
    }

    if (*batch_cmd) {
        const auto field = build_field(cfg, cfg.seeds.front());
        const auto sol = solve_batch_bellman(*field, grid_from_config(cfg), cfg.m_max, cfg.eta_w);
        write_solution(sol, cfg);
        std::cerr << "solved with " << sol.n_t_effective << " time steps\n";
        return 0;
    }

    if (*demo_cmd) {
        DemoReport rep;
        if (demo_name == "explosion") {
            rep = explosion_demo(1.0, 0.0, 1.0, 3.0, 40);
        } else if (demo_name == "spiral") {
            rep = spiral_demo(1.0, 0.0, 0.1, 200);
        } else if (demo_name == "convexity") {
            rep = convexity_probe(cfg.anchor_w, -4.0, 4.0, 161);
        } else if (demo_name == "newton") {
            Batch dummy;
            dummy.xs = Eigen::VectorXd::Ones(1);
            dummy.zs = Eigen::VectorXd::Ones(1);
            ParamPoint q{cfg.q_w.head(1), cfg.q_theta.head(1)};
            rep = newton_equivalence(QuadraticSurface::scalar(-cfg.lq_alpha, cfg.lq_beta), q,
                                     dummy, cfg.u_min, cfg.u_max);
        } else {
            throw ConfigError("unknown demo '" + demo_name + "'");
        }
        auto& os = open_out(file, cfg.out_path);
        write_csv(os, rep.columns, rep.rows);
        std::cerr << "demo " << rep.name << ": " << (rep.pass ? "pass" : "FAIL") << " ("
                  << rep.detail << ")\n";
        return rep.pass ? 0 : 1;
    }

    if (*div_cmd) {
        Batch batch;
        batch.xs = sample_dist(cfg.target, cfg.fixed_batch, Rng::stream(cfg.seeds.front(), 40).raw());
        batch.zs = sample_dist(DistSpec::standard_normal(), cfg.fixed_batch,
                               Rng::stream(cfg.seeds.front(), 41).raw());
        DivergenceReport rep;
        if (cfg.surface == "lq") {
            QuadraticSurface quad = QuadraticSurface::scalar(-cfg.lq_alpha, cfg.lq_beta);
            quad.set_noise(Eigen::MatrixXd::Constant(1, 1, cfg.lq_sigma_w * cfg.lq_sigma_w),
                           Eigen::MatrixXd::Constant(1, 1, cfg.lq_sigma_theta * cfg.lq_sigma_theta));
            rep = divergence_threshold(quad, ParamPoint{cfg.q_w.head(1), cfg.q_theta.head(1)},
                                       batch, cfg.eta_w, cfg.eta_theta, cfg.gamma);
        } else {
            VanillaGanSurface gan;
            if (cfg.q_w.size() != 3 || cfg.q_theta.size() != 2)
                throw ConfigError("divergence-check on the toy model needs q_w of size 3 and "
                                  "q_theta of size 2");
            rep = divergence_threshold(gan, ParamPoint{cfg.q_w, cfg.q_theta}, batch, cfg.eta_w,
                                       cfg.eta_theta, cfg.gamma);
        }
        nlohmann::json j{{"u_w_threshold", rep.u_w_threshold},
                         {"u_theta_threshold", rep.u_theta_threshold},
                         {"gamma_ok", rep.gamma_ok},
                         {"gamma", cfg.gamma}};
        open_out(file, cfg.out_path) << j.dump(2) << '\n';
        return 0;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return 0;  // --help
        std::cerr << e.what() << '\n';
        return static_cast<int>(ExitCode::config_error);
    } catch (const CflError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::cfl_error);
    } catch (const ExplosionError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::explosion);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::config_error);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
