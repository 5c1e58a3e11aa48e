// SPDX-License-Identifier: MIT
//
// Experiment orchestration: plain `key = value` config files, the toy-GAN
// training loop, ADAM-vs-LADAM sweeps over base rates and seeds, and
// bit-stable CSV/JSON emission. Everything downstream of (config, seed)
// is deterministic.
#pragma once

#include <json.hpp>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <memory>
#include <numeric>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "ganctl/common.hpp"
#include "ganctl/csv.hpp"
#include "ganctl/distributions.hpp"
#include "ganctl/model.hpp"
#include "ganctl/optim.hpp"

namespace ganctl {

enum class OptimizerKind { sga, adam, ladam, async_alt };

inline std::string optimizer_name(OptimizerKind k) {
    switch (k) {
        case OptimizerKind::sga: return "sga";
        case OptimizerKind::adam: return "adam";
        case OptimizerKind::ladam: return "ladam";
        case OptimizerKind::async_alt: return "async";
    }
    return "?";
}

inline OptimizerKind optimizer_from_name(const std::string& s) {
    if (s == "sga") return OptimizerKind::sga;
    if (s == "adam") return OptimizerKind::adam;
    if (s == "ladam") return OptimizerKind::ladam;
    if (s == "async") return OptimizerKind::async_alt;
    throw ConfigError("unknown optimizer '" + s + "'");
}

struct ExperimentConfig {
    // Data
    DistSpec target = DistSpec::gaussian(3.0, 1.0);
    int train_size = 4096;  // held-out test set is train_size / 4 (80/20 split)

    // Training
    OptimizerKind optimizer = OptimizerKind::ladam;
    std::vector<double> base_lrs = {1e-2};
    double u_min = 0.05;
    double u_max = 5.0;
    int batch_x = 512;
    int batch_z = 512;
    int epochs = 200;
    int n_w_max = 1;  // inner discriminator updates per generator update (async)
    std::vector<std::uint64_t> seeds = {1};
    Eigen::VectorXd w0 = (Eigen::VectorXd(3) << 0.0, 1.0, -0.5).finished();
    Eigen::VectorXd theta0 = (Eigen::VectorXd(2) << 0.0, 1.0).finished();

    // Accuracy band used for epochs-to-band summaries
    double band_lo = 0.4;
    double band_hi = 0.6;

    // SDE simulation
    std::string sde_mode = "lr";  // lr | batch
    double sde_horizon = 1.0;
    double sde_dt = 1e-2;
    double eta_w = 1e-2;
    double eta_theta = 1e-2;
    double u_w = 1.0;       // constant adjustments for simulate-sde
    double u_theta = 1.0;
    double m_scale = 1.0;   // constant batch scale for simulate-sde
    int sde_paths = 1;
    int fixed_batch = 256;  // frozen batch size behind SDE / solver fields

    // Surface selection for SDE/solver commands: toy-model slice or a
    // synthetic quadratic (gan | lq)
    std::string surface = "gan";
    double lq_alpha = 1.0;  // g = -alpha/2 w^2 + beta/2 theta^2
    double lq_beta = 1.0;
    double lq_sigma_w = 0.5;
    double lq_sigma_theta = 0.5;

    // Divergence diagnostics point
    Eigen::VectorXd q_w = Eigen::VectorXd::Constant(1, 0.5);
    Eigen::VectorXd q_theta = Eigen::VectorXd::Constant(1, 0.5);

    // Grid solver
    double hjb_w_lo = -1.0, hjb_w_hi = 1.0;
    int hjb_n_w = 51;
    double hjb_theta_lo = -1.0, hjb_theta_hi = 1.0;
    int hjb_n_theta = 51;
    double hjb_horizon = 1.0;
    int hjb_n_t = 100;
    long hjb_max_steps = 20000;  // CFL auto-shrink cap
    double m_max = 4.0;
    // Toy-model slice anchor for the 1+1-D solver
    Eigen::VectorXd anchor_w = (Eigen::VectorXd(3) << 0.0, 1.0, -0.5).finished();
    Eigen::VectorXd anchor_theta = (Eigen::VectorXd(2) << 0.0, 1.0).finished();
    int slice_w_index = 0;
    int slice_theta_index = 0;

    // Divergence diagnostics
    double gamma = 1e-3;

    // Output
    std::string out_path;
    std::string format = "csv";

    void validate() const {
        target.validate();
        if (train_size < 4) throw ConfigError("config: train_size must be >= 4");
        if (base_lrs.empty()) throw ConfigError("config: base_lr list must be nonempty");
        for (double lr : base_lrs)
            if (!(lr > 0.0)) throw ConfigError("config: base_lr entries must be > 0");
        if (!(u_min > 0.0) || !(u_min <= u_max)) throw ConfigError("config: need 0 < u_min <= u_max");
        if (batch_x < 1 || batch_z < 1) throw ConfigError("config: batch sizes must be >= 1");
        if (epochs < 0) throw ConfigError("config: epochs must be >= 0");
        if (n_w_max < 1) throw ConfigError("config: n_w_max must be >= 1");
        if (seeds.empty()) throw ConfigError("config: seed list must be nonempty");
        if (format != "csv" && format != "json")
            throw ConfigError("config: format must be csv or json");
        if (!(m_max >= 1.0) || !(m_scale >= 1.0))
            throw ConfigError("config: batch scales must be >= 1");
        if (sde_mode != "lr" && sde_mode != "batch")
            throw ConfigError("config: sde_mode must be lr or batch");
        if (surface != "gan" && surface != "lq")
            throw ConfigError("config: surface must be gan or lq");
    }
};

// ============================================================================
// Config parsing: `key = value` lines, '#' comments, comma-separated lists.
// ============================================================================

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    const auto e = s.find_last_not_of(" \t\r\n");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

inline std::vector<double> parse_double_list(const std::string& v) {
    std::vector<double> out;
    for (const auto& cell : split_csv_line(v)) {
        if (cell.empty()) continue;
        out.push_back(parse_double(cell));
    }
    if (out.empty()) throw ConfigError("config: empty list value '" + v + "'");
    return out;
}

inline int parse_int(const std::string& v) {
    const double d = parse_double(v);
    const auto i = static_cast<long long>(std::llround(d));
    if (std::abs(d - static_cast<double>(i)) > 1e-9)
        throw ConfigError("config: expected an integer, got '" + v + "'");
    return static_cast<int>(i);
}

inline Eigen::VectorXd to_vector(const std::vector<double>& v) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
    return out;
}

}  // namespace detail

// Applies one key/value pair; shared by the file parser and CLI overrides.
inline void apply_config_key(ExperimentConfig& cfg, const std::string& key,
                             const std::string& value) {
    using detail::parse_double_list;
    using detail::parse_int;
    const std::string v = detail::trim(value);
    if (key == "target") {
        if (v == "gaussian") cfg.target.kind = DistKind::gaussian;
        else if (v == "student_t") cfg.target.kind = DistKind::student_t;
        else if (v == "standard_normal") cfg.target.kind = DistKind::standard_normal;
        else throw ConfigError("config: unknown target '" + v + "'");
    } else if (key == "target_mean" || key == "target_shift") {
        cfg.target.mean = parse_double(v);
    } else if (key == "target_std" || key == "target_dof") {
        cfg.target.scale = parse_double(v);
    } else if (key == "train_size") cfg.train_size = parse_int(v);
    else if (key == "optimizer") cfg.optimizer = optimizer_from_name(v);
    else if (key == "base_lr") cfg.base_lrs = parse_double_list(v);
    else if (key == "u_min") cfg.u_min = parse_double(v);
    else if (key == "u_max") cfg.u_max = parse_double(v);
    else if (key == "batch_x") cfg.batch_x = parse_int(v);
    else if (key == "batch_z") cfg.batch_z = parse_int(v);
    else if (key == "epochs") cfg.epochs = parse_int(v);
    else if (key == "n_w_max") cfg.n_w_max = parse_int(v);
    else if (key == "seed") {
        cfg.seeds.clear();
        for (double s : parse_double_list(v)) cfg.seeds.push_back(static_cast<std::uint64_t>(s));
    } else if (key == "w0") cfg.w0 = detail::to_vector(parse_double_list(v));
    else if (key == "theta0") cfg.theta0 = detail::to_vector(parse_double_list(v));
    else if (key == "band_lo") cfg.band_lo = parse_double(v);
    else if (key == "band_hi") cfg.band_hi = parse_double(v);
    else if (key == "sde_mode") cfg.sde_mode = v;
    else if (key == "sde_horizon") cfg.sde_horizon = parse_double(v);
    else if (key == "sde_dt") cfg.sde_dt = parse_double(v);
    else if (key == "eta_w") cfg.eta_w = parse_double(v);
    else if (key == "eta_theta") cfg.eta_theta = parse_double(v);
    else if (key == "u_w") cfg.u_w = parse_double(v);
    else if (key == "u_theta") cfg.u_theta = parse_double(v);
    else if (key == "m_scale") cfg.m_scale = parse_double(v);
    else if (key == "sde_paths") cfg.sde_paths = parse_int(v);
    else if (key == "fixed_batch") cfg.fixed_batch = parse_int(v);
    else if (key == "surface") cfg.surface = v;
    else if (key == "lq_alpha") cfg.lq_alpha = parse_double(v);
    else if (key == "lq_beta") cfg.lq_beta = parse_double(v);
    else if (key == "lq_sigma_w") cfg.lq_sigma_w = parse_double(v);
    else if (key == "lq_sigma_theta") cfg.lq_sigma_theta = parse_double(v);
    else if (key == "q_w") cfg.q_w = detail::to_vector(parse_double_list(v));
    else if (key == "q_theta") cfg.q_theta = detail::to_vector(parse_double_list(v));
    else if (key == "hjb_w_lo") cfg.hjb_w_lo = parse_double(v);
    else if (key == "hjb_w_hi") cfg.hjb_w_hi = parse_double(v);
    else if (key == "hjb_n_w") cfg.hjb_n_w = parse_int(v);
    else if (key == "hjb_theta_lo") cfg.hjb_theta_lo = parse_double(v);
    else if (key == "hjb_theta_hi") cfg.hjb_theta_hi = parse_double(v);
    else if (key == "hjb_n_theta") cfg.hjb_n_theta = parse_int(v);
    else if (key == "hjb_horizon") cfg.hjb_horizon = parse_double(v);
    else if (key == "hjb_n_t") cfg.hjb_n_t = parse_int(v);
    else if (key == "hjb_max_steps") cfg.hjb_max_steps = parse_int(v);
    else if (key == "m_max") cfg.m_max = parse_double(v);
    else if (key == "anchor_w") cfg.anchor_w = detail::to_vector(parse_double_list(v));
    else if (key == "anchor_theta") cfg.anchor_theta = detail::to_vector(parse_double_list(v));
    else if (key == "slice_w_index") cfg.slice_w_index = parse_int(v);
    else if (key == "slice_theta_index") cfg.slice_theta_index = parse_int(v);
    else if (key == "gamma") cfg.gamma = parse_double(v);
    else if (key == "out") cfg.out_path = v;
    else if (key == "format") cfg.format = v;
    else throw ConfigError("config: unknown key '" + key + "'");
}

inline ExperimentConfig parse_config(std::istream& is) {
    ExperimentConfig cfg;
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        apply_config_key(cfg, detail::trim(line.substr(0, eq)), line.substr(eq + 1));
    }
    return cfg;
}

inline ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    return parse_config(in);
}

// ============================================================================
// Training loop
// ============================================================================

namespace detail {

// Minibatch source: reshuffles train indices every epoch, draws fresh
// latents per batch; all randomness from one stream of the run seed.
class MinibatchSampler {
public:
    MinibatchSampler(const Eigen::VectorXd& train_xs, int batch_x, int batch_z, std::uint64_t seed)
        : xs_(train_xs), batch_x_(batch_x), batch_z_(batch_z), rng_(Rng::stream(seed, 20)),
          order_(static_cast<std::size_t>(train_xs.size())) {
        std::iota(order_.begin(), order_.end(), 0);
        cursor_ = order_.size();  // trigger reshuffle on first use
    }

    Batch next() {
        Batch b;
        b.xs = Eigen::VectorXd(batch_x_);
        for (int i = 0; i < batch_x_; ++i) {
            if (cursor_ == order_.size()) reshuffle();
            b.xs[i] = xs_[static_cast<Eigen::Index>(order_[cursor_++])];
        }
        b.zs = Eigen::VectorXd(batch_z_);
        for (int i = 0; i < batch_z_; ++i) b.zs[i] = rng_.normal();
        return b;
    }

private:
    void reshuffle() {
        for (std::size_t i = order_.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(rng_.raw() % i);
            std::swap(order_[i - 1], order_[j]);
        }
        cursor_ = 0;
    }

    const Eigen::VectorXd& xs_;
    int batch_x_, batch_z_;
    Rng rng_;
    std::vector<std::size_t> order_;
    std::size_t cursor_ = 0;
};

}  // namespace detail

// Full training run of the toy model under one optimizer and base rate.
// One record per epoch (plus the initial record); gen_loss is the
// generator term on the held-out latents, disc_acc the test accuracy.
inline TrainingTrace run_training(const ExperimentConfig& cfg, OptimizerKind opt, double base_lr,
                                  std::uint64_t seed) {
    cfg.validate();
    if (!(base_lr > 0.0)) throw ConfigError("run_training: base_lr must be > 0");

    const auto gan = std::make_shared<VanillaGanSurface>();
    const Eigen::VectorXd train_xs = sample_dist(cfg.target, cfg.train_size, Rng::stream(seed, 10).raw());
    const int test_size = std::max(1, cfg.train_size / 4);
    Batch test;
    test.xs = sample_dist(cfg.target, test_size, Rng::stream(seed, 11).raw());
    test.zs = sample_dist(DistSpec::standard_normal(), test_size, Rng::stream(seed, 12).raw());

    detail::MinibatchSampler sampler(train_xs, cfg.batch_x, cfg.batch_z, seed);
    const int steps_per_epoch =
        std::max(1, (cfg.train_size + cfg.batch_x - 1) / cfg.batch_x);

    ParamPoint q{cfg.w0, cfg.theta0};
    OptimizerState state = OptimizerState::zero(3, 2);
    LrControl ctrl{base_lr, base_lr, cfg.u_min, cfg.u_max, 1e-9};
    if (opt == OptimizerKind::ladam) ctrl.validate();

    TrainingTrace trace;
    const auto record = [&](long epoch) {
        TraceRecord r;
        r.epoch = epoch;
        r.gen_loss = VanillaGanSurface::generator_term(q, test.zs);
        r.disc_acc = disc_accuracy(q, *gan, test);
        r.q = q;
        r.u_w = state.adj_w;
        r.u_theta = state.adj_theta;
        trace.records.push_back(std::move(r));
    };
    record(0);

    int async_phase = 0;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        for (int step = 0; step < steps_per_epoch; ++step) {
            const Batch b = sampler.next();
            try {
                const ObjectiveEval ev = gan->eval(q, b);
                switch (opt) {
                    case OptimizerKind::sga:
                        q = sga_step(q, ev, base_lr);
                        break;
                    case OptimizerKind::adam:
                        q = adam_step(q, ev, state, base_lr);
                        break;
                    case OptimizerKind::ladam:
                        q = ladam_step(q, ev, state, ctrl);
                        break;
                    case OptimizerKind::async_alt:
                        if (async_phase < cfg.n_w_max) {
                            q.w += base_lr * ev.grad_w;
                            ++async_phase;
                        } else {
                            q.theta -= base_lr * ev.grad_theta;
                            async_phase = 0;
                        }
                        break;
                }
            } catch (const ExplosionError&) {
                trace.exploded = true;
                return trace;
            }
            if (!q.is_finite()) {
                trace.exploded = true;
                return trace;
            }
        }
        record(epoch);
    }
    return trace;
}

// ============================================================================
// Optimizer comparison sweep
// ============================================================================

struct ComparisonCell {
    std::string optimizer;
    double base_lr = 0.0;
    std::uint64_t seed = 0;
    double final_gen_loss = 0.0;
    double final_disc_acc = 0.0;
    long epochs_to_band = -1;  // -1 when the band is never reached
    bool exploded = false;
};

struct OptimizerSummary {
    std::string optimizer;
    double acc_dispersion_across_lr = 0.0;
    double loss_dispersion_across_lr = 0.0;
    double median_epochs_to_band = 0.0;
    long explosions = 0;
};

struct ComparisonReport {
    std::vector<ComparisonCell> cells;
    std::vector<OptimizerSummary> summaries;  // adam first, ladam second
    bool robustness_verdict = false;          // ladam accuracy dispersion <= adam's
};

namespace detail {

inline double stddev(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    const double mu = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    double acc = 0.0;
    for (double x : xs) acc += (x - mu) * (x - mu);
    return std::sqrt(acc / static_cast<double>(xs.size()));
}

inline double median(std::vector<double> xs) {
    if (xs.empty()) return 0.0;
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

}  // namespace detail

inline long epochs_to_band(const TrainingTrace& trace, double lo, double hi) {
    for (const auto& r : trace.records)
        if (r.disc_acc >= lo && r.disc_acc <= hi) return r.epoch;
    return -1;
}

// Full factorial {adam, ladam} x base_lrs x seeds. Cells are independent
// runs with no shared mutable state and execute on a small thread pool;
// results land in preallocated slots, so ordering and output are identical
// to a serial sweep. Per-run failures are recorded as exploded cells, not
// fatal to the sweep.
inline ComparisonReport compare_optimizers(const ExperimentConfig& cfg) {
    cfg.validate();
    ComparisonReport report;
    const OptimizerKind kinds[2] = {OptimizerKind::adam, OptimizerKind::ladam};

    struct CellJob {
        OptimizerKind opt;
        double lr;
        std::uint64_t seed;
    };
    std::vector<CellJob> jobs;
    for (OptimizerKind opt : kinds)
        for (double lr : cfg.base_lrs)
            for (std::uint64_t seed : cfg.seeds) jobs.push_back({opt, lr, seed});

    report.cells.resize(jobs.size());
    const auto worker = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            const auto& job = jobs[i];
            const TrainingTrace trace = run_training(cfg, job.opt, job.lr, job.seed);
            ComparisonCell cell;
            cell.optimizer = optimizer_name(job.opt);
            cell.base_lr = job.lr;
            cell.seed = job.seed;
            cell.exploded = trace.exploded;
            const auto& last = trace.records.back();
            cell.final_gen_loss = last.gen_loss;
            cell.final_disc_acc = last.disc_acc;
            cell.epochs_to_band = epochs_to_band(trace, cfg.band_lo, cfg.band_hi);
            report.cells[i] = std::move(cell);
        }
    };
    const unsigned n_threads =
        std::min<unsigned>(4, std::max(1u, std::thread::hardware_concurrency()));
    if (n_threads <= 1 || jobs.size() < 4) {
        worker(0, jobs.size());
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (jobs.size() + n_threads - 1) / n_threads;
        for (unsigned k = 0; k < n_threads; ++k) {
            const std::size_t lo = k * chunk;
            const std::size_t hi = std::min(jobs.size(), lo + chunk);
            if (lo < hi) pool.emplace_back(worker, lo, hi);
        }
        for (auto& th : pool) th.join();
    }

    std::size_t idx = 0;
    for (OptimizerKind opt : kinds) {
        std::vector<double> acc_by_lr, loss_by_lr, band_epochs;
        long explosions = 0;
        for (std::size_t li = 0; li < cfg.base_lrs.size(); ++li) {
            std::vector<double> accs, losses;
            for (std::size_t si = 0; si < cfg.seeds.size(); ++si) {
                const auto& cell = report.cells[idx++];
                if (cell.exploded) {
                    ++explosions;
                    continue;
                }
                accs.push_back(cell.final_disc_acc);
                losses.push_back(cell.final_gen_loss);
                band_epochs.push_back(cell.epochs_to_band < 0
                                          ? static_cast<double>(cfg.epochs + 1)
                                          : static_cast<double>(cell.epochs_to_band));
            }
            if (!accs.empty()) {
                acc_by_lr.push_back(std::accumulate(accs.begin(), accs.end(), 0.0) /
                                    static_cast<double>(accs.size()));
                loss_by_lr.push_back(std::accumulate(losses.begin(), losses.end(), 0.0) /
                                     static_cast<double>(losses.size()));
            }
        }
        OptimizerSummary s;
        s.optimizer = optimizer_name(opt);
        s.acc_dispersion_across_lr = detail::stddev(acc_by_lr);
        s.loss_dispersion_across_lr = detail::stddev(loss_by_lr);
        s.median_epochs_to_band = detail::median(band_epochs);
        s.explosions = explosions;
        report.summaries.push_back(s);
    }
    report.robustness_verdict = report.summaries[1].acc_dispersion_across_lr <=
                                report.summaries[0].acc_dispersion_across_lr;
    return report;
}

// ============================================================================
// Emission: traces and reports as CSV or JSON, byte-stable given inputs.
// ============================================================================

inline std::vector<std::string> trace_header(int dim_w, int dim_theta) {
    std::vector<std::string> h = {"epoch", "gen_loss", "disc_acc"};
    for (int i = 1; i <= dim_w; ++i) h.push_back("w_" + std::to_string(i));
    for (int i = 1; i <= dim_theta; ++i) h.push_back("theta_" + std::to_string(i));
    h.push_back("u_w");
    h.push_back("u_theta");
    return h;
}

inline void write_trace_csv(const TrainingTrace& trace, std::ostream& os, int dim_w = 3,
                            int dim_theta = 2) {
    if (!trace.records.empty()) {
        dim_w = static_cast<int>(trace.records.front().q.w.size());
        dim_theta = static_cast<int>(trace.records.front().q.theta.size());
    }
    std::vector<std::vector<double>> rows;
    rows.reserve(trace.records.size());
    for (const auto& r : trace.records) {
        std::vector<double> row = {static_cast<double>(r.epoch), r.gen_loss, r.disc_acc};
        for (Eigen::Index i = 0; i < r.q.w.size(); ++i) row.push_back(r.q.w[i]);
        for (Eigen::Index i = 0; i < r.q.theta.size(); ++i) row.push_back(r.q.theta[i]);
        row.push_back(r.u_w);
        row.push_back(r.u_theta);
        rows.push_back(std::move(row));
    }
    write_csv(os, trace_header(dim_w, dim_theta), rows);
}

inline TrainingTrace read_trace_csv(std::istream& is) {
    const CsvTable t = read_csv(is);
    int dim_w = 0, dim_theta = 0;
    for (const auto& h : t.header) {
        if (h.rfind("w_", 0) == 0) ++dim_w;
        if (h.rfind("theta_", 0) == 0) ++dim_theta;
    }
    TrainingTrace trace;
    for (const auto& row : t.rows) {
        if (row.size() != t.header.size()) throw ConfigError("trace csv: ragged row");
        TraceRecord r;
        r.epoch = static_cast<long>(row[0]);
        r.gen_loss = row[1];
        r.disc_acc = row[2];
        r.q.w = Eigen::VectorXd(dim_w);
        r.q.theta = Eigen::VectorXd(dim_theta);
        for (int i = 0; i < dim_w; ++i) r.q.w[i] = row[3 + i];
        for (int i = 0; i < dim_theta; ++i) r.q.theta[i] = row[3 + dim_w + i];
        r.u_w = row[3 + dim_w + dim_theta];
        r.u_theta = row[4 + dim_w + dim_theta];
        trace.records.push_back(std::move(r));
    }
    return trace;
}

inline nlohmann::json trace_to_json(const TrainingTrace& trace) {
    nlohmann::json records = nlohmann::json::array();
    for (const auto& r : trace.records) {
        nlohmann::json j;
        j["epoch"] = r.epoch;
        j["gen_loss"] = r.gen_loss;
        j["disc_acc"] = r.disc_acc;
        j["w"] = std::vector<double>(r.q.w.data(), r.q.w.data() + r.q.w.size());
        j["theta"] = std::vector<double>(r.q.theta.data(), r.q.theta.data() + r.q.theta.size());
        j["u_w"] = r.u_w;
        j["u_theta"] = r.u_theta;
        records.push_back(std::move(j));
    }
    return nlohmann::json{{"exploded", trace.exploded}, {"records", std::move(records)}};
}

inline TrainingTrace trace_from_json(const nlohmann::json& j) {
    TrainingTrace trace;
    trace.exploded = j.at("exploded").get<bool>();
    for (const auto& rec : j.at("records")) {
        TraceRecord r;
        r.epoch = rec.at("epoch").get<long>();
        r.gen_loss = rec.at("gen_loss").get<double>();
        r.disc_acc = rec.at("disc_acc").get<double>();
        const auto w = rec.at("w").get<std::vector<double>>();
        const auto th = rec.at("theta").get<std::vector<double>>();
        r.q.w = detail::to_vector(w);
        r.q.theta = detail::to_vector(th);
        r.u_w = rec.at("u_w").get<double>();
        r.u_theta = rec.at("u_theta").get<double>();
        trace.records.push_back(std::move(r));
    }
    return trace;
}

inline void write_report_csv(const ComparisonReport& report, std::ostream& os) {
    std::vector<std::vector<double>> rows;
    os << "optimizer,base_lr,seed,final_gen_loss,final_disc_acc,epochs_to_band,exploded\n";
    for (const auto& c : report.cells) {
        os << c.optimizer << ',' << format_double(c.base_lr) << ',' << c.seed << ','
           << format_double(c.final_gen_loss) << ',' << format_double(c.final_disc_acc) << ','
           << c.epochs_to_band << ',' << (c.exploded ? 1 : 0) << '\n';
    }
    os << "# summary: optimizer,acc_dispersion,loss_dispersion,median_epochs_to_band,explosions\n";
    for (const auto& s : report.summaries) {
        os << "# " << s.optimizer << ',' << format_double(s.acc_dispersion_across_lr) << ','
           << format_double(s.loss_dispersion_across_lr) << ','
           << format_double(s.median_epochs_to_band) << ',' << s.explosions << '\n';
    }
    os << "# robustness_verdict," << (report.robustness_verdict ? 1 : 0) << '\n';
}

inline nlohmann::json report_to_json(const ComparisonReport& report) {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& c : report.cells) {
        cells.push_back({{"optimizer", c.optimizer},
                         {"base_lr", c.base_lr},
                         {"seed", c.seed},
                         {"final_gen_loss", c.final_gen_loss},
                         {"final_disc_acc", c.final_disc_acc},
                         {"epochs_to_band", c.epochs_to_band},
                         {"exploded", c.exploded}});
    }
    nlohmann::json summaries = nlohmann::json::array();
    for (const auto& s : report.summaries) {
        summaries.push_back({{"optimizer", s.optimizer},
                             {"acc_dispersion_across_lr", s.acc_dispersion_across_lr},
                             {"loss_dispersion_across_lr", s.loss_dispersion_across_lr},
                             {"median_epochs_to_band", s.median_epochs_to_band},
                             {"explosions", s.explosions}});
    }
    return nlohmann::json{{"cells", std::move(cells)},
                          {"summaries", std::move(summaries)},
                          {"robustness_verdict", report.robustness_verdict}};
}

// Writes a trace or report to path in the requested format.
inline void emit(const TrainingTrace& trace, const std::string& format, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("emit: cannot open '" + path + "' for writing");
    if (format == "csv") write_trace_csv(trace, out);
    else if (format == "json") out << trace_to_json(trace).dump(2) << '\n';
    else throw ConfigError("emit: unknown format '" + format + "'");
}

inline void emit(const ComparisonReport& report, const std::string& format,
                 const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("emit: cannot open '" + path + "' for writing");
    if (format == "csv") write_report_csv(report, out);
    else if (format == "json") out << report_to_json(report).dump(2) << '\n';
    else throw ConfigError("emit: unknown format '" + format + "'");
}

}  // namespace ganctl
