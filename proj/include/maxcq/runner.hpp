#ifndef MAXCQ_RUNNER_HPP
#define MAXCQ_RUNNER_HPP

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "maxcq/config.hpp"
#include "maxcq/convolution.hpp"
#include "maxcq/cq_weights.hpp"
#include "maxcq/discretization.hpp"
#include "maxcq/stepper.hpp"

namespace maxcq {

inline std::string format_float(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.16e", v);
    return buf;
}

namespace detail {

inline void ensure_parent_dir(const std::string& path) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
}

inline std::ofstream open_out(const std::string& path) {
    ensure_parent_dir(path);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open output file '" + path + "'");
    return out;
}

}  // namespace detail

struct EnergyRow {
    long n = 0;
    double t = 0.0;
    double energy = 0.0;
    double dissipation = std::numeric_limits<double>::quiet_NaN();
    double residual = std::numeric_limits<double>::quiet_NaN();
};

/// Everything assembled from a SimConfig: operators, time step, weight
/// tables, and one stepper of the requested scheme. tau comes either from
/// config.dt or from cfl_fraction times the power-iteration CFL bound.
struct Assembly {
    PhysicalConstants constants;
    Mesh1D mesh;
    DiscreteOperators ops;
    double tau = 0.0;
    double tau_max = 0.0;
    std::map<std::string, WeightTable> tables;  // full-length CQ tables
    RegionWeights region_weights;
};

inline std::map<std::string, WeightTable> make_tables(const SimConfig& config,
                                                      const PhysicalConstants& constants,
                                                      double tau, Eigen::Index n_weights) {
    const WeightMethod method =
        (config.weights.method == "fft") ? WeightMethod::Fft : WeightMethod::Recurrence;
    ContourParams params;
    params.radius = config.weights.rho;
    params.fft_length = config.weights.fft_length;
    return weights_for_materials(config.layout.materials, constants, tau, n_weights, method,
                                 params);
}

inline Assembly assemble(const SimConfig& config) {
    Assembly a;
    a.mesh = build_mesh(config.z_min, config.z_max, config.n_cells);
    a.ops = build_operators(a.mesh, config.layout, a.constants);
    a.tau_max = cfl_bound(a.ops).tau_max;
    a.tau = config.dt ? *config.dt : (*config.cfl_fraction) * a.tau_max;
    a.tables = make_tables(config, a.constants, a.tau, config.n_steps + 2);
    a.region_weights = RegionWeights(a.ops, a.tables, config.layout);
    return a;
}

struct SchemeRun {
    SchemeChoice scheme;
    SimState state;
    std::unique_ptr<AdeStepper> ade;
    std::unique_ptr<CqStepper> cq;
    std::shared_ptr<ConvolutionEngine> engine;

    void step() {
        if (ade) {
            ade->step(state);
        } else {
            cq->step(state);
        }
    }
};

inline SchemeRun make_scheme_run(const SimConfig& config, const Assembly& a,
                                 SchemeChoice scheme) {
    SchemeRun run;
    run.scheme = scheme;
    const SchemeMode mode = (scheme == SchemeChoice::Ade) ? SchemeMode::Ade : SchemeMode::Cq;
    run.state = init_state(a.ops, config.initial_condition, mode);
    if (scheme == SchemeChoice::Ade) {
        run.ade = std::make_unique<AdeStepper>(a.ops, a.constants, a.tau);
        return run;
    }
    if (scheme == SchemeChoice::CqDirect) {
        run.engine = std::make_shared<DirectEngine>(a.region_weights);
    } else {
        FocqParams params;
        params.base = config.focq.base;
        params.contour_nodes = config.focq.contour_nodes;
        params.tolerance = config.focq.tolerance;
        long head_len = 1;
        while (head_len < 32) head_len *= params.base;
        const auto head_tables = make_tables(config, a.constants, a.tau,
                                             static_cast<Eigen::Index>(2 * head_len + 2));
        run.engine = std::make_shared<FocqEngine>(a.ops, config.layout, head_tables, a.tau,
                                                  a.constants, params);
    }
    run.cq = std::make_unique<CqStepper>(a.ops, a.region_weights, run.engine, a.tau);
    return run;
}

struct RunResult {
    int exit_code = 0;
    double tau = 0.0;
    double tau_max = 0.0;
    double initial_energy = 0.0;
    double final_energy = 0.0;
    long steps_completed = 0;
    long stored_vectors = 0;       // convolution engine, CQ modes only
    bool focq_degraded = false;
    std::vector<EnergyRow> energy_rows;
    std::vector<std::string> snapshot_files;
    std::string summary;
};

namespace detail {

inline void write_snapshot(const std::string& path, const Mesh1D& mesh, const SimState& s) {
    std::ofstream out = open_out(path);
    out << "z,e_x,h_y,p_x\n";
    const Eigen::VectorXd p = s.total_polarization();
    for (Eigen::Index j = 0; j < mesh.n_nodes(); ++j) {
        out << format_float(mesh.node_z(j)) << ',' << format_float(s.e[j]) << ','
            << format_float(s.h_half[j]) << ',' << format_float(p[j]) << '\n';
    }
}

inline void write_energy_csv(const std::string& path, const std::vector<EnergyRow>& rows) {
    std::ofstream out = open_out(path);
    out << "n,t,E,D,residual\n";
    for (const EnergyRow& r : rows) {
        out << r.n << ',' << format_float(r.t) << ',' << format_float(r.energy) << ','
            << format_float(r.dissipation) << ',' << format_float(r.residual) << '\n';
    }
}

inline void write_plot_script(const std::string& dir,
                              const std::vector<std::string>& snapshot_files,
                              const std::string& energy_path) {
    const std::string path = (std::filesystem::path(dir) / "plot.gp").string();
    std::ofstream out = open_out(path);
    out << "set datafile separator ','\n"
        << "set key autotitle columnhead\n"
        << "set xlabel 'z [m]'\n"
        << "set ylabel 'h_y [A/m]'\n";
    if (!snapshot_files.empty()) {
        out << "plot";
        for (std::size_t i = 0; i < snapshot_files.size(); ++i) {
            const std::string rel =
                std::filesystem::relative(snapshot_files[i], dir).string();
            out << (i ? ", " : " ") << "'" << rel << "' using 1:3 with lines";
        }
        out << "\npause -1 'snapshots; press enter for energy'\n";
    }
    if (!energy_path.empty()) {
        const std::string rel = std::filesystem::relative(energy_path, dir).string();
        out << "set xlabel 't [s]'\nset ylabel 'E'\n"
            << "plot '" << rel << "' using 2:3 with lines\n"
            << "pause -1\n";
    }
}

inline void dump_weights_csv(const std::string& path,
                             const std::map<std::string, WeightTable>& tables) {
    std::ofstream out = open_out(path);
    out << "n,material,omega\n";
    for (const auto& [name, table] : tables) {
        for (Eigen::Index n = 0; n < table.size(); ++n) {
            out << n << ',' << name << ',' << format_float(table.weights[n]) << '\n';
        }
    }
}

}  // namespace detail

/// Steps the configured scheme n_steps times, writing snapshots, per-step
/// energy records, and a gnuplot script. Deterministic for a fixed config.
/// Exit codes: 0 success, 2 numerical failure (non-finite fields).
inline RunResult run_simulation(const SimConfig& config) {
    const Assembly a = assemble(config);
    RunResult result;
    result.tau = a.tau;
    result.tau_max = a.tau_max;
    std::string warn;
    if (a.tau > a.tau_max * (1.0 + 1e-12)) {
        warn = "warning: dt exceeds the CFL bound tau_max = " + format_float(a.tau_max) + "\n";
    }
    if (config.weights.dump_path) {
        detail::dump_weights_csv(*config.weights.dump_path, a.tables);
    }

    SchemeRun run = make_scheme_run(config, a, config.scheme);
    const bool ade_mode = (config.scheme == SchemeChoice::Ade);

    const auto record_energy = [&](const SimState& before, const SimState& now, bool first) {
        EnergyRow row;
        row.n = now.n;
        row.t = static_cast<double>(now.n) * a.tau;
        row.energy = energy(now, a.ops).energy;
        if (ade_mode) {
            if (first) {
                row.dissipation = 0.0;
                row.residual = 0.0;
            } else {
                const DissipationResult d = dissipation_residual(before, now, a.ops, a.tau);
                row.dissipation = d.dissipation;
                row.residual = d.residual;
            }
        }
        result.energy_rows.push_back(row);
    };

    const auto snapshot_path = [&](long n) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "snapshot_%06ld.csv", n);
        return (std::filesystem::path(config.outputs.snapshot_dir) / buf).string();
    };
    const auto maybe_snapshot = [&](const SimState& s) {
        if (config.outputs.snapshot_stride <= 0) return;
        if (s.n % config.outputs.snapshot_stride != 0 && s.n != config.n_steps) return;
        const std::string path = snapshot_path(s.n);
        detail::write_snapshot(path, a.mesh, s);
        result.snapshot_files.push_back(path);
    };

    record_energy(run.state, run.state, true);
    result.initial_energy = result.energy_rows.front().energy;
    maybe_snapshot(run.state);

    SimState before = run.state;
    for (long n = 0; n < config.n_steps; ++n) {
        before = run.state;
        run.step();
        record_energy(before, run.state, false);
        maybe_snapshot(run.state);
        if (!run.state.e.allFinite() || !run.state.h_half.allFinite()) {
            result.exit_code = 2;
            result.steps_completed = run.state.n;
            break;
        }
    }
    if (result.exit_code == 0) result.steps_completed = config.n_steps;
    result.final_energy = result.energy_rows.back().energy;
    if (run.engine) {
        result.stored_vectors = run.engine->stored_vectors();
        result.focq_degraded = run.engine->accuracy_degraded();
    }

    if (!config.outputs.energy_path.empty()) {
        detail::write_energy_csv(config.outputs.energy_path, result.energy_rows);
    }
    if (config.outputs.snapshot_stride > 0 || !config.outputs.energy_path.empty()) {
        detail::write_plot_script(config.outputs.snapshot_dir, result.snapshot_files,
                                  config.outputs.energy_path);
    }

    result.summary = warn + "scheme " + scheme_name(config.scheme) + ": " +
                     std::to_string(result.steps_completed) + " steps, tau " +
                     format_float(result.tau) + " s, tau_max " + format_float(result.tau_max) +
                     " s\nE0 " + format_float(result.initial_energy) + ", E_final " +
                     format_float(result.final_energy) + "\n";
    if (run.engine) {
        result.summary += "engine stored vectors: " + std::to_string(result.stored_vectors) +
                          (result.focq_degraded ? " (contour accuracy degraded)" : "") + "\n";
    }
    if (result.exit_code == 2) result.summary += "numerical failure: non-finite fields\n";
    return result;
}

struct CompareResult {
    int exit_code = 0;
    double tau = 0.0;
    double max_diff_e = 0.0, max_diff_h = 0.0, max_diff_p = 0.0;  // absolute
    double max_abs_e = 0.0, max_abs_h = 0.0, max_abs_p = 0.0;     // field scales
    double tolerance = 0.0;
    bool pass = false;
    std::string summary;
};

/// Runs the listed schemes in lockstep on identical discretizations and
/// reports max-norm trajectory differences of the first scheme versus each
/// other scheme (e, h, and total polarization). Verdict: every difference
/// within tolerance relative to the running max magnitude of that field.
inline CompareResult compare_schemes(const SimConfig& config,
                                     const std::vector<SchemeChoice>& schemes,
                                     double tolerance) {
    if (schemes.size() < 2) throw ConfigError("compare: need at least two schemes");
    const Assembly a = assemble(config);
    CompareResult result;
    result.tau = a.tau;
    result.tolerance = tolerance;

    std::vector<SchemeRun> runs;
    for (const SchemeChoice s : schemes) runs.push_back(make_scheme_run(config, a, s));

    std::ofstream csv;
    const bool write_csv = config.outputs.comparison_path.has_value();
    if (write_csv) {
        csv = detail::open_out(*config.outputs.comparison_path);
        csv << "n,t,diff_e,diff_h,diff_p\n";
    }

    for (long n = 0; n <= config.n_steps; ++n) {
        if (n > 0) {
            for (SchemeRun& r : runs) r.step();
        }
        const SimState& ref = runs.front().state;
        const Eigen::VectorXd ref_p = ref.total_polarization();
        result.max_abs_e = std::max(result.max_abs_e, ref.e.cwiseAbs().maxCoeff());
        result.max_abs_h = std::max(result.max_abs_h, ref.h_half.cwiseAbs().maxCoeff());
        result.max_abs_p = std::max(result.max_abs_p, ref_p.cwiseAbs().maxCoeff());
        double de = 0.0, dh = 0.0, dp = 0.0;
        for (std::size_t i = 1; i < runs.size(); ++i) {
            const SimState& s = runs[i].state;
            de = std::max(de, (s.e - ref.e).cwiseAbs().maxCoeff());
            dh = std::max(dh, (s.h_half - ref.h_half).cwiseAbs().maxCoeff());
            dp = std::max(dp, (s.total_polarization() - ref_p).cwiseAbs().maxCoeff());
        }
        result.max_diff_e = std::max(result.max_diff_e, de);
        result.max_diff_h = std::max(result.max_diff_h, dh);
        result.max_diff_p = std::max(result.max_diff_p, dp);
        if (write_csv) {
            csv << n << ',' << format_float(static_cast<double>(n) * a.tau) << ','
                << format_float(de) << ',' << format_float(dh) << ',' << format_float(dp)
                << '\n';
        }
        for (const SchemeRun& r : runs) {
            if (!r.state.e.allFinite() || !r.state.h_half.allFinite()) {
                result.exit_code = 2;
                result.summary = "numerical failure during comparison\n";
                return result;
            }
        }
    }

    const auto rel_ok = [&](double diff, double scale) {
        return diff <= tolerance * std::max(scale, 1e-300);
    };
    result.pass = rel_ok(result.max_diff_e, result.max_abs_e) &&
                  rel_ok(result.max_diff_h, result.max_abs_h) &&
                  rel_ok(result.max_diff_p, result.max_abs_p);
    result.exit_code = result.pass ? 0 : 3;
    result.summary = "compared";
    for (const SchemeChoice s : schemes) result.summary += " " + scheme_name(s);
    result.summary += ": rel diff e " +
                      format_float(result.max_diff_e / std::max(result.max_abs_e, 1e-300)) +
                      ", h " +
                      format_float(result.max_diff_h / std::max(result.max_abs_h, 1e-300)) +
                      ", p " +
                      format_float(result.max_diff_p / std::max(result.max_abs_p, 1e-300)) +
                      (result.pass ? " -> PASS\n" : " -> FAIL\n");
    return result;
}

}  // namespace maxcq

#endif
