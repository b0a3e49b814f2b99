#pragma once

// Command-line front end: `equilibria`, `solve`, `verify`, `norms`.
// Configuration comes from a single JSON file; --out/--seed/--threads
// override the corresponding config entries.  Every JSON report embeds the
// resolved config, version info, and the standing theory-deviation note.

#include <cmath>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "bdps/config.hpp"
#include "bdps/io.hpp"
#include "bdps/semigroup.hpp"
#include "bdps/spectral.hpp"

namespace bdps {

inline nlohmann::json run_manifest(const ExperimentConfig& cfg) {
    nlohmann::json m;
    m["config"] = cfg.to_json();
    m["versions"] = version_json();
    m["deviation_note"] = theory_deviation_note();
    return m;
}

namespace cli_detail {

inline std::string out_path(const ExperimentConfig& cfg, const std::string& name) {
    std::filesystem::create_directories(cfg.output_dir);
    return (std::filesystem::path(cfg.output_dir) / name).string();
}

inline CoupledOperator configured_operator(const ExperimentConfig& cfg, const GridPtr& g,
                                           const IonicModelSpec& model,
                                           const EquilibriumPoint& eq) {
    return build_operator(cfg, g, linearize(model, eq));
}

// Smooth random multi-harmonic forcing used by verification probes:
// per-harmonic amplitudes decay like m^{-2}, spatial part is a seeded
// random field (single component).
inline PeriodicTrajectory random_forcing(DeterministicRng& rng, const GridPtr& g, double T, int M,
                                         int harmonics) {
    const double two_pi = 2.0 * 3.14159265358979323846;
    PeriodicTrajectory f(g, T, M, 1);
    for (int m = 0; m <= harmonics; ++m) {
        const ScalarField profile = random_field(rng, g);
        const double phase = rng.uniform(0.0, two_pi);
        const double amp = m == 0 ? 0.5 : 1.0 / (double(m) * m);
        for (int j = 0; j < M; ++j) {
            const double t = T * j / M;
            const double s = amp * std::cos(two_pi * m * t / T + phase);
            for (int i = 0; i < g->nodes(); ++i)
                f.samples[j].comps[0].values[i] += s * profile.values[i];
        }
    }
    return f;
}

inline double trajectory_distance(const PeriodicTrajectory& a, const PeriodicTrajectory& b) {
    double worst = 0.0;
    for (int j = 0; j < a.M(); ++j) {
        State d = a.samples[j];
        d.axpy(-1.0, b.samples[j]);
        worst = std::max(worst, l2_norm(d));
    }
    return worst;
}

inline double trajectory_scale(const PeriodicTrajectory& a) {
    double worst = 0.0;
    for (const auto& s : a.samples) worst = std::max(worst, l2_norm(s));
    return worst;
}

}  // namespace cli_detail

// --- equilibria ---

inline int cmd_equilibria(const ExperimentConfig& cfg, std::ostream& out) {
    cfg.model.validate();
    const EquilibriaResult eq = equilibria(cfg.model);
    const StabilityResult st = stability_condition(cfg.model);
    out << "model: " << variant_name(cfg.model.variant) << " (a=" << cfg.model.a
        << " b=" << cfg.model.b << " c=" << cfg.model.c << " d=" << cfg.model.d
        << " k=" << cfg.model.k << " eps=" << cfg.model.eps << ")\n";
    out << "stability condition: " << (st.satisfied ? "satisfied" : "not satisfied");
    for (const auto& [name, value] : st.details) out << "  " << name << "=" << value;
    out << "\n";
    if (eq.nontrivial_omitted) out << "note: " << eq.note << "\n";
    out << std::left << std::setw(7) << "index" << std::setw(24) << "u*" << std::setw(24) << "w*"
        << std::setw(12) << "admissible"
        << "alpha,beta,gamma,delta\n";
    for (const auto& p : eq.points) {
        const LinearizedSystem lin = linearize(cfg.model, p);
        out << std::left << std::setw(7) << p.index << std::setw(24) << format_g17(p.u_star)
            << std::setw(24) << (p.has_w ? format_g17(p.w_star) : std::string("-"))
            << std::setw(12) << (p.admissible ? "true" : "false") << format_g17(lin.alpha) << ","
            << format_g17(lin.beta) << "," << format_g17(lin.gamma) << "," << format_g17(lin.delta)
            << "\n";
    }
    nlohmann::json j = equilibria_json(cfg.model, eq);
    j["manifest"] = run_manifest(cfg);
    write_json_file(cli_detail::out_path(cfg, "equilibria.json"), j);
    return 0;
}

// --- solve ---

inline int cmd_solve(const ExperimentConfig& cfg, std::ostream& out) {
    const GridPtr g = build_grid(cfg.grid);
    const EquilibriaResult eqs = equilibria(cfg.model);
    const EquilibriumPoint eq = equilibrium_by_index(eqs, cfg.equilibrium_index);
    const CoupledOperator op = cli_detail::configured_operator(cfg, g, cfg.model, eq);
    const std::shared_ptr<const BidomainOperator> bop = op.bop;
    const PeriodicTrajectory I = build_forcing(cfg, g, bop.get());

    auto persist = [&](const PeriodicTrajectory& traj, const SolverReport& rep) {
        write_trajectory_csv(cli_detail::out_path(cfg, "trajectory.csv"), traj);
        write_trajectory_bdps(cli_detail::out_path(cfg, "trajectory.bdps"), traj);
        nlohmann::json j;
        j["report"] = report_json(rep);
        j["equilibrium"] = {{"index", eq.index},
                            {"u_star", eq.u_star},
                            {"w_star", eq.has_w ? nlohmann::json(eq.w_star) : nlohmann::json()}};
        j["manifest"] = run_manifest(cfg);
        write_json_file(cli_detail::out_path(cfg, "report.json"), j);
        write_json_file(cli_detail::out_path(cfg, "manifest.json"), run_manifest(cfg));
    };

    try {
        auto [traj, rep] = solve_nonlinear_periodic(cfg.model, eq, I, op, cfg.solver);
        persist(traj, rep);
        double max_ratio = 0.0;
        for (double r : rep.contraction_ratios) max_ratio = std::max(max_ratio, r);
        out << "converged in " << rep.outer_iterations << " iterations; residual "
            << format_g17(rep.final_residual) << "; max contraction ratio "
            << format_g17(max_ratio) << "; periodicity defect "
            << format_g17(rep.periodicity_defect) << "; ||v||_E " << format_g17(rep.v_enorm)
            << "; wall clock " << std::fixed << std::setprecision(3) << rep.wall_clock_seconds
            << " s\n";
        return 0;
    } catch (const PeriodicSolveError& e) {
        persist(e.partial, e.report);
        out << "solve failed: " << e.what() << "\n";
        out << "partial trajectory and report persisted to " << cfg.output_dir << "\n";
        return 1;
    }
}

// --- verify ---

inline int cmd_verify(const ExperimentConfig& cfg, std::ostream& out) {
    const GridPtr g = build_grid(cfg.grid);
    DeterministicRng rng(cfg.seed);
    nlohmann::json checks = nlohmann::json::array();
    bool all_pass = true;
    auto record = [&](const std::string& name, bool pass, nlohmann::json measured) {
        measured["name"] = name;
        measured["pass"] = pass;
        checks.push_back(std::move(measured));
        out << (pass ? "[PASS] " : "[FAIL] ") << name << "\n";
        if (!pass) all_pass = false;
    };

    // Admissibility gate for the configured equilibrium, plus the synthetic
    // refusal probe (negative delta must be rejected at construction).
    std::shared_ptr<CoupledOperator> op;
    {
        nlohmann::json m;
        bool pass = false;
        try {
            const EquilibriaResult eqs = equilibria(cfg.model);
            const EquilibriumPoint eq = equilibrium_by_index(eqs, cfg.equilibrium_index);
            op = std::make_shared<CoupledOperator>(
                cli_detail::configured_operator(cfg, g, cfg.model, eq));
            const LinearizedSystem lin = linearize(cfg.model, eq);
            m["alpha"] = lin.alpha;
            m["beta"] = lin.beta;
            m["gamma"] = lin.gamma;
            m["delta"] = lin.delta;
            pass = true;
        } catch (const std::exception& e) {
            m["error"] = e.what();
        }
        bool refusal = false;
        try {
            LinearizedSystem bad;
            bad.components = 2;
            bad.alpha = 1.0;
            bad.beta = 1.0;
            bad.gamma = 1.0;
            bad.delta = -1.0;
            bad.admissible = bad.alpha > 0 && bad.beta >= 0 && bad.gamma >= 0 && bad.delta > 0;
            CoupledOperator::from_linearization(g, bad);
        } catch (const std::invalid_argument&) {
            refusal = true;
        }
        m["negative_delta_refused"] = refusal;
        record("admissibility", pass && refusal, std::move(m));
    }
    if (!op) {
        nlohmann::json j;
        j["checks"] = std::move(checks);
        j["all_pass"] = false;
        j["manifest"] = run_manifest(cfg);
        write_json_file(cli_detail::out_path(cfg, "verify.json"), j);
        out << "verification FAILED (operator construction)\n";
        return 1;
    }

    if (cfg.diagnostics.sector) {
        nlohmann::json m;
        bool pass = false;
        try {
            std::vector<State> probes;
            for (int i = 0; i < cfg.diagnostics.probes; ++i)
                probes.push_back(random_state(rng, g, op->ncomp));
            const auto rows = verify_sector_bound(*op, cfg.diagnostics.sector_angles,
                                                  cfg.diagnostics.sector_radii, probes);
            write_sector_csv(cli_detail::out_path(cfg, "sector.csv"), rows);
            double sup = 0.0;
            bool ok = !rows.empty();
            for (const auto& r : rows) {
                if (!r.converged || !std::isfinite(r.ratio)) ok = false;
                sup = std::max(sup, r.ratio);
            }
            m["rows"] = rows.size();
            m["sup_ratio"] = sup;
            pass = ok;
        } catch (const std::exception& e) {
            m["error"] = e.what();
        }
        record("sector_bound_sweep", pass, std::move(m));
    }

    if (cfg.diagnostics.seminorm_oracle) {
        // Interpolation seminorm of shifted-diffusion eigenmodes against the
        // closed form mu^theta (Gamma(a)/p^a)^{1/p} ||x||, a = (1-theta)p.
        nlohmann::json m;
        bool pass = false;
        try {
            CoupledOperator sop = op->bop ? scalar_shifted_diffusion(op->bop, 1.0)
                                 : op->eop
                                     ? scalar_shifted_diffusion(op->eop, 1.0)
                                     : throw std::runtime_error(
                                           "seminorm oracle needs a diffusion block (diffusion "
                                           "kind 'none' configured)");
            const SpectralBasis& sb = sop.spectral();
            const int n = sb.size();
            // t_min must undercut 1/rate of the stiffest probed mode: the
            // truncated head scales like (rate*t_min)^a, and the n-1 mode of a
            // fine grid can reach rate ~ 4 n^2.
            SeminormQuadrature quad{1e-13, 40.0, 32};
            const double theta = cfg.solver.theta, p = cfg.solver.p;
            const double a = (1.0 - theta) * p;
            double worst = 0.0;
            const int picks[5] = {1, n / 4, n / 2, (3 * n) / 4, n - 1};
            nlohmann::json modes = nlohmann::json::array();
            for (int pk : picks) {
                const int k = std::min(std::max(pk, 1), n - 1);
                Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
                e[k] = 1.0;
                State x = State::zeros(g, 1);
                x.comps[0] = sb.from_modes(e);
                const double rate = sop.eps * sb.mu[k] + sop.alpha;
                const double exact = std::pow(rate, theta) *
                                     std::pow(std::tgamma(a) / std::pow(p, a), 1.0 / p) *
                                     lq_norm(x, 2.0);
                const double got = interpolation_seminorm(sop, x, theta, p, quad).value;
                const double rel = std::abs(got - exact) / exact;
                worst = std::max(worst, rel);
                modes.push_back({{"mu", sb.mu[k]}, {"exact", exact}, {"measured", got},
                                 {"rel_error", rel}});
            }
            m["modes"] = std::move(modes);
            m["worst_rel_error"] = worst;
            pass = worst < 1e-3;
        } catch (const std::exception& e) {
            m["error"] = e.what();
        }
        record("seminorm_eigen_oracle", pass, std::move(m));
    }

    if (cfg.diagnostics.inverse_roundtrip) {
        nlohmann::json m;
        bool pass = false;
        try {
            double worst = 0.0;
            for (int t = 0; t < cfg.diagnostics.probes; ++t) {
                const State f = random_state(rng, g, op->ncomp);
                const State u = coupled_inverse_apply(*op, f, cfg.solver.backend);
                State r = coupled_apply(*op, u);
                r.axpy(-1.0, f);
                worst = std::max(worst, l2_norm(r) / l2_norm(f));
            }
            m["worst_rel_error"] = worst;
            // worked 2x2 stationary example: [[2,1],[-1,1]]^{-1} (1,0) = (1/3, 1/3)
            LinearizedSystem ex;
            ex.components = 2;
            ex.alpha = 2.0;
            ex.beta = 1.0;
            ex.gamma = 1.0;
            ex.delta = 1.0;
            ex.admissible = true;
            const CoupledOperator exop = CoupledOperator::from_linearization(g, ex);
            State f = State::zeros(g, 2);
            f.comps[0].values.assign(g->nodes(), 1.0);
            const State u = coupled_inverse_apply(exop, f);
            double exerr = 0.0;
            for (int i = 0; i < g->nodes(); ++i) {
                exerr = std::max(exerr, std::abs(u.comps[0].values[i] - 1.0 / 3.0));
                exerr = std::max(exerr, std::abs(u.comps[1].values[i] - 1.0 / 3.0));
            }
            m["worked_example_error"] = exerr;
            pass = worst <= 1e-8 && exerr <= 1e-12;
        } catch (const std::exception& e) {
            m["error"] = e.what();
        }
        record("inverse_formula_roundtrip", pass, std::move(m));
    }

    if (cfg.diagnostics.cross_validation) {
        // Same linear problem through both methods; they must agree within
        // 10x the Crank-Nicolson discretization error (Richardson estimate).
        nlohmann::json m;
        bool pass = false;
        try {
            PeriodicTrajectory f(g, cfg.forcing.period, cfg.solver.M, op->ncomp);
            const PeriodicTrajectory base =
                cli_detail::random_forcing(rng, g, cfg.forcing.period, cfg.solver.M, 3);
            for (int j = 0; j < f.M(); ++j) f.samples[j].comps[0] = base.samples[j].comps[0];
            PeriodicSolveConfig c1 = cfg.solver;
            c1.method = PeriodicMethod::fourier_collocation;
            auto [uf, rf] = solve_linear_periodic(*op, f, c1);
            (void)rf;
            PeriodicSolveConfig c2 = cfg.solver;
            c2.method = PeriodicMethod::initial_value_fixed_point;
            auto [u1, r1] = solve_linear_periodic(*op, f, c2);
            PeriodicSolveConfig c3 = c2;
            c3.ivp_substeps = 2 * c2.resolved_ivp_substeps(f.M());
            auto [u2, r2] = solve_linear_periodic(*op, f, c3);
            (void)r2;
            const double scale = cli_detail::trajectory_scale(uf);
            const double richardson =
                cli_detail::trajectory_distance(u1, u2) * (4.0 / 3.0);
            const double disagreement = cli_detail::trajectory_distance(uf, u1);
            m["discretization_error_estimate"] = richardson;
            m["method_disagreement"] = disagreement;
            m["periodicity_defect"] = r1.periodicity_defect;
            pass = disagreement <= 10.0 * std::max(richardson, 1e-14 * std::max(scale, 1.0));
        } catch (const std::exception& e) {
            m["error"] = e.what();
        }
        record("method_cross_validation", pass, std::move(m));
    }

    if (cfg.diagnostics.maximal_regularity) {
        nlohmann::json m;
        bool pass = false;
        try {
            const PeriodicTrajectory I1 = build_forcing(cfg, g, op->bop.get());
            PeriodicTrajectory f(g, cfg.forcing.period, cfg.solver.M, op->ncomp);
            for (int j = 0; j < f.M(); ++j) f.samples[j].comps[0] = I1.samples[j].comps[0];
            PeriodicSolveConfig c1 = cfg.solver;
            c1.method = PeriodicMethod::fourier_collocation;
            auto [u, rep] = solve_linear_periodic(*op, f, c1);
            const MrRatio mr =
                maximal_regularity_ratio(*op, u, f, cfg.solver.theta, cfg.solver.p,
                                         cfg.solver.quad, cfg.solver.backend);
            m["operator_ratio"] = mr.operator_ratio;
            m["enorm_ratio"] = mr.enorm_ratio;
            pass = std::isfinite(mr.operator_ratio) && std::isfinite(mr.enorm_ratio);
        } catch (const std::exception& e) {
            m["error"] = e.what();
        }
        record("maximal_regularity_ratio", pass, std::move(m));
    }

    nlohmann::json j;
    j["checks"] = std::move(checks);
    j["all_pass"] = all_pass;
    j["manifest"] = run_manifest(cfg);
    write_json_file(cli_detail::out_path(cfg, "verify.json"), j);
    if (!all_pass) {
        out << "verification FAILED; see " << cli_detail::out_path(cfg, "verify.json") << "\n";
        return 1;
    }
    out << "all verification checks passed\n";
    return 0;
}

// --- norms ---

inline int cmd_norms(const ExperimentConfig& cfg, std::ostream& out) {
    const GridPtr g = build_grid(cfg.grid);
    const EquilibriaResult eqs = equilibria(cfg.model);
    const EquilibriumPoint eq = equilibrium_by_index(eqs, cfg.equilibrium_index);
    const CoupledOperator op = cli_detail::configured_operator(cfg, g, cfg.model, eq);
    const PeriodicTrajectory I1 = build_forcing(cfg, g, op.bop.get());
    PeriodicTrajectory f(g, cfg.forcing.period, cfg.solver.M, op.ncomp);
    for (int j = 0; j < f.M(); ++j) f.samples[j].comps[0] = I1.samples[j].comps[0];

    nlohmann::json j;
    j["decay_rate"] = op.decay_rate();
    j["spectral_backend_available"] = op.spectral_available();

    auto slice = [&](const State& s) {
        return dA_norm(op, s, cfg.solver.theta, cfg.solver.p, cfg.solver.quad, 2.0,
                       cfg.solver.backend);
    };
    j["forcing_bochner_dA"] = bochner_norm(f, cfg.solver.p, slice);
    const ScalarField prof = forcing_profile(
        cfg.forcing.mode == "direct" ? cfg.forcing.profile : cfg.forcing.profile_i, g,
        cfg.forcing.mode != "direct");
    State prof_state = State::zeros(g, op.ncomp);
    prof_state.comps[0] = prof;
    const SeminormResult sem = interpolation_seminorm(op, prof_state, cfg.solver.theta,
                                                      cfg.solver.p, cfg.solver.quad, 2.0,
                                                      cfg.solver.backend);
    j["profile_seminorm"] = sem.value;
    j["profile_seminorm_error_bound"] = sem.error_bound;
    j["profile_dA_norm"] = slice(prof_state);

    PeriodicSolveConfig lin_cfg = cfg.solver;
    lin_cfg.method = PeriodicMethod::fourier_collocation;
    auto [u, rep] = solve_linear_periodic(op, f, lin_cfg);
    (void)rep;
    const PeriodicTrajectory du = time_derivative(u);
    PeriodicTrajectory au(g, u.period, u.M(), op.ncomp);
    for (int k = 0; k < u.M(); ++k) au.samples[k] = op.apply(u.samples[k]);
    const double nu = bochner_norm(u, cfg.solver.p, slice);
    const double ndu = bochner_norm(du, cfg.solver.p, slice);
    const double nau = bochner_norm(au, cfg.solver.p, slice);
    j["linear_response"] = {{"u", nu}, {"du_dt", ndu}, {"op_u", nau}, {"enorm", nu + ndu + nau}};
    bool zero_forcing = bochner_norm(f, cfg.solver.p, [](const State& s) { return l2_norm(s); }) == 0.0;
    if (!zero_forcing) {
        const MrRatio mr = maximal_regularity_ratio(op, u, f, cfg.solver.theta, cfg.solver.p,
                                                    cfg.solver.quad, cfg.solver.backend);
        j["mr_operator_ratio"] = mr.operator_ratio;
        j["mr_enorm_ratio"] = mr.enorm_ratio;
    }

    if (op.bop) {
        write_coo_csv(cli_detail::out_path(cfg, "stiffness_intra_coo.csv"), op.bop->op_i.K);
        write_coo_csv(cli_detail::out_path(cfg, "stiffness_extra_coo.csv"), op.bop->op_e.K);
    } else if (op.eop) {
        write_coo_csv(cli_detail::out_path(cfg, "stiffness_coo.csv"), op.eop->K);
    }

    j["manifest"] = run_manifest(cfg);
    write_json_file(cli_detail::out_path(cfg, "norms.json"), j);
    out << "decay rate " << format_g17(op.decay_rate()) << "; linear response enorm "
        << format_g17(nu + ndu + nau) << "; report written to "
        << cli_detail::out_path(cfg, "norms.json") << "\n";
    return 0;
}

// --- entry point ---

inline int run_cli(int argc, char** argv) {
    CLI::App app{"time-periodic solves of reaction-diffusion systems with bidomain coupling"};
    app.fallthrough();
    std::string config_path, out_dir;
    std::uint64_t seed = 0;
    int threads = 0;
    auto* opt_config = app.add_option("--config", config_path, "JSON configuration file");
    auto* opt_out = app.add_option("--out", out_dir, "output directory (overrides config)");
    auto* opt_seed = app.add_option("--seed", seed, "probe RNG seed (overrides config)");
    auto* opt_threads =
        app.add_option("--threads", threads, "worker threads for frequency blocks");
    auto* sub_eq = app.add_subcommand("equilibria", "tabulate model equilibria and admissibility");
    auto* sub_solve = app.add_subcommand("solve", "run the periodic contraction solve");
    auto* sub_verify = app.add_subcommand("verify", "run the verification diagnostics");
    auto* sub_norms = app.add_subcommand("norms", "norm and regularity diagnostics");
    app.require_subcommand(1);
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);  // prints help or the parse diagnostic
        return e.get_exit_code() == 0 ? 0 : 2;
    }
    try {
        ExperimentConfig cfg =
            opt_config->count() ? ExperimentConfig::from_file(config_path) : ExperimentConfig{};
        if (opt_out->count()) cfg.output_dir = out_dir;
        if (opt_seed->count()) cfg.seed = seed;
        if (opt_threads->count()) {
            if (threads < 1) throw ConfigError("threads", "must be >= 1");
            cfg.threads = threads;
            cfg.solver.threads = threads;
        }
        if (sub_eq->parsed()) return cmd_equilibria(cfg, std::cout);
        if (sub_solve->parsed()) return cmd_solve(cfg, std::cout);
        if (sub_verify->parsed()) return cmd_verify(cfg, std::cout);
        if (sub_norms->parsed()) return cmd_norms(cfg, std::cout);
        std::cerr << "no subcommand selected\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace bdps
