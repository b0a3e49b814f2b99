// Acceptance gate: ten numbered checks covering the composite-operator
// identities, spectral oracles, sector and seminorm closed forms, linear
// periodic exactness, inverse roundtrips, maximal-regularity diagnostics,
// the nonlinear contraction regime, admissibility refusals, and output
// determinism.  Prints one [PASS]/[FAIL] line per check with the measured
// values; the exit status is the number of failed checks.

#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>
#include <unistd.h>

#include "bdps/cli.hpp"

using namespace bdps;

namespace {

int g_failures = 0;

void report(int idx, const std::string& name, bool pass, const std::string& detail) {
    std::cout << (pass ? "[PASS] " : "[FAIL] ") << idx << ". " << name << ": " << detail << "\n";
    if (!pass) ++g_failures;
}

std::string fmt(double x) {
    std::ostringstream ss;
    ss.precision(3);
    ss << std::scientific << x;
    return ss.str();
}

constexpr double kPi = 3.14159265358979323846;

BidomainOperator bidomain_1d(const GridPtr& g, double si, double se) {
    return make_bidomain(assemble_elliptic(g, ConductivityField::constant(g, si)),
                         assemble_elliptic(g, ConductivityField::constant(g, se)));
}

double rel_l2(const ScalarField& a, const ScalarField& b) {
    ScalarField d = a;
    for (int i = 0; i < d.size(); ++i) d.values[i] -= b.values[i];
    const double nb = std::sqrt(dot_l2(b, b));
    return std::sqrt(dot_l2(d, d)) / (nb > 0 ? nb : 1.0);
}

double state_dist(const State& a, const State& b) {
    State d = a;
    d.axpy(-1.0, b);
    return l2_norm(d);
}

ScalarField cos_mode(const GridPtr& g, int k) {
    const double lx = g->lengths[0];
    return ScalarField::from_fn(g, [&](double x, double) { return std::cos(k * kPi * x / lx); });
}

// Smooth deterministic single-component forcing: one cosine profile in space,
// one harmonic in time.  Sampled per grid so refinements are comparable.
PeriodicTrajectory smooth_forcing(const GridPtr& g, double T, int M, int kx, int harmonic,
                                  double phase, double amp, int ncomp) {
    PeriodicTrajectory f(g, T, M, ncomp);
    const ScalarField prof = cos_mode(g, kx);
    for (int j = 0; j < M; ++j) {
        const double s = amp * std::cos(2.0 * kPi * harmonic * j / M + phase);
        for (int i = 0; i < g->nodes(); ++i) f.samples[j].comps[0].values[i] = s * prof.values[i];
    }
    return f;
}

// --- 1. composite operator degenerates correctly for proportional tensors ---

void criterion_1() {
    const GridPtr g = make_grid(1, {33}, {1.0});
    const EllipticOperator op_i = assemble_elliptic(g, ConductivityField::constant(g, 1.3));
    DeterministicRng rng(101);
    double worst = 0.0;
    bool ok = true;
    for (double lambda0 : {1.0, 0.5, 2.0}) {
        const BidomainOperator bop = bidomain_1d(g, 1.3, 1.3 * lambda0);
        const double factor = lambda0 / (1.0 + lambda0);
        for (int t = 0; t < 20; ++t) {
            const ScalarField f = random_field(rng, g);
            const ScalarField lhs = apply_bidomain(bop, f);
            ScalarField rhs = op_i.apply(project_mean_zero(f));
            for (double& v : rhs.values) v *= factor;
            const double rel = rel_l2(lhs, rhs);
            worst = std::max(worst, rel);
            if (rel > 1e-8) ok = false;
        }
    }
    report(1, "proportional-tensor reduction (factor l0/(1+l0), 20 fields x {1, 0.5, 2})", ok,
           "max rel err " + fmt(worst) + (ok ? " <= 1e-08" : " > 1e-08"));
}

// --- 2. composite eigenvalues converge at 2nd order to the harmonic mean ---

void criterion_2() {
    const double si = 1.0, se = 3.0;
    const double c = si * se / (si + se);
    bool ok = true;
    std::string detail;
    for (int k : {1, 2, 3}) {
        double err[3];
        const int ns[3] = {17, 33, 65};
        for (int t = 0; t < 3; ++t) {
            const GridPtr g = make_grid(1, {ns[t]}, {1.0});
            const BidomainOperator bop = bidomain_1d(g, si, se);
            const ScalarField f = cos_mode(g, k);
            const ScalarField af = apply_bidomain(bop, f);
            const double lam_h = dot_l2(f, af) / dot_l2(f, f);
            err[t] = std::abs(lam_h - c * k * k * kPi * kPi);
        }
        const double o1 = std::log2(err[0] / err[1]);
        const double o2 = std::log2(err[1] / err[2]);
        if (!(o1 >= 1.9 && o2 >= 1.9)) ok = false;
        if (!detail.empty()) detail += ", ";
        detail += "k=" + std::to_string(k) + " orders " + fmt(o1).substr(0, 5) + "/" +
                  fmt(o2).substr(0, 5);
    }
    report(2, "composite eigenvalue oracle (three-grid orders vs harmonic mean)", ok,
           detail + (ok ? " all >= 1.9" : " (some < 1.9)"));
}

// --- 3. sampled sector bound: finite, refinement-stable, contractive on the real axis ---

void criterion_3() {
    const IonicModelSpec model = fhn_model(0.1, 1.0, 0.05);
    const std::vector<double> angles{-2.5, -1.25, 0.0, 1.25, 2.5};
    const std::vector<double> radii{0.1, 1.0, 10.0, 100.0};
    auto sweep_sup = [&](int n, bool& all_ok) {
        const GridPtr g = make_grid(1, {n}, {1.0});
        auto bop = std::make_shared<BidomainOperator>(bidomain_1d(g, 1.0, 2.0));
        const EquilibriaResult eqs = equilibria(model);
        const CoupledOperator op =
            CoupledOperator::from_linearization(bop, linearize(model, eqs.points[0]));
        std::vector<State> probes;
        for (int m = 0; m < 3; ++m) {
            State s = State::zeros(g, 2);
            ScalarField a = cos_mode(g, m + 1), b = cos_mode(g, m + 2);
            for (int i = 0; i < g->nodes(); ++i) {
                s.comps[0].values[i] = a.values[i] + 0.3;
                s.comps[1].values[i] = 0.5 * b.values[i] - 0.2;
            }
            probes.push_back(std::move(s));
        }
        const auto rows = verify_sector_bound(op, angles, radii, probes);
        double sup = 0.0;
        for (const auto& r : rows) {
            if (!r.converged || !std::isfinite(r.ratio)) all_ok = false;
            sup = std::max(sup, r.ratio);
        }
        return sup;
    };
    bool ok = true;
    const double sup33 = sweep_sup(33, ok);
    const double sup65 = sweep_sup(65, ok);
    const double drift = std::abs(sup65 - sup33) / sup33;
    if (!(drift < 0.25)) ok = false;

    // self-adjoint scalar probe on the positive real axis: ratio <= 1 exactly
    const GridPtr g = make_grid(1, {33}, {1.0});
    auto bop = std::make_shared<BidomainOperator>(bidomain_1d(g, 1.0, 2.0));
    const CoupledOperator sop = scalar_shifted_diffusion(bop, 1.0);
    std::vector<State> sprobes;
    for (int m = 0; m < 3; ++m) {
        State s = State::zeros(g, 1);
        s.comps[0] = cos_mode(g, m + 1);
        sprobes.push_back(std::move(s));
    }
    const auto rows = verify_sector_bound(sop, {0.0}, radii, sprobes, {2.0},
                                          SolveBackend::spectral);
    double worst_real = 0.0;
    for (const auto& r : rows) {
        if (!r.converged) ok = false;
        worst_real = std::max(worst_real, r.ratio);
    }
    if (!(worst_real <= 1.0 + 1e-8)) ok = false;
    report(3, "sector-bound sweep (finite sup, < 25% drift, real-axis contraction)", ok,
           "sup(33) " + fmt(sup33) + ", sup(65) " + fmt(sup65) + ", drift " + fmt(drift) +
               ", real-axis max ratio " + fmt(worst_real));
}

// --- 4. interpolation seminorm matches the eigenmode closed form ---

void criterion_4() {
    const GridPtr g = make_grid(1, {65}, {1.0});
    auto eop = std::make_shared<EllipticOperator>(
        assemble_elliptic(g, ConductivityField::constant(g, 1.0)));
    const CoupledOperator sop = scalar_shifted_diffusion(eop, 1.0);
    const SpectralBasis& sb = sop.spectral();
    // head truncation scales like (rate*t_min)^{(1-theta)p}; the k=64 mode has
    // rate ~ 1.6e4, so the floor must sit well below 1/rate
    const SeminormQuadrature quad{1e-13, 40.0, 32};
    double worst = 0.0;
    bool ok = true;
    for (auto [theta, p] : std::vector<std::pair<double, double>>{{0.25, 2.0},
                                                                  {0.5, 2.0},
                                                                  {0.5, 1.0}}) {
        const double a = (1.0 - theta) * p;
        for (int k : {1, 4, 16, 40, 64}) {
            Eigen::VectorXd e = Eigen::VectorXd::Zero(sb.size());
            e[k] = 1.0;
            State x = State::zeros(g, 1);
            x.comps[0] = sb.from_modes(e);
            const double rate = sb.mu[k] + 1.0;
            const double exact = std::pow(rate, theta) *
                                 std::pow(std::tgamma(a) / std::pow(p, a), 1.0 / p) *
                                 lq_norm(x, 2.0);
            const double got = interpolation_seminorm(sop, x, theta, p, quad).value;
            const double rel = std::abs(got - exact) / exact;
            worst = std::max(worst, rel);
            if (rel > 1e-3) ok = false;
        }
    }
    report(4, "seminorm eigenmode closed form (5 modes x 3 exponent pairs)", ok,
           "worst rel err " + fmt(worst) + (ok ? " <= 1e-03" : " > 1e-03"));
}

// --- 5. linear periodic exactness on the scalar surrogate + method agreement ---

void criterion_5() {
    // scalar surrogate du/dt + 2u = f(t), T = 1, reaction-only operator
    const GridPtr g5 = make_grid(1, {5}, {1.0});
    LinearizedSystem lin;
    lin.components = 1;
    lin.alpha = 2.0;
    lin.admissible = true;
    const CoupledOperator op = CoupledOperator::from_linearization(g5, lin);
    const double alpha = 2.0, T = 1.0, omega = 2.0 * kPi;
    const int M = 64;

    auto harmonic = [&](int samples) {
        PeriodicTrajectory f(g5, T, samples, 1);
        for (int j = 0; j < samples; ++j)
            f.samples[j].comps[0].values.assign(g5->nodes(), std::cos(omega * j / samples));
        return f;
    };
    auto constant = [&](int samples) {
        PeriodicTrajectory f(g5, T, samples, 1);
        for (int j = 0; j < samples; ++j) f.samples[j].comps[0].values.assign(g5->nodes(), 1.0);
        return f;
    };
    auto max_err = [&](const PeriodicTrajectory& u, auto exact) {
        double worst = 0.0;
        for (int j = 0; j < u.M(); ++j) {
            const double ue = exact(u.time(j));
            for (double v : u.samples[j].comps[0].values) worst = std::max(worst, std::abs(v - ue));
        }
        return worst;
    };
    const auto exact_const = [&](double) { return 1.0 / alpha; };
    const auto exact_harm = [&](double t) {
        return (alpha * std::cos(omega * t) + omega * std::sin(omega * t)) /
               (alpha * alpha + omega * omega);
    };

    PeriodicSolveConfig fc;
    fc.M = M;
    fc.method = PeriodicMethod::fourier_collocation;
    const double ef_const = max_err(solve_linear_periodic(op, constant(M), fc).first, exact_const);
    const double ef_harm = max_err(solve_linear_periodic(op, harmonic(M), fc).first, exact_harm);

    PeriodicSolveConfig iv = fc;
    iv.method = PeriodicMethod::initial_value_fixed_point;
    auto ivp_err = [&](int substeps, auto&& forcing, auto exact) {
        PeriodicSolveConfig c = iv;
        c.ivp_substeps = substeps;
        return max_err(solve_linear_periodic(op, forcing(M), c).first, exact);
    };
    const double ei_const = ivp_err(256, constant, exact_const);
    const double e256 = ivp_err(256, harmonic, exact_harm);
    const double e512 = ivp_err(512, harmonic, exact_harm);
    const double e1024 = ivp_err(1024, harmonic, exact_harm);
    const double order = std::log2(e256 / e512);

    // agreement of the two methods on the coupled two-component operator
    const GridPtr g = make_grid(1, {33}, {1.0});
    auto bop = std::make_shared<BidomainOperator>(bidomain_1d(g, 1.0, 2.0));
    const IonicModelSpec model = fhn_model(0.1, 1.0, 0.05);
    const CoupledOperator cop =
        CoupledOperator::from_linearization(bop, linearize(model, equilibria(model).points[0]));
    DeterministicRng rng(505);
    double agree = 0.0;
    for (int t = 0; t < 10; ++t) {
        PeriodicTrajectory f(g, T, M, 2);
        const PeriodicTrajectory base = cli_detail::random_forcing(rng, g, T, M, 3);
        for (int j = 0; j < M; ++j) f.samples[j].comps[0] = base.samples[j].comps[0];
        const auto uf = solve_linear_periodic(cop, f, fc).first;
        PeriodicSolveConfig ci = iv;
        ci.ivp_substeps = 8192;
        const auto ui = solve_linear_periodic(cop, f, ci).first;
        for (int j = 0; j < M; ++j) agree = std::max(agree, state_dist(uf.samples[j], ui.samples[j]));
    }

    const bool fourier_ok = ef_const <= 1e-10 && ef_harm <= 1e-10;
    const bool ivp_ok = ei_const <= 1e-6 && e256 <= 1e-6;
    const bool agree_ok = agree <= 1e-6;
    const bool ok = fourier_ok && ivp_ok && agree_ok;
    std::string detail = "fourier errs " + fmt(ef_const) + "/" + fmt(ef_harm) +
                         " (<= 1e-10); time-march errs const " + fmt(ei_const) +
                         ", harmonic@256 " + fmt(e256) + " vs bound 1e-06";
    if (e256 > 1e-6)
        detail += " -- UNMET: trapezoidal stepping is 2nd order (e512 " + fmt(e512) + ", e1024 " +
                  fmt(e1024) + ", observed order " + fmt(order).substr(0, 5) +
                  "); the analytic error constant omega^3 h^2 / 12 / |alpha+i omega|^2 makes "
                  "1e-06 reachable only from ~685 substeps (met at 1024)";
    detail += "; methods agree to " + fmt(agree) + " (<= 1e-06)";
    report(5, "linear periodic exactness", ok, detail);
}

// --- 6. stationary inverse roundtrips and the worked 2x2 example ---

void criterion_6() {
    const GridPtr g = make_grid(1, {33}, {1.0});
    auto bop = std::make_shared<BidomainOperator>(bidomain_1d(g, 1.0, 2.0));
    const IonicModelSpec fhn = fhn_model(0.1, 1.0, 0.05);
    const IonicModelSpec rm = rm_model(0.1, 1.0, 0.05, 1.0);
    std::vector<CoupledOperator> ops;
    ops.push_back(
        CoupledOperator::from_linearization(bop, linearize(fhn, equilibria(fhn).points[0])));
    ops.push_back(
        CoupledOperator::from_linearization(bop, linearize(rm, equilibria(rm).points[2])));
    DeterministicRng rng(606);
    double worst = 0.0;
    for (const CoupledOperator& op : ops) {
        for (int t = 0; t < 10; ++t) {
            const State f = random_state(rng, g, op.ncomp);
            const State u = coupled_inverse_apply(op, f);
            State r = coupled_apply(op, u);
            r.axpy(-1.0, f);
            worst = std::max(worst, l2_norm(r) / l2_norm(f));
        }
    }

    LinearizedSystem ex;
    ex.components = 2;
    ex.alpha = 2.0;
    ex.beta = 1.0;
    ex.gamma = 1.0;
    ex.delta = 1.0;
    ex.admissible = true;
    const CoupledOperator exop = CoupledOperator::from_linearization(g, ex);
    double exerr = 0.0;
    State f1 = State::zeros(g, 2), f2 = State::zeros(g, 2);
    f1.comps[0].values.assign(g->nodes(), 1.0);
    f2.comps[1].values.assign(g->nodes(), 1.0);
    const State u1 = coupled_inverse_apply(exop, f1);
    const State u2 = coupled_inverse_apply(exop, f2);
    for (int i = 0; i < g->nodes(); ++i) {
        exerr = std::max(exerr, std::abs(u1.comps[0].values[i] - 1.0 / 3.0));
        exerr = std::max(exerr, std::abs(u1.comps[1].values[i] - 1.0 / 3.0));
        exerr = std::max(exerr, std::abs(u2.comps[0].values[i] + 1.0 / 3.0));
        exerr = std::max(exerr, std::abs(u2.comps[1].values[i] - 2.0 / 3.0));
    }
    const bool ok = worst <= 1e-8 && exerr <= 1e-12;
    report(6, "stationary inverse roundtrip (20 states) and worked 2x2 inverse", ok,
           "max roundtrip rel err " + fmt(worst) + ", worked-example err " + fmt(exerr));
}

// --- 7. maximal-regularity ratio: finite, refinement-stable ---

void criterion_7() {
    struct Case {
        const char* name;
        IonicModelSpec model;
        int eq_index;
    };
    std::vector<Case> cases{{"FHN", fhn_model(0.1, 1.0, 0.05), 1},
                            {"RM", rm_model(0.1, 1.0, 0.05, 1.0), 1},
                            {"AC", ac_model(), 1}};
    const PeriodicSolveConfig cfg = [] {
        PeriodicSolveConfig c;
        c.M = 32;
        return c;
    }();
    bool ok = true;
    std::string detail;
    for (const Case& cs : cases) {
        double sup[2] = {0.0, 0.0};
        const int ns[2] = {33, 65};
        for (int t = 0; t < 2; ++t) {
            const GridPtr g = make_grid(1, {ns[t]}, {1.0});
            auto bop = std::make_shared<BidomainOperator>(bidomain_1d(g, 1.0, 2.0));
            const EquilibriaResult eqs = equilibria(cs.model);
            const CoupledOperator op = CoupledOperator::from_linearization(
                bop, linearize(cs.model, equilibrium_by_index(eqs, cs.eq_index)));
            for (int trial = 0; trial < 10; ++trial) {
                const PeriodicTrajectory f =
                    smooth_forcing(g, 1.0, cfg.M, trial % 3 + 1, trial % 2 + 1, 0.7 * trial, 1.0,
                                   op.ncomp);
                const auto u = solve_linear_periodic(op, f, cfg).first;
                const MrRatio mr =
                    maximal_regularity_ratio(op, u, f, cfg.theta, cfg.p, cfg.quad, cfg.backend);
                if (!std::isfinite(mr.operator_ratio) || !std::isfinite(mr.enorm_ratio)) ok = false;
                sup[t] = std::max(sup[t], mr.enorm_ratio);
            }
        }
        const double drift = std::abs(sup[1] - sup[0]) / sup[0];
        if (!(drift < 0.25)) ok = false;
        if (!detail.empty()) detail += ", ";
        detail += std::string(cs.name) + " sup " + fmt(sup[0]) + "->" + fmt(sup[1]) + " drift " +
                  fmt(drift);
    }
    report(7, "maximal-regularity ratios finite with < 25% grid drift", ok, detail);
}

// --- 8. contraction iteration near every stable admissible equilibrium ---

void criterion_8() {
    struct Entry {
        std::string name;
        IonicModelSpec model;
        int eq_index;
    };
    std::vector<Entry> table{{"FHN@rest", fhn_model(0.1, 1.0, 0.05), 1},
                             {"FHN@excited", fhn_model(0.1, 1.0, 0.05), 3},
                             {"AP@rest", ap_model(0.1, 8.0, 0.5), 1},
                             {"RM@rest", rm_model(0.1, 1.0, 0.05, 1.0), 1},
                             {"RM@excited", rm_model(0.1, 1.0, 0.05, 1.0), 3},
                             {"AC@-1", ac_model(), 1},
                             {"AC@+1", ac_model(), 3}};
    const GridPtr g = make_grid(1, {33}, {1.0});
    auto bop = std::make_shared<BidomainOperator>(bidomain_1d(g, 1.0, 2.0));
    PeriodicSolveConfig cfg;
    cfg.M = 32;
    cfg.tol_outer = 1e-9;
    bool ok = true;
    double worst_res = 0.0, worst_defect = 0.0, worst_ratio = 0.0;
    std::string bad;
    for (const Entry& e : table) {
        try {
            const EquilibriumPoint eq = equilibrium_by_index(equilibria(e.model), e.eq_index);
            const CoupledOperator op =
                CoupledOperator::from_linearization(bop, linearize(e.model, eq));
            auto run = [&](double amp) {
                const PeriodicTrajectory I = smooth_forcing(g, 1.0, cfg.M, 1, 1, 0.0, amp, 1);
                return solve_nonlinear_periodic(e.model, eq, I, op, cfg);
            };
            auto [v, rep] = run(1e-3);
            double max_ratio = 0.0;
            for (double r : rep.contraction_ratios) max_ratio = std::max(max_ratio, r);
            worst_res = std::max(worst_res, rep.final_residual);
            worst_defect = std::max(worst_defect, rep.periodicity_defect);
            worst_ratio = std::max(worst_ratio, max_ratio);
            bool entry_ok = rep.final_residual < 1e-7 && rep.periodicity_defect < 1e-8 &&
                            max_ratio < 1.0 && !rep.diverged;

            // zero forcing returns the equilibrium (deviation 0) in one pass
            const PeriodicTrajectory I0(g, 1.0, cfg.M, 1);
            auto [v0, rep0] = solve_nonlinear_periodic(e.model, eq, I0, op, cfg);
            double v0max = 0.0;
            for (const State& s : v0.samples) v0max = std::max(v0max, l2_norm(s));
            if (rep0.outer_iterations != 1 || v0max > 1e-14) entry_ok = false;

            // halving the forcing must not raise the max contraction ratio
            auto [vh, reph] = run(5e-4);
            double half_ratio = 0.0;
            for (double r : reph.contraction_ratios) half_ratio = std::max(half_ratio, r);
            if (half_ratio > max_ratio * (1.0 + 1e-9)) entry_ok = false;

            if (!entry_ok) {
                ok = false;
                bad += (bad.empty() ? "" : ", ") + e.name;
            }
        } catch (const std::exception& ex) {
            ok = false;
            bad += (bad.empty() ? "" : ", ") + e.name + " threw (" + ex.what() + ")";
        }
    }
    report(8, "contraction convergence across the admissible equilibrium table", ok,
           "7 equilibria; worst residual " + fmt(worst_res) + ", worst defect " +
               fmt(worst_defect) + ", worst ratio " + fmt(worst_ratio) +
               (bad.empty() ? "" : "; failing: " + bad));
}

// --- 9. non-admissible linearizations are refused at construction ---

void criterion_9() {
    struct Probe {
        std::string name;
        IonicModelSpec model;
        int eq_index;
    };
    std::vector<Probe> probes{{"FHN@mid", fhn_model(0.1, 1.0, 0.05), 2},
                              {"AP@mid", ap_model(0.1, 8.0, 0.5), 2},
                              {"AP@upper", ap_model(0.1, 8.0, 0.5), 3},
                              {"RM@mid", rm_model(0.1, 1.0, 0.05, 1.0), 2}};
    const GridPtr g = make_grid(1, {33}, {1.0});
    auto bop = std::make_shared<BidomainOperator>(bidomain_1d(g, 1.0, 2.0));
    bool ok = true;
    std::string bad;
    for (const Probe& p : probes) {
        const EquilibriumPoint eq = equilibrium_by_index(equilibria(p.model), p.eq_index);
        const LinearizedSystem lin = linearize(p.model, eq);
        bool flagged = !lin.admissible && !eq.admissible;
        bool refused = false;
        try {
            CoupledOperator::from_linearization(bop, lin);
        } catch (const std::invalid_argument&) {
            refused = true;
        }
        if (!(flagged && refused)) {
            ok = false;
            bad += (bad.empty() ? "" : ", ") + p.name;
        }
    }
    report(9, "non-admissible equilibria flagged and refused", ok,
           ok ? "all 4 probes flagged non-admissible and rejected at construction"
              : "not refused: " + bad);
}

// --- 10. repeated solves with a fixed seed are byte-identical ---

void criterion_10() {
    namespace fs = std::filesystem;
    const fs::path root =
        fs::temp_directory_path() / ("bdps_accept_" + std::to_string(::getpid()));
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    bool ok = true;
    std::string detail;
    try {
        ExperimentConfig cfg;
        cfg.grid.extents = {17};
        cfg.solver.M = 32;
        cfg.seed = 7;
        std::ostringstream sink;
        cfg.output_dir = (root / "a").string();
        if (cmd_solve(cfg, sink) != 0) ok = false;
        cfg.output_dir = (root / "b").string();
        if (cmd_solve(cfg, sink) != 0) ok = false;
        const bool csv_same =
            slurp(root / "a" / "trajectory.csv") == slurp(root / "b" / "trajectory.csv");
        const bool bin_same =
            slurp(root / "a" / "trajectory.bdps") == slurp(root / "b" / "trajectory.bdps");
        if (!csv_same || !bin_same) ok = false;
        detail = std::string("trajectory.csv ") + (csv_same ? "identical" : "DIFFERS") +
                 ", trajectory.bdps " + (bin_same ? "identical" : "DIFFERS");
    } catch (const std::exception& e) {
        ok = false;
        detail = std::string("threw: ") + e.what();
    }
    std::error_code ec;
    fs::remove_all(root, ec);
    report(10, "fixed-seed determinism of solve outputs", ok, detail);
}

}  // namespace

int main() {
    try {
        criterion_1();
        criterion_2();
        criterion_3();
        criterion_4();
        criterion_5();
        criterion_6();
        criterion_7();
        criterion_8();
        criterion_9();
        criterion_10();
    } catch (const std::exception& e) {
        std::cout << "[FAIL] acceptance suite aborted: " << e.what() << "\n";
        return 99;
    }
    std::cout << (g_failures == 0 ? "all acceptance checks passed"
                                  : std::to_string(g_failures) + " acceptance check(s) failed")
              << "\n";
    return g_failures;
}
