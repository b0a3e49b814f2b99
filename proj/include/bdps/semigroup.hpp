#pragma once

// Semigroup actions e^{-tM}x for the coupled operator, the interpolation
// seminorm [x]_{theta,p} and D-norm by log-trapezoid quadrature, and the
// sector-bound sweep |lambda| ||(lambda+M)^{-1}f|| / ||f||.
//
// Two evaluation paths mirror the operator's backends: the dense spectral
// factorization turns every scheme into exact per-mode 2x2 (or scalar)
// arithmetic; the Krylov path steps the coupled system implicitly in
// physical space.

#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include "bdps/operator.hpp"

namespace bdps {

enum class SchemeKind { crank_nicolson, implicit_euler, dense_expm };

struct SchemeSpec {
    SchemeKind kind = SchemeKind::crank_nicolson;
    int n_sub = 0;  // <= 0: default rule max(16, ceil(t * rho_est))

    static SchemeSpec cn(int n = 0) { return {SchemeKind::crank_nicolson, n}; }
    static SchemeSpec ie(int n = 0) { return {SchemeKind::implicit_euler, n}; }
    static SchemeSpec expm() { return {SchemeKind::dense_expm, 0}; }
};

// --- dense 2x2 helpers for the per-mode blocks ---

struct Mat2 {
    double a = 0.0, b = 0.0, c = 0.0, d = 0.0;
};

inline Mat2 mat2_mul(const Mat2& x, const Mat2& y) {
    return {x.a * y.a + x.b * y.c, x.a * y.b + x.b * y.d, x.c * y.a + x.d * y.c,
            x.c * y.b + x.d * y.d};
}
inline Mat2 mat2_inv(const Mat2& x) {
    const double det = x.a * x.d - x.b * x.c;
    if (det == 0.0) throw std::runtime_error("mat2_inv: singular 2x2 block");
    return {x.d / det, -x.b / det, -x.c / det, x.a / det};
}
inline Mat2 mat2_pow(Mat2 x, long long e) {
    Mat2 r{1.0, 0.0, 0.0, 1.0};
    while (e > 0) {
        if (e & 1) r = mat2_mul(r, x);
        x = mat2_mul(x, x);
        e >>= 1;
    }
    return r;
}
inline double dpow_int(double base, long long e) {
    double r = 1.0;
    while (e > 0) {
        if (e & 1) r *= base;
        base *= base;
        e >>= 1;
    }
    return r;
}

// Overflow-stable e^{-tM} for a real 2x2 M: split M = sI + N with
// tr N = 0, N^2 = (s^2 - det M) I, and combine the exponential factors so
// only e^{-t(s -/+ gap)} appear (series fallback near a defective block).
inline Mat2 expm2(double t, const Mat2& m) {
    const double s = 0.5 * (m.a + m.d);
    const double det = m.a * m.d - m.b * m.c;
    const double disc = s * s - det;
    double ch, shc;  // e^{-ts} cosh(t*gap), e^{-ts} sinh(t*gap)/gap
    if (disc >= 0.0) {
        const double gap = std::sqrt(disc);
        if (t * gap < 1e-4) {
            const double e = std::exp(-t * s), x = t * gap;
            ch = e * (1.0 + x * x / 2.0 + x * x * x * x / 24.0);
            shc = e * t * (1.0 + x * x / 6.0 + x * x * x * x / 120.0);
        } else {
            const double ep = std::exp(-t * (s - gap)), em = std::exp(-t * (s + gap));
            ch = 0.5 * (ep + em);
            shc = 0.5 * (ep - em) / gap;
        }
    } else {
        const double nu = std::sqrt(-disc), e = std::exp(-t * s);
        ch = e * std::cos(t * nu);
        shc = (t * nu < 1e-4) ? e * t * (1.0 - (t * nu) * (t * nu) / 6.0)
                              : e * std::sin(t * nu) / nu;
    }
    return {ch - shc * (m.a - s), -shc * m.b, -shc * m.c, ch - shc * (m.d - s)};
}

inline Mat2 mode_block(const CoupledOperator& op, double mu) {
    return {op.eps * mu + op.alpha, op.beta, -op.gamma, op.delta};
}

// Largest-eigenvalue estimate: exact per-mode maximum when the spectral
// basis fits, else a fixed-count power iteration from a deterministic start.
inline double estimate_largest_eigenvalue(const CoupledOperator& op) {
    if (op.spectral_available()) {
        const auto& sb = op.spectral();
        double rho = 0.0;
        for (double mu : sb.mu) {
            if (op.ncomp == 1) {
                rho = std::max(rho, std::abs(op.eps * mu + op.alpha));
                continue;
            }
            const Mat2 m = mode_block(op, mu);
            const double s = 0.5 * (m.a + m.d), det = m.a * m.d - m.b * m.c;
            const double disc = s * s - det;
            if (disc >= 0.0) {
                const double gap = std::sqrt(disc);
                rho = std::max({rho, std::abs(s + gap), std::abs(s - gap)});
            } else {
                rho = std::max(rho, std::sqrt(std::max(det, 0.0)));
            }
        }
        return rho;
    }
    State y = State::zeros(op.grid_, op.ncomp);
    for (int c = 0; c < op.ncomp; ++c)
        for (int i = 0; i < op.grid_->nodes(); ++i)
            y.comps[c].values[i] = 1.0 + 0.5 * std::sin(double(i + 1 + c));
    double rho = 0.0;
    for (int it = 0; it < 40; ++it) {
        const double ny = l2_norm(y);
        if (ny == 0.0) break;
        y.scale(1.0 / ny);
        y = op.apply(y);
        rho = l2_norm(y);
    }
    return rho;
}

inline int default_substeps(const CoupledOperator& op, double t) {
    const double rho = estimate_largest_eigenvalue(op);
    const double target = std::ceil(t * rho);
    const double capped = std::min(target, 1e7);
    return std::max(16, static_cast<int>(capped));
}

// a*I + b*M as a coupled operator (shares the diffusion spectral cache).
inline CoupledOperator scaled_shift(const CoupledOperator& op, double a, double b) {
    CoupledOperator r = op;
    r.eps = b * op.eps;
    r.alpha = a + b * op.alpha;
    r.beta = b * op.beta;
    r.gamma = b * op.gamma;
    r.delta = a + b * op.delta;
    return r;
}

// One implicit step of dx/dt + Mx = f in physical space (f0/f1 may be null
// for the source-free flow).  Crank-Nicolson: (I + dt/2 M) x+ =
// (I - dt/2 M) x + dt/2 (f0 + f1); implicit Euler: (I + dt M) x+ = x + dt f1.
inline State scheme_step(const CoupledOperator& op, const State& x, const State* f0,
                         const State* f1, double dt, SchemeKind kind,
                         SolveBackend backend = SolveBackend::automatic) {
    if (kind == SchemeKind::dense_expm)
        throw std::invalid_argument("scheme_step: dense_expm is not a stepping scheme");
    const double z = kind == SchemeKind::crank_nicolson ? 0.5 * dt : dt;
    State rhs = x;
    if (kind == SchemeKind::crank_nicolson) {
        State mx = op.apply(x);
        rhs.axpy(-z, mx);
        if (f0) rhs.axpy(z, *f0);
        if (f1) rhs.axpy(z, *f1);
    } else {
        if (f1) rhs.axpy(dt, *f1);
    }
    return coupled_inverse_apply(scaled_shift(op, 1.0, z), rhs, backend);
}

// e^{-tM} x by the requested scheme.  The spectral path reduces every scheme
// to exact per-mode arithmetic (the Crank-Nicolson/implicit-Euler step maps
// diagonalize along with M, so the per-mode power IS the scheme, not an
// approximation of it).
inline State apply_semigroup(const CoupledOperator& op, double t, const State& x,
                             SchemeSpec scheme = {}, SolveBackend backend = SolveBackend::automatic) {
    if (t < 0.0) throw std::invalid_argument("apply_semigroup: t must be >= 0");
    if (x.components() != op.ncomp)
        throw std::invalid_argument("apply_semigroup: component mismatch");
    if (t == 0.0) return x;
    backend = op.resolve_backend(backend);
    if (scheme.kind == SchemeKind::dense_expm && backend != SolveBackend::spectral)
        throw std::invalid_argument(
            "apply_semigroup: dense_expm requires the dense spectral path (state dimension cap)");
    if (backend == SolveBackend::spectral) {
        const auto& sb = op.spectral();
        const int n = sb.size();
        Eigen::VectorXd c1 = sb.to_modes(x.comps[0]);
        Eigen::VectorXd c2 = op.ncomp == 2 ? sb.to_modes(x.comps[1]) : Eigen::VectorXd();
        if (scheme.kind == SchemeKind::dense_expm) {
            for (int k = 0; k < n; ++k) {
                if (op.ncomp == 1) {
                    c1[k] *= std::exp(-t * (op.eps * sb.mu[k] + op.alpha));
                } else {
                    const Mat2 e = expm2(t, mode_block(op, sb.mu[k]));
                    const double v = c1[k], z = c2[k];
                    c1[k] = e.a * v + e.b * z;
                    c2[k] = e.c * v + e.d * z;
                }
            }
        } else {
            const int nsub = scheme.n_sub > 0 ? scheme.n_sub : default_substeps(op, t);
            const double dt = t / nsub;
            const bool cn = scheme.kind == SchemeKind::crank_nicolson;
            for (int k = 0; k < n; ++k) {
                if (op.ncomp == 1) {
                    const double a = op.eps * sb.mu[k] + op.alpha;
                    const double r = cn ? (1.0 - 0.5 * dt * a) / (1.0 + 0.5 * dt * a)
                                        : 1.0 / (1.0 + dt * a);
                    c1[k] *= dpow_int(r, nsub);
                } else {
                    const Mat2 m = mode_block(op, sb.mu[k]);
                    Mat2 step;
                    if (cn) {
                        const double z = 0.5 * dt;
                        const Mat2 plus{1.0 + z * m.a, z * m.b, z * m.c, 1.0 + z * m.d};
                        const Mat2 minus{1.0 - z * m.a, -z * m.b, -z * m.c, 1.0 - z * m.d};
                        step = mat2_mul(mat2_inv(plus), minus);
                    } else {
                        const Mat2 plus{1.0 + dt * m.a, dt * m.b, dt * m.c, 1.0 + dt * m.d};
                        step = mat2_inv(plus);
                    }
                    const Mat2 p = mat2_pow(step, nsub);
                    const double v = c1[k], z2 = c2[k];
                    c1[k] = p.a * v + p.b * z2;
                    c2[k] = p.c * v + p.d * z2;
                }
            }
        }
        State out = State::zeros(op.grid_, op.ncomp);
        out.comps[0] = sb.from_modes(c1);
        if (op.ncomp == 2) out.comps[1] = sb.from_modes(c2);
        return out;
    }
    const int nsub = scheme.n_sub > 0 ? scheme.n_sub : default_substeps(op, t);
    const double dt = t / nsub;
    State cur = x;
    for (int k = 0; k < nsub; ++k)
        cur = scheme_step(op, cur, nullptr, nullptr, dt, scheme.kind, backend);
    return cur;
}

// --- interpolation seminorm ---

struct SeminormQuadrature {
    double t_min = 1e-6;
    double t_max = 40.0;
    int nodes_per_decade = 32;

    void validate() const {
        if (!(t_min > 0.0) || !(t_min < t_max))
            throw std::invalid_argument("SeminormQuadrature: need 0 < t_min < t_max");
        if (nodes_per_decade < 8)
            throw std::invalid_argument("SeminormQuadrature: need >= 8 nodes per decade");
    }
};

struct SeminormResult {
    double value = 0.0;        // quadrature estimate of [x]_{theta,p}
    double error_bound = 0.0;  // truncation allowance: (I + head + tail)^{1/p} - value
    double head_bound = 0.0;   // integral head 0..t_min bound (on the p-th power)
    double tail_bound = 0.0;   // integral tail t_max..inf bound (on the p-th power)
};

namespace detail {

// ||M e^{-tM} x||_q evaluator, factored so quadrature code is path-agnostic.
struct SemigroupNormEvaluator {
    const CoupledOperator& op;
    double q;
    SolveBackend backend;
    // spectral data
    bool use_modes = false;
    Eigen::VectorXd c1, c2;
    const SpectralBasis* sb = nullptr;
    // krylov data
    const State* x = nullptr;

    double operator()(double t) const {
        if (use_modes) {
            const int n = sb->size();
            if (q == 2.0) {
                double acc = 0.0;
                for (int k = 0; k < n; ++k) {
                    if (op.ncomp == 1) {
                        const double a = op.eps * sb->mu[k] + op.alpha;
                        const double y = std::exp(-t * a) * c1[k];
                        acc += (a * y) * (a * y);
                    } else {
                        const Mat2 m = mode_block(op, sb->mu[k]);
                        const Mat2 e = expm2(t, m);
                        const double y1 = e.a * c1[k] + e.b * c2[k];
                        const double y2 = e.c * c1[k] + e.d * c2[k];
                        const double g1 = m.a * y1 + m.b * y2;
                        const double g2 = m.c * y1 + m.d * y2;
                        acc += g1 * g1 + g2 * g2;
                    }
                }
                return std::sqrt(std::max(0.0, acc));
            }
            Eigen::VectorXd g1(n), g2(op.ncomp == 2 ? n : 0);
            for (int k = 0; k < n; ++k) {
                if (op.ncomp == 1) {
                    const double a = op.eps * sb->mu[k] + op.alpha;
                    g1[k] = a * std::exp(-t * a) * c1[k];
                } else {
                    const Mat2 m = mode_block(op, sb->mu[k]);
                    const Mat2 e = expm2(t, m);
                    const double y1 = e.a * c1[k] + e.b * c2[k];
                    const double y2 = e.c * c1[k] + e.d * c2[k];
                    g1[k] = m.a * y1 + m.b * y2;
                    g2[k] = m.c * y1 + m.d * y2;
                }
            }
            State g = State::zeros(op.grid_, op.ncomp);
            g.comps[0] = sb->from_modes(g1);
            if (op.ncomp == 2) g.comps[1] = sb->from_modes(g2);
            return lq_norm(g, q);
        }
        State y = apply_semigroup(op, t, *x, SchemeSpec::cn(), backend);
        return lq_norm(op.apply(y), q);
    }
};

}  // namespace detail

// [x]_{theta,p} = (int_0^infty (t^{1-theta} ||M e^{-tM} x||)^p dt/t)^{1/p}
// by composite trapezoid in log t over [t_min, t_max]; analytic bounds for
// the truncated head and tail go into the error bar.  The default norm is
// the weighted L2 norm (q = 2); other q are diagnostics.
inline SeminormResult interpolation_seminorm(const CoupledOperator& op, const State& x,
                                             double theta, double p,
                                             SeminormQuadrature quad = {}, double q = 2.0,
                                             SolveBackend backend = SolveBackend::automatic) {
    if (!(theta > 0.0 && theta < 1.0))
        throw std::invalid_argument("interpolation_seminorm: theta must lie in (0,1)");
    if (!(p >= 1.0) || std::isinf(p))
        throw std::invalid_argument("interpolation_seminorm: need 1 <= p < infinity");
    quad.validate();
    if (x.components() != op.ncomp)
        throw std::invalid_argument("interpolation_seminorm: component mismatch");
    if (l2_norm(x) == 0.0) return {};
    backend = op.resolve_backend(backend);

    // Decay rate for the tail bound; the unshifted diffusion operator is
    // only defined on mean-zero data (constants do not decay).
    double m;
    if (op.ncomp == 1 && op.alpha == 0.0) {
        const double mean = integrate(x.comps[0]);
        const double scale = l2_norm(x) * std::sqrt(op.grid_->measure());
        if (std::abs(mean) > 1e-10 * scale + 1e-300)
            throw std::invalid_argument(
                "interpolation_seminorm: nonzero-mean data under the unshifted diffusion "
                "operator (the seminorm integral diverges on constants)");
        if (backend != SolveBackend::spectral)
            throw std::invalid_argument(
                "interpolation_seminorm: the unshifted operator needs the spectral path to "
                "bound the decay of mean-zero data");
        const auto& sb = op.spectral();
        m = std::numeric_limits<double>::infinity();
        for (double mu : sb.mu)
            if (mu > 0.0) m = std::min(m, op.eps * mu);
        if (std::isinf(m))
            throw std::invalid_argument("interpolation_seminorm: operator has no decaying modes");
    } else {
        m = op.decay_rate();
        if (!(m > 0.0))
            throw std::invalid_argument(
                "interpolation_seminorm: spectral lower bound must be positive (the integral "
                "may diverge)");
    }

    detail::SemigroupNormEvaluator eval{op, q, backend, false, {}, {}, nullptr, &x};
    if (backend == SolveBackend::spectral) {
        eval.use_modes = true;
        eval.sb = &op.spectral();
        eval.c1 = eval.sb->to_modes(x.comps[0]);
        if (op.ncomp == 2) eval.c2 = eval.sb->to_modes(x.comps[1]);
    }

    const double a = (1.0 - theta) * p;
    const int decades_nodes = static_cast<int>(
        std::ceil(std::log10(quad.t_max / quad.t_min) * quad.nodes_per_decade));
    const int nnodes = std::max(decades_nodes, 2);
    const double dlog = std::log(quad.t_max / quad.t_min) / nnodes;
    double integral = 0.0;
    double g_end = 0.0;
    for (int j = 0; j <= nnodes; ++j) {
        const double t = quad.t_min * std::exp(dlog * j);
        const double g = eval(t);
        if (j == nnodes) g_end = g;
        const double f = std::pow(t, a) * std::pow(g, p);
        integral += (j == 0 || j == nnodes) ? 0.5 * f : f;
    }
    integral *= dlog;

    const double head = std::pow(lq_norm(op.apply(x), q), p) * std::pow(quad.t_min, a) / a;
    double tail;
    const double pm = p * m;
    if (a <= 1.0) {
        tail = std::pow(g_end, p) * std::pow(quad.t_max, a - 1.0) / pm;
    } else {
        tail = std::pow(g_end, p) * std::pow(2.0, a - 1.0) *
               (std::pow(quad.t_max, a - 1.0) / pm + std::tgamma(a) / std::pow(pm, a));
    }

    SeminormResult r;
    r.value = std::pow(integral, 1.0 / p);
    r.head_bound = head;
    r.tail_bound = tail;
    r.error_bound = std::pow(integral + head + tail, 1.0 / p) - r.value;
    return r;
}

// ||x|| + [x]_{theta,p}: the interpolation-space norm.
inline double dA_norm(const CoupledOperator& op, const State& x, double theta, double p,
                      SeminormQuadrature quad = {}, double q = 2.0,
                      SolveBackend backend = SolveBackend::automatic) {
    if (l2_norm(x) == 0.0) return 0.0;
    return lq_norm(x, q) + interpolation_seminorm(op, x, theta, p, quad, q, backend).value;
}

// --- sector-bound sweep ---

struct SectorRow {
    double re_lambda = 0.0;
    double im_lambda = 0.0;
    double q = 2.0;
    double ratio = 0.0;  // max over probes of |lambda| ||(lambda+M)^{-1}f||_q / ||f||_q
    bool converged = true;
};

inline std::vector<SectorRow> verify_sector_bound(
    const CoupledOperator& op, const std::vector<double>& angles,
    const std::vector<double>& radii, const std::vector<State>& probes,
    const std::vector<double>& qs = {2.0}, SolveBackend backend = SolveBackend::automatic) {
    const double pi = 3.14159265358979323846;
    for (double ang : angles)
        if (!(std::abs(ang) < pi))
            throw std::invalid_argument("verify_sector_bound: angles must lie strictly in (-pi, pi)");
    for (double r : radii)
        if (!(r > 0.0)) throw std::invalid_argument("verify_sector_bound: radii must be positive");
    if (probes.empty()) throw std::invalid_argument("verify_sector_bound: no probe fields");
    for (const State& f : probes)
        if (l2_norm(f) == 0.0)
            throw std::invalid_argument("verify_sector_bound: probes must be nonzero");

    std::vector<SectorRow> rows;
    rows.reserve(angles.size() * radii.size() * qs.size());
    for (double ang : angles) {
        for (double r : radii) {
            const std::complex<double> lambda = std::polar(r, ang);
            std::vector<double> best(qs.size(), 0.0);
            bool ok = true;
            for (const State& f : probes) {
                try {
                    const ComplexState sol =
                        op.solve_shifted(lambda, ComplexState::from_real(f), backend);
                    State modulus = State::zeros(op.grid_, op.ncomp);
                    for (int c = 0; c < op.ncomp; ++c)
                        for (int i = 0; i < op.grid_->nodes(); ++i)
                            modulus.comps[c].values[i] =
                                std::hypot(sol.comps[c].re.values[i], sol.comps[c].im.values[i]);
                    for (std::size_t iq = 0; iq < qs.size(); ++iq) {
                        const double num = std::abs(lambda) * lq_norm(modulus, qs[iq]);
                        const double den = lq_norm(f, qs[iq]);
                        best[iq] = std::max(best[iq], num / den);
                    }
                } catch (const std::exception&) {
                    ok = false;
                }
            }
            for (std::size_t iq = 0; iq < qs.size(); ++iq) {
                SectorRow row;
                row.re_lambda = lambda.real();
                row.im_lambda = lambda.imag();
                row.q = qs[iq];
                row.ratio = best[iq];
                row.converged = ok;
                rows.push_back(row);
            }
        }
    }
    return rows;
}

}  // namespace bdps
