#pragma once

// The coupled block operator of the shifted system,
//   M = [[eps*A + alpha, beta], [-gamma, delta]]   (two components),
//   M =   A + alpha                                (one component),
// where A is a weighted-self-adjoint PSD diffusion operator (bidomain,
// plain elliptic, or absent).  Generation of an exponentially decaying
// analytic semigroup requires alpha > 0, beta >= 0, gamma >= 0, delta > 0
// ("admissible"); construction from a linearization enforces this.
//
// Two interchangeable resolvent backends:
//   spectral - exact per-mode 2x2 solves in the diffusion eigenbasis
//              (dense factorization, cached, desk-scale dimensions only);
//   krylov   - Schur reduction to a scalar complex-shifted diffusion solve
//              handled by CG / blocked GMRES (no dense factorization).

#include <complex>
#include <functional>
#include <memory>
#include <mutex>
#include <vector>

#include "bdps/bidomain.hpp"
#include "bdps/ionic.hpp"
#include "bdps/krylov.hpp"
#include "bdps/spectral.hpp"

namespace bdps {

struct ComplexState {
    std::vector<ComplexField> comps;

    static ComplexState zeros(const GridPtr& g, int ncomp) {
        ComplexState s;
        s.comps.reserve(ncomp);
        for (int c = 0; c < ncomp; ++c) s.comps.push_back({ScalarField(g), ScalarField(g)});
        return s;
    }
    static ComplexState from_real(const State& x) {
        ComplexState s;
        s.comps.reserve(x.components());
        for (const auto& f : x.comps) s.comps.push_back({f, ScalarField(f.grid)});
        return s;
    }
    int components() const { return static_cast<int>(comps.size()); }
};

enum class SolveBackend { automatic, spectral, krylov };

namespace detail {

// Solve (s + D) u = f, D a W-self-adjoint PSD diffusion apply, Re(s) > 0 or
// s real > 0.  Real s with real data goes through CG in the W inner product;
// otherwise the system is written as 2N coupled real blocks and handed to
// GMRES with the blockwise W inner product.
inline ComplexField shifted_diffusion_solve(
    const GridPtr& grid, const std::function<ScalarField(const ScalarField&)>& applyD,
    std::complex<double> s, const ComplexField& f, double tol, int max_iter) {
    const int n = grid->nodes();
    const auto& w = grid->weights;
    double im_norm = 0.0;
    for (double v : f.im.values) im_norm = std::max(im_norm, std::abs(v));
    if (s.imag() == 0.0 && im_norm == 0.0) {
        if (!(s.real() > 0.0))
            throw std::invalid_argument("shifted_diffusion_solve: real shift must be positive");
        auto apply = [&](const std::vector<double>& x, std::vector<double>& y) {
            ScalarField xf(grid, x);
            ScalarField ax = applyD(xf);
            for (int i = 0; i < n; ++i) y[i] = s.real() * x[i] + ax.values[i];
        };
        auto ident = [](const std::vector<double>& r, std::vector<double>& z) { z = r; };
        auto wdot = [&](const std::vector<double>& a, const std::vector<double>& b) {
            double acc = 0.0;
            for (int i = 0; i < n; ++i) acc += w[i] * a[i] * b[i];
            return acc;
        };
        std::vector<double> x(n, 0.0);
        auto res = pcg(apply, ident, f.re.values, x, tol, max_iter, wdot);
        if (!res.converged)
            throw std::runtime_error("shifted_diffusion_solve: CG stalled (rel residual " +
                                     std::to_string(res.rel_residual) + ")");
        return {ScalarField(grid, std::move(x)), ScalarField(grid)};
    }
    // blocked real form [vr; vi]
    auto apply = [&](const std::vector<double>& x, std::vector<double>& y) {
        ScalarField vr(grid), vi(grid);
        std::copy(x.begin(), x.begin() + n, vr.values.begin());
        std::copy(x.begin() + n, x.end(), vi.values.begin());
        ScalarField ar = applyD(vr), ai = applyD(vi);
        for (int i = 0; i < n; ++i) {
            y[i] = s.real() * x[i] - s.imag() * x[n + i] + ar.values[i];
            y[n + i] = s.imag() * x[i] + s.real() * x[n + i] + ai.values[i];
        }
    };
    auto wdot2 = [&](const std::vector<double>& a, const std::vector<double>& b) {
        double acc = 0.0;
        for (int i = 0; i < n; ++i) acc += w[i] * (a[i] * b[i] + a[n + i] * b[n + i]);
        return acc;
    };
    std::vector<double> rhs(2 * n), x(2 * n, 0.0);
    std::copy(f.re.values.begin(), f.re.values.end(), rhs.begin());
    std::copy(f.im.values.begin(), f.im.values.end(), rhs.begin() + n);
    const int cap = std::min(max_iter, 2 * n);
    auto res = gmres(apply, rhs, x, tol, cap, wdot2);
    if (!res.converged)
        throw std::runtime_error("shifted_diffusion_solve: GMRES stalled (rel residual " +
                                 std::to_string(res.rel_residual) + ")");
    ComplexField out{ScalarField(grid), ScalarField(grid)};
    std::copy(x.begin(), x.begin() + n, out.re.values.begin());
    std::copy(x.begin() + n, x.end(), out.im.values.begin());
    return out;
}

}  // namespace detail

struct CoupledOperator {
    GridPtr grid_;
    int ncomp = 2;
    double eps = 1.0, alpha = 0.0, beta = 0.0, gamma = 0.0, delta = 1.0;
    std::shared_ptr<const BidomainOperator> bop;  // at most one of bop/eop set
    std::shared_ptr<const EllipticOperator> eop;
    double krylov_tol = 1e-11;
    int krylov_max_iter = 20000;

    struct SpectralCache {
        std::once_flag flag;
        std::shared_ptr<const SpectralBasis> basis;
    };
    std::shared_ptr<SpectralCache> cache = std::make_shared<SpectralCache>();

    GridPtr grid() const { return grid_; }
    int components() const { return ncomp; }

    bool spectral_available() const { return grid_->nodes() <= kSpectralDimensionCap; }

    const SpectralBasis& spectral() const {
        std::call_once(cache->flag, [&] {
            if (bop)
                cache->basis = std::make_shared<const SpectralBasis>(make_spectral(*bop));
            else if (eop)
                cache->basis = std::make_shared<const SpectralBasis>(make_spectral(*eop));
            else {
                // no diffusion: every node is its own zero mode
                SpectralBasis b;
                b.grid = grid_;
                const int n = grid_->nodes();
                b.mu.assign(n, 0.0);
                b.weights = Eigen::Map<const Eigen::VectorXd>(grid_->weights.data(), n);
                b.Phi = b.weights.cwiseSqrt().cwiseInverse().asDiagonal();
                cache->basis = std::make_shared<const SpectralBasis>(std::move(b));
            }
        });
        return *cache->basis;
    }

    ScalarField diffusion_apply(const ScalarField& v) const {
        if (bop) return apply_bidomain(*bop, v);
        if (eop) return eop->apply(v);
        return ScalarField(grid_);
    }

    State apply(const State& x) const {
        if (x.components() != ncomp)
            throw std::invalid_argument("CoupledOperator::apply: component mismatch");
        State y = State::zeros(grid_, ncomp);
        ScalarField av = diffusion_apply(x.comps[0]);
        const int n = grid_->nodes();
        if (ncomp == 1) {
            for (int i = 0; i < n; ++i)
                y.comps[0].values[i] = eps * av.values[i] + alpha * x.comps[0].values[i];
            return y;
        }
        for (int i = 0; i < n; ++i) {
            y.comps[0].values[i] =
                eps * av.values[i] + alpha * x.comps[0].values[i] + beta * x.comps[1].values[i];
            y.comps[1].values[i] = -gamma * x.comps[0].values[i] + delta * x.comps[1].values[i];
        }
        return y;
    }

    // Closed-form smallest real part of the spectrum of the per-mode block
    // [[eps*mu + alpha, beta], [-gamma, delta]].
    double mode_decay(double mu) const {
        const double a11 = eps * mu + alpha;
        if (ncomp == 1) return a11;
        const double disc = (a11 - delta) * (a11 - delta) - 4.0 * beta * gamma;
        if (disc >= 0.0) return 0.5 * (a11 + delta - std::sqrt(disc));
        return 0.5 * (a11 + delta);
    }

    // Exponential decay rate of the semigroup: exact minimum over diffusion
    // modes when the spectral basis fits, else the safe bound min(alpha,
    // delta) (the per-mode minimum never drops below it).
    double decay_rate() const {
        if (spectral_available()) {
            const auto& sb = spectral();
            double m = mode_decay(sb.mu[0]);
            for (double mu : sb.mu) m = std::min(m, mode_decay(mu));
            return m;
        }
        return ncomp == 1 ? alpha : std::min(alpha, delta);
    }

    SolveBackend resolve_backend(SolveBackend b) const {
        if (b == SolveBackend::automatic)
            return spectral_available() ? SolveBackend::spectral : SolveBackend::krylov;
        if (b == SolveBackend::spectral && !spectral_available())
            throw std::invalid_argument(
                "CoupledOperator: spectral backend requested above the dense dimension cap");
        return b;
    }

    // Per-mode resolvent (lambda + M)^{-1} acting on mode coefficients
    // in-place; c2 may be null for one-component operators.
    void solve_shifted_modes(std::complex<double> lambda, Eigen::VectorXcd& c1,
                             Eigen::VectorXcd* c2) const {
        const auto& sb = spectral();
        const int n = sb.size();
        if (ncomp == 1) {
            for (int k = 0; k < n; ++k) c1[k] /= lambda + eps * sb.mu[k] + alpha;
            return;
        }
        if (c2 == nullptr)
            throw std::invalid_argument("solve_shifted_modes: missing second component");
        for (int k = 0; k < n; ++k) {
            const std::complex<double> a11 = lambda + eps * sb.mu[k] + alpha;
            const std::complex<double> a22 = lambda + delta;
            const std::complex<double> det = a11 * a22 + beta * gamma;
            const std::complex<double> f1 = c1[k], f2 = (*c2)[k];
            c1[k] = (a22 * f1 - beta * f2) / det;
            (*c2)[k] = (gamma * f1 + a11 * f2) / det;
        }
    }

    // Resolvent (lambda + M)^{-1} f for complex lambda with Re(lambda) >= 0.
    ComplexState solve_shifted(std::complex<double> lambda, const ComplexState& f,
                               SolveBackend backend = SolveBackend::automatic) const {
        if (f.components() != ncomp)
            throw std::invalid_argument("solve_shifted: component mismatch");
        backend = resolve_backend(backend);
        if (backend == SolveBackend::spectral) {
            const auto& sb = spectral();
            auto complex_modes = [&sb](const ComplexField& cf) {
                return (sb.to_modes(cf.re).cast<std::complex<double>>() +
                        std::complex<double>(0, 1) *
                            sb.to_modes(cf.im).cast<std::complex<double>>())
                    .eval();
            };
            Eigen::VectorXcd c1 = complex_modes(f.comps[0]);
            ComplexState out = ComplexState::zeros(grid_, ncomp);
            if (ncomp == 1) {
                solve_shifted_modes(lambda, c1, nullptr);
                out.comps[0].re = sb.from_modes(c1.real());
                out.comps[0].im = sb.from_modes(c1.imag());
                return out;
            }
            Eigen::VectorXcd c2 = complex_modes(f.comps[1]);
            solve_shifted_modes(lambda, c1, &c2);
            out.comps[0].re = sb.from_modes(c1.real());
            out.comps[0].im = sb.from_modes(c1.imag());
            out.comps[1].re = sb.from_modes(c2.real());
            out.comps[1].im = sb.from_modes(c2.imag());
            return out;
        }
        // Krylov backend: Schur reduction.  Second row gives
        // z = (f2 + gamma v) / (lambda + delta); substituting into the first
        // row leaves (s + eps*A) v = f1 - beta/(lambda+delta) f2 with
        // s = lambda + alpha + beta*gamma/(lambda+delta).
        auto applyD = [this](const ScalarField& v) { return diffusion_apply(v); };
        const int n = grid_->nodes();
        ComplexState out = ComplexState::zeros(grid_, ncomp);
        if (ncomp == 1) {
            const std::complex<double> s = (lambda + alpha) / eps;
            ComplexField g{f.comps[0].re, f.comps[0].im};
            for (int i = 0; i < n; ++i) {
                g.re.values[i] /= eps;
                g.im.values[i] /= eps;
            }
            out.comps[0] =
                detail::shifted_diffusion_solve(grid_, applyD, s, g, krylov_tol, krylov_max_iter);
            return out;
        }
        const std::complex<double> ld = lambda + delta;
        if (std::abs(ld) == 0.0)
            throw std::invalid_argument("solve_shifted: lambda + delta = 0 is outside the sector");
        const std::complex<double> s = (lambda + alpha + beta * gamma / ld) / eps;
        const std::complex<double> cf = beta / ld / eps;
        ComplexField g{ScalarField(grid_), ScalarField(grid_)};
        for (int i = 0; i < n; ++i) {
            const std::complex<double> f1(f.comps[0].re.values[i], f.comps[0].im.values[i]);
            const std::complex<double> f2(f.comps[1].re.values[i], f.comps[1].im.values[i]);
            const std::complex<double> gi = f1 / eps - cf * f2;
            g.re.values[i] = gi.real();
            g.im.values[i] = gi.imag();
        }
        out.comps[0] =
            detail::shifted_diffusion_solve(grid_, applyD, s, g, krylov_tol, krylov_max_iter);
        for (int i = 0; i < n; ++i) {
            const std::complex<double> v(out.comps[0].re.values[i], out.comps[0].im.values[i]);
            const std::complex<double> f2(f.comps[1].re.values[i], f.comps[1].im.values[i]);
            const std::complex<double> z = (f2 + gamma * v) / ld;
            out.comps[1].re.values[i] = z.real();
            out.comps[1].im.values[i] = z.imag();
        }
        return out;
    }

    static CoupledOperator from_linearization(std::shared_ptr<const BidomainOperator> diffusion,
                                              const LinearizedSystem& lin) {
        if (!diffusion) throw std::invalid_argument("from_linearization: null diffusion operator");
        CoupledOperator op = unchecked(diffusion->grid, lin);
        op.bop = std::move(diffusion);
        op.require_admissible(lin);
        return op;
    }
    static CoupledOperator from_linearization(std::shared_ptr<const EllipticOperator> diffusion,
                                              const LinearizedSystem& lin) {
        if (!diffusion) throw std::invalid_argument("from_linearization: null diffusion operator");
        CoupledOperator op = unchecked(diffusion->grid, lin);
        op.eop = std::move(diffusion);
        op.require_admissible(lin);
        return op;
    }
    // Reaction-only system (zero diffusion block), still admissibility-gated.
    static CoupledOperator from_linearization(GridPtr grid, const LinearizedSystem& lin) {
        CoupledOperator op = unchecked(std::move(grid), lin);
        op.require_admissible(lin);
        return op;
    }

    // No admissibility check; for probing non-generating coefficient sets and
    // for pure-diffusion norms (alpha = 0).
    static CoupledOperator unchecked(GridPtr grid, const LinearizedSystem& lin) {
        CoupledOperator op;
        op.grid_ = std::move(grid);
        op.ncomp = lin.components;
        op.eps = lin.eps;
        op.alpha = lin.alpha;
        op.beta = lin.beta;
        op.gamma = lin.gamma;
        op.delta = lin.delta;
        return op;
    }

private:
    void require_admissible(const LinearizedSystem& lin) const {
        if (lin.admissible) return;
        throw std::invalid_argument(
            "from_linearization: equilibrium is not admissible (alpha = " +
            std::to_string(lin.alpha) + ", beta = " + std::to_string(lin.beta) +
            ", gamma = " + std::to_string(lin.gamma) + ", delta = " + std::to_string(lin.delta) +
            "); the shifted operator would not generate a decaying semigroup");
    }
};

// Scalar operator eps*A + alpha over a diffusion block: the self-adjoint
// probe object for sector sweeps and seminorm oracles (alpha = 0 gives the
// unshifted diffusion itself).
inline CoupledOperator scalar_shifted_diffusion(std::shared_ptr<const BidomainOperator> diffusion,
                                                double alpha, double eps = 1.0) {
    if (!diffusion)
        throw std::invalid_argument("scalar_shifted_diffusion: null diffusion operator");
    LinearizedSystem lin;
    lin.components = 1;
    lin.alpha = alpha;
    lin.eps = eps;
    lin.admissible = true;
    CoupledOperator op = CoupledOperator::unchecked(diffusion->grid, lin);
    op.bop = std::move(diffusion);
    return op;
}
inline CoupledOperator scalar_shifted_diffusion(std::shared_ptr<const EllipticOperator> diffusion,
                                                double alpha, double eps = 1.0) {
    if (!diffusion)
        throw std::invalid_argument("scalar_shifted_diffusion: null diffusion operator");
    LinearizedSystem lin;
    lin.components = 1;
    lin.alpha = alpha;
    lin.eps = eps;
    lin.admissible = true;
    CoupledOperator op = CoupledOperator::unchecked(diffusion->grid, lin);
    op.eop = std::move(diffusion);
    return op;
}

template <class Op>
concept SectorialOperator = requires(const Op& op, const State& x, std::complex<double> lam,
                                     const ComplexState& f) {
    { op.components() } -> std::convertible_to<int>;
    { op.grid() } -> std::convertible_to<GridPtr>;
    { op.apply(x) } -> std::convertible_to<State>;
    { op.solve_shifted(lam, f) } -> std::convertible_to<ComplexState>;
    { op.decay_rate() } -> std::convertible_to<double>;
};

inline State coupled_apply(const CoupledOperator& op, const State& x) { return op.apply(x); }

// Exact stationary solve M x = f.  Two-component reduction: the formal
// inverse [[delta, -beta], [gamma, .]] / (beta*gamma + delta*(eps*A+alpha))
// gives v from one SPD solve, then z = (f2 + gamma v) / delta.
inline State coupled_inverse_apply(const CoupledOperator& op, const State& f,
                                   SolveBackend backend = SolveBackend::automatic) {
    if (f.components() != op.ncomp)
        throw std::invalid_argument("coupled_inverse_apply: component mismatch");
    backend = op.resolve_backend(backend);
    const double shift0 =
        op.ncomp == 1 ? op.alpha : op.beta * op.gamma + op.delta * op.alpha;
    if (!(shift0 > 0.0))
        throw std::invalid_argument(
            "coupled_inverse_apply: stationary block is singular (zero-order shift <= 0)");
    const int n = op.grid_->nodes();
    State out = State::zeros(op.grid_, op.ncomp);
    if (backend == SolveBackend::spectral) {
        const auto& sb = op.spectral();
        Eigen::VectorXcd c1 = sb.to_modes(f.comps[0]).cast<std::complex<double>>();
        if (op.ncomp == 1) {
            op.solve_shifted_modes(0.0, c1, nullptr);
            out.comps[0] = sb.from_modes(c1.real());
            return out;
        }
        Eigen::VectorXcd c2 = sb.to_modes(f.comps[1]).cast<std::complex<double>>();
        op.solve_shifted_modes(0.0, c1, &c2);
        out.comps[0] = sb.from_modes(c1.real());
        out.comps[1] = sb.from_modes(c2.real());
        return out;
    }
    const auto& w = op.grid_->weights;
    const double shift = shift0;
    const double dscale = op.ncomp == 1 ? op.eps : op.delta * op.eps;
    auto apply = [&](const std::vector<double>& x, std::vector<double>& y) {
        ScalarField ax = op.diffusion_apply(ScalarField(op.grid_, x));
        for (int i = 0; i < n; ++i) y[i] = shift * x[i] + dscale * ax.values[i];
    };
    auto ident = [](const std::vector<double>& r, std::vector<double>& z) { z = r; };
    auto wdot = [&](const std::vector<double>& a, const std::vector<double>& b) {
        double acc = 0.0;
        for (int i = 0; i < n; ++i) acc += w[i] * a[i] * b[i];
        return acc;
    };
    std::vector<double> rhs(n), x(n, 0.0);
    if (op.ncomp == 1) {
        rhs = f.comps[0].values;
    } else {
        for (int i = 0; i < n; ++i)
            rhs[i] = op.delta * f.comps[0].values[i] - op.beta * f.comps[1].values[i];
    }
    auto res = pcg(apply, ident, rhs, x, op.krylov_tol, op.krylov_max_iter, wdot);
    if (!res.converged)
        throw std::runtime_error("coupled_inverse_apply: CG stalled (rel residual " +
                                 std::to_string(res.rel_residual) + ")");
    out.comps[0] = ScalarField(op.grid_, std::move(x));
    if (op.ncomp == 2) {
        for (int i = 0; i < n; ++i)
            out.comps[1].values[i] =
                (f.comps[1].values[i] + op.gamma * out.comps[0].values[i]) / op.delta;
    }
    return out;
}

}  // namespace bdps
