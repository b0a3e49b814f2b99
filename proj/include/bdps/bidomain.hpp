#pragma once

// The composite bidomain operator A = A_i (A_i + A_e)^{-1} A_e P_av and its
// companions: resolvent solves, the modified source term, and recovery of the
// intra-/extracellular potentials.
//
// Discrete structure: with K_i, K_e the integrated elliptic matrices and W the
// trapezoid weights, A f = W^{-1} K_i h where (K_i + K_e) h = K_e (P_av f).
// K_e has exactly zero row/column sums, so that inner right-hand side has zero
// entry sum — precisely the solvability condition of the singular Neumann
// system — and the inner PCG pins iterates to the zero-sum subspace.

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "bdps/elliptic.hpp"
#include "bdps/grid.hpp"
#include "bdps/krylov.hpp"
#include "bdps/sparse.hpp"

namespace bdps {

struct InnerSolveConfig {
    double tol = 1e-10;       // relative residual
    int max_iter_factor = 10; // max iterations = factor * node count
};

struct ComplexField {
    ScalarField re, im;
};

struct BidomainOperator {
    GridPtr grid;
    EllipticOperator op_i, op_e;
    CsrMatrix k_sum;               // K_i + K_e
    std::vector<double> jacobi;    // 1 / diag(K_i + K_e)
    InnerSolveConfig inner;

    // Solve (K_i + K_e) h = g on the zero-entry-sum subspace (Jacobi PCG,
    // iterate mean re-projected every iteration).
    std::vector<double> inner_solve(std::vector<double> g) const {
        const int n = k_sum.n;
        auto project = [n](std::vector<double>& v) {
            double m = 0.0;
            for (double x : v) m += x;
            m /= n;
            for (double& x : v) x -= m;
        };
        project(g);
        std::vector<double> h(n, 0.0);
        auto res = pcg(
            [this](const std::vector<double>& x, std::vector<double>& y) {
                k_sum.apply(x.data(), y.data());
            },
            [this](const std::vector<double>& r, std::vector<double>& z) {
                z.resize(r.size());
                for (std::size_t i = 0; i < r.size(); ++i) z[i] = jacobi[i] * r[i];
            },
            g, h, inner.tol, inner.max_iter_factor * n,
            [](const std::vector<double>& a, const std::vector<double>& b) {
                double s = 0.0;
                for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
                return s;
            },
            project);
        if (!res.converged)
            throw std::runtime_error("bidomain inner solve did not converge (rel residual " +
                                     std::to_string(res.rel_residual) + " after " +
                                     std::to_string(res.iterations) + " iterations)");
        return h;
    }
};

inline BidomainOperator make_bidomain(EllipticOperator op_i, EllipticOperator op_e,
                                      InnerSolveConfig inner = {}) {
    if (!same_grid(op_i.grid, op_e.grid))
        throw std::invalid_argument("make_bidomain: operators live on different grids");
    BidomainOperator bop;
    bop.grid = op_i.grid;
    bop.op_i = std::move(op_i);
    bop.op_e = std::move(op_e);
    bop.k_sum = csr_add(bop.op_i.K, 1.0, bop.op_e.K, 1.0);
    bop.inner = inner;
    auto d = bop.k_sum.diagonal();
    bop.jacobi.resize(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) bop.jacobi[i] = d[i] > 0.0 ? 1.0 / d[i] : 1.0;
    return bop;
}

inline ScalarField apply_bidomain(const BidomainOperator& bop, const ScalarField& f) {
    if (!same_grid(bop.grid, f.grid)) throw std::invalid_argument("apply_bidomain: grid mismatch");
    ScalarField p = project_mean_zero(f);
    std::vector<double> g(p.size());
    bop.op_e.K.apply(p.values.data(), g.data());
    const std::vector<double> h = bop.inner_solve(std::move(g));
    ScalarField out(bop.grid);
    bop.op_i.K.apply(h.data(), out.values.data());
    for (int i = 0; i < out.size(); ++i) out.values[i] /= bop.grid->weights[i];
    return out;
}

// I = I_i - A_i (A_i + A_e)^{-1} (I_i + I_e), defined under conservation of
// currents: the domain integral of I_i + I_e must vanish.
inline ScalarField modified_source(const BidomainOperator& bop, const ScalarField& Ii,
                                   const ScalarField& Ie) {
    if (!same_grid(bop.grid, Ii.grid) || !same_grid(bop.grid, Ie.grid))
        throw std::invalid_argument("modified_source: grid mismatch");
    ScalarField sum(bop.grid);
    for (int i = 0; i < sum.size(); ++i) sum.values[i] = Ii.values[i] + Ie.values[i];
    const double total = integrate(sum);
    if (std::abs(total) > 1e-10 * (lq_norm(Ii, 1) + lq_norm(Ie, 1)) + 1e-300)
        throw std::invalid_argument("modified_source: conservation of currents violated (integral " +
                                    std::to_string(total) + ")");
    std::vector<double> g(sum.size());
    for (int i = 0; i < sum.size(); ++i) g[i] = bop.grid->weights[i] * sum.values[i];
    const std::vector<double> h = bop.inner_solve(std::move(g));
    std::vector<double> kih(sum.size());
    bop.op_i.K.apply(h.data(), kih.data());
    ScalarField out(bop.grid);
    for (int i = 0; i < out.size(); ++i)
        out.values[i] = Ii.values[i] - kih[i] / bop.grid->weights[i];
    return out;
}

// u_e = (A_i + A_e)^{-1} { (I_i + I_e) - A_i P_av u }, normalized mean-zero;
// u_i = u + u_e.
inline std::pair<ScalarField, ScalarField> recover_potentials(const BidomainOperator& bop,
                                                              const ScalarField& u,
                                                              const ScalarField& Ii,
                                                              const ScalarField& Ie) {
    if (!same_grid(bop.grid, u.grid)) throw std::invalid_argument("recover_potentials: grid mismatch");
    ScalarField sum(bop.grid);
    for (int i = 0; i < sum.size(); ++i) sum.values[i] = Ii.values[i] + Ie.values[i];
    const double total = integrate(sum);
    if (std::abs(total) > 1e-10 * (lq_norm(Ii, 1) + lq_norm(Ie, 1)) + 1e-300)
        throw std::invalid_argument("recover_potentials: conservation of currents violated");
    const ScalarField pu = project_mean_zero(u);
    std::vector<double> g(sum.size());
    bop.op_i.K.apply(pu.values.data(), g.data());
    for (int i = 0; i < sum.size(); ++i) g[i] = bop.grid->weights[i] * sum.values[i] - g[i];
    const std::vector<double> h = bop.inner_solve(std::move(g));
    ScalarField ue(bop.grid, h);
    ue = project_mean_zero(ue);  // paper normalization: extracellular mean zero
    ScalarField ui(bop.grid);
    for (int i = 0; i < ui.size(); ++i) ui.values[i] = u.values[i] + ue.values[i];
    return {ui, ue};
}

// Resolvent solve (lambda + A) u = f by outer Krylov iteration around
// apply_bidomain: CG in the discrete L^2 metric for real lambda >= 0, a real-
// blocked 2N GMRES otherwise.  The mean component decouples: mean(u) =
// mean(f)/lambda (A annihilates constants), so lambda = 0 demands mean(f) = 0.
inline ComplexField solve_resolvent(const BidomainOperator& bop, std::complex<double> lambda,
                                    const ComplexField& f, double tol = 1e-8, int max_iter = 20000) {
    if (!same_grid(bop.grid, f.re.grid) || !same_grid(bop.grid, f.im.grid))
        throw std::invalid_argument("solve_resolvent: grid mismatch");
    const int n = bop.grid->nodes();
    const double measure = bop.grid->measure();
    const std::complex<double> fmean(integrate(f.re) / measure, integrate(f.im) / measure);
    const double fnorm = std::sqrt(dot_l2(f.re, f.re) + dot_l2(f.im, f.im));
    std::complex<double> umean(0.0, 0.0);
    if (lambda == 0.0) {
        if (std::abs(fmean) * measure > 1e-10 * (fnorm + 1e-300))
            throw std::invalid_argument(
                "solve_resolvent: lambda = 0 with nonzero-mean data (A is singular on constants)");
    } else {
        umean = fmean / lambda;
    }
    const ScalarField f0re = project_mean_zero(f.re);
    const ScalarField f0im = project_mean_zero(f.im);
    const auto& w = bop.grid->weights;
    ComplexField u{ScalarField(bop.grid), ScalarField(bop.grid)};
    auto wmean_project = [&](std::vector<double>& v, int offset) {
        double m = 0.0;
        for (int i = 0; i < n; ++i) m += w[i] * v[offset + i];
        m /= measure;
        for (int i = 0; i < n; ++i) v[offset + i] -= m;
    };
    if (lambda.imag() == 0.0 && lambda.real() >= 0.0 &&
        (f0im.values == std::vector<double>(n, 0.0))) {
        // real data, real nonnegative shift: CG on the mean-zero subspace
        std::vector<double> x(n, 0.0);
        auto apply = [&](const std::vector<double>& in, std::vector<double>& out) {
            ScalarField field(bop.grid, in);
            ScalarField af = apply_bidomain(bop, field);
            out.resize(n);
            for (int i = 0; i < n; ++i) out[i] = lambda.real() * in[i] + af.values[i];
        };
        auto res = pcg(
            apply,
            [](const std::vector<double>& r, std::vector<double>& z) { z = r; },
            f0re.values, x, tol, max_iter,
            [&](const std::vector<double>& a, const std::vector<double>& b) {
                double s = 0.0;
                for (int i = 0; i < n; ++i) s += w[i] * a[i] * b[i];
                return s;
            },
            [&](std::vector<double>& v) { wmean_project(v, 0); });
        if (!res.converged)
            throw std::runtime_error("solve_resolvent: CG did not converge (rel residual " +
                                     std::to_string(res.rel_residual) + ")");
        u.re.values = std::move(x);
    } else {
        // real-blocked 2N system [[lr + A, -li], [li, lr + A]]
        std::vector<double> rhs(2 * n), x(2 * n, 0.0);
        for (int i = 0; i < n; ++i) {
            rhs[i] = f0re.values[i];
            rhs[n + i] = f0im.values[i];
        }
        const double lr = lambda.real(), li = lambda.imag();
        auto apply = [&](const std::vector<double>& in, std::vector<double>& out) {
            ScalarField xr(bop.grid, std::vector<double>(in.begin(), in.begin() + n));
            ScalarField xi(bop.grid, std::vector<double>(in.begin() + n, in.end()));
            ScalarField ar = apply_bidomain(bop, xr);
            ScalarField ai = apply_bidomain(bop, xi);
            out.resize(2 * n);
            for (int i = 0; i < n; ++i) {
                out[i] = lr * in[i] - li * in[n + i] + ar.values[i];
                out[n + i] = li * in[i] + lr * in[n + i] + ai.values[i];
            }
        };
        auto res = gmres(apply, rhs, x, tol, max_iter,
                         [&](const std::vector<double>& a, const std::vector<double>& b) {
                             double s = 0.0;
                             for (int i = 0; i < n; ++i)
                                 s += w[i] * (a[i] * b[i] + a[n + i] * b[n + i]);
                             return s;
                         });
        if (!res.converged)
            throw std::runtime_error("solve_resolvent: GMRES did not converge (rel residual " +
                                     std::to_string(res.rel_residual) + ")");
        u.re.values.assign(x.begin(), x.begin() + n);
        u.im.values.assign(x.begin() + n, x.end());
    }
    for (int i = 0; i < n; ++i) {
        u.re.values[i] += umean.real();
        u.im.values[i] += umean.imag();
    }
    return u;
}

inline ScalarField solve_resolvent(const BidomainOperator& bop, double lambda, const ScalarField& f,
                                   double tol = 1e-8, int max_iter = 20000) {
    ComplexField cf{f, ScalarField(f.grid)};
    return solve_resolvent(bop, std::complex<double>(lambda, 0.0), cf, tol, max_iter).re;
}

}  // namespace bdps
