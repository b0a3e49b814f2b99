#pragma once

// Hand-rolled Krylov solvers over callable operators.  Both solvers take the
// inner product as a callback so callers can work in the discrete L^2 (weighted)
// metric or the plain Euclidean one, and an optional per-iteration projection
// (used to pin iterates to the mean-zero subspace of singular Neumann systems).

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

namespace bdps {

struct KrylovResult {
    bool converged = false;
    int iterations = 0;
    double rel_residual = 0.0;
};

using Vec = std::vector<double>;

// Preconditioned conjugate gradient for SPD (on the projected subspace) systems.
//   apply(x, y): y = A x
//   precond(r, z): z = M^{-1} r   (pass identity copy for unpreconditioned)
//   project(x): optional in-place projection applied to rhs, iterate and residual
//   dot(a, b): inner product defining symmetry/positivity
template <class Apply, class Precond, class Dot, class Project>
KrylovResult pcg(Apply&& apply, Precond&& precond, const Vec& b, Vec& x, double tol, int max_iter,
                 Dot&& dot, Project&& project) {
    const std::size_t n = b.size();
    Vec r = b, z(n), p(n), Ap(n);
    project(r);
    const double bnorm = std::sqrt(std::max(0.0, dot(r, r)));
    if (x.size() != n) x.assign(n, 0.0);
    bool x_zero = true;
    for (double v : x)
        if (v != 0.0) { x_zero = false; break; }
    if (!x_zero) {
        apply(x, Ap);
        for (std::size_t i = 0; i < n; ++i) r[i] -= Ap[i];
        project(r);
    }
    KrylovResult res;
    if (bnorm == 0.0) {
        x.assign(n, 0.0);
        res.converged = true;
        return res;
    }
    precond(r, z);
    project(z);
    p = z;
    double rz = dot(r, z);
    for (int it = 0; it < max_iter; ++it) {
        apply(p, Ap);
        const double pAp = dot(p, Ap);
        if (!(pAp > 0.0)) break;  // loss of positivity: bail out, report residual
        const double alpha = rz / pAp;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * Ap[i];
        }
        project(x);
        project(r);
        res.iterations = it + 1;
        const double rnorm = std::sqrt(std::max(0.0, dot(r, r)));
        res.rel_residual = rnorm / bnorm;
        if (res.rel_residual <= tol) {
            res.converged = true;
            return res;
        }
        precond(r, z);
        project(z);
        const double rz_new = dot(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    return res;
}

template <class Apply, class Precond, class Dot>
KrylovResult pcg(Apply&& apply, Precond&& precond, const Vec& b, Vec& x, double tol, int max_iter,
                 Dot&& dot) {
    return pcg(std::forward<Apply>(apply), std::forward<Precond>(precond), b, x, tol, max_iter,
               std::forward<Dot>(dot), [](Vec&) {});
}

// Full GMRES (no restart; desk-scale systems) with modified Gram-Schmidt and
// Givens rotations, in the inner product supplied by `dot`.
template <class Apply, class Dot>
KrylovResult gmres(Apply&& apply, const Vec& b, Vec& x, double tol, int max_iter, Dot&& dot) {
    const std::size_t n = b.size();
    if (x.size() != n) x.assign(n, 0.0);
    Vec r = b, tmp(n);
    bool x_zero = true;
    for (double v : x)
        if (v != 0.0) { x_zero = false; break; }
    if (!x_zero) {
        apply(x, tmp);
        for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - tmp[i];
    }
    const double bnorm = std::sqrt(std::max(0.0, dot(b, b)));
    KrylovResult res;
    if (bnorm == 0.0) {
        x.assign(n, 0.0);
        res.converged = true;
        return res;
    }
    double beta = std::sqrt(std::max(0.0, dot(r, r)));
    res.rel_residual = beta / bnorm;
    if (res.rel_residual <= tol) {
        res.converged = true;
        return res;
    }
    const int m = max_iter;
    std::vector<Vec> V;
    V.reserve(m + 1);
    V.push_back(r);
    for (double& v : V[0]) v /= beta;
    std::vector<Vec> H(m + 1, Vec(m, 0.0));
    Vec cs(m, 0.0), sn(m, 0.0), g(m + 1, 0.0);
    g[0] = beta;
    int k = 0;
    for (; k < m; ++k) {
        apply(V[k], tmp);
        Vec w = tmp;
        for (int j = 0; j <= k; ++j) {
            H[j][k] = dot(w, V[j]);
            for (std::size_t i = 0; i < n; ++i) w[i] -= H[j][k] * V[j][i];
        }
        H[k + 1][k] = std::sqrt(std::max(0.0, dot(w, w)));
        if (H[k + 1][k] > 0.0)
            for (double& v : w) v /= H[k + 1][k];
        V.push_back(std::move(w));
        // Apply accumulated rotations to the new column, then form a new one.
        for (int j = 0; j < k; ++j) {
            const double t = cs[j] * H[j][k] + sn[j] * H[j + 1][k];
            H[j + 1][k] = -sn[j] * H[j][k] + cs[j] * H[j + 1][k];
            H[j][k] = t;
        }
        const double denom = std::hypot(H[k][k], H[k + 1][k]);
        if (denom == 0.0) break;
        cs[k] = H[k][k] / denom;
        sn[k] = H[k + 1][k] / denom;
        H[k][k] = denom;
        H[k + 1][k] = 0.0;
        g[k + 1] = -sn[k] * g[k];
        g[k] = cs[k] * g[k];
        res.iterations = k + 1;
        res.rel_residual = std::abs(g[k + 1]) / bnorm;
        if (res.rel_residual <= tol) {
            ++k;
            res.converged = true;
            break;
        }
    }
    // Back-substitute y from the triangular H, accumulate x += V y.
    Vec y(k, 0.0);
    for (int i = k - 1; i >= 0; --i) {
        double s = g[i];
        for (int j = i + 1; j < k; ++j) s -= H[i][j] * y[j];
        y[i] = H[i][i] != 0.0 ? s / H[i][i] : 0.0;
    }
    for (int j = 0; j < k; ++j)
        for (std::size_t i = 0; i < n; ++i) x[i] += y[j] * V[j][i];
    return res;
}

}  // namespace bdps
