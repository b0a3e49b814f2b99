#pragma once

// Anisotropic divergence-form elliptic operators -div(sigma grad u) with
// homogeneous Neumann flux conditions on structured grids.
//
// Assembly is corner-quadrature bilinear FEM with a lumped (trapezoid) mass.
// For diagonal tensors this reproduces exactly the classical 3-point (1D) /
// 5-point (2D) stencil whose face conductivities are arithmetic averages of
// the adjacent node tensors, with mirror-ghost Neumann boundary rows; mixed
// interior tensors (sigma_12 != 0) extend it symmetrically.  The stored matrix
// K is the integrated (weak) form: exactly symmetric, zero row sums, positive
// semidefinite.  The operator value at nodes is W^{-1} K with W the trapezoid
// weights, so the operator is self-adjoint in the discrete L^2 inner product.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "bdps/grid.hpp"
#include "bdps/sparse.hpp"

namespace bdps {

struct ConductivityField {
    GridPtr grid;
    std::vector<double> s11;
    std::vector<double> s12;  // empty in 1D
    std::vector<double> s22;  // empty in 1D

    static ConductivityField constant(GridPtr g, double s) {
        ConductivityField c;
        c.grid = std::move(g);
        c.s11.assign(c.grid->nodes(), s);
        if (c.grid->dimension == 2) {
            c.s12.assign(c.grid->nodes(), 0.0);
            c.s22.assign(c.grid->nodes(), s);
        }
        return c;
    }

    static ConductivityField constant_tensor(GridPtr g, double a11, double a12, double a22) {
        if (g->dimension != 2)
            throw std::invalid_argument("ConductivityField: tensor form requires a 2D grid");
        ConductivityField c;
        c.grid = std::move(g);
        const int n = c.grid->nodes();
        c.s11.assign(n, a11);
        c.s12.assign(n, a12);
        c.s22.assign(n, a22);
        // Boundary compatibility: the tensor must map the outward normal to a
        // multiple of itself, so mixed entries vanish on boundary nodes.
        for (int j = 0; j < c.grid->extents[1]; ++j)
            for (int i = 0; i < c.grid->extents[0]; ++i)
                if (c.grid->boundary(i, j)) c.s12[c.grid->index(i, j)] = 0.0;
        return c;
    }

    static ConductivityField from_fn(GridPtr g,
                                     const std::function<double(double, double)>& f11,
                                     const std::function<double(double, double)>& f12,
                                     const std::function<double(double, double)>& f22) {
        ConductivityField c;
        c.grid = std::move(g);
        const auto* gr = c.grid.get();
        const int n = gr->nodes();
        c.s11.resize(n);
        if (gr->dimension == 2) {
            c.s12.resize(n);
            c.s22.resize(n);
        }
        for (int j = 0; j < gr->extents[1]; ++j)
            for (int i = 0; i < gr->extents[0]; ++i) {
                const int id = gr->index(i, j);
                c.s11[id] = f11(gr->x(i), gr->y(j));
                if (gr->dimension == 2) {
                    c.s12[id] = gr->boundary(i, j) ? 0.0 : f12(gr->x(i), gr->y(j));
                    c.s22[id] = f22(gr->x(i), gr->y(j));
                }
            }
        return c;
    }
};

// Min/max tensor eigenvalues over all nodes; throws (naming the node) if any
// node tensor fails positive definiteness.
inline std::pair<double, double> check_ellipticity(const ConductivityField& sigma) {
    if (!sigma.grid) throw std::invalid_argument("check_ellipticity: missing grid");
    const int n = sigma.grid->nodes();
    if (static_cast<int>(sigma.s11.size()) != n)
        throw std::invalid_argument("check_ellipticity: tensor size does not match grid");
    double lo = 0.0, hi = 0.0;
    for (int i = 0; i < n; ++i) {
        double lmin, lmax;
        if (sigma.grid->dimension == 1) {
            lmin = lmax = sigma.s11[i];
        } else {
            const double a = sigma.s11[i], b = sigma.s12[i], c = sigma.s22[i];
            const double mid = 0.5 * (a + c);
            const double rad = std::sqrt(0.25 * (a - c) * (a - c) + b * b);
            lmin = mid - rad;
            lmax = mid + rad;
        }
        if (!(lmin > 0.0))
            throw std::invalid_argument("check_ellipticity: tensor not positive definite at node " +
                                        std::to_string(i) + " (min eigenvalue " +
                                        std::to_string(lmin) + ")");
        if (i == 0) {
            lo = lmin;
            hi = lmax;
        } else {
            lo = std::min(lo, lmin);
            hi = std::max(hi, lmax);
        }
    }
    return {lo, hi};
}

struct EllipticOperator {
    GridPtr grid;
    CsrMatrix K;  // integrated (weak) form

    // Nodal operator value W^{-1} K f.
    ScalarField apply(const ScalarField& f) const {
        if (!same_grid(grid, f.grid)) throw std::invalid_argument("EllipticOperator: grid mismatch");
        ScalarField out(grid);
        K.apply(f.values.data(), out.values.data());
        for (int i = 0; i < out.size(); ++i) out.values[i] /= grid->weights[i];
        return out;
    }
};

inline EllipticOperator assemble_elliptic(const GridPtr& grid, const ConductivityField& sigma) {
    if (!same_grid(grid, sigma.grid))
        throw std::invalid_argument("assemble_elliptic: conductivity grid mismatch");
    check_ellipticity(sigma);
    const int nx = grid->extents[0], ny = grid->extents[1];
    std::vector<Triplet> trips;
    if (grid->dimension == 1) {
        const double h = grid->spacing[0];
        trips.reserve(4 * (nx - 1));
        for (int i = 0; i + 1 < nx; ++i) {
            const double face = 0.5 * (sigma.s11[i] + sigma.s11[i + 1]);  // arithmetic average
            const double c = face / h;
            trips.push_back({i, i, c});
            trips.push_back({i + 1, i + 1, c});
            trips.push_back({i, i + 1, -c});
            trips.push_back({i + 1, i, -c});
        }
    } else {
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i)
                if (grid->boundary(i, j) && sigma.s12[grid->index(i, j)] != 0.0)
                    throw std::invalid_argument(
                        "assemble_elliptic: boundary compatibility violated (sigma_12 != 0) at node " +
                        std::to_string(grid->index(i, j)));
        const double hx = grid->spacing[0], hy = grid->spacing[1];
        const double wq = 0.25 * hx * hy;  // corner quadrature weight
        trips.reserve(16 * (nx - 1) * (ny - 1));
        for (int j = 0; j + 1 < ny; ++j)
            for (int i = 0; i + 1 < nx; ++i) {
                const int n00 = grid->index(i, j), n10 = grid->index(i + 1, j);
                const int n01 = grid->index(i, j + 1), n11 = grid->index(i + 1, j + 1);
                const int nodes[4] = {n00, n10, n01, n11};
                // One-sided bilinear-basis gradients at each cell corner:
                // rows are (d/dx, d/dy) as coefficients on (u00, u10, u01, u11).
                const double gx[4][4] = {{-1, 1, 0, 0}, {-1, 1, 0, 0}, {0, 0, -1, 1}, {0, 0, -1, 1}};
                const double gy[4][4] = {{-1, 0, 1, 0}, {0, -1, 0, 1}, {-1, 0, 1, 0}, {0, -1, 0, 1}};
                for (int c = 0; c < 4; ++c) {
                    const int nc = nodes[c];
                    const double a = sigma.s11[nc], b = sigma.s12[nc], d = sigma.s22[nc];
                    for (int r = 0; r < 4; ++r)
                        for (int s = 0; s < 4; ++s) {
                            const double dxr = gx[c][r] / hx, dyr = gy[c][r] / hy;
                            const double dxs = gx[c][s] / hx, dys = gy[c][s] / hy;
                            const double v = wq * (a * dxr * dxs + b * (dxr * dys + dyr * dxs) +
                                                   d * dyr * dys);
                            if (v != 0.0) trips.push_back({nodes[r], nodes[s], v});
                        }
                }
            }
    }
    EllipticOperator op;
    op.grid = grid;
    op.K = CsrMatrix::from_triplets(grid->nodes(), std::move(trips));
    return op;
}

}  // namespace bdps
