#pragma once

// Dense spectral factorization of the (weighted-self-adjoint) diffusion
// operator A = W^{-1} G, G symmetric positive semidefinite.  Produces
// eigenvalues mu_k >= 0 and a W-orthonormal eigenvector matrix Phi
// (Phi^T W Phi = I), so coefficients are c = Phi^T W x and x = Phi c.
// Intended for desk-scale state dimensions; guarded by a hard cap.

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

#include "bdps/bidomain.hpp"
#include "bdps/elliptic.hpp"

namespace bdps {

inline constexpr int kSpectralDimensionCap = 4096;

inline Eigen::MatrixXd csr_to_dense(const CsrMatrix& m) {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(m.n, m.n);
    for (int r = 0; r < m.n; ++r)
        for (int p = m.row_ptr[r]; p < m.row_ptr[r + 1]; ++p) d(r, m.col[p]) += m.val[p];
    return d;
}

struct SpectralBasis {
    GridPtr grid;
    std::vector<double> mu;  // ascending, clamped to >= 0
    Eigen::MatrixXd Phi;     // columns are W-orthonormal eigenvectors
    Eigen::VectorXd weights;

    int size() const { return static_cast<int>(mu.size()); }

    Eigen::VectorXd to_modes(const ScalarField& x) const {
        Eigen::Map<const Eigen::VectorXd> xv(x.values.data(), x.size());
        return Phi.transpose() * weights.cwiseProduct(xv);
    }
    Eigen::VectorXd to_modes_raw(const std::vector<double>& x) const {
        Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
        return Phi.transpose() * weights.cwiseProduct(xv);
    }
    ScalarField from_modes(const Eigen::VectorXd& c) const {
        ScalarField f(grid);
        Eigen::Map<Eigen::VectorXd>(f.values.data(), f.size()) = Phi * c;
        return f;
    }
};

namespace detail {
// Shared tail: given dense symmetric G with A = W^{-1} G, build the basis.
inline SpectralBasis basis_from_dense_g(GridPtr grid, Eigen::MatrixXd G) {
    const int n = grid->nodes();
    if (n > kSpectralDimensionCap)
        throw std::invalid_argument("spectral basis: state dimension exceeds the dense cap");
    G = 0.5 * (G + G.transpose().eval());
    Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(grid->weights.data(), n);
    const Eigen::VectorXd wsqrt = w.cwiseSqrt();
    const Eigen::VectorXd winvsqrt = wsqrt.cwiseInverse();
    Eigen::MatrixXd B = winvsqrt.asDiagonal() * G * winvsqrt.asDiagonal();
    B = 0.5 * (B + B.transpose().eval());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(B);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("spectral basis: eigendecomposition failed");
    SpectralBasis basis;
    basis.grid = std::move(grid);
    basis.weights = w;
    basis.Phi = winvsqrt.asDiagonal() * es.eigenvectors();
    const Eigen::VectorXd& ev = es.eigenvalues();
    const double scale = std::max(1.0, std::abs(ev[n - 1]));
    basis.mu.resize(n);
    for (int i = 0; i < n; ++i) {
        double m = ev[i];
        if (std::abs(m) <= 1e-12 * scale) m = 0.0;
        if (m < 0.0) m = 0.0;
        basis.mu[i] = m;
    }
    return basis;
}
}  // namespace detail

// Basis of a plain elliptic operator A = W^{-1} K.
inline SpectralBasis make_spectral(const EllipticOperator& op) {
    return detail::basis_from_dense_g(op.grid, csr_to_dense(op.K));
}

// Basis of the bidomain operator.  A f = W^{-1} K_i h with (K_i + K_e) h =
// K_e f (mean projection is redundant in this form), hence A = W^{-1} G with
// G = K_e - K_e S^+ K_e, S = K_i + K_e; G is symmetric PSD with kernel
// exactly the constants.
inline SpectralBasis make_spectral(const BidomainOperator& bop) {
    const int n = bop.grid->nodes();
    if (n > kSpectralDimensionCap)
        throw std::invalid_argument("spectral basis: state dimension exceeds the dense cap");
    const Eigen::MatrixXd Ke = csr_to_dense(bop.op_e.K);
    Eigen::MatrixXd S = csr_to_dense(bop.k_sum);
    S = 0.5 * (S + S.transpose().eval());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("spectral basis: eigendecomposition of the sum stiffness failed");
    const Eigen::VectorXd& lam = es.eigenvalues();
    const double lmax = std::max(1.0, std::abs(lam[n - 1]));
    Eigen::VectorXd pinv(n);
    for (int i = 0; i < n; ++i) pinv[i] = (lam[i] > 1e-12 * lmax) ? 1.0 / lam[i] : 0.0;
    const Eigen::MatrixXd KeU = Ke * es.eigenvectors();
    const Eigen::MatrixXd G = Ke - KeU * pinv.asDiagonal() * KeU.transpose();
    return detail::basis_from_dense_g(bop.grid, G);
}

}  // namespace bdps
