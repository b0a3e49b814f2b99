#pragma once

// Structured 1D/2D vertex grids, nodal scalar fields and periodic trajectories,
// with trapezoid quadrature supplying the discrete L^2 inner product used by
// every operator in the library.

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace bdps {

struct Grid {
    int dimension = 1;                    // 1 or 2
    std::array<int, 2> extents{0, 1};     // nodes per axis; extents[1] == 1 in 1D
    std::array<double, 2> lengths{0, 0};  // physical side lengths; lengths[1] == 0 in 1D
    std::array<double, 2> spacing{0, 0};  // lengths[axis] / (extents[axis] - 1)
    std::vector<double> weights;          // trapezoid quadrature weight per node

    int nodes() const { return extents[0] * extents[1]; }
    double measure() const { return dimension == 1 ? lengths[0] : lengths[0] * lengths[1]; }
    int index(int ix, int iy = 0) const { return iy * extents[0] + ix; }
    double x(int ix) const { return ix * spacing[0]; }
    double y(int iy) const { return iy * spacing[1]; }
    bool boundary(int ix, int iy = 0) const {
        if (ix == 0 || ix == extents[0] - 1) return true;
        return dimension == 2 && (iy == 0 || iy == extents[1] - 1);
    }
};

using GridPtr = std::shared_ptr<const Grid>;

inline GridPtr make_grid(int dimension, const std::vector<int>& extents,
                         const std::vector<double>& lengths) {
    if (dimension != 1 && dimension != 2)
        throw std::invalid_argument("make_grid: dimension must be 1 or 2");
    if (static_cast<int>(extents.size()) != dimension ||
        static_cast<int>(lengths.size()) != dimension)
        throw std::invalid_argument("make_grid: extents/lengths size must match dimension");
    for (int a = 0; a < dimension; ++a) {
        if (extents[a] < 3)
            throw std::invalid_argument("make_grid: need at least 3 nodes per axis, got " +
                                        std::to_string(extents[a]));
        if (!(lengths[a] > 0.0))
            throw std::invalid_argument("make_grid: lengths must be positive");
    }
    auto g = std::make_shared<Grid>();
    g->dimension = dimension;
    g->extents = {extents[0], dimension == 2 ? extents[1] : 1};
    g->lengths = {lengths[0], dimension == 2 ? lengths[1] : 0.0};
    g->spacing[0] = lengths[0] / (extents[0] - 1);
    g->spacing[1] = dimension == 2 ? lengths[1] / (extents[1] - 1) : 0.0;
    g->weights.assign(g->nodes(), 0.0);
    if (dimension == 1) {
        const double h = g->spacing[0];
        for (int i = 0; i < g->extents[0]; ++i) {
            const bool edge = (i == 0 || i == g->extents[0] - 1);
            g->weights[i] = edge ? 0.5 * h : h;
        }
    } else {
        const double hx = g->spacing[0], hy = g->spacing[1];
        for (int j = 0; j < g->extents[1]; ++j) {
            const double wy = (j == 0 || j == g->extents[1] - 1) ? 0.5 : 1.0;
            for (int i = 0; i < g->extents[0]; ++i) {
                const double wx = (i == 0 || i == g->extents[0] - 1) ? 0.5 : 1.0;
                g->weights[g->index(i, j)] = wx * wy * hx * hy;
            }
        }
    }
    return g;
}

inline bool same_grid(const GridPtr& a, const GridPtr& b) {
    if (a == b) return true;
    if (!a || !b) return false;
    return a->dimension == b->dimension && a->extents == b->extents && a->lengths == b->lengths;
}

struct ScalarField {
    GridPtr grid;
    std::vector<double> values;

    ScalarField() = default;
    explicit ScalarField(GridPtr g) : grid(std::move(g)), values(grid->nodes(), 0.0) {}
    ScalarField(GridPtr g, std::vector<double> v) : grid(std::move(g)), values(std::move(v)) {
        if (static_cast<int>(values.size()) != grid->nodes())
            throw std::invalid_argument("ScalarField: value count does not match grid");
    }

    static ScalarField zeros(GridPtr g) { return ScalarField(std::move(g)); }

    // f(x) in 1D, f(x, y) in 2D.
    static ScalarField from_fn(GridPtr g, const std::function<double(double, double)>& f) {
        ScalarField out(g);
        for (int j = 0; j < g->extents[1]; ++j)
            for (int i = 0; i < g->extents[0]; ++i)
                out.values[g->index(i, j)] = f(g->x(i), g->y(j));
        return out;
    }

    int size() const { return static_cast<int>(values.size()); }
};

inline void check_field(const ScalarField& f, const char* where) {
    if (!f.grid || static_cast<int>(f.values.size()) != f.grid->nodes())
        throw std::invalid_argument(std::string(where) + ": field does not match its grid");
    for (double v : f.values)
        if (!std::isfinite(v)) throw std::invalid_argument(std::string(where) + ": non-finite value");
}

// Trapezoid-rule domain integral (fixed summation order for determinism).
inline double integrate(const ScalarField& f) {
    check_field(f, "integrate");
    double s = 0.0;
    const auto& w = f.grid->weights;
    for (int i = 0; i < f.size(); ++i) s += w[i] * f.values[i];
    return s;
}

inline double dot_l2(const ScalarField& a, const ScalarField& b) {
    if (!same_grid(a.grid, b.grid)) throw std::invalid_argument("dot_l2: grid mismatch");
    double s = 0.0;
    const auto& w = a.grid->weights;
    for (int i = 0; i < a.size(); ++i) s += w[i] * a.values[i] * b.values[i];
    return s;
}

// (integral of |f|^q)^(1/q); max |f| for q = infinity.
inline double lq_norm(const ScalarField& f, double q) {
    check_field(f, "lq_norm");
    if (std::isinf(q)) {
        double m = 0.0;
        for (double v : f.values) m = std::max(m, std::abs(v));
        return m;
    }
    if (q < 1.0) throw std::invalid_argument("lq_norm: q must be >= 1");
    double s = 0.0;
    const auto& w = f.grid->weights;
    for (int i = 0; i < f.size(); ++i) s += w[i] * std::pow(std::abs(f.values[i]), q);
    return std::pow(s, 1.0 / q);
}

inline ScalarField project_mean_zero(const ScalarField& f) {
    const double mean = integrate(f) / f.grid->measure();
    ScalarField out = f;
    for (double& v : out.values) v -= mean;
    return out;
}

// State: one (scalar models) or two (u/w systems) components on a shared grid.
struct State {
    std::vector<ScalarField> comps;

    State() = default;
    explicit State(std::vector<ScalarField> c) : comps(std::move(c)) {}
    static State zeros(const GridPtr& g, int ncomp) {
        State s;
        s.comps.reserve(ncomp);
        for (int c = 0; c < ncomp; ++c) s.comps.emplace_back(g);
        return s;
    }

    int components() const { return static_cast<int>(comps.size()); }
    GridPtr grid() const { return comps.empty() ? nullptr : comps[0].grid; }
    int nodes() const { return comps.empty() ? 0 : comps[0].size(); }

    State& axpy(double a, const State& other) {
        for (int c = 0; c < components(); ++c)
            for (int i = 0; i < nodes(); ++i) comps[c].values[i] += a * other.comps[c].values[i];
        return *this;
    }
    State& scale(double a) {
        for (auto& f : comps)
            for (double& v : f.values) v *= a;
        return *this;
    }
};

inline double dot_l2(const State& a, const State& b) {
    if (a.components() != b.components()) throw std::invalid_argument("dot_l2: component mismatch");
    double s = 0.0;
    for (int c = 0; c < a.components(); ++c) s += dot_l2(a.comps[c], b.comps[c]);
    return s;
}

inline double l2_norm(const State& s) { return std::sqrt(std::max(0.0, dot_l2(s, s))); }
inline double l2_norm(const ScalarField& f) { return std::sqrt(std::max(0.0, dot_l2(f, f))); }

// State Lq norm over all components (componentwise max for q = infinity).
inline double lq_norm(const State& s, double q) {
    if (s.comps.empty()) throw std::invalid_argument("lq_norm: empty state");
    if (std::isinf(q)) {
        double m = 0.0;
        for (const auto& f : s.comps) m = std::max(m, lq_norm(f, q));
        return m;
    }
    if (q < 1.0) throw std::invalid_argument("lq_norm: q must be >= 1");
    double acc = 0.0;
    for (const auto& f : s.comps) acc += std::pow(lq_norm(f, q), q);
    return std::pow(acc, 1.0 / q);
}

// M uniform snapshots over one period; index arithmetic is modulo M.
struct PeriodicTrajectory {
    GridPtr grid;
    double period = 1.0;
    std::vector<State> samples;

    PeriodicTrajectory() = default;
    PeriodicTrajectory(GridPtr g, double T, int M, int ncomp) : grid(std::move(g)), period(T) {
        if (M < 4) throw std::invalid_argument("PeriodicTrajectory: need M >= 4 samples");
        if (!(T > 0)) throw std::invalid_argument("PeriodicTrajectory: period must be positive");
        samples.reserve(M);
        for (int k = 0; k < M; ++k) samples.push_back(State::zeros(grid, ncomp));
    }

    int M() const { return static_cast<int>(samples.size()); }
    int components() const { return samples.empty() ? 0 : samples[0].components(); }
    double time(int k) const { return period * k / M(); }
    const State& sample(int k) const {
        const int m = M();
        return samples[((k % m) + m) % m];
    }
    State& sample(int k) {
        const int m = M();
        return samples[((k % m) + m) % m];
    }
};

// ((T/M) sum_k spatial_norm(sample_k)^p)^(1/p): rectangle rule on the uniform
// periodic grid, exact for trigonometric polynomials below Nyquist.
template <class SpatialNorm>
double bochner_norm(const PeriodicTrajectory& traj, double p, SpatialNorm&& spatial_norm) {
    if (p < 1.0) throw std::invalid_argument("bochner_norm: p must be >= 1");
    if (traj.samples.empty()) throw std::invalid_argument("bochner_norm: empty trajectory");
    double s = 0.0;
    for (const State& snap : traj.samples) s += std::pow(spatial_norm(snap), p);
    return std::pow(s * traj.period / traj.M(), 1.0 / p);
}

}  // namespace bdps
