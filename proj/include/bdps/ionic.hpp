#pragma once

// The four ionic reaction models, their equilibria, stability predicates,
// linearized operator-matrix coefficients and shifted-system nonlinearities.
//
// Conventions (single source of truth for the whole library):
//   two-component models:  d/dt u + eps*A u + (1/eps) F(u,w) = I,
//                          d/dt w + G(u,w) = 0;
//   scalar model (AC):     d/dt u + A u + (u^3 - u) = I.
// Around an equilibrium (u*, w*) the deviation (v, z) satisfies
//   d/dt (v,z) + M (v,z) = (I,0) + (N1,N2),  M = [[eps*A + alpha, beta],
//                                                 [-gamma,        delta]],
// and the equilibrium is admissible when alpha > 0, beta >= 0, gamma >= 0,
// delta > 0 (the generation hypotheses of the coupled operator matrix).

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "bdps/grid.hpp"

namespace bdps {

enum class IonicVariant { FHN, AP, RM, AC };

inline const char* variant_name(IonicVariant v) {
    switch (v) {
        case IonicVariant::FHN: return "FHN";
        case IonicVariant::AP: return "AP";
        case IonicVariant::RM: return "RM";
        case IonicVariant::AC: return "AC";
    }
    return "?";
}

struct IonicModelSpec {
    IonicVariant variant = IonicVariant::FHN;
    double a = 0.1, b = 1.0, c = 0.05, d = 1.0, k = 8.0, eps = 1.0;

    int component_count() const { return variant == IonicVariant::AC ? 1 : 2; }

    void validate() const {
        if (variant == IonicVariant::AC) return;  // AC is the fixed cubic u^3 - u
        auto positive = [](double v, const char* name) {
            if (!(v > 0.0))
                throw std::invalid_argument(std::string("IonicModelSpec: parameter ") + name +
                                            " must be positive");
        };
        if (!(a > 0.0 && a < 1.0))
            throw std::invalid_argument("IonicModelSpec: parameter a must satisfy 0 < a < 1");
        positive(eps, "eps");
        switch (variant) {
            case IonicVariant::FHN:
                positive(b, "b");
                positive(c, "c");
                break;
            case IonicVariant::AP:
                positive(k, "k");
                positive(d, "d");
                break;
            case IonicVariant::RM:
                positive(b, "b");
                positive(c, "c");
                positive(d, "d");
                break;
            default: break;
        }
    }
};

inline IonicModelSpec fhn_model(double a, double b, double c, double eps = 1.0) {
    IonicModelSpec m;
    m.variant = IonicVariant::FHN;
    m.a = a; m.b = b; m.c = c; m.eps = eps;
    m.validate();
    return m;
}
inline IonicModelSpec ap_model(double a, double k, double d, double eps = 1.0) {
    IonicModelSpec m;
    m.variant = IonicVariant::AP;
    m.a = a; m.k = k; m.d = d; m.eps = eps;
    m.validate();
    return m;
}
inline IonicModelSpec rm_model(double a, double b, double c, double d, double eps = 1.0) {
    IonicModelSpec m;
    m.variant = IonicVariant::RM;
    m.a = a; m.b = b; m.c = c; m.d = d; m.eps = eps;
    m.validate();
    return m;
}
inline IonicModelSpec ac_model() {
    IonicModelSpec m;
    m.variant = IonicVariant::AC;
    return m;
}

// Exact polynomial evaluation of the reaction pair (F, G); G = 0 for AC.
inline std::pair<double, double> eval_reaction(const IonicModelSpec& m, double u, double w) {
    switch (m.variant) {
        case IonicVariant::FHN:
            return {u * (u - m.a) * (u - 1.0) + w, m.b * w - m.c * u};
        case IonicVariant::AP:
            return {m.k * u * (u - m.a) * (u - 1.0) + u * w, m.k * u * (u - 1.0 - m.a) + m.d * w};
        case IonicVariant::RM:
            return {m.b * u * (u - m.a) * (u - 1.0) + u * w, m.d * w - m.c * u};
        case IonicVariant::AC:
            return {u * u * u - u, 0.0};
    }
    throw std::logic_error("eval_reaction: unknown variant");
}

struct EquilibriumPoint {
    double u_star = 0.0;
    double w_star = 0.0;   // unused for AC
    int index = 1;         // source numbering: 1 = origin (or -1 for AC), 2/3 nontrivial pair
    double shift_alpha = 0.0;  // linearization coefficient of v before the 1/eps factor
    bool admissible = false;
    bool has_w = true;
};

struct EquilibriaResult {
    std::vector<EquilibriumPoint> points;  // ascending u_star
    bool nontrivial_omitted = false;       // complex pair or AP pole d = 1
    std::string note;
};

struct LinearizedSystem {
    double alpha = 0.0;  // coefficient of v in the first row (1/eps included)
    double beta = 0.0;   // coupling v <- z in the first row
    double gamma = 0.0;  // second row reads (-gamma, delta)
    double delta = 0.0;
    double eps = 1.0;    // multiplies the diffusion block (1 for the scalar model)
    int components = 2;
    bool admissible = false;
};

inline double shift_alpha_of(const IonicModelSpec& m, double u, double w) {
    switch (m.variant) {
        case IonicVariant::FHN:
            return 3.0 * u * u - 2.0 * (m.a + 1.0) * u + m.a;
        case IonicVariant::AP:
            return 3.0 * m.k * u * u - 2.0 * m.k * (m.a + 1.0) * u + m.k * m.a + w;
        case IonicVariant::RM:
            return 3.0 * m.b * u * u - 2.0 * m.b * (m.a + 1.0) * u + m.b * m.a + w;
        case IonicVariant::AC:
            return -1.0 + 3.0 * u * u;
    }
    throw std::logic_error("shift_alpha_of: unknown variant");
}

inline LinearizedSystem linearize(const IonicModelSpec& m, const EquilibriumPoint& eq) {
    LinearizedSystem ls;
    ls.components = m.component_count();
    ls.eps = m.variant == IonicVariant::AC ? 1.0 : m.eps;
    const double u = eq.u_star;
    switch (m.variant) {
        case IonicVariant::FHN:
            ls.alpha = shift_alpha_of(m, u, eq.w_star) / m.eps;
            ls.beta = 1.0 / m.eps;
            ls.gamma = m.c;
            ls.delta = m.b;
            break;
        case IonicVariant::AP:
            ls.alpha = shift_alpha_of(m, u, eq.w_star) / m.eps;
            ls.beta = u / m.eps;
            ls.gamma = -(2.0 * m.k * u - m.k * (m.a + 1.0));
            ls.delta = m.d;
            break;
        case IonicVariant::RM:
            ls.alpha = shift_alpha_of(m, u, eq.w_star) / m.eps;
            ls.beta = u / m.eps;
            ls.gamma = m.c;
            ls.delta = m.d;
            break;
        case IonicVariant::AC:
            ls.alpha = shift_alpha_of(m, u, 0.0);  // no eps scaling in the scalar model
            break;
    }
    if (ls.components == 1)
        ls.admissible = ls.alpha > 0.0;
    else
        ls.admissible = ls.alpha > 0.0 && ls.beta >= 0.0 && ls.gamma >= 0.0 && ls.delta > 0.0;
    return ls;
}

namespace detail {
inline EquilibriumPoint make_point(const IonicModelSpec& m, double u, double w, int index) {
    EquilibriumPoint p;
    p.u_star = u;
    p.w_star = w;
    p.index = index;
    p.has_w = m.component_count() == 2;
    p.shift_alpha = shift_alpha_of(m, u, w);
    p.admissible = linearize(m, p).admissible;
    auto [F, G] = eval_reaction(m, u, w);
    const double scale = 1.0 + std::abs(u) * std::abs(u) * std::abs(u);
    if (std::abs(F) + std::abs(G) > 1e-12 * scale)
        throw std::logic_error("equilibria: constructed point fails the reaction residual check");
    return p;
}
}  // namespace detail

inline EquilibriaResult equilibria(const IonicModelSpec& m) {
    m.validate();
    EquilibriaResult res;
    switch (m.variant) {
        case IonicVariant::AC: {
            res.points.push_back(detail::make_point(m, -1.0, 0.0, 1));
            res.points.push_back(detail::make_point(m, 0.0, 0.0, 2));
            res.points.push_back(detail::make_point(m, 1.0, 0.0, 3));
            return res;
        }
        case IonicVariant::FHN: {
            res.points.push_back(detail::make_point(m, 0.0, 0.0, 1));
            const double disc = (m.a + 1.0) * (m.a + 1.0) - 4.0 * (m.a + m.c / m.b);
            if (disc < 0.0) {
                res.nontrivial_omitted = true;
                res.note = "nontrivial equilibria are complex (discriminant < 0)";
                return res;
            }
            const double droot = std::sqrt(disc);
            const double u2 = 0.5 * ((m.a + 1.0) - droot), u3 = 0.5 * ((m.a + 1.0) + droot);
            res.points.push_back(detail::make_point(m, u2, (m.c / m.b) * u2, 2));
            res.points.push_back(detail::make_point(m, u3, (m.c / m.b) * u3, 3));
            break;
        }
        case IonicVariant::AP: {
            res.points.push_back(detail::make_point(m, 0.0, 0.0, 1));
            if (m.d == 1.0) {
                res.nontrivial_omitted = true;
                res.note = "nontrivial equilibria omitted: formula has a pole at d = 1";
                return res;
            }
            const double disc =
                0.25 * (m.a + 1.0) * (m.a + 1.0) + m.d * m.a / (1.0 - m.d);
            if (disc < 0.0) {
                res.nontrivial_omitted = true;
                res.note = "nontrivial equilibria are complex (discriminant < 0)";
                return res;
            }
            const double e = std::sqrt(disc);
            for (int idx : {2, 3}) {
                const double u = 0.5 * (m.a + 1.0) + (idx == 2 ? -e : e);
                const double w = -m.k * (u - m.a) * (u - 1.0);
                res.points.push_back(detail::make_point(m, u, w, idx));
            }
            break;
        }
        case IonicVariant::RM: {
            res.points.push_back(detail::make_point(m, 0.0, 0.0, 1));
            const double q = m.c / (m.b * m.d);
            const double disc = (m.a + 1.0 - q) * (m.a + 1.0 - q) - 4.0 * m.a;
            if (disc < 0.0) {
                res.nontrivial_omitted = true;
                res.note = "nontrivial equilibria are complex (discriminant < 0)";
                return res;
            }
            const double e = std::sqrt(disc);
            const double u2 = 0.5 * ((m.a + 1.0 - q) - e), u3 = 0.5 * ((m.a + 1.0 - q) + e);
            res.points.push_back(detail::make_point(m, u2, (m.c / m.d) * u2, 2));
            res.points.push_back(detail::make_point(m, u3, (m.c / m.d) * u3, 3));
            break;
        }
    }
    std::sort(res.points.begin(), res.points.end(),
              [](const EquilibriumPoint& x, const EquilibriumPoint& y) { return x.u_star < y.u_star; });
    return res;
}

inline const EquilibriumPoint& equilibrium_by_index(const EquilibriaResult& r, int index) {
    for (const auto& p : r.points)
        if (p.index == index) return p;
    throw std::invalid_argument("equilibrium_by_index: no equilibrium with index " +
                                std::to_string(index) + " (it may have been omitted)");
}

struct StabilityResult {
    bool satisfied = false;
    std::vector<std::pair<std::string, double>> details;
};

// The model-level stability predicate guaranteeing an admissible upper
// equilibrium: (S_FN) for FHN, (S_RM) for RM; AP nontrivial equilibria are
// never admissible; AC is stable at u = +/-1 and unstable at 0.
inline StabilityResult stability_condition(const IonicModelSpec& m) {
    m.validate();
    StabilityResult r;
    switch (m.variant) {
        case IonicVariant::FHN: {
            // Self-test of the algebraic identity reconciling the two printed
            // forms of the condition: (a+1)^2 - 4a = (a-1)^2.
            const double lhs = (m.a + 1.0) * (m.a + 1.0) - 4.0 * m.a;
            const double rhs = (m.a - 1.0) * (m.a - 1.0);
            if (std::abs(lhs - rhs) > 1e-14 * (1.0 + std::abs(lhs)))
                throw std::logic_error("stability_condition: identity (a+1)^2-4a = (a-1)^2 failed");
            const double bound = m.b * (0.25 * (m.a - 1.0) * (m.a - 1.0) - m.a);
            const double disc = (m.a + 1.0) * (m.a + 1.0) - 4.0 * (m.a + m.c / m.b);
            const double threshold =
                (m.a + 1.0 + std::sqrt((m.a + 1.0) * (m.a + 1.0) - 3.0 * m.a)) / 3.0;
            r.details = {{"c", m.c}, {"bound", bound}, {"discriminant", disc}, {"u3_threshold", threshold}};
            if (!(m.c < bound) || disc < 0.0) return r;
            const double u3 = 0.5 * ((m.a + 1.0) + std::sqrt(disc));
            r.details.push_back({"u3", u3});
            r.satisfied = u3 > threshold;
            return r;
        }
        case IonicVariant::RM: {
            const double q = m.c / (m.b * m.d);
            const double disc = (m.a + 1.0 - q) * (m.a + 1.0 - q) - 4.0 * m.a;
            r.details = {{"q", q}, {"discriminant", disc}};
            if (disc < 0.0) return r;
            const double e = std::sqrt(disc);
            r.details.push_back({"e", e});
            r.details.push_back({"margin", e - q});
            r.satisfied = e - q > 0.0;
            return r;
        }
        case IonicVariant::AP:
            r.satisfied = false;
            r.details = {{"note_nontrivial_never_admissible", 1.0}};
            return r;
        case IonicVariant::AC:
            r.satisfied = true;
            r.details = {{"alpha_at_pm1", 2.0}, {"alpha_at_0", -1.0}};
            return r;
    }
    throw std::logic_error("stability_condition: unknown variant");
}

// Purely nonlinear remainder (quadratic and higher) of the shifted system, as
// scalars; the system reads d/dt (v,z) + M (v,z) = (I,0) + (N1,N2).
inline std::pair<double, double> shifted_nonlinearity_scalar(const IonicModelSpec& m,
                                                             const EquilibriumPoint& eq, double v,
                                                             double z) {
    const double u = eq.u_star;
    switch (m.variant) {
        case IonicVariant::FHN:
            return {-(v * v * v + (3.0 * u - m.a - 1.0) * v * v) / m.eps, 0.0};
        case IonicVariant::AP:
            return {-(m.k * v * v * v + (3.0 * m.k * u - m.k * (m.a + 1.0)) * v * v + v * z) / m.eps,
                    -m.k * v * v};
        case IonicVariant::RM:
            return {-(m.b * v * v * v + (3.0 * m.b * u - m.b * (m.a + 1.0)) * v * v + v * z) / m.eps,
                    0.0};
        case IonicVariant::AC:
            return {-(v * v * v + 3.0 * u * v * v), 0.0};
    }
    throw std::logic_error("shifted_nonlinearity_scalar: unknown variant");
}

// Nodewise application to deviation fields; z_field ignored for AC.
inline std::pair<ScalarField, ScalarField> shifted_nonlinearity(const IonicModelSpec& m,
                                                                const EquilibriumPoint& eq,
                                                                const ScalarField& v_field,
                                                                const ScalarField& z_field) {
    ScalarField n1(v_field.grid), n2(v_field.grid);
    const bool two = m.component_count() == 2;
    if (two && !same_grid(v_field.grid, z_field.grid))
        throw std::invalid_argument("shifted_nonlinearity: grid mismatch");
    for (int i = 0; i < v_field.size(); ++i) {
        auto [a1, a2] = shifted_nonlinearity_scalar(m, eq, v_field.values[i],
                                                    two ? z_field.values[i] : 0.0);
        n1.values[i] = a1;
        n2.values[i] = a2;
    }
    return {n1, n2};
}

}  // namespace bdps
