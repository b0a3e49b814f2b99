#pragma once

// Experiment configuration: a single JSON document describing grid,
// conductivities, ionic model, equilibrium choice, forcing, solver, and
// diagnostics.  Parsing reports the offending field path; JSON syntax errors
// surface with the line/column from the parser.  Also home to the
// deterministic RNG used for probe fields (fixed seed => identical bytes).

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bdps/bidomain.hpp"
#include "bdps/elliptic.hpp"
#include "bdps/grid.hpp"
#include "bdps/ionic.hpp"
#include "bdps/operator.hpp"
#include "bdps/periodic.hpp"

namespace bdps {

struct ConfigError : public std::runtime_error {
    std::string field;
    ConfigError(std::string f, const std::string& msg)
        : std::runtime_error("config field '" + f + "': " + msg), field(std::move(f)) {}
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Uniform doubles from the top 53 bits of mt19937_64; the explicit mapping
// keeps streams identical across standard libraries.
struct DeterministicRng {
    std::mt19937_64 gen;
    explicit DeterministicRng(std::uint64_t seed) : gen(seed) {}
    double uniform() { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }
    double uniform(double a, double b) { return a + (b - a) * uniform(); }
};

inline ScalarField random_field(DeterministicRng& rng, const GridPtr& g, double lo = -1.0,
                                double hi = 1.0) {
    ScalarField f(g);
    for (double& v : f.values) v = rng.uniform(lo, hi);
    return f;
}

inline ScalarField random_mean_zero_field(DeterministicRng& rng, const GridPtr& g) {
    return project_mean_zero(random_field(rng, g));
}

inline State random_state(DeterministicRng& rng, const GridPtr& g, int ncomp) {
    State s = State::zeros(g, ncomp);
    for (auto& c : s.comps)
        for (double& v : c.values) v = rng.uniform(-1.0, 1.0);
    return s;
}

// --- specification structs ---

struct GridSpec {
    int dimension = 1;
    std::vector<int> extents{33};
    std::vector<double> lengths{1.0};
};

struct ConductivitySpec {
    std::string profile = "constant";  // constant | graded | rotated_anisotropic
    double s11 = 1.0, s12 = 0.0, s22 = 1.0;  // constant
    double base = 1.0, grade = 0.5;          // graded: base*(1 + grade*x/Lx), isotropic
    double along = 1.0, across = 0.2, angle = 0.5;  // rotated_anisotropic (2D)
};

struct DiffusionSpec {
    std::string kind = "bidomain";  // bidomain | elliptic | none
    ConductivitySpec sigma_i, sigma_e;  // bidomain
    ConductivitySpec sigma;             // elliptic
};

struct ForcingSpec {
    std::string mode = "direct";  // direct | intra_extra
    double amplitude = 1e-3;
    int modes = 1;  // temporal harmonics: sum_{m=1..modes} m^{-2} cos(2 pi m t/T + m*phase)
    double period = 1.0;
    double phase = 0.0;
    std::string profile = "cos_x";  // direct spatial profile
    std::string profile_i = "cos_x", profile_e = "gauss";  // intra/extracellular pair
};

struct DiagnosticsSpec {
    bool sector = true;
    bool maximal_regularity = true;
    bool seminorm_oracle = true;
    bool inverse_roundtrip = true;
    bool cross_validation = true;
    std::vector<double> sector_angles{-2.5, -1.25, 0.0, 1.25, 2.5};
    std::vector<double> sector_radii{0.1, 1.0, 10.0, 100.0};
    int probes = 3;
};

struct ExperimentConfig {
    GridSpec grid;
    DiffusionSpec diffusion;
    IonicModelSpec model;
    int equilibrium_index = 1;
    ForcingSpec forcing;
    PeriodicSolveConfig solver;
    DiagnosticsSpec diagnostics;
    std::string output_dir = "out";
    std::uint64_t seed = 1;
    int threads = 1;

    static ExperimentConfig from_json(const nlohmann::json& j);
    static ExperimentConfig from_string(const std::string& text) {
        try {
            return from_json(nlohmann::json::parse(text));
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigError(std::string("config parse error: ") + e.what());
        }
    }
    static ExperimentConfig from_file(const std::string& path) {
        std::ifstream f(path);
        if (!f) throw ConfigError("cannot open config file: " + path);
        std::stringstream ss;
        ss << f.rdbuf();
        try {
            return from_json(nlohmann::json::parse(ss.str()));
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigError(path + ": " + e.what());
        }
    }
    nlohmann::json to_json() const;
};

namespace cfg_detail {

using nlohmann::json;

inline std::string join(const std::string& scope, const std::string& key) {
    return scope.empty() ? key : scope + "." + key;
}

inline void check_keys(const json& j, const std::string& scope,
                       std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError(scope.empty() ? "<root>" : scope, "expected an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* a : allowed)
            if (it.key() == a) {
                ok = true;
                break;
            }
        if (!ok) throw ConfigError(join(scope, it.key()), "unknown field");
    }
}

inline double as_num(const json& j, const std::string& field) {
    if (!j.is_number()) throw ConfigError(field, "expected a number");
    return j.get<double>();
}
inline int as_int(const json& j, const std::string& field) {
    if (!j.is_number_integer()) throw ConfigError(field, "expected an integer");
    return j.get<int>();
}
inline bool as_bool(const json& j, const std::string& field) {
    if (!j.is_boolean()) throw ConfigError(field, "expected a boolean");
    return j.get<bool>();
}
inline std::string as_str(const json& j, const std::string& field) {
    if (!j.is_string()) throw ConfigError(field, "expected a string");
    return j.get<std::string>();
}

inline void opt_num(const json& j, const char* key, const std::string& scope, double& out) {
    if (auto it = j.find(key); it != j.end()) out = as_num(*it, join(scope, key));
}
inline void opt_int(const json& j, const char* key, const std::string& scope, int& out) {
    if (auto it = j.find(key); it != j.end()) out = as_int(*it, join(scope, key));
}
inline void opt_bool(const json& j, const char* key, const std::string& scope, bool& out) {
    if (auto it = j.find(key); it != j.end()) out = as_bool(*it, join(scope, key));
}
inline void opt_str(const json& j, const char* key, const std::string& scope, std::string& out) {
    if (auto it = j.find(key); it != j.end()) out = as_str(*it, join(scope, key));
}
inline void opt_vec_num(const json& j, const char* key, const std::string& scope,
                        std::vector<double>& out) {
    auto it = j.find(key);
    if (it == j.end()) return;
    if (!it->is_array()) throw ConfigError(join(scope, key), "expected an array of numbers");
    out.clear();
    for (std::size_t i = 0; i < it->size(); ++i) {
        out.push_back(as_num((*it)[i], join(scope, key) + "[" + std::to_string(i) + "]"));
    }
}
inline void opt_vec_int(const json& j, const char* key, const std::string& scope,
                        std::vector<int>& out) {
    auto it = j.find(key);
    if (it == j.end()) return;
    if (!it->is_array()) throw ConfigError(join(scope, key), "expected an array of integers");
    out.clear();
    for (std::size_t i = 0; i < it->size(); ++i) {
        out.push_back(as_int((*it)[i], join(scope, key) + "[" + std::to_string(i) + "]"));
    }
}

inline ConductivitySpec parse_conductivity(const json& j, const std::string& scope) {
    ConductivitySpec c;
    check_keys(j, scope,
               {"profile", "s11", "s12", "s22", "base", "grade", "along", "across", "angle"});
    opt_str(j, "profile", scope, c.profile);
    if (c.profile != "constant" && c.profile != "graded" && c.profile != "rotated_anisotropic")
        throw ConfigError(join(scope, "profile"),
                          "unknown conductivity profile '" + c.profile +
                              "' (expected constant, graded, or rotated_anisotropic)");
    opt_num(j, "s11", scope, c.s11);
    opt_num(j, "s12", scope, c.s12);
    opt_num(j, "s22", scope, c.s22);
    opt_num(j, "base", scope, c.base);
    opt_num(j, "grade", scope, c.grade);
    opt_num(j, "along", scope, c.along);
    opt_num(j, "across", scope, c.across);
    opt_num(j, "angle", scope, c.angle);
    return c;
}

inline json conductivity_json(const ConductivitySpec& c) {
    json j;
    j["profile"] = c.profile;
    if (c.profile == "constant") {
        j["s11"] = c.s11;
        j["s12"] = c.s12;
        j["s22"] = c.s22;
    } else if (c.profile == "graded") {
        j["base"] = c.base;
        j["grade"] = c.grade;
    } else {
        j["along"] = c.along;
        j["across"] = c.across;
        j["angle"] = c.angle;
    }
    return j;
}

}  // namespace cfg_detail

inline ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
    using namespace cfg_detail;
    ExperimentConfig cfg;
    check_keys(j, "",
               {"grid", "diffusion", "model", "equilibrium_index", "forcing", "solver",
                "diagnostics", "output_dir", "seed", "threads"});

    if (auto it = j.find("grid"); it != j.end()) {
        const std::string scope = "grid";
        check_keys(*it, scope, {"dimension", "extents", "lengths"});
        opt_int(*it, "dimension", scope, cfg.grid.dimension);
        if (cfg.grid.dimension != 1 && cfg.grid.dimension != 2)
            throw ConfigError("grid.dimension", "must be 1 or 2");
        cfg.grid.extents = cfg.grid.dimension == 1 ? std::vector<int>{33}
                                                   : std::vector<int>{17, 17};
        cfg.grid.lengths = cfg.grid.dimension == 1 ? std::vector<double>{1.0}
                                                   : std::vector<double>{1.0, 1.0};
        opt_vec_int(*it, "extents", scope, cfg.grid.extents);
        opt_vec_num(*it, "lengths", scope, cfg.grid.lengths);
        if (static_cast<int>(cfg.grid.extents.size()) != cfg.grid.dimension)
            throw ConfigError("grid.extents", "size must match dimension");
        if (static_cast<int>(cfg.grid.lengths.size()) != cfg.grid.dimension)
            throw ConfigError("grid.lengths", "size must match dimension");
    }

    if (auto it = j.find("diffusion"); it != j.end()) {
        const std::string scope = "diffusion";
        check_keys(*it, scope, {"kind", "sigma_i", "sigma_e", "sigma"});
        opt_str(*it, "kind", scope, cfg.diffusion.kind);
        if (cfg.diffusion.kind != "bidomain" && cfg.diffusion.kind != "elliptic" &&
            cfg.diffusion.kind != "none")
            throw ConfigError("diffusion.kind",
                              "unknown kind '" + cfg.diffusion.kind +
                                  "' (expected bidomain, elliptic, or none)");
        if (auto s = it->find("sigma_i"); s != it->end())
            cfg.diffusion.sigma_i = parse_conductivity(*s, "diffusion.sigma_i");
        if (auto s = it->find("sigma_e"); s != it->end())
            cfg.diffusion.sigma_e = parse_conductivity(*s, "diffusion.sigma_e");
        if (auto s = it->find("sigma"); s != it->end())
            cfg.diffusion.sigma = parse_conductivity(*s, "diffusion.sigma");
    }

    if (auto it = j.find("model"); it != j.end()) {
        const std::string scope = "model";
        check_keys(*it, scope, {"variant", "a", "b", "c", "d", "k", "eps"});
        std::string variant = "fhn";
        opt_str(*it, "variant", scope, variant);
        std::string lowered = variant;
        for (char& ch : lowered) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        if (lowered == "fhn")
            cfg.model.variant = IonicVariant::FHN;
        else if (lowered == "ap")
            cfg.model.variant = IonicVariant::AP;
        else if (lowered == "rm")
            cfg.model.variant = IonicVariant::RM;
        else if (lowered == "ac")
            cfg.model.variant = IonicVariant::AC;
        else
            throw ConfigError("model.variant", "unknown variant '" + variant +
                                                   "' (expected fhn, ap, rm, or ac)");
        opt_num(*it, "a", scope, cfg.model.a);
        opt_num(*it, "b", scope, cfg.model.b);
        opt_num(*it, "c", scope, cfg.model.c);
        opt_num(*it, "d", scope, cfg.model.d);
        opt_num(*it, "k", scope, cfg.model.k);
        opt_num(*it, "eps", scope, cfg.model.eps);
        try {
            cfg.model.validate();
        } catch (const std::exception& e) {
            throw ConfigError("model", e.what());
        }
    }

    if (auto it = j.find("equilibrium_index"); it != j.end())
        cfg.equilibrium_index = as_int(*it, "equilibrium_index");

    if (auto it = j.find("forcing"); it != j.end()) {
        const std::string scope = "forcing";
        check_keys(*it, scope,
                   {"mode", "amplitude", "modes", "period", "phase", "profile", "profile_i",
                    "profile_e"});
        opt_str(*it, "mode", scope, cfg.forcing.mode);
        if (cfg.forcing.mode != "direct" && cfg.forcing.mode != "intra_extra")
            throw ConfigError("forcing.mode", "expected direct or intra_extra");
        opt_num(*it, "amplitude", scope, cfg.forcing.amplitude);
        opt_int(*it, "modes", scope, cfg.forcing.modes);
        if (cfg.forcing.modes < 1) throw ConfigError("forcing.modes", "must be >= 1");
        opt_num(*it, "period", scope, cfg.forcing.period);
        if (!(cfg.forcing.period > 0.0)) throw ConfigError("forcing.period", "must be positive");
        opt_num(*it, "phase", scope, cfg.forcing.phase);
        opt_str(*it, "profile", scope, cfg.forcing.profile);
        opt_str(*it, "profile_i", scope, cfg.forcing.profile_i);
        opt_str(*it, "profile_e", scope, cfg.forcing.profile_e);
    }

    if (auto it = j.find("solver"); it != j.end()) {
        const std::string scope = "solver";
        check_keys(*it, scope,
                   {"method", "M", "krylov_tol", "krylov_max_iter", "max_outer", "tol_outer",
                    "divergence_guard", "ivp_substeps", "theta", "p", "ball_radius", "backend",
                    "quad"});
        std::string method = method_name(cfg.solver.method);
        opt_str(*it, "method", scope, method);
        if (method == "fourier_collocation")
            cfg.solver.method = PeriodicMethod::fourier_collocation;
        else if (method == "initial_value_fixed_point")
            cfg.solver.method = PeriodicMethod::initial_value_fixed_point;
        else
            throw ConfigError("solver.method",
                              "expected fourier_collocation or initial_value_fixed_point");
        opt_int(*it, "M", scope, cfg.solver.M);
        opt_num(*it, "krylov_tol", scope, cfg.solver.krylov_tol);
        opt_int(*it, "krylov_max_iter", scope, cfg.solver.krylov_max_iter);
        opt_int(*it, "max_outer", scope, cfg.solver.max_outer);
        opt_num(*it, "tol_outer", scope, cfg.solver.tol_outer);
        opt_num(*it, "divergence_guard", scope, cfg.solver.divergence_guard);
        opt_int(*it, "ivp_substeps", scope, cfg.solver.ivp_substeps);
        opt_num(*it, "theta", scope, cfg.solver.theta);
        opt_num(*it, "p", scope, cfg.solver.p);
        opt_num(*it, "ball_radius", scope, cfg.solver.ball_radius);
        std::string backend = "automatic";
        opt_str(*it, "backend", scope, backend);
        if (backend == "automatic")
            cfg.solver.backend = SolveBackend::automatic;
        else if (backend == "spectral")
            cfg.solver.backend = SolveBackend::spectral;
        else if (backend == "krylov")
            cfg.solver.backend = SolveBackend::krylov;
        else
            throw ConfigError("solver.backend", "expected automatic, spectral, or krylov");
        if (auto q = it->find("quad"); q != it->end()) {
            check_keys(*q, "solver.quad", {"t_min", "t_max", "nodes_per_decade"});
            opt_num(*q, "t_min", "solver.quad", cfg.solver.quad.t_min);
            opt_num(*q, "t_max", "solver.quad", cfg.solver.quad.t_max);
            opt_int(*q, "nodes_per_decade", "solver.quad", cfg.solver.quad.nodes_per_decade);
        }
        try {
            cfg.solver.validate();
        } catch (const std::exception& e) {
            throw ConfigError("solver", e.what());
        }
    }

    if (auto it = j.find("diagnostics"); it != j.end()) {
        const std::string scope = "diagnostics";
        check_keys(*it, scope,
                   {"sector", "maximal_regularity", "seminorm_oracle", "inverse_roundtrip",
                    "cross_validation", "sector_angles", "sector_radii", "probes"});
        opt_bool(*it, "sector", scope, cfg.diagnostics.sector);
        opt_bool(*it, "maximal_regularity", scope, cfg.diagnostics.maximal_regularity);
        opt_bool(*it, "seminorm_oracle", scope, cfg.diagnostics.seminorm_oracle);
        opt_bool(*it, "inverse_roundtrip", scope, cfg.diagnostics.inverse_roundtrip);
        opt_bool(*it, "cross_validation", scope, cfg.diagnostics.cross_validation);
        opt_vec_num(*it, "sector_angles", scope, cfg.diagnostics.sector_angles);
        opt_vec_num(*it, "sector_radii", scope, cfg.diagnostics.sector_radii);
        opt_int(*it, "probes", scope, cfg.diagnostics.probes);
        if (cfg.diagnostics.probes < 1) throw ConfigError("diagnostics.probes", "must be >= 1");
    }

    if (auto it = j.find("output_dir"); it != j.end())
        cfg.output_dir = as_str(*it, "output_dir");
    if (auto it = j.find("seed"); it != j.end()) {
        const bool nonneg = it->is_number_unsigned() ||
                            (it->is_number_integer() && it->get<std::int64_t>() >= 0);
        if (!nonneg) throw ConfigError("seed", "expected a non-negative integer");
        cfg.seed = it->get<std::uint64_t>();
    }
    if (auto it = j.find("threads"); it != j.end()) {
        cfg.threads = as_int(*it, "threads");
        if (cfg.threads < 1) throw ConfigError("threads", "must be >= 1");
    }
    cfg.solver.threads = cfg.threads;
    return cfg;
}

inline nlohmann::json ExperimentConfig::to_json() const {
    using cfg_detail::conductivity_json;
    nlohmann::json j;
    j["grid"] = {{"dimension", grid.dimension},
                 {"extents", grid.extents},
                 {"lengths", grid.lengths}};
    nlohmann::json d;
    d["kind"] = diffusion.kind;
    if (diffusion.kind == "bidomain") {
        d["sigma_i"] = conductivity_json(diffusion.sigma_i);
        d["sigma_e"] = conductivity_json(diffusion.sigma_e);
    } else if (diffusion.kind == "elliptic") {
        d["sigma"] = conductivity_json(diffusion.sigma);
    }
    j["diffusion"] = std::move(d);
    nlohmann::json m;
    const char* token = model.variant == IonicVariant::FHN  ? "fhn"
                        : model.variant == IonicVariant::AP ? "ap"
                        : model.variant == IonicVariant::RM ? "rm"
                                                            : "ac";
    m["variant"] = token;
    m["a"] = model.a;
    m["b"] = model.b;
    m["c"] = model.c;
    m["d"] = model.d;
    m["k"] = model.k;
    m["eps"] = model.eps;
    j["model"] = std::move(m);
    j["equilibrium_index"] = equilibrium_index;
    j["forcing"] = {{"mode", forcing.mode},         {"amplitude", forcing.amplitude},
                    {"modes", forcing.modes},       {"period", forcing.period},
                    {"phase", forcing.phase},       {"profile", forcing.profile},
                    {"profile_i", forcing.profile_i}, {"profile_e", forcing.profile_e}};
    const char* backend = solver.backend == SolveBackend::automatic  ? "automatic"
                          : solver.backend == SolveBackend::spectral ? "spectral"
                                                                     : "krylov";
    j["solver"] = {{"method", method_name(solver.method)},
                   {"M", solver.M},
                   {"krylov_tol", solver.krylov_tol},
                   {"krylov_max_iter", solver.krylov_max_iter},
                   {"max_outer", solver.max_outer},
                   {"tol_outer", solver.tol_outer},
                   {"divergence_guard", solver.divergence_guard},
                   {"ivp_substeps", solver.ivp_substeps},
                   {"theta", solver.theta},
                   {"p", solver.p},
                   {"ball_radius", solver.ball_radius},
                   {"backend", backend},
                   {"quad",
                    {{"t_min", solver.quad.t_min},
                     {"t_max", solver.quad.t_max},
                     {"nodes_per_decade", solver.quad.nodes_per_decade}}}};
    j["diagnostics"] = {{"sector", diagnostics.sector},
                        {"maximal_regularity", diagnostics.maximal_regularity},
                        {"seminorm_oracle", diagnostics.seminorm_oracle},
                        {"inverse_roundtrip", diagnostics.inverse_roundtrip},
                        {"cross_validation", diagnostics.cross_validation},
                        {"sector_angles", diagnostics.sector_angles},
                        {"sector_radii", diagnostics.sector_radii},
                        {"probes", diagnostics.probes}};
    j["output_dir"] = output_dir;
    j["seed"] = seed;
    j["threads"] = threads;
    return j;
}

// --- builders ---

inline GridPtr build_grid(const GridSpec& spec) {
    return make_grid(spec.dimension, spec.extents, spec.lengths);
}

inline ConductivityField build_conductivity(const ConductivitySpec& spec, const GridPtr& g) {
    if (spec.profile == "constant") {
        if (g->dimension == 1 || (spec.s12 == 0.0 && spec.s11 == spec.s22))
            return ConductivityField::constant(g, spec.s11);
        return ConductivityField::constant_tensor(g, spec.s11, spec.s12, spec.s22);
    }
    if (spec.profile == "graded") {
        const double lx = g->lengths[0];
        auto f = [&spec, lx](double x, double) { return spec.base * (1.0 + spec.grade * x / lx); };
        auto zero = [](double, double) { return 0.0; };
        return ConductivityField::from_fn(g, f, zero, f);
    }
    if (spec.profile == "rotated_anisotropic") {
        if (g->dimension != 2)
            throw ConfigError("conductivity", "rotated_anisotropic requires a 2D grid");
        const double cs = std::cos(spec.angle), sn = std::sin(spec.angle);
        const double a11 = cs * cs * spec.along + sn * sn * spec.across;
        const double a22 = sn * sn * spec.along + cs * cs * spec.across;
        const double a12 = cs * sn * (spec.along - spec.across);
        return ConductivityField::constant_tensor(g, a11, a12, a22);
    }
    throw ConfigError("conductivity.profile", "unknown profile '" + spec.profile + "'");
}

inline std::shared_ptr<const BidomainOperator> build_bidomain(const ExperimentConfig& cfg,
                                                              const GridPtr& g) {
    if (cfg.diffusion.kind != "bidomain") return nullptr;
    EllipticOperator op_i = assemble_elliptic(g, build_conductivity(cfg.diffusion.sigma_i, g));
    EllipticOperator op_e = assemble_elliptic(g, build_conductivity(cfg.diffusion.sigma_e, g));
    return std::make_shared<BidomainOperator>(make_bidomain(std::move(op_i), std::move(op_e)));
}

inline std::shared_ptr<const EllipticOperator> build_elliptic(const ExperimentConfig& cfg,
                                                              const GridPtr& g) {
    if (cfg.diffusion.kind != "elliptic") return nullptr;
    return std::make_shared<EllipticOperator>(
        assemble_elliptic(g, build_conductivity(cfg.diffusion.sigma, g)));
}

// Assembles the admissibility-gated coupled operator for the configured
// diffusion kind and a linearization.
inline CoupledOperator build_operator(const ExperimentConfig& cfg, const GridPtr& g,
                                      const LinearizedSystem& lin) {
    if (cfg.diffusion.kind == "bidomain") {
        auto op = CoupledOperator::from_linearization(build_bidomain(cfg, g), lin);
        op.krylov_tol = std::min(op.krylov_tol, cfg.solver.krylov_tol);
        op.krylov_max_iter = cfg.solver.krylov_max_iter;
        return op;
    }
    if (cfg.diffusion.kind == "elliptic") {
        auto op = CoupledOperator::from_linearization(build_elliptic(cfg, g), lin);
        op.krylov_tol = std::min(op.krylov_tol, cfg.solver.krylov_tol);
        op.krylov_max_iter = cfg.solver.krylov_max_iter;
        return op;
    }
    return CoupledOperator::from_linearization(g, lin);
}

// Named spatial profiles: the lowest Neumann cosine modes and a Gaussian
// bump.  mean_removed subtracts the weighted average (required when the
// profile feeds the conservation-checked intra/extracellular path).
inline ScalarField forcing_profile(const std::string& name, const GridPtr& g, bool mean_removed) {
    const double pi = 3.14159265358979323846;
    const double lx = g->lengths[0];
    const double ly = g->dimension == 2 ? g->lengths[1] : 1.0;
    ScalarField f(g);
    if (name == "uniform") {
        f.values.assign(g->nodes(), 1.0);
    } else if (name == "cos_x") {
        f = ScalarField::from_fn(g, [&](double x, double) { return std::cos(pi * x / lx); });
    } else if (name == "cos_y") {
        if (g->dimension != 2) throw ConfigError("forcing.profile", "cos_y requires a 2D grid");
        f = ScalarField::from_fn(g, [&](double, double y) { return std::cos(pi * y / ly); });
    } else if (name == "cos_xy") {
        if (g->dimension != 2) throw ConfigError("forcing.profile", "cos_xy requires a 2D grid");
        f = ScalarField::from_fn(g, [&](double x, double y) {
            return std::cos(pi * x / lx) * std::cos(pi * y / ly);
        });
    } else if (name == "gauss") {
        const double cx = 0.5 * lx, cy = 0.5 * ly;
        const double w = 0.12 * lx;
        f = ScalarField::from_fn(g, [&](double x, double y) {
            const double dx = x - cx;
            const double dy = g->dimension == 2 ? y - cy : 0.0;
            return std::exp(-(dx * dx + dy * dy) / (2.0 * w * w));
        });
    } else {
        throw ConfigError("forcing.profile", "unknown spatial profile '" + name + "'");
    }
    if (mean_removed) f = project_mean_zero(f);
    return f;
}

// Temporal waveform samples s(t_j), t_j = j T / M:
// s(t) = sum_{m=1..modes} m^{-2} cos(2 pi m t / T + m * phase).
inline std::vector<double> forcing_waveform(const ForcingSpec& spec, int M) {
    const double two_pi = 2.0 * 3.14159265358979323846;
    std::vector<double> s(M, 0.0);
    for (int j = 0; j < M; ++j) {
        const double t = spec.period * j / M;
        double acc = 0.0;
        for (int m = 1; m <= spec.modes; ++m)
            acc += std::cos(two_pi * m * t / spec.period + m * spec.phase) / (double(m) * m);
        s[j] = acc;
    }
    return s;
}

// Single-component forcing trajectory I(t, x) = amplitude * s(t) * P(x).
// In intra_extra mode the pair (I_i, I_e) is reduced through the
// conservation-checked modified source; both profiles are mean-removed so
// the compatibility integral vanishes.
inline PeriodicTrajectory build_forcing(const ExperimentConfig& cfg, const GridPtr& g,
                                        const BidomainOperator* bop) {
    const int M = cfg.solver.M;
    const std::vector<double> s = forcing_waveform(cfg.forcing, M);
    ScalarField profile(g);
    if (cfg.forcing.mode == "direct") {
        profile = forcing_profile(cfg.forcing.profile, g, false);
    } else {
        if (!bop)
            throw ConfigError("forcing.mode",
                              "intra_extra forcing requires bidomain diffusion");
        const ScalarField pi_field = forcing_profile(cfg.forcing.profile_i, g, true);
        const ScalarField pe_field = forcing_profile(cfg.forcing.profile_e, g, true);
        profile = modified_source(*bop, pi_field, pe_field);
    }
    PeriodicTrajectory I(g, cfg.forcing.period, M, 1);
    for (int j = 0; j < M; ++j) {
        const double a = cfg.forcing.amplitude * s[j];
        for (int i = 0; i < g->nodes(); ++i)
            I.samples[j].comps[0].values[i] = a * profile.values[i];
    }
    return I;
}

}  // namespace bdps
