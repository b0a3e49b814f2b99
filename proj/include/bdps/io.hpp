#pragma once

// Serialization: RFC-4180 CSV writers (CRLF, 17 significant digits), the
// BDPS binary trajectory container, COO matrix export, and JSON report
// assembly.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bdps/grid.hpp"
#include "bdps/ionic.hpp"
#include "bdps/periodic.hpp"
#include "bdps/semigroup.hpp"
#include "bdps/sparse.hpp"

namespace bdps {

inline constexpr const char* kLibraryVersion = "1.0.0";
inline constexpr std::uint32_t kBdpsFormatVersion = 1;

// %.17g: shortest decimal form that roundtrips an IEEE double.
inline std::string format_g17(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

// RFC-4180 quoting for text cells; the numeric writers below never need it.
inline std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

namespace detail {
inline std::ofstream open_out(const std::string& path, bool binary) {
    std::ofstream f(path, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open output file: " + path);
    return f;
}
inline std::ifstream open_in(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open input file: " + path);
    return f;
}
}  // namespace detail

// Long-form trajectory table: one row per (sample, node).  The z column is
// zero for single-component models so the schema stays fixed.
inline void write_trajectory_csv(const std::string& path, const PeriodicTrajectory& traj) {
    auto f = detail::open_out(path, false);
    f << "t,node_index,v,z\r\n";
    const int n = traj.grid->nodes();
    const bool two = traj.components() == 2;
    for (int j = 0; j < traj.M(); ++j) {
        const std::string t = format_g17(traj.time(j));
        for (int i = 0; i < n; ++i) {
            f << t << ',' << i << ',' << format_g17(traj.samples[j].comps[0].values[i]) << ','
              << format_g17(two ? traj.samples[j].comps[1].values[i] : 0.0) << "\r\n";
        }
    }
    if (!f) throw std::runtime_error("failed writing " + path);
}

// Binary container, native little-endian:
//   bytes 0-3   magic "BDPS"
//   u32         format version (1)
//   u32         dimension (1 or 2)
//   u32 x2      grid extents nx, ny (ny = 1 in 1D)
//   u32         components per state
//   u32         time samples M
//   f64         period T
//   f64 x2      domain lengths Lx, Ly (Ly = 0 in 1D)
//   f64 array   row-major payload: sample-major, then component, then node
inline void write_trajectory_bdps(const std::string& path, const PeriodicTrajectory& traj) {
    auto f = detail::open_out(path, true);
    auto put_u32 = [&](std::uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); };
    auto put_f64 = [&](double v) { f.write(reinterpret_cast<const char*>(&v), 8); };
    f.write("BDPS", 4);
    put_u32(kBdpsFormatVersion);
    put_u32(static_cast<std::uint32_t>(traj.grid->dimension));
    put_u32(static_cast<std::uint32_t>(traj.grid->extents[0]));
    put_u32(static_cast<std::uint32_t>(traj.grid->dimension == 2 ? traj.grid->extents[1] : 1));
    put_u32(static_cast<std::uint32_t>(traj.components()));
    put_u32(static_cast<std::uint32_t>(traj.M()));
    put_f64(traj.period);
    put_f64(traj.grid->lengths[0]);
    put_f64(traj.grid->dimension == 2 ? traj.grid->lengths[1] : 0.0);
    const int n = traj.grid->nodes();
    for (int j = 0; j < traj.M(); ++j)
        for (int c = 0; c < traj.components(); ++c)
            for (int i = 0; i < n; ++i) put_f64(traj.samples[j].comps[c].values[i]);
    if (!f) throw std::runtime_error("failed writing " + path);
}

inline PeriodicTrajectory read_trajectory_bdps(const std::string& path) {
    auto f = detail::open_in(path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::string(magic, 4) != "BDPS")
        throw std::runtime_error(path + ": not a BDPS trajectory file");
    auto get_u32 = [&] {
        std::uint32_t v = 0;
        f.read(reinterpret_cast<char*>(&v), 4);
        return v;
    };
    auto get_f64 = [&] {
        double v = 0;
        f.read(reinterpret_cast<char*>(&v), 8);
        return v;
    };
    const std::uint32_t version = get_u32();
    if (version != kBdpsFormatVersion)
        throw std::runtime_error(path + ": unsupported BDPS format version " +
                                 std::to_string(version));
    const int dim = static_cast<int>(get_u32());
    const int nx = static_cast<int>(get_u32());
    const int ny = static_cast<int>(get_u32());
    const int ncomp = static_cast<int>(get_u32());
    const int M = static_cast<int>(get_u32());
    const double T = get_f64();
    const double lx = get_f64();
    const double ly = get_f64();
    if (!f) throw std::runtime_error(path + ": truncated BDPS header");
    GridPtr g = dim == 1 ? make_grid(1, {nx}, {lx}) : make_grid(2, {nx, ny}, {lx, ly});
    PeriodicTrajectory traj(g, T, M, ncomp);
    for (int j = 0; j < M; ++j)
        for (int c = 0; c < ncomp; ++c)
            for (int i = 0; i < g->nodes(); ++i) traj.samples[j].comps[c].values[i] = get_f64();
    if (!f) throw std::runtime_error(path + ": truncated BDPS payload");
    return traj;
}

inline void write_sector_csv(const std::string& path, const std::vector<SectorRow>& rows) {
    auto f = detail::open_out(path, false);
    f << "re_lambda,im_lambda,q,ratio,converged\r\n";
    for (const auto& r : rows) {
        f << format_g17(r.re_lambda) << ',' << format_g17(r.im_lambda) << ',' << format_g17(r.q)
          << ',' << format_g17(r.ratio) << ',' << (r.converged ? "true" : "false") << "\r\n";
    }
    if (!f) throw std::runtime_error("failed writing " + path);
}

// Sparse matrix in coordinate form, one entry per stored nonzero position.
inline void write_coo_csv(const std::string& path, const CsrMatrix& m) {
    auto f = detail::open_out(path, false);
    f << "row,col,value\r\n";
    for (int r = 0; r < m.n; ++r)
        for (int p = m.row_ptr[r]; p < m.row_ptr[r + 1]; ++p)
            f << r << ',' << m.col[p] << ',' << format_g17(m.val[p]) << "\r\n";
    if (!f) throw std::runtime_error("failed writing " + path);
}

inline void write_text_file(const std::string& path, const std::string& content) {
    auto f = detail::open_out(path, false);
    f << content;
    if (!f) throw std::runtime_error("failed writing " + path);
}

// The functional-analytic caveat every report carries: the continuous theory
// needs spatial integrability beyond L^2, which a lumped finite-difference
// discretization cannot express.
inline std::string theory_deviation_note() {
    return "The time-periodic maximal-regularity framework assumes spatial integrability "
           "exponents q > n with 1/p + n/(2q) <= 3/4 and interpolation order theta in (0, 1/2); "
           "this discrete implementation measures everything in the lumped L^2 pairing (q = 2), "
           "so those integrability constraints are reported as context, not enforced.";
}

inline nlohmann::json version_json() {
    nlohmann::json v;
    v["library"] = kLibraryVersion;
    v["bdps_format"] = kBdpsFormatVersion;
#if defined(__GNUC__) && !defined(__clang__)
    v["compiler"] = "gcc " + std::to_string(__GNUC__) + "." + std::to_string(__GNUC_MINOR__) + "." +
                    std::to_string(__GNUC_PATCHLEVEL__);
#elif defined(__clang__)
    v["compiler"] = "clang " + std::to_string(__clang_major__) + "." +
                    std::to_string(__clang_minor__);
#else
    v["compiler"] = "unknown";
#endif
    v["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                 "." + std::to_string(EIGEN_MINOR_VERSION);
    return v;
}

inline nlohmann::json report_json(const SolverReport& rep) {
    nlohmann::json j;
    j["method"] = rep.method;
    j["outer_iterations"] = rep.outer_iterations;
    j["update_norms"] = rep.update_norms;
    j["contraction_ratios"] = rep.contraction_ratios;
    j["final_residual"] = rep.final_residual;
    j["mr_ratio"] = rep.mr_ratio;
    j["mr_enorm_ratio"] = rep.mr_enorm_ratio;
    j["periodicity_defect"] = rep.periodicity_defect;
    j["wall_clock_seconds"] = rep.wall_clock_seconds;
    j["v_enorm"] = rep.v_enorm;
    j["ball_radius"] = rep.ball_radius;
    j["within_ball"] = rep.within_ball;
    j["divergence"] = rep.diverged;
    if (!rep.note.empty()) j["note"] = rep.note;
    return j;
}

inline nlohmann::json equilibria_json(const IonicModelSpec& model, const EquilibriaResult& eq) {
    nlohmann::json j;
    j["model"] = variant_name(model.variant);
    j["nontrivial_omitted"] = eq.nontrivial_omitted;
    if (!eq.note.empty()) j["note"] = eq.note;
    const StabilityResult st = stability_condition(model);
    j["stability_condition_satisfied"] = st.satisfied;
    nlohmann::json details = nlohmann::json::object();
    for (const auto& [name, value] : st.details) details[name] = value;
    j["stability_details"] = std::move(details);
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : eq.points) {
        nlohmann::json e;
        e["index"] = p.index;
        e["u_star"] = p.u_star;
        e["w_star"] = p.has_w ? nlohmann::json(p.w_star) : nlohmann::json();
        e["admissible"] = p.admissible;
        const LinearizedSystem lin = linearize(model, p);
        e["alpha"] = lin.alpha;
        e["beta"] = lin.beta;
        e["gamma"] = lin.gamma;
        e["delta"] = lin.delta;
        pts.push_back(std::move(e));
    }
    j["equilibria"] = std::move(pts);
    return j;
}

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
    auto f = detail::open_out(path, false);
    f << j.dump(2) << "\n";
    if (!f) throw std::runtime_error("failed writing " + path);
}

}  // namespace bdps
