#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "bdps/config.hpp"
#include "bdps/io.hpp"

using namespace bdps;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("bdps_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

PeriodicTrajectory sample_trajectory(int M = 8, int n = 5, int ncomp = 2) {
    auto g = make_grid(1, {n}, {1.0});
    PeriodicTrajectory traj(g, 2.0, M, ncomp);
    DeterministicRng rng(71);
    for (int j = 0; j < M; ++j) traj.samples[j] = random_state(rng, g, ncomp);
    return traj;
}

}  // namespace

TEST_CASE("numeric formatting survives a text round trip") {
    for (double v : {1.0 / 3.0, 0.1, -2.5e-300, 3.14159265358979323846, 7.2552e-6, 0.0, -0.0,
                     1.7976931348623157e308}) {
        const std::string s = format_g17(v);
        REQUIRE(std::strtod(s.c_str(), nullptr) == v);
        REQUIRE(s.find(',') == std::string::npos);  // decimal separator is always '.'
    }
}

TEST_CASE("field quoting follows the quoted-field rules") {
    REQUIRE(csv_quote("plain") == "plain");
    REQUIRE(csv_quote("with,comma") == "\"with,comma\"");
    REQUIRE(csv_quote("say \"hi\"") == "\"say \"\"hi\"\"\"");
    REQUIRE(csv_quote("line\nbreak") == "\"line\nbreak\"");
}

TEST_CASE("trajectory CSV layout") {
    TempDir tmp;
    auto traj = sample_trajectory(8, 5, 2);
    const std::string path = tmp.file("traj.csv");
    write_trajectory_csv(path, traj);
    const std::string text = slurp(path);

    REQUIRE(text.rfind("t,node_index,v,z\r\n", 0) == 0);
    // every record terminates with CRLF and there are M*n data rows
    std::size_t rows = 0;
    for (std::size_t i = 0; i + 1 < text.size(); ++i)
        if (text[i] == '\r' && text[i + 1] == '\n') ++rows;
    REQUIRE(rows == 1 + 8 * 5);
    REQUIRE(text.find(",,") == std::string::npos);

    // first data row carries t = 0, node 0, and 17-digit values
    std::istringstream lines(text);
    std::string header, first;
    std::getline(lines, header);
    std::getline(lines, first);
    double t, v, z;
    int node;
    REQUIRE(std::sscanf(first.c_str(), "%lf,%d,%lf,%lf", &t, &node, &v, &z) == 4);
    REQUIRE(t == 0.0);
    REQUIRE(node == 0);
    REQUIRE(v == traj.samples[0].comps[0].values[0]);
    REQUIRE(z == traj.samples[0].comps[1].values[0]);

    // single-component trajectories fill the recovery column with zeros
    auto traj1 = sample_trajectory(8, 5, 1);
    write_trajectory_csv(path, traj1);
    std::istringstream lines1(slurp(path));
    std::getline(lines1, header);
    std::getline(lines1, first);
    REQUIRE(std::sscanf(first.c_str(), "%lf,%d,%lf,%lf", &t, &node, &v, &z) == 4);
    REQUIRE(z == 0.0);
}

TEST_CASE("binary trajectory round trip is exact") {
    TempDir tmp;
    for (int ncomp : {1, 2}) {
        auto traj = sample_trajectory(16, 7, ncomp);
        const std::string path = tmp.file("traj.bdps");
        write_trajectory_bdps(path, traj);

        const std::string raw = slurp(path);
        REQUIRE(raw.size() >= 4);
        REQUIRE(raw.substr(0, 4) == "BDPS");

        PeriodicTrajectory back = read_trajectory_bdps(path);
        REQUIRE(back.M() == traj.M());
        REQUIRE(back.components() == ncomp);
        REQUIRE(back.period == traj.period);
        REQUIRE(back.grid->nodes() == traj.grid->nodes());
        REQUIRE(back.grid->lengths[0] == traj.grid->lengths[0]);
        for (int j = 0; j < traj.M(); ++j)
            for (int c = 0; c < ncomp; ++c)
                REQUIRE(back.samples[j].comps[c].values == traj.samples[j].comps[c].values);
    }

    // 2D grids carry both extents
    auto g2 = make_grid(2, {5, 7}, {1.0, 2.0});
    PeriodicTrajectory t2(g2, 1.0, 8, 1);
    DeterministicRng rng(72);
    for (int j = 0; j < 8; ++j) t2.samples[j] = random_state(rng, g2, 1);
    const std::string path2 = tmp.file("traj2d.bdps");
    write_trajectory_bdps(path2, t2);
    PeriodicTrajectory b2 = read_trajectory_bdps(path2);
    REQUIRE(b2.grid->dimension == 2);
    REQUIRE(b2.grid->extents[0] == 5);
    REQUIRE(b2.grid->extents[1] == 7);
    REQUIRE(b2.grid->lengths[1] == 2.0);
    REQUIRE(b2.samples[3].comps[0].values == t2.samples[3].comps[0].values);

    REQUIRE_THROWS_AS(read_trajectory_bdps(tmp.file("missing.bdps")), std::runtime_error);
}

TEST_CASE("sector sweep CSV format") {
    TempDir tmp;
    std::vector<SectorRow> rows(2);
    rows[0] = {1.5, -2.0, 2.0, 0.75, true};
    rows[1] = {0.0, 3.0, 4.0, 1.25, false};
    const std::string path = tmp.file("sector.csv");
    write_sector_csv(path, rows);
    const std::string text = slurp(path);
    REQUIRE(text.rfind("re_lambda,im_lambda,q,ratio,converged\r\n", 0) == 0);
    REQUIRE(text.find("true") != std::string::npos);
    REQUIRE(text.find("false") != std::string::npos);
    REQUIRE(text.find("1.5,-2,2,0.75,true") != std::string::npos);
}

TEST_CASE("sparse matrix export reconstructs the operator") {
    TempDir tmp;
    auto g = make_grid(1, {5}, {1.0});
    auto op = assemble_elliptic(g, ConductivityField::constant(g, 1.3));
    const std::string path = tmp.file("coo.csv");
    write_coo_csv(path, op.K);

    std::istringstream in(slurp(path));
    std::string line;
    std::getline(in, line);
    REQUIRE(line.rfind("row,col,value", 0) == 0);
    double dense[5][5] = {};
    int count = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        int r, c;
        double v;
        REQUIRE(std::sscanf(line.c_str(), "%d,%d,%lf", &r, &c, &v) == 3);
        dense[r][c] += v;
        ++count;
    }
    REQUIRE(count == static_cast<int>(op.K.val.size()));

    std::vector<double> x{0.3, -1.0, 2.0, 0.7, -0.4}, y_ref(5), y(5, 0.0);
    op.K.apply(x.data(), y_ref.data());
    for (int r = 0; r < 5; ++r)
        for (int c = 0; c < 5; ++c) y[r] += dense[r][c] * x[c];
    for (int r = 0; r < 5; ++r) REQUIRE(y[r] == Catch::Approx(y_ref[r]).margin(1e-14));
}

TEST_CASE("report and version documents") {
    SolverReport rep;
    rep.method = "fourier_collocation";
    rep.outer_iterations = 3;
    rep.update_norms = {1.0, 0.1};
    rep.contraction_ratios = {0.1};
    rep.final_residual = 1e-12;
    auto j = report_json(rep);
    REQUIRE(j["method"] == "fourier_collocation");
    REQUIRE(j["outer_iterations"] == 3);
    REQUIRE(j["divergence"] == false);
    REQUIRE(j["update_norms"].size() == 2);
    REQUIRE(j.contains("periodicity_defect"));
    REQUIRE(j.contains("wall_clock_seconds"));

    auto v = version_json();
    REQUIRE(v.contains("library"));
    REQUIRE(v["library"].get<std::string>() == kLibraryVersion);

    REQUIRE_FALSE(theory_deviation_note().empty());
}

TEST_CASE("equilibria document shape") {
    auto model = fhn_model(0.1, 1.0, 0.05);
    auto j = equilibria_json(model, equilibria(model));
    REQUIRE(j["model"] == "FHN");
    REQUIRE(j["equilibria"].size() == 3);
    REQUIRE(j.contains("stability_condition_satisfied"));
    REQUIRE(j["equilibria"][0].contains("admissible"));
    REQUIRE(j["equilibria"][0].contains("u_star"));
    REQUIRE(j["equilibria"][0].contains("alpha"));

    auto jac = equilibria_json(ac_model(), equilibria(ac_model()));
    REQUIRE(jac["equilibria"][0]["w_star"].is_null());
}

TEST_CASE("configuration defaults and strict parsing") {
    SECTION("empty document yields the documented defaults") {
        auto cfg = ExperimentConfig::from_string("{}");
        REQUIRE(cfg.grid.dimension == 1);
        REQUIRE(cfg.grid.extents == std::vector<int>{33});
        REQUIRE(cfg.diffusion.kind == "bidomain");
        REQUIRE(cfg.model.variant == IonicVariant::FHN);
        REQUIRE(cfg.equilibrium_index == 1);
        REQUIRE(cfg.forcing.mode == "direct");
        REQUIRE(cfg.forcing.amplitude == 1e-3);
        REQUIRE(cfg.solver.M == 64);
        REQUIRE(cfg.solver.method == PeriodicMethod::fourier_collocation);
        REQUIRE(cfg.seed == 1);
        REQUIRE(cfg.threads == 1);
    }
    SECTION("2D default extents") {
        auto cfg = ExperimentConfig::from_string(R"({"grid": {"dimension": 2}})");
        REQUIRE(cfg.grid.extents == std::vector<int>{17, 17});
    }
    SECTION("unknown keys are rejected with their full path") {
        REQUIRE_THROWS_WITH(ExperimentConfig::from_string(R"({"bogus": 1})"),
                            Catch::Matchers::ContainsSubstring("bogus"));
        try {
            ExperimentConfig::from_string(R"({"solver": {"M": 64, "bogus": 1}})");
            FAIL("expected a configuration error");
        } catch (const ConfigError& e) {
            REQUIRE_THAT(e.what(), Catch::Matchers::ContainsSubstring("solver.bogus"));
        }
    }
    SECTION("type mismatches name the offending field") {
        try {
            ExperimentConfig::from_string(R"({"grid": {"dimension": "wide"}})");
            FAIL("expected a configuration error");
        } catch (const ConfigError& e) {
            REQUIRE_THAT(e.what(), Catch::Matchers::ContainsSubstring("grid.dimension"));
        }
    }
    SECTION("model parameters are validated in context") {
        REQUIRE_THROWS_WITH(ExperimentConfig::from_string(R"({"model": {"a": 1.5}})"),
                            Catch::Matchers::ContainsSubstring("model"));
    }
    SECTION("solver sample counts must be a power of two") {
        REQUIRE_THROWS_AS(ExperimentConfig::from_string(R"({"solver": {"M": 12}})"), ConfigError);
    }
    SECTION("malformed documents report the parse position") {
        try {
            ExperimentConfig::from_string("{ \"grid\": ");
            FAIL("expected a configuration error");
        } catch (const ConfigError& e) {
            REQUIRE_THAT(e.what(), Catch::Matchers::ContainsSubstring("line"));
        }
    }
    SECTION("seed must be a non-negative integer") {
        REQUIRE_THROWS_AS(ExperimentConfig::from_string(R"({"seed": -3})"), ConfigError);
    }
    SECTION("variant tokens are case-insensitive") {
        auto cfg = ExperimentConfig::from_string(R"({"model": {"variant": "RM"}})");
        REQUIRE(cfg.model.variant == IonicVariant::RM);
    }
}

TEST_CASE("configuration echo re-parses to the same document") {
    const std::string text = R"({
        "grid": {"dimension": 2, "extents": [9, 11], "lengths": [1.0, 2.0]},
        "diffusion": {"kind": "bidomain",
                      "sigma_i": {"profile": "graded", "base": 1.0, "grade": 0.5},
                      "sigma_e": {"profile": "constant", "s11": 2.0}},
        "model": {"variant": "ac"},
        "equilibrium_index": 3,
        "forcing": {"mode": "direct", "amplitude": 0.002, "modes": 2, "period": 1.5,
                     "profile": "cos_xy", "phase": 0.3},
        "solver": {"method": "initial_value_fixed_point", "M": 16, "ivp_substeps": 64},
        "seed": 7,
        "threads": 2
    })";
    auto cfg = ExperimentConfig::from_string(text);
    auto echo = cfg.to_json();
    auto cfg2 = ExperimentConfig::from_json(echo);
    REQUIRE(cfg2.to_json().dump(2) == echo.dump(2));
    REQUIRE(cfg2.grid.extents == std::vector<int>({9, 11}));
    REQUIRE(cfg2.model.variant == IonicVariant::AC);
    REQUIRE(cfg2.solver.method == PeriodicMethod::initial_value_fixed_point);
    REQUIRE(cfg2.forcing.phase == 0.3);
    REQUIRE(cfg2.threads == 2);
    REQUIRE(cfg2.solver.threads == 2);
}

TEST_CASE("deterministic random stream") {
    DeterministicRng a(42), b(42), c(43);
    bool diverged_from_other_seed = false;
    for (int i = 0; i < 1000; ++i) {
        const double va = a.uniform(), vb = b.uniform(), vc = c.uniform();
        REQUIRE(va == vb);
        REQUIRE(va >= 0.0);
        REQUIRE(va < 1.0);
        if (va != vc) diverged_from_other_seed = true;
    }
    REQUIRE(diverged_from_other_seed);
}

TEST_CASE("conductivity builders") {
    auto g1 = make_grid(1, {9}, {2.0});
    ConductivitySpec graded;
    graded.profile = "graded";
    graded.base = 1.5;
    graded.grade = 0.5;
    auto cf = build_conductivity(graded, g1);
    REQUIRE(cf.s11.front() == Catch::Approx(1.5));
    REQUIRE(cf.s11.back() == Catch::Approx(1.5 * 1.5));  // base * (1 + grade) at x = Lx

    auto g2 = make_grid(2, {5, 5}, {1.0, 1.0});
    ConductivitySpec rot;
    rot.profile = "rotated_anisotropic";
    rot.along = 1.0;
    rot.across = 0.2;
    rot.angle = 0.5;
    auto cr = build_conductivity(rot, g2);
    // interior tensor has the rotated mixed entry, trace is invariant
    const int mid = g2->index(2, 2);
    REQUIRE(cr.s11[mid] + cr.s22[mid] == Catch::Approx(1.2).epsilon(1e-14));
    REQUIRE(cr.s12[mid] == Catch::Approx(std::cos(0.5) * std::sin(0.5) * 0.8).epsilon(1e-14));

    ConductivitySpec bad;
    bad.profile = "nope";
    REQUIRE_THROWS_AS(build_conductivity(bad, g1), ConfigError);
    REQUIRE_THROWS_AS(build_conductivity(rot, g1), ConfigError);  // needs 2D
}

TEST_CASE("forcing profiles and waveform") {
    auto g = make_grid(1, {33}, {1.0});

    SECTION("profiles: means and known shapes") {
        auto u = forcing_profile("uniform", g, false);
        for (double v : u.values) REQUIRE(v == 1.0);
        auto cx = forcing_profile("cos_x", g, false);
        REQUIRE(cx.values[0] == Catch::Approx(1.0));
        REQUIRE(std::abs(integrate(cx)) <= 1e-14);
        auto gz = forcing_profile("gauss", g, true);
        REQUIRE(std::abs(integrate(gz)) <= 1e-14);
        REQUIRE_THROWS_AS(forcing_profile("nope", g, false), ConfigError);
        REQUIRE_THROWS_AS(forcing_profile("cos_y", g, false), ConfigError);  // 1D grid
    }

    SECTION("waveform is the documented cosine series") {
        const double pi = 3.14159265358979323846;
        ForcingSpec spec;
        spec.modes = 2;
        spec.period = 2.0;
        spec.phase = 0.3;
        auto s = forcing_waveform(spec, 16);
        for (int j = 0; j < 16; ++j) {
            const double t = 2.0 * j / 16.0;
            const double expect = std::cos(2.0 * pi * t / 2.0 + 0.3) +
                                  0.25 * std::cos(4.0 * pi * t / 2.0 + 0.6);
            REQUIRE(s[j] == Catch::Approx(expect).margin(1e-13));
        }
    }

    SECTION("direct forcing scales amplitude times waveform times profile") {
        ExperimentConfig cfg;
        cfg.forcing.amplitude = 0.5;
        cfg.forcing.modes = 1;
        cfg.solver.M = 8;
        auto I = build_forcing(cfg, g, nullptr);
        REQUIRE(I.M() == 8);
        REQUIRE(I.components() == 1);
        auto prof = forcing_profile("cos_x", g, false);
        for (int i = 0; i < g->nodes(); ++i)
            REQUIRE(I.samples[0].comps[0].values[i] ==
                    Catch::Approx(0.5 * prof.values[i]).margin(1e-15));
    }

    SECTION("intra/extracellular forcing factors through the conservation check") {
        ExperimentConfig cfg;
        cfg.forcing.mode = "intra_extra";
        cfg.forcing.amplitude = 1.0;
        cfg.solver.M = 8;
        auto bop = make_bidomain(assemble_elliptic(g, ConductivityField::constant(g, 1.0)),
                                 assemble_elliptic(g, ConductivityField::constant(g, 2.0)));
        REQUIRE_THROWS_AS(build_forcing(cfg, g, nullptr), ConfigError);
        auto I = build_forcing(cfg, g, &bop);
        // sample-to-sample the spatial shape is fixed: I_j = s_j * I_mod
        auto pi_f = forcing_profile(cfg.forcing.profile_i, g, true);
        auto pe_f = forcing_profile(cfg.forcing.profile_e, g, true);
        auto imod = modified_source(bop, pi_f, pe_f);
        auto s = forcing_waveform(cfg.forcing, 8);
        for (int j = 0; j < 8; ++j)
            for (int i = 0; i < g->nodes(); ++i)
                REQUIRE(I.samples[j].comps[0].values[i] ==
                        Catch::Approx(s[j] * imod.values[i]).margin(1e-12));
    }
}
