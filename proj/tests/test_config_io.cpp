#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "spray/config.hpp"
#include "spray/error.hpp"
#include "spray/io.hpp"

using namespace spray;
namespace fs = std::filesystem;

namespace {
const char* kBase = "[grid]\nr_max = 3\nn_x = 8\nn_v = 9\n[init]\nparticles = bump\nfluid = taylor_green\n";

fs::path temp(const std::string& name) { return fs::temp_directory_path() / ("spray_unit_" + name); }
}  // namespace

TEST_CASE("defaults and canonical round trip") {
    const SimConfig c = parse_config(kBase);
    CHECK(c.dim == 2);
    CHECK(c.fp_tol == 1e-6);
    CHECK(c.effective_m_modes() == 2);
    const SimConfig back = parse_config(emit_config(c));
    CHECK(back == c);
    CHECK(config_hash(back) == config_hash(c));
    CHECK(config_hash(c).size() == 64);
    const SimConfig o = parse_config(kBase, {"physics.lambda=0.25", "dt=0.002"});
    CHECK(o.lambda == 0.25);
    CHECK(o.dt == 0.002);
    CHECK(config_hash(o) != config_hash(c));
}

TEST_CASE("sha256 of a known string") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("config errors carry line numbers") {
    auto line_of = [](const std::string& text) {
        try {
            parse_config(text);
        } catch (const ConfigError& e) {
            return e.line();
        }
        return -1;
    };
    CHECK(line_of(std::string(kBase) + "bogus = 1\n") == 8);
    CHECK(line_of("[grid]\nr_max = 3\nr_max = 4\n") == 3);
    CHECK(line_of("[nowhere]\n") == 1);
    CHECK(line_of("[grid]\nr_max = 3\n[physics]\nlambda = -1\n") == 4);
    CHECK(line_of("[grid]\nn_x = abc\nr_max = 1\n") == 2);
    CHECK_THROWS_AS(parse_config(kBase, {"nokey=1"}), ConfigError);
}

TEST_CASE("missing r_max reports the required value") {
    const std::string text =
        "[init]\nparticles = monokinetic\nparticle_velocity = 2, 0\nfluid = uniform\nfluid_velocity = 0, 0.5\n";
    try {
        parse_config(text);
        FAIL("no throw");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("= 2.5") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_config(text + "[grid]\nr_max = 2\n"), ConfigError);
    CHECK_NOTHROW(parse_config(text + "[grid]\nr_max = 2.5\n"));
}

TEST_CASE("snapshot round trip and corruption") {
    const SimConfig c = parse_config(kBase);
    const Setup su = make_setup(c);
    CoupledState s = make_initial_state(c, su);
    s.time = 0.125;
    const fs::path p = temp("snap.bin");
    write_snapshot(p.string(), s);
    const Snapshot r = read_snapshot(p.string());
    CHECK(r.dim == 2);
    CHECK(r.n_x == 8);
    CHECK(r.time == 0.125);
    CHECK(r.f == s.kinetic.f);
    CHECK(r.has_fluid);
    CHECK(r.u_hat == s.fluid.u_hat);

    // truncated
    const auto size = fs::file_size(p);
    fs::resize_file(p, size - 5);
    CHECK_THROWS_AS(read_snapshot(p.string()), SprayError);
    // bad magic
    write_snapshot(p.string(), s);
    {
        std::fstream io(p, std::ios::in | std::ios::out | std::ios::binary);
        io.write("XXXX", 4);
    }
    CHECK_THROWS_AS(read_snapshot(p.string()), SprayError);
    // trailing bytes
    write_snapshot(p.string(), s);
    {
        std::ofstream app(p, std::ios::app | std::ios::binary);
        app << "z";
    }
    CHECK_THROWS_AS(read_snapshot(p.string()), SprayError);
    fs::remove(p);
}

TEST_CASE("snapshot initial data reproduces the state") {
    const SimConfig c = parse_config(kBase);
    const Setup su = make_setup(c);
    const CoupledState s = make_initial_state(c, su);
    const fs::path p = temp("init.bin");
    write_snapshot(p.string(), s);
    SimConfig c2 = parse_config(std::string(kBase) + "snapshot = " + p.string() + "\n", {"particles=snapshot"});
    const CoupledState t = make_initial_state(c2, make_setup(c2));
    CHECK(t.kinetic.f == s.kinetic.f);
    c2.n_v = 11;
    CHECK_THROWS_AS(make_initial_state(c2, make_setup(c2)), ConfigError);
    fs::remove(p);
}

TEST_CASE("bump initial data carries the requested mass") {
    SimConfig c = parse_config(kBase, {"n_v=31", "particle_modulation=0"});
    const Setup su = make_setup(c);
    const CoupledState s = make_initial_state(c, su);
    const double L = c.length;
    // n0 L^2, up to the lattice quadrature of a C^3 profile
    CHECK(global_moment(s.kinetic, 0.0) == doctest::Approx(c.particle_n0 * L * L).epsilon(2e-3));
    const double a = 1.3;
    // (1 - r^2/a^2)^4 in 1D: 2a * 128/315
    CHECK(bump_integral(1, a) == doctest::Approx(2 * a * 128.0 / 315.0).epsilon(1e-12));
}
