#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "spray/config.hpp"
#include "spray/diagnostics.hpp"
#include "spray/error.hpp"
#include "spray/io.hpp"

using namespace spray;

TEST_CASE("cell power integrals match closed forms") {
    const double h = 0.4;
    const double o3[3] = {0, 0, 0};
    // int_{[-h/2,h/2]^3} |xi|^2 = 3 h^2 (h^3/12) ... = h^5/4
    CHECK(cell_power_integral(o3, 3, h, 2.0) == doctest::Approx(std::pow(h, 5) / 4).epsilon(1e-12));
    const double c2[2] = {1.2, -0.8};
    CHECK(cell_power_integral(c2, 2, h, 2.0) ==
          doctest::Approx(h * h * (1.2 * 1.2 + 0.8 * 0.8) + std::pow(h, 4) / 6).epsilon(1e-12));
    const double o1[1] = {0};
    CHECK(cell_power_integral(o1, 1, h, 1.0) == doctest::Approx(h * h / 4).epsilon(1e-10));
    CHECK(unit_sphere_area(2) == doctest::Approx(2 * std::numbers::pi));
    CHECK(unit_sphere_area(3) == doctest::Approx(4 * std::numbers::pi));
}

TEST_CASE("interpolation inequality on simple states") {
    auto xg = std::make_shared<const TorusGrid>(make_torus_grid(3, 4, 1.0));
    auto vg = std::make_shared<const VelocityGrid>(make_velocity_grid(3, 7, 1.5, 1e-9));
    KineticState f(xg, vg);
    for (double m : interpolation_check(f, 0.0, 2.0)) CHECK(m == 0.0);
    for (std::size_t j = 0; j < xg->size(); ++j)
        for (std::size_t i = 0; i < vg->size(); ++i)
            if (vg->speed(i) <= 1.0) f.slice(j)[i] = 1.0;
    for (double m : interpolation_check(f, 0.0, 2.0)) CHECK(m > 0.0);
    for (double m : interpolation_check(f, 1.0, 3.0)) CHECK(m > 0.0);
}

namespace {
SimConfig traj_cfg() {
    SimConfig c;
    c.n_x = 8;
    c.n_v = 9;
    c.r_max = 3.0;
    c.lambda = 0.5;
    c.kernel = KernelKind::von_mises;
    c.dt = 5e-3;
    c.t_final = 0.02;
    c.fluid = FluidInit::taylor_green;
    c.particles = ParticleInit::bump;
    return c;
}

Trajectory make_traj(const SimConfig& c, const Setup& su) {
    Trajectory t;
    t.lambda = c.lambda;
    t.c = c.c;
    t.gamma = c.gamma;
    CoupledState s = make_initial_state(c, su);
    t.frames.push_back(s);
    const StepParams p = make_run_params(c).step;
    for (int n = 0; n < 4; ++n) {
        s = coupled_step(s, *su.kernel, p);
        t.frames.push_back(s);
    }
    return t;
}
}  // namespace

TEST_CASE("weak residuals: zero test function, linearity and rejection") {
    const SimConfig c = traj_cfg();
    const Setup su = make_setup(c);
    const Trajectory tr = make_traj(c, su);

    FluidTestFn zero;
    zero.k = {1, 0, 0};
    CHECK(weak_residual_fluid(tr, zero).residual_fluid == 0.0);

    FluidTestFn phi;
    phi.k = {1, 1, 0};
    phi.a = {1.0, -1.0, 0.0};
    phi.omega = 3.0;
    FluidTestFn twice = phi;
    twice.a = {2.0, -2.0, 0.0};
    const double r1 = weak_residual_fluid(tr, phi).residual_fluid;
    CHECK(weak_residual_fluid(tr, twice).residual_fluid == doctest::Approx(2 * r1).epsilon(1e-9));

    FluidTestFn bad = phi;
    bad.a = {1.0, 0.0, 0.0};
    CHECK_THROWS_AS(weak_residual_fluid(tr, bad), ContractError);

    KineticTestFn wide;
    wide.shape = KineticTestFn::Shape::bump;
    wide.radius = 2.0;
    wide.center = {2.0, 0.0, 0.0};
    CHECK_THROWS_AS(weak_residual_kinetic(tr, wide, su.kernel.get()), ContractError);
    KineticTestFn mass;
    CHECK_THROWS_AS(weak_residual_kinetic(tr, mass, nullptr), ContractError);
    // mass pairing: transport and breakup both conserve it
    CHECK(weak_residual_kinetic(tr, mass, su.kernel.get()).residual_kinetic <=
          1e-12 * weak_residual_kinetic(tr, mass, su.kernel.get()).scale);
}

TEST_CASE("breakup preserves the weak pairing of radial test functions") {
    auto vg = std::make_shared<const VelocityGrid>(make_velocity_grid(2, 11, 2.0, 2e-9));
    const BreakupKernel k = build_self_similar_kernel(vg, UnitSphereProfile::von_mises(2.0));
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> ud;
    std::vector<double> f(vg->size());
    for (double& v : f) v = ud(rng);
    for (const KineticTestFn& phi : kinetic_test_functions(2, 2.0, 7, 2)) {
        if (phi.shape == KineticTestFn::Shape::bump) continue;
        CHECK(breakup_weak_defect(k, f, phi) <= 1e-9);
    }
}

TEST_CASE("test function families are deterministic") {
    const auto a = fluid_test_functions(3, 11), b = fluid_test_functions(3, 11);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].k == b[i].k);
        CHECK(a[i].a == b[i].a);
        double dot = 0.0;
        for (int d = 0; d < 3; ++d) dot += a[i].a[d] * a[i].k[d];
        CHECK(std::abs(dot) <= 1e-12);
    }
    CHECK(a[0].k == std::array<int, 3>{1, 1, 1});
    const auto ka = kinetic_test_functions(2, 3.0, 5, 3);
    const auto kb = kinetic_test_functions(2, 3.0, 5, 3);
    REQUIRE(ka.size() == 5);
    for (std::size_t i = 0; i < ka.size(); ++i) {
        CHECK(ka[i].id == kb[i].id);
        CHECK(ka[i].center == kb[i].center);
    }
    for (std::size_t i = 1; i < ka.size(); ++i) CHECK(ka[i].support_radius(2) < 3.0);
}

TEST_CASE("bound suite on an empty spray and on a violation") {
    BoundInputs in;
    in.rows.resize(3);
    for (int i = 0; i < 3; ++i) in.rows[i].t = 0.1 * i;
    in.t_final = 0.2;
    in.lambda = 0.5;
    BoundReport r = bound_suite(in);
    CHECK(r.pass);
    for (const EnvelopeCheck& c : r.checks) CHECK_FALSE(c.near);
    in.rows[2].M0 = 1.0;  // mass from nowhere
    r = bound_suite(in);
    CHECK_FALSE(r.pass);
}
