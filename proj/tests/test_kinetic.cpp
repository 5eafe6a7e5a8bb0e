#include <doctest.h>

#include <cmath>
#include <numbers>

#include "spray/error.hpp"
#include "spray/kinetic.hpp"

using namespace spray;

namespace {
std::shared_ptr<const TorusGrid> xgrid(int d, int n) {
    return std::make_shared<const TorusGrid>(make_torus_grid(d, n, 2 * std::numbers::pi));
}
std::shared_ptr<const VelocityGrid> vgrid(int d, int n, double r) {
    return std::make_shared<const VelocityGrid>(make_velocity_grid(d, n, r, default_shell_tol(r)));
}
}  // namespace

TEST_CASE("characteristics with constant u follow the closed form") {
    const double U = 0.4, gamma = 1.5, dt = 0.1;
    const VelocityFn u = [&](const double*, double* out) { out[0] = U; };
    double x = 1.0, xi = 2.0;
    integrate_characteristic(u, 1, dt, 16, &x, &xi, gamma);
    const double e = std::exp(gamma * dt);
    CHECK(xi == doctest::Approx(U + (2.0 - U) * e).epsilon(1e-9));
    CHECK(x == doctest::Approx(1.0 - U * dt - (2.0 - U) * (e - 1) / gamma).epsilon(1e-9));
}

TEST_CASE("foot points carry the compression amplitude") {
    const auto xg = xgrid(2, 8);
    const auto vg = vgrid(2, 7, 2.0);
    const std::vector<double> zero = {0.0, 0.0};
    const FootPointField fp = backward_foot_points(*xg, *vg, FrozenVelocity::uniform(xg, zero), 0.01, 4, 1.0);
    CHECK(fp.amplitude == doctest::Approx(std::exp(2 * 0.01)));
    CHECK(fp.xi0.size() == xg->size() * vg->size() * 2);
}

TEST_CASE("Picard substep on a two-node shell converges to 1 +- e^{-lambda dt}") {
    // 1D lattice {-1, 0, 1}: the shell {-1, 1} with the uniform kernel
    const auto xg = xgrid(1, 4);
    const auto vg = vgrid(1, 3, 1.0);
    const BreakupKernel k = build_uniform_shell_kernel(vg);
    KineticState f(xg, vg);
    std::size_t plus = 0, minus = 0;
    for (std::size_t i = 0; i < vg->size(); ++i) {
        if (vg->node(i)[0] > 0.5) plus = i;
        if (vg->node(i)[0] < -0.5) minus = i;
    }
    for (std::size_t j = 0; j < xg->size(); ++j) f.slice(j)[plus] = 2.0;
    const double lambda = 1.0, dt = 0.1;
    PicardOptions opt;
    opt.check_monotone = true;
    PicardReport rep;
    const KineticState g = breakup_substep_picard(f, k, lambda, dt, opt, &rep);
    const double e = std::exp(-lambda * dt);
    for (std::size_t j = 0; j < xg->size(); ++j) {
        CHECK(g.slice(j)[plus] == doctest::Approx(1 + e).epsilon(1e-9));
        CHECK(g.slice(j)[minus] == doctest::Approx(1 - e).epsilon(1e-9));
    }
    CHECK(rep.monotonicity_violations == 0);
    const KineticState h = breakup_substep_exact(f, k, lambda, dt);
    CHECK(h.slice(0)[plus] == doctest::Approx(1 + e).epsilon(1e-12));
}

TEST_CASE("Picard iterates increase and stay close to the exact integrator") {
    const auto xg = xgrid(2, 4);
    const auto vg = vgrid(2, 9, 2.0);
    const BreakupKernel k = build_self_similar_kernel(vg, UnitSphereProfile::von_mises(2.0));
    KineticState f(xg, vg);
    for (std::size_t n = 0; n < f.f.size(); ++n) f.f[n] = 1.0 + std::sin(0.37 * double(n));
    PicardOptions opt;
    opt.check_monotone = true;
    PicardReport rep;
    const double dt = 0.01;
    const KineticState a = breakup_substep_picard(f, k, 0.5, dt, opt, &rep);
    const KineticState b = breakup_substep_exact(f, k, 0.5, dt);
    CHECK(rep.monotonicity_violations == 0);
    CHECK(rep.iterations <= 20);
    double gap = 0.0;
    for (std::size_t n = 0; n < a.f.size(); ++n) gap = std::max(gap, std::abs(a.f[n] - b.f[n]));
    CHECK(gap <= 0.1 * dt * dt);  // splitting error of one substep
}

TEST_CASE("transport with u = 0 reproduces the 1D pushforward") {
    const auto xg = xgrid(1, 64);
    const auto vg = vgrid(1, 81, 3.0);
    auto f0 = [](double x, double xi) { return (1 + 0.5 * std::cos(x)) * std::exp(-xi * xi / 0.5); };
    KineticState f(xg, vg);
    const std::size_t nv = vg->size();
    for (std::size_t j = 0; j < xg->size(); ++j)
        for (std::size_t i = 0; i < nv; ++i) f.f[j * nv + i] = f0(xg->coord(j, 0), vg->node(i)[0]);
    const std::vector<double> zero = {0.0};
    const FrozenVelocity u = FrozenVelocity::uniform(xg, zero);
    const double dt = 0.01, T = 0.2;
    for (int n = 0; n < 20; ++n) f = transport_step(f, u, dt);
    const double e = std::exp(T);
    double err = 0.0, peak = 0.0;
    for (std::size_t j = 0; j < xg->size(); ++j)
        for (std::size_t i = 0; i < nv; ++i) {
            const double xi = vg->node(i)[0];
            const double exact = e * f0(xg->coord(j, 0) - xi * (e - 1), xi * e);
            err = std::max(err, std::abs(f.f[j * nv + i] - exact));
            peak = std::max(peak, exact);
        }
    CHECK(err <= 2e-3 * peak);
}

TEST_CASE("transport keeps f nonnegative and mass fixed") {
    const auto xg = xgrid(2, 8);
    const auto vg = vgrid(2, 9, 3.0);
    KineticState f(xg, vg);
    for (std::size_t n = 0; n < f.f.size(); ++n) f.f[n] = (n % 7 == 0) ? 1.0 : 0.0;  // rough data
    const std::vector<double> U = {0.3, -0.2};
    const FrozenVelocity u = FrozenVelocity::uniform(xg, U);
    const double m0 = global_moment(f, 0.0);
    TransportReport rep;
    const KineticState g = transport_step(f, u, 0.02, {}, &rep);
    CHECK(g.first_invalid() == -1);
    CHECK(global_moment(g, 0.0) == doctest::Approx(m0).epsilon(1e-13));
    CHECK(rep.mass_before == doctest::Approx(m0).epsilon(1e-13));
    TransportOptions raw;
    raw.conserve_mass = false;
    TransportReport rep2;
    transport_step(f, u, 0.02, raw, &rep2);
    CHECK(rep2.mass_after == doctest::Approx(rep.mass_after).epsilon(1e-13));
}

TEST_CASE("moments of a constant density") {
    const auto xg = xgrid(1, 4);
    const auto vg = vgrid(1, 5, 2.0);
    KineticState f(xg, vg);
    std::fill(f.f.begin(), f.f.end(), 1.0);
    // nodes -2..2 with unit weights: sum |xi|^2 = 10
    for (double m : moment(f, 2.0)) CHECK(m == doctest::Approx(10.0));
    CHECK(global_moment(f, 0.0) == doctest::Approx(5.0 * 2 * std::numbers::pi));
    const auto m1 = vector_moment(f);
    for (double m : m1[0]) CHECK(std::abs(m) <= 1e-14);
}
