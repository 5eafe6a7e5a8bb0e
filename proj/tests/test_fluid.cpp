#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "spray/error.hpp"
#include "spray/fluid.hpp"

using namespace spray;

namespace {
std::shared_ptr<SpectralContext> context(int d, int n) {
    auto g = std::make_shared<const TorusGrid>(make_torus_grid(d, n, 2 * std::numbers::pi));
    return std::make_shared<SpectralContext>(g, SpectralContext::max_dealiased_modes(n));
}

double l2_error(const FluidState& a, const FluidState& b) {
    const auto pa = to_physical(a), pb = to_physical(b);
    double s = 0.0;
    for (std::size_t c = 0; c < pa.size(); ++c)
        for (std::size_t j = 0; j < pa[c].size(); ++j) s += (pa[c][j] - pb[c][j]) * (pa[c][j] - pb[c][j]);
    return std::sqrt(s * a.ctx->grid().cell_volume());
}
}  // namespace

TEST_CASE("Taylor-Green decays as the closed form") {
    const auto ctx = context(2, 32);
    const double mu = 0.1, dt = 1e-3;
    FluidState u = taylor_green_reference(ctx, 0.0, mu).state;
    DragForce zero;
    zero.comps.assign(2, std::vector<double>(ctx->size(), 0.0));
    for (int n = 0; n < 100; ++n) u = ns_step(u, zero, dt);
    const TaylorGreen ref = taylor_green_reference(ctx, 0.1, mu);
    CHECK(l2_error(u, ref.state) <= 1e-6);
    const PressureField p = recover_pressure(u, zero);
    double perr = 0.0;
    for (std::size_t j = 0; j < ctx->size(); ++j) perr = std::max(perr, std::abs(p.values[j] - ref.pressure.values[j]));
    CHECK(perr <= 1e-6);
}

TEST_CASE("Taylor-Green closed form at a sample point") {
    const auto ctx = context(2, 16);
    const TaylorGreen tg = taylor_green_reference(ctx, 0.5, 0.1);
    const auto u = to_physical(tg.state);
    const std::size_t j = ctx->grid().flatten({3, 5, 0});
    const double x = ctx->grid().coord(j, 0), y = ctx->grid().coord(j, 1);
    const double decay = std::exp(-2 * 0.1 * 0.5);
    CHECK(u[0][j] == doctest::Approx(std::sin(x) * std::cos(y) * decay).epsilon(1e-12));
    CHECK(u[1][j] == doctest::Approx(-std::cos(x) * std::sin(y) * decay).epsilon(1e-12));
    CHECK(tg.pressure.values[j] ==
          doctest::Approx((std::cos(2 * x) + std::cos(2 * y)) / 4 * std::exp(-4 * 0.1 * 0.5)).epsilon(1e-12));
}

TEST_CASE("Leray projection removes divergence and gradients") {
    const auto ctx = context(2, 16);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd;
    std::vector<std::vector<double>> comps(2, std::vector<double>(ctx->size()));
    for (auto& c : comps)
        for (double& x : c) x = nd(rng);
    const FluidState u = fluid_from_physical(ctx, 0.1, comps);
    CHECK(divergence_residual(u) <= 1e-12);
    // a pure gradient projects to its mean (zero)
    std::vector<std::vector<double>> grad(2, std::vector<double>(ctx->size()));
    for (std::size_t j = 0; j < ctx->size(); ++j) {
        const double x = ctx->grid().coord(j, 0), y = ctx->grid().coord(j, 1);
        grad[0][j] = std::cos(x) * std::sin(2 * y);
        grad[1][j] = 2 * std::sin(x) * std::cos(2 * y);
    }
    const FluidState g = fluid_from_physical(ctx, 0.1, grad);
    CHECK(fluid_energy(g) <= 1e-24);
}

TEST_CASE("pressure of a gradient force is its potential") {
    const auto ctx = context(2, 16);
    FluidState u(ctx, 0.1);
    DragForce F;
    F.comps.assign(2, std::vector<double>(ctx->size()));
    std::vector<double> phi(ctx->size());
    for (std::size_t j = 0; j < ctx->size(); ++j) {
        const double x = ctx->grid().coord(j, 0), y = ctx->grid().coord(j, 1);
        phi[j] = std::sin(x) * std::cos(y);
        F.comps[0][j] = std::cos(x) * std::cos(y);
        F.comps[1][j] = -std::sin(x) * std::sin(y);
    }
    const PressureField p = recover_pressure(u, F);
    for (std::size_t j = 0; j < ctx->size(); ++j) CHECK(p.values[j] == doctest::Approx(phi[j]).epsilon(1e-12));
}

TEST_CASE("drag force is -c (u m0 - m1)") {
    auto g = std::make_shared<const TorusGrid>(make_torus_grid(1, 4, 2 * std::numbers::pi));
    auto vg = std::make_shared<const VelocityGrid>(make_velocity_grid(1, 5, 2.0, 1e-9));
    KineticState f(g, vg);
    for (std::size_t j = 0; j < 4; ++j) f.slice(j)[4] = 1.0;  // one node at xi = 2, weight 1
    const double xi = vg->node(4)[0];
    std::vector<std::vector<double>> u(1, std::vector<double>(4, 0.5));
    const DragForce F = drag_force(f, u, 3.0);
    for (double v : F.comps[0]) CHECK(v == doctest::Approx(-3.0 * (0.5 - xi)));
}

TEST_CASE("viscous decay lowers the energy") {
    const auto ctx = context(2, 16);
    std::mt19937_64 rng(9);
    std::normal_distribution<double> nd;
    std::vector<std::vector<double>> comps(2, std::vector<double>(ctx->size()));
    for (auto& c : comps)
        for (double& x : c) x = nd(rng);
    FluidState u = fluid_from_physical(ctx, 0.05, comps);
    DragForce zero;
    zero.comps.assign(2, std::vector<double>(ctx->size(), 0.0));
    double e = fluid_energy(u);
    for (int n = 0; n < 10; ++n) {
        u = ns_step(u, zero, 1e-3);
        const double e2 = fluid_energy(u);
        CHECK(e2 < e);
        e = e2;
    }
}

TEST_CASE("spectral context limits") {
    auto g = std::make_shared<const TorusGrid>(make_torus_grid(2, 16, 1.0));
    CHECK_THROWS_AS(SpectralContext(g, 8), ContractError);
    CHECK(SpectralContext::max_dealiased_modes(32) == 10);
}
