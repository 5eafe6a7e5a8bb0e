#include <doctest.h>

#include <cmath>
#include <random>

#include "spray/error.hpp"
#include "spray/kernel.hpp"

using namespace spray;

namespace {
std::shared_ptr<const VelocityGrid> vgrid(int d, int n, double r) {
    return std::make_shared<const VelocityGrid>(make_velocity_grid(d, n, r, default_shell_tol(r)));
}
}  // namespace

TEST_CASE("uniform shell kernel is normalized with K = 1") {
    for (int d = 1; d <= 3; ++d) {
        const auto v = vgrid(d, d == 3 ? 7 : 11, 2.0);
        const KernelBounds b = kernel_bounds(build_uniform_shell_kernel(v));
        CHECK(b.normalization_error <= 1e-12);
        CHECK(b.K == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("self-similar kernels satisfy the normalization on the grid") {
    const auto v = vgrid(2, 15, 3.0);
    for (const auto& prof : {UnitSphereProfile::isotropic(), UnitSphereProfile::von_mises(2.0),
                             UnitSphereProfile::identity()}) {
        const KernelBounds b = kernel_bounds(build_self_similar_kernel(v, prof));
        CHECK(b.normalization_error <= 1e-12);
        CHECK(b.K > 0.0);
    }
}

TEST_CASE("kernel entries vanish across shells") {
    const auto v = vgrid(2, 9, 2.0);
    const BreakupKernel k = build_self_similar_kernel(v, UnitSphereProfile::von_mises(1.0));
    for (std::size_t i = 0; i < v->size(); ++i)
        for (std::size_t j = 0; j < v->size(); ++j)
            if (v->shell_of(i) != v->shell_of(j)) CHECK(k.entry(i, j) == 0.0);
}

TEST_CASE("von Mises entries on one shell keep the exp(kappa cos) ratio") {
    // the column rescaling is common to a source column, so ratios inside
    // a column follow the raw profile
    const double kappa = 2.0;
    const auto v = vgrid(2, 15, 3.0);
    const BreakupKernel k = build_self_similar_kernel(v, UnitSphereProfile::von_mises(kappa));
    int checked = 0;
    for (const SpeedShell& sh : v->shells()) {
        if (sh.members.size() < 3 || sh.radius == 0.0) continue;
        const std::size_t src = sh.members[0];
        for (std::size_t a = 1; a + 1 < sh.members.size(); ++a) {
            const std::size_t t1 = sh.members[a], t2 = sh.members[a + 1];
            auto cosang = [&](std::size_t t) {
                double s = 0.0;
                for (int c = 0; c < 2; ++c) s += v->node(t)[c] * v->node(src)[c];
                return s / (v->speed(t) * v->speed(src));
            };
            const double expect = std::exp(kappa * (cosang(t1) - cosang(t2)));
            CHECK(k.entry(t1, src) / k.entry(t2, src) == doctest::Approx(expect).epsilon(1e-12));
            ++checked;
        }
    }
    CHECK(checked > 10);
}

TEST_CASE("speed moments are neutral under the breakup operator") {
    const auto v = vgrid(2, 13, 3.0);
    const BreakupKernel k = build_self_similar_kernel(v, UnitSphereProfile::von_mises(3.0));
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    std::vector<double> f(v->size());
    for (double& x : f) x = ud(rng);
    const std::vector<double> p = {0, 1, 2, 3};
    for (double r : moment_neutrality_residuals(k, 0.7, f, p)) CHECK(r <= 1e-12);
}

TEST_CASE("identity profile gives a gain equal to f") {
    const auto v = vgrid(2, 9, 2.0);
    const BreakupKernel k = build_self_similar_kernel(v, UnitSphereProfile::identity());
    std::vector<double> f(v->size());
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = 1.0 + 0.1 * double(i);
    const auto g = apply_gain(k, f);
    for (std::size_t i = 0; i < f.size(); ++i) CHECK(g[i] == doctest::Approx(f[i]).epsilon(1e-13));
    const auto q = apply_breakup_operator(k, 2.0, f);
    for (double x : q) CHECK(std::abs(x) <= 1e-12);
}

TEST_CASE("kernel JSON round trip and corruption") {
    const auto v = vgrid(2, 9, 2.0);
    const BreakupKernel k = build_self_similar_kernel(v, UnitSphereProfile::von_mises(1.5));
    const std::string text = kernel_to_json(k);
    const BreakupKernel back = kernel_from_json(text, v);
    for (std::size_t i = 0; i < v->size(); ++i)
        for (std::size_t j = 0; j < v->size(); ++j) CHECK(back.entry(i, j) == k.entry(i, j));
    CHECK_THROWS_AS(kernel_from_json(text.substr(0, text.size() / 2), v), ContractError);
    const auto other = vgrid(2, 11, 2.0);
    CHECK_THROWS_AS(kernel_from_json(text, other), ContractError);
}

TEST_CASE("breakup operator rejects negative lambda") {
    const auto v = vgrid(1, 5, 2.0);
    const BreakupKernel k = build_uniform_shell_kernel(v);
    std::vector<double> f(v->size(), 1.0);
    CHECK_THROWS_AS(apply_breakup_operator(k, -1.0, f), ContractError);
}
