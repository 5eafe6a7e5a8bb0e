#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "spray/error.hpp"
#include "spray/grid.hpp"

using namespace spray;

TEST_CASE("torus grid spacing and coordinates") {
    const TorusGrid g = make_torus_grid(1, 4, 2 * std::numbers::pi);
    CHECK(g.size() == 4);
    CHECK(g.spacing() == doctest::Approx(std::numbers::pi / 2));
    for (std::size_t j = 0; j < 4; ++j) CHECK(g.coord(j, 0) == doctest::Approx(j * std::numbers::pi / 2));
    const TorusGrid g2 = make_torus_grid(2, 8, 2 * std::numbers::pi);
    CHECK(g2.size() == 64);
    CHECK(g2.spacing() == doctest::Approx(std::numbers::pi / 4));
    CHECK(g2.wrap(-1) == 7);
    CHECK(g2.wrap(8) == 0);
    const auto idx = g2.unflatten(g2.flatten({3, 5, 0}));
    CHECK(idx[0] == 3);
    CHECK(idx[1] == 5);
}

TEST_CASE("torus grid rejects bad sizes") {
    CHECK_THROWS_AS(make_torus_grid(3, 5, 1.0), ContractError);
    CHECK_THROWS_AS(make_torus_grid(2, 2, 1.0), ContractError);
    CHECK_THROWS_AS(make_torus_grid(2, 8, 0.0), ContractError);
    CHECK_THROWS_AS(make_torus_grid(4, 8, 1.0), ContractError);
}

TEST_CASE("1D velocity lattice and shells") {
    const VelocityGrid v = make_velocity_grid(1, 5, 2.0, 1e-9);
    REQUIRE(v.size() == 5);
    std::set<double> nodes;
    for (std::size_t i = 0; i < v.size(); ++i) nodes.insert(v.node(i)[0]);
    CHECK(nodes == std::set<double>{-2, -1, 0, 1, 2});
    CHECK(v.shells().size() == 3);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(v.weight(i) == doctest::Approx(1.0));
}

TEST_CASE("2D n_v = 3 keeps the origin and the four axis nodes") {
    const VelocityGrid v = make_velocity_grid(2, 3, 1.0, 1e-9);
    CHECK(v.size() == 5);
    REQUIRE(v.shells().size() == 2);
    CHECK(v.shells()[0].members.size() == 1);
    CHECK(v.shells()[1].members.size() == 4);
    CHECK(v.shells()[1].radius == doctest::Approx(1.0));
}

TEST_CASE("3D shell count matches brute-force enumeration of lattice radii") {
    const VelocityGrid v = make_velocity_grid(3, 7, 3.0, 1e-9);
    std::set<int> radii;
    std::size_t inside = 0;
    for (int i = -3; i <= 3; ++i)
        for (int j = -3; j <= 3; ++j)
            for (int k = -3; k <= 3; ++k)
                if (i * i + j * j + k * k <= 9) {
                    radii.insert(i * i + j * j + k * k);
                    ++inside;
                }
    CHECK(v.shells().size() == radii.size());
    CHECK(radii.size() == 9);  // 7 is not a sum of three squares
    CHECK(v.size() == inside);
}

TEST_CASE("shells partition the nodes and members share a speed") {
    const VelocityGrid v = make_velocity_grid(2, 11, 2.5, 1e-9);
    std::vector<int> seen(v.size(), 0);
    for (std::size_t s = 0; s < v.shells().size(); ++s) {
        const SpeedShell& sh = v.shells()[s];
        double w = 0.0;
        for (std::size_t m : sh.members) {
            ++seen[m];
            CHECK(std::abs(v.speed(m) - sh.radius) <= 1e-9);
            CHECK(v.shell_of(m) == s);
            w += v.weight(m);
        }
        CHECK(sh.total_weight == doctest::Approx(w));
    }
    for (int c : seen) CHECK(c == 1);
    for (std::size_t i = 0; i < v.size(); ++i) {
        CHECK(v.speed(i) <= 2.5 * (1 + 1e-12));
        const std::size_t m = v.mirror(i);
        CHECK(v.node(m)[0] == doctest::Approx(-v.node(i)[0]));
        CHECK(v.node(m)[1] == doctest::Approx(-v.node(i)[1]));
    }
}

TEST_CASE("velocity grid contract errors") {
    CHECK_THROWS_AS(make_velocity_grid(2, 2, 1.0, 1e-9), ContractError);
    CHECK_THROWS_AS(make_velocity_grid(2, 5, -1.0, 1e-9), ContractError);
    CHECK_THROWS_AS(make_velocity_grid(2, 5, 1.0, 0.0), ContractError);
}
