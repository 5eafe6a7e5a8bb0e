#include <doctest.h>

#include <cmath>
#include <sstream>

#include "spray/config.hpp"
#include "spray/coupling.hpp"
#include "spray/error.hpp"
#include "spray/io.hpp"
#include "spray/parallel.hpp"

using namespace spray;

namespace {
SimConfig small_cfg() {
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
}  // namespace

TEST_CASE("empty spray converges in one fixed-point pass") {
    SimConfig c = small_cfg();
    c.particles = ParticleInit::zero;
    const Setup su = make_setup(c);
    const CoupledState s = make_initial_state(c, su);
    FixedPointReport rep;
    const CoupledState n = coupled_step(s, *su.kernel, make_run_params(c).step, &rep);
    CHECK(rep.converged);
    CHECK(rep.iterations == 1);
    CHECK(rep.residuals.back() == 0.0);
    CHECK(n.time == doctest::Approx(c.dt));
}

TEST_CASE("co-moving monokinetic particles feel no drag") {
    SimConfig c = small_cfg();
    c.n_v = 13;  // spacing 0.5, so xi = (0.5, 0) is a node
    c.lambda = 0.0;
    c.fluid = FluidInit::uniform;
    c.fluid_velocity = {0.5, 0.0, 0.0};
    c.particles = ParticleInit::monokinetic;
    c.particle_velocity = {0.5, 0.0, 0.0};
    const Setup su = make_setup(c);
    const CoupledState s = make_initial_state(c, su);
    FixedPointReport rep;
    const CoupledState n = coupled_step(s, *su.kernel, make_run_params(c).step, &rep);
    CHECK(rep.converged);
    CHECK(rep.iterations <= 2);
    const auto u = to_physical(n.fluid);
    for (double v : u[0]) CHECK(v == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(global_moment(n.kinetic, 0.0) == doctest::Approx(global_moment(s.kinetic, 0.0)).epsilon(1e-12));
}

TEST_CASE("diagnostics CSV round trip") {
    DiagnosticsRecord r;
    r.t = 0.1;
    r.M0 = 1.0 / 3.0;
    r.M2 = 2e-17;
    r.residual = -1.5e-9;
    r.fp_iters = 3;
    std::stringstream ss;
    write_diagnostics_csv(ss, {r, r});
    const auto back = read_diagnostics_csv(ss);
    REQUIRE(back.size() == 2);
    CHECK(back[1].M0 == r.M0);
    CHECK(back[1].residual == r.residual);
    CHECK(back[1].fp_iters == 3);
    std::stringstream bad("t,nonsense\n1,2\n");
    CHECK_THROWS(read_diagnostics_csv(bad));
}

TEST_CASE("negative density is an invariant violation") {
    SimConfig c = small_cfg();
    const Setup su = make_setup(c);
    CoupledState s = make_initial_state(c, su);
    s.kinetic.f[5] = -1e-3;
    try {
        check_invariants(s);
        FAIL("no throw");
    } catch (const InvariantViolation& e) {
        CHECK(e.invariant() == "positivity");
    }
    CHECK_THROWS_AS(run(s, *su.kernel, make_run_params(c)), InvariantViolation);
}

TEST_CASE("energy ledger of a pure Taylor-Green run closes") {
    SimConfig c = small_cfg();
    c.n_x = 16;
    c.particles = ParticleInit::zero;
    c.lambda = 0.0;
    c.dt = 1e-3;
    c.t_final = 0.1;
    const Setup su = make_setup(c);
    const RunResult r = run(make_initial_state(c, su), *su.kernel, make_run_params(c));
    // trapezoid error of mu int |grad u|^2 for an exponential decay, O(dt^2)
    CHECK(std::abs(r.ledger.residual) <= 1e-6 * r.ledger.E0);
    CHECK(r.ledger.E_kin == 0.0);
}

TEST_CASE("coupled run conserves mass and is thread-count independent") {
    SimConfig c = small_cfg();
    const Setup su = make_setup(c);
    const CoupledState s0 = make_initial_state(c, su);
    set_threads(1);
    const RunResult a = run(s0, *su.kernel, make_run_params(c));
    set_threads(4);
    const RunResult b = run(s0, *su.kernel, make_run_params(c));
    set_threads(1);
    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) CHECK(format_record(a.records[i]) == format_record(b.records[i]));
    CHECK(a.final_state.kinetic.f == b.final_state.kinetic.f);
    CHECK(a.records.back().M0 == doctest::Approx(a.records.front().M0).epsilon(1e-12));
    CHECK(a.monotonicity_violations == 0);
    CHECK(a.steps == 4);
}
