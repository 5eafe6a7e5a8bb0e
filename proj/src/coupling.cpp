#include "spray/coupling.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "spray/error.hpp"
#include "spray/parallel.hpp"

namespace spray {

namespace {

double l2_distance(const FluidState& a, const FluidState& b) {
    const double vol = std::pow(a.ctx->grid().length(), a.dim());
    std::vector<double> terms;
    terms.reserve(a.ctx->size() * a.dim());
    for (int c = 0; c < a.dim(); ++c)
        for (std::size_t j = 0; j < a.ctx->size(); ++j) terms.push_back(std::norm(a.u_hat[c][j] - b.u_hat[c][j]));
    return std::sqrt(vol * pairwise_sum(terms));
}

bool all_zero(const std::vector<double>& f) {
    for (double v : f)
        if (v != 0.0) return false;
    return true;
}

}  // namespace

KineticState kinetic_step(const KineticState& f, const FrozenVelocity& u, const BreakupKernel& kernel,
                          const StepParams& p, TransportReport* tr, PicardReport* pr) {
    TransportOptions topt = p.transport;
    topt.gamma = p.gamma;
    KineticState g = transport_step(f, u, p.dt, topt, tr);
    if (p.lambda == 0.0) {
        if (pr) *pr = PicardReport{};
        return g;
    }
    KineticState h = p.exact_breakup ? breakup_substep_exact(g, kernel, p.lambda, p.dt)
                                     : breakup_substep_picard(g, kernel, p.lambda, p.dt, p.picard, pr);
    h.time = g.time;
    return h;
}

CoupledState coupled_step(const CoupledState& state, const BreakupKernel& kernel, const StepParams& p,
                          FixedPointReport* report) {
    if (!(p.dt > 0.0)) throw ContractError("coupled_step: dt must be positive");
    if (!(p.fp_tol > 0.0)) throw ContractError("coupled_step: fp_tol must be positive");
    if (p.fp_max < 1) throw ContractError("coupled_step: fp_max must be >= 1");
    const auto xg = state.kinetic.xgrid;
    // With f = 0 the drag vanishes whatever u~ is, so S is constant.
    const bool decoupled = all_zero(state.kinetic.f);

    FixedPointReport rep;
    FluidState guess = state.fluid;
    CoupledState next;
    for (int k = 1; k <= p.fp_max; ++k) {
        const auto u_nodal = to_physical(guess);
        const FrozenVelocity frozen(xg, u_nodal, InterpOrder::cubic);
        TransportReport tr;
        PicardReport pr;
        KineticState f_new = kinetic_step(state.kinetic, frozen, kernel, p, &tr, &pr);
        const DragForce F = drag_force(f_new, u_nodal, p.c);
        FluidState u_new = ns_step(state.fluid, F, p.dt, p.ns);
        const double res = decoupled ? 0.0 : l2_distance(u_new, guess);
        rep.iterations = k;
        rep.residuals.push_back(res);
        rep.picard = pr;
        rep.transport = tr;
        next.kinetic = std::move(f_new);
        next.fluid = std::move(u_new);
        if (res <= p.fp_tol) {
            rep.converged = true;
            break;
        }
        guess = next.fluid;
    }
    const auto& r = rep.residuals;
    if (r.size() >= 3 && r.front() > 0.0 && r[r.size() - 2] > 0.0) {
        // Ratios from the second residual on; the first reflects the start guess.
        double lsum = 0.0;
        int n = 0;
        for (std::size_t i = 1; i + 1 < r.size(); ++i)
            if (r[i] > 0.0 && r[i + 1] > 0.0) {
                lsum += std::log(r[i + 1] / r[i]);
                ++n;
            }
        rep.contraction = n > 0 ? std::exp(lsum / n) : 0.0;
    } else if (r.size() == 2 && r[0] > 0.0) {
        rep.contraction = r[1] / r[0];
    }
    if (report) *report = rep;
    if (!rep.converged) {
        std::ostringstream os;
        os << "fixed-point iteration did not reach fp_tol " << p.fp_tol << " in " << p.fp_max
           << " iterations; residuals:";
        for (double v : r) os << ' ' << v;
        os << " (dt too large for contraction?)";
        throw ConvergenceError(os.str(), rep.contraction);
    }
    next.time = state.time + p.dt;
    next.kinetic.time = next.time;
    next.fluid.time = next.time;
    return next;
}

double kinetic_energy(const KineticState& f) {
    const VelocityGrid& vg = *f.vgrid;
    const std::size_t nx = f.xgrid->size(), nv = vg.size();
    std::vector<double> wp(nv);
    for (std::size_t i = 0; i < nv; ++i) wp[i] = (1.0 + 0.5 * vg.speed(i) * vg.speed(i)) * vg.weight(i);
    std::vector<double> per_x(nx);
    for (std::size_t j = 0; j < nx; ++j) {
        const auto s = f.slice(j);
        double acc = 0.0;
        for (std::size_t i = 0; i < nv; ++i) acc += wp[i] * s[i];
        per_x[j] = acc;
    }
    return pairwise_sum(per_x) * f.xgrid->cell_volume();
}

double drag_dissipation(const KineticState& f, const std::vector<std::vector<double>>& u) {
    const VelocityGrid& vg = *f.vgrid;
    const int dim = vg.dim();
    const std::size_t nx = f.xgrid->size(), nv = vg.size();
    std::vector<double> per_x(nx);
    for (std::size_t j = 0; j < nx; ++j) {
        const auto s = f.slice(j);
        double acc = 0.0;
        for (std::size_t i = 0; i < nv; ++i) {
            double d2 = 0.0;
            for (int a = 0; a < dim; ++a) {
                const double d = u[a][j] - vg.node(i)[a];
                d2 += d * d;
            }
            acc += d2 * s[i] * vg.weight(i);
        }
        per_x[j] = acc;
    }
    return pairwise_sum(per_x) * f.xgrid->cell_volume();
}

EnergyLedger ledger_start(const CoupledState& state, double c, double gamma) {
    if (!(gamma > 0.0)) throw ContractError("ledger: gamma must be positive");
    EnergyLedger L;
    L.kin_weight = c / gamma;
    L.time = state.time;
    L.E_fluid = fluid_energy(state.fluid);
    L.E_kin = kinetic_energy(state.kinetic);
    L.E0 = L.E_fluid + L.kin_weight * L.E_kin;
    L.last_visc_rate = state.fluid.mu * grad_norm2(state.fluid);
    L.last_drag_rate = c * drag_dissipation(state.kinetic, to_physical(state.fluid));
    return L;
}

EnergyLedger ledger_update(const EnergyLedger& ledger, const CoupledState& state, double c) {
    EnergyLedger L = ledger;
    const double h = state.time - ledger.time;
    const double visc = state.fluid.mu * grad_norm2(state.fluid);
    const double drag = c * drag_dissipation(state.kinetic, to_physical(state.fluid));
    L.D_visc += 0.5 * h * (ledger.last_visc_rate + visc);
    L.D_drag += 0.5 * h * (ledger.last_drag_rate + drag);
    L.last_visc_rate = visc;
    L.last_drag_rate = drag;
    L.time = state.time;
    L.E_fluid = fluid_energy(state.fluid);
    L.E_kin = kinetic_energy(state.kinetic);
    L.residual = L.E_fluid + L.kin_weight * L.E_kin + L.D_visc + L.D_drag - L.E0;
    return L;
}

DiagnosticsRecord make_record(const CoupledState& state, const EnergyLedger& ledger, int fp_iters) {
    DiagnosticsRecord r;
    r.t = state.time;
    r.M0 = global_moment(state.kinetic, 0.0);
    r.M1 = global_moment(state.kinetic, 1.0);
    r.M2 = global_moment(state.kinetic, 2.0);
    r.M3 = global_moment(state.kinetic, 3.0);
    r.E_fluid = ledger.E_fluid;
    r.E_kin = ledger.E_kin;
    r.D_visc = ledger.D_visc;
    r.D_drag = ledger.D_drag;
    r.residual = ledger.residual;
    r.f_max = state.kinetic.max_value();
    r.fp_iters = fp_iters;
    return r;
}

std::string diagnostics_header() {
    return "t,M0,M1,M2,M3,E_fluid,E_kin,D_visc,D_drag,residual,f_max,fp_iters";
}

std::string format_record(const DiagnosticsRecord& r) {
    char buf[512];
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d", r.t,
                  r.M0, r.M1, r.M2, r.M3, r.E_fluid, r.E_kin, r.D_visc, r.D_drag, r.residual, r.f_max, r.fp_iters);
    return buf;
}

void write_diagnostics_csv(std::ostream& os, const std::vector<DiagnosticsRecord>& rows) {
    os << diagnostics_header() << '\n';
    for (const auto& r : rows) os << format_record(r) << '\n';
}

std::vector<DiagnosticsRecord> read_diagnostics_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw SprayError("diagnostics CSV: empty input");
    if (line != diagnostics_header())
        throw SprayError("diagnostics CSV: missing columns; expected header '" + diagnostics_header() + "'");
    std::vector<DiagnosticsRecord> rows;
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        DiagnosticsRecord r;
        const int n = std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%d", &r.t, &r.M0, &r.M1,
                                  &r.M2, &r.M3, &r.E_fluid, &r.E_kin, &r.D_visc, &r.D_drag, &r.residual, &r.f_max,
                                  &r.fp_iters);
        if (n != 12) throw SprayError("diagnostics CSV: malformed row at line " + std::to_string(lineno));
        rows.push_back(r);
    }
    return rows;
}

void check_invariants(const CoupledState& state) {
    const std::int64_t bad = state.kinetic.first_invalid();
    if (bad >= 0) {
        const std::size_t nv = state.kinetic.nv();
        throw InvariantViolation("positivity", "f is negative or non-finite at x node " +
                                                   std::to_string(bad / static_cast<std::int64_t>(nv)) +
                                                   ", xi node " +
                                                   std::to_string(bad % static_cast<std::int64_t>(nv)) + " (t = " +
                                                   std::to_string(state.time) + ")");
    }
    for (const auto& c : state.fluid.u_hat)
        for (const cplx& v : c)
            if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
                throw InvariantViolation("finite velocity", "non-finite fluid coefficient at t = " +
                                                                std::to_string(state.time));
    const double div = divergence_residual(state.fluid);
    if (div > 1e-12)
        throw InvariantViolation("divergence-free", "max |k.u_hat| / max |u_hat| = " + std::to_string(div));
}

RunResult run(const CoupledState& initial, const BreakupKernel& kernel, const RunParams& p) {
    if (!(p.t_final >= initial.time)) throw ContractError("run: t_final precedes the initial time");
    if (p.record_every < 1) throw ContractError("run: record_every must be >= 1");
    check_invariants(initial);
    RunResult res;
    res.final_state = initial;
    res.ledger = ledger_start(initial, p.step.c, p.step.gamma);
    auto record = [&](const DiagnosticsRecord& r) {
        res.records.push_back(r);
        res.max_abs_residual = std::max(res.max_abs_residual, std::abs(r.residual));
        res.max_residual = std::max(res.max_residual, r.residual);
        if (p.on_record) p.on_record(r);
    };
    record(make_record(res.final_state, res.ledger, 0));

    const double span = p.t_final - initial.time;
    const long n_steps = span <= 0.0 ? 0 : static_cast<long>(std::ceil(span / p.step.dt - 1e-9));
    StepParams sp = p.step;
    for (long n = 1; n <= n_steps; ++n) {
        const double t_next = n == n_steps ? p.t_final : initial.time + n * p.step.dt;
        sp.dt = t_next - res.final_state.time;
        FixedPointReport fr;
        CoupledState next = coupled_step(res.final_state, kernel, sp, &fr);
        next.time = t_next;
        next.kinetic.time = t_next;
        next.fluid.time = t_next;
        check_invariants(next);
        res.final_state = std::move(next);
        res.steps = n;
        res.max_fp_iters = std::max(res.max_fp_iters, fr.iterations);
        res.monotonicity_violations += fr.picard.monotonicity_violations;
        if (fr.transport.mass_before > 0.0)
            res.max_mass_drift = std::max(res.max_mass_drift, std::abs(fr.transport.mass_after - fr.transport.mass_before) /
                                                                  fr.transport.mass_before);
        res.ledger = ledger_update(res.ledger, res.final_state, sp.c);
        if (p.on_step) p.on_step(n, res.final_state, fr);
        if (n % p.record_every == 0 || n == n_steps) record(make_record(res.final_state, res.ledger, fr.iterations));
    }
    return res;
}

}  // namespace spray
