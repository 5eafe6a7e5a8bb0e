#include "spray/study.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "spray/error.hpp"

namespace spray {

namespace {

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

bool all_zero(const std::vector<double>& f) {
    return std::all_of(f.begin(), f.end(), [](double v) { return v == 0.0; });
}

}  // namespace

double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw ContractError("fit_loglog_slope: need two or more points");
    const double n = double(x.size());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) return std::nan("");
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

Verdict make_verdict(std::string metric, double value, std::string relation, double threshold) {
    Verdict v{std::move(metric), value, threshold, relation, false};
    if (relation == ">=") v.pass = value >= threshold;
    else if (relation == "<=") v.pass = value <= threshold;
    else if (relation == "<") v.pass = value < threshold;
    else throw ContractError("make_verdict: unknown relation " + relation);
    return v;
}

void write_summary_csv(std::ostream& os, const std::vector<Verdict>& v) {
    os << "metric,value,relation,threshold,verdict\n";
    for (const Verdict& x : v)
        os << x.metric << ',' << num(x.value) << ',' << x.relation << ',' << num(x.threshold) << ','
           << (x.pass ? "PASS" : "FAIL") << '\n';
}

static bool all_pass(const std::vector<Verdict>& v) {
    return std::all_of(v.begin(), v.end(), [](const Verdict& x) { return x.pass; });
}

// ---- energy ----

EnergyStudy energy_study(const SimConfig& cfg, int levels, const StepObserver& observer) {
    EnergyStudy st;
    std::vector<double> dts, rhos;
    double worst = -std::numeric_limits<double>::infinity();
    for (int l = 0; l < levels; ++l) {
        SimConfig c = cfg;
        c.dt = cfg.dt / double(1 << l);
        c.record_every = cfg.record_every * (1 << l);
        const Setup su = make_setup(c);
        const CoupledState s0 = make_initial_state(c, su);
        RunParams p = make_run_params(c);
        if (observer)
            p.on_step = [&](long n, const CoupledState& s, const FixedPointReport& r) { observer(l, n, s, r); };
        const RunResult r = run(s0, *su.kernel, p);
        EnergyLevel lv;
        lv.dt = c.dt;
        lv.E0 = r.ledger.E0;
        lv.max_abs_residual = r.max_abs_residual;
        lv.max_residual = r.max_residual;
        lv.steps = r.steps;
        lv.max_fp_iters = r.max_fp_iters;
        lv.monotonicity_violations = r.monotonicity_violations;
        lv.records = r.records;
        st.levels.push_back(lv);
        dts.push_back(lv.dt);
        rhos.push_back(lv.max_abs_residual);
        worst = std::max(worst, lv.E0 > 0.0 ? lv.max_residual / lv.E0 : lv.max_residual);
    }
    st.verdicts.push_back(make_verdict("max_residual_over_E0", worst, "<=", 5e-3));
    if (levels >= 2) {
        st.slope = fit_loglog_slope(dts, rhos);
        // a ledger that is exact to rounding at every level has nothing to refine
        const bool exact = std::all_of(st.levels.begin(), st.levels.end(), [](const EnergyLevel& l) {
            return l.max_abs_residual <= 1e-12 * std::max(l.E0, 1e-300);
        });
        st.verdicts.push_back(exact ? make_verdict("max_abs_residual_exact", rhos.front(), "<=", 1e-12 * st.levels[0].E0)
                                    : make_verdict("max_abs_residual_slope", st.slope, ">=", 0.9));
    }
    st.pass = all_pass(st.verdicts);
    return st;
}

void write_energy_csv(std::ostream& os, const EnergyStudy& s) {
    os << "level,dt,steps,E0,max_abs_residual,max_residual,max_residual_over_E0,max_fp_iters,"
          "monotonicity_violations\n";
    for (std::size_t l = 0; l < s.levels.size(); ++l) {
        const EnergyLevel& v = s.levels[l];
        os << l << ',' << num(v.dt) << ',' << v.steps << ',' << num(v.E0) << ',' << num(v.max_abs_residual) << ','
           << num(v.max_residual) << ',' << num(v.E0 > 0.0 ? v.max_residual / v.E0 : 0.0) << ',' << v.max_fp_iters
           << ',' << v.monotonicity_violations << '\n';
    }
}

// ---- iteration ----

IterationStudy iteration_study(const SimConfig& cfg) {
    IterationStudy st;
    const Setup su = make_setup(cfg);
    const CoupledState s0 = make_initial_state(cfg, su);
    RunParams p = make_run_params(cfg);
    p.on_step = [&](long n, const CoupledState& s, const FixedPointReport& r) {
        IterationRow row;
        row.step = n;
        row.t = s.time;
        row.fp_iters = r.iterations;
        row.fp_last_residual = r.residuals.empty() ? 0.0 : r.residuals.back();
        row.fp_contraction = r.contraction;
        row.picard_iters = r.picard.iterations;
        row.picard_contraction = r.picard.contraction;
        row.monotonicity_violations = r.picard.monotonicity_violations;
        st.rows.push_back(row);
    };
    run(s0, *su.kernel, p);
    std::size_t viol = 0;
    int fp_max = 0;
    for (const IterationRow& r : st.rows) {
        viol += r.monotonicity_violations;
        fp_max = std::max(fp_max, r.fp_iters);
    }
    st.verdicts.push_back(make_verdict("monotonicity_violations", double(viol), "<=", 0.0));
    st.verdicts.push_back(make_verdict("max_fp_iterations", double(fp_max), "<=", double(cfg.fp_max)));
    st.pass = all_pass(st.verdicts);
    return st;
}

void write_iteration_csv(std::ostream& os, const IterationStudy& s) {
    os << "step,t,fp_iters,fp_last_residual,fp_contraction,picard_iters,picard_contraction,monotonicity_violations\n";
    for (const IterationRow& r : s.rows)
        os << r.step << ',' << num(r.t) << ',' << r.fp_iters << ',' << num(r.fp_last_residual) << ','
           << num(r.fp_contraction) << ',' << r.picard_iters << ',' << num(r.picard_contraction) << ','
           << r.monotonicity_violations << '\n';
}

// ---- convergence ----

std::vector<PicardGapRow> picard_gap_ladder(const SimConfig& cfg, const std::vector<double>& dts) {
    const Setup su = make_setup(cfg);
    const CoupledState s0 = make_initial_state(cfg, su);
    if (all_zero(s0.kinetic.f)) throw ContractError("picard_gap_ladder: initial particle density is zero");
    const double lambda = cfg.lambda > 0.0 ? cfg.lambda : 0.5;
    PicardOptions opt;
    opt.tol = cfg.picard_tol;
    opt.max_iter = cfg.picard_max;
    std::vector<PicardGapRow> out;
    for (double dt : dts) {
        PicardReport rep;
        const KineticState a = breakup_substep_picard(s0.kinetic, *su.kernel, lambda, dt, opt, &rep);
        const KineticState b = breakup_substep_exact(s0.kinetic, *su.kernel, lambda, dt);
        double gap = 0.0;
        for (std::size_t i = 0; i < a.f.size(); ++i) gap = std::max(gap, std::abs(a.f[i] - b.f[i]));
        out.push_back({dt, gap, rep.iterations});
    }
    return out;
}

DragDecayRow drag_decay(const SimConfig& cfg, int n_v, double t_final) {
    SimConfig c = cfg;
    c.n_v = n_v;
    c.n_x = 4;
    c.m_modes = 1;
    c.lambda = 0.0;
    c.fluid = FluidInit::zero;
    c.particles = ParticleInit::bump;
    c.particle_radius = c.r_max;
    c.particle_velocity = {0.0, 0.0, 0.0};
    c.particle_modulation = 0.0;
    if (c.particle_n0 <= 0.0) c.particle_n0 = 1.0;
    const Setup su = make_setup(c);
    KineticState f = make_initial_state(c, su).kinetic;
    const std::vector<double> zero(c.dim, 0.0);
    const FrozenVelocity u = FrozenVelocity::uniform(su.xgrid, zero);
    const TransportOptions opt = make_run_params(c).step.transport;
    const long steps = std::lround(t_final / c.dt);
    const double dt = t_final / double(steps);
    const double m2 = global_moment(f, 2.0);
    for (long n = 0; n < steps; ++n) f = transport_step(f, u, dt, opt);
    DragDecayRow r;
    r.n_v = n_v;
    r.ratio = global_moment(f, 2.0) / m2;
    r.error = std::abs(r.ratio - std::exp(-2.0 * c.gamma * t_final));
    return r;
}

ConvergenceStudy convergence_study(const SimConfig& cfg, const std::vector<double>& picard_dts) {
    ConvergenceStudy st;
    SimConfig pc = cfg;
    if (pc.particles == ParticleInit::zero) {
        // the ladder needs mass; fall back to the default bump
        pc.particles = ParticleInit::bump;
        pc.particle_radius = std::min(pc.particle_radius, pc.r_max);
    }
    st.picard = picard_gap_ladder(pc, picard_dts);
    std::vector<double> x, y;
    for (const auto& r : st.picard) {
        x.push_back(r.dt);
        y.push_back(r.gap);
    }
    st.picard_slope = fit_loglog_slope(x, y);
    st.verdicts.push_back(make_verdict("picard_gap_slope", st.picard_slope, ">=", 1.9));
    st.drag.push_back(drag_decay(cfg, cfg.n_v));
    st.drag.push_back(drag_decay(cfg, 2 * cfg.n_v - 1));
    st.verdicts.push_back(make_verdict("drag_decay_error", st.drag[0].error, "<=", 2e-2));
    st.verdicts.push_back(
        make_verdict("drag_decay_refined_over_coarse", st.drag[1].error / st.drag[0].error, "<", 1.0));
    st.pass = all_pass(st.verdicts);
    return st;
}

void write_convergence_csv(std::ostream& os, const ConvergenceStudy& s) {
    os << "kind,param,value,aux\n";
    for (const auto& r : s.picard) os << "picard_gap," << num(r.dt) << ',' << num(r.gap) << ',' << r.iterations << '\n';
    for (const auto& r : s.drag) os << "drag_decay," << r.n_v << ',' << num(r.error) << ',' << num(r.ratio) << '\n';
}

// ---- weak form ----

WeakStudy weak_ladder(const std::string& name, const TrajectorySource& src, const std::vector<double>& dts,
                      const std::vector<FluidTestFn>& fluid, const std::vector<KineticTestFn>& kinetic,
                      double lambda, double c, double gamma, const BreakupKernel* kernel) {
    WeakStudy st;
    st.name = name;
    st.dts = dts;
    const std::size_t nf = fluid.size(), nk = kinetic.size();
    st.rows.resize(nf + nk);
    for (std::size_t n = 0; n < nf; ++n) {
        st.rows[n].test_id = fluid[n].id;
        st.rows[n].kind = "fluid";
    }
    for (std::size_t n = 0; n < nk; ++n) {
        st.rows[nf + n].test_id = kinetic[n].id;
        st.rows[nf + n].kind = "kinetic";
    }
    for (double dt : dts) {
        WeakAccumulator acc(fluid, kinetic, lambda, c, gamma, kernel);
        src(dt, acc);
        const auto reps = acc.reports();
        for (std::size_t n = 0; n < reps.size(); ++n) {
            st.rows[n].residuals.push_back(n < nf ? reps[n].residual_fluid : reps[n].residual_kinetic);
            st.rows[n].scale = std::max(st.rows[n].scale, reps[n].scale);
        }
    }
    // rounding level is judged against the largest term of the oracle
    double ref = 0.0;
    for (const WeakRow& r : st.rows) ref = std::max(ref, r.scale);
    st.pass = true;
    for (WeakRow& r : st.rows) {
        r.exact = std::all_of(r.residuals.begin(), r.residuals.end(), [&](double v) { return v <= 1e-12 * ref; });
        r.slope = fit_loglog_slope(dts, r.residuals);
        r.pass = r.exact || r.slope >= 0.9;
        st.pass = st.pass && r.pass;
    }
    return st;
}

TrajectorySource run_source(const SimConfig& cfg) {
    return [cfg](double dt, WeakAccumulator& acc) {
        SimConfig c = cfg;
        c.dt = dt;
        const Setup su = make_setup(c);
        const CoupledState s0 = make_initial_state(c, su);
        RunParams p = make_run_params(c);
        p.record_every = std::max(1, int(std::lround(c.t_final / dt)));
        p.on_step = [&](long, const CoupledState& s, const FixedPointReport&) { acc.add(s); };
        acc.add(s0);
        run(s0, *su.kernel, p);
    };
}

WeakStudy weakform_study(const SimConfig& cfg) {
    const auto fluid = fluid_test_functions(cfg.dim, cfg.seed);
    const auto kinetic = kinetic_test_functions(cfg.dim, cfg.r_max, cfg.seed, 3);
    std::unique_ptr<Setup> su = std::make_unique<Setup>(make_setup(cfg));
    return weak_ladder("run", run_source(cfg), {cfg.dt, cfg.dt / 2, cfg.dt / 4}, fluid, kinetic, cfg.lambda, cfg.c,
                       cfg.gamma, su->kernel.get());
}

TrajectorySource pushforward_oracle(std::shared_ptr<const TorusGrid> xg, std::shared_ptr<const VelocityGrid> vg,
                                    double gamma, double t_final) {
    if (xg->dim() != 1) throw ContractError("pushforward_oracle: 1D only");
    return [=](double dt, WeakAccumulator& acc) {
        const long n = std::lround(t_final / dt);
        const std::size_t nv = vg->size();
        for (long k = 0; k <= n; ++k) {
            const double t = t_final * double(k) / double(n);
            CoupledState s;
            s.time = t;
            s.kinetic = KineticState(xg, vg, t);
            const double e = std::exp(gamma * t);
            const double shift = gamma > 0.0 ? (e - 1.0) / gamma : t;
            for (std::size_t j = 0; j < xg->size(); ++j)
                for (std::size_t i = 0; i < nv; ++i) {
                    const double xi = vg->node(i)[0];
                    const double x0 = xg->coord(j, 0) - xi * shift, v0 = xi * e;
                    const double rho = 1.0 + 0.5 * std::cos(x0) + 0.3 * std::sin(2.0 * x0);
                    s.kinetic.f[j * nv + i] = e * rho * std::exp(-(v0 - 0.3) * (v0 - 0.3) / 0.18);
                }
            acc.add(s);
        }
    };
}

TrajectorySource breakup_oracle(std::shared_ptr<const TorusGrid> xg, const BreakupKernel& kernel, double lambda,
                                double t_final) {
    const auto vg = kernel.vgrid_ptr();
    KineticState f0(xg, vg, 0.0);
    const std::size_t nv = vg->size();
    for (std::size_t j = 0; j < xg->size(); ++j)
        for (std::size_t i = 0; i < nv; ++i) {
            const auto v = vg->node(i);
            double d2 = (v[0] - 0.8) * (v[0] - 0.8);
            for (int a = 1; a < vg->dim(); ++a) d2 += v[a] * v[a];
            f0.f[j * nv + i] = std::exp(-d2 / 0.5);
        }
    const BreakupKernel* k = &kernel;
    return [=](double dt, WeakAccumulator& acc) {
        const long n = std::lround(t_final / dt);
        for (long s = 0; s <= n; ++s) {
            const double t = t_final * double(s) / double(n);
            CoupledState st;
            st.time = t;
            st.kinetic = s == 0 ? f0 : breakup_substep_exact(f0, *k, lambda, t);
            st.kinetic.time = t;
            acc.add(st);
        }
    };
}

void write_weak_csv(std::ostream& os, const std::vector<WeakStudy>& studies) {
    os << "study,test_id,kind,dt,residual,scale\n";
    for (const WeakStudy& s : studies)
        for (const WeakRow& r : s.rows)
            for (std::size_t i = 0; i < s.dts.size(); ++i)
                os << s.name << ',' << r.test_id << ',' << r.kind << ',' << num(s.dts[i]) << ',' << num(r.residuals[i])
                   << ',' << num(r.scale) << '\n';
}

std::vector<Verdict> weak_verdicts(const std::vector<WeakStudy>& studies) {
    std::vector<Verdict> v;
    for (const WeakStudy& s : studies) {
        double ref = 0.0;
        for (const WeakRow& r : s.rows) ref = std::max(ref, r.scale);
        for (const WeakRow& r : s.rows) {
            if (r.exact)
                v.push_back(make_verdict(s.name + "/" + r.test_id + ":exact",
                                         *std::max_element(r.residuals.begin(), r.residuals.end()), "<=", 1e-12 * ref));
            else
                v.push_back(make_verdict(s.name + "/" + r.test_id + ":slope", r.slope, ">=", 0.9));
        }
    }
    return v;
}

}  // namespace spray
