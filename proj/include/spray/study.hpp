#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "spray/config.hpp"
#include "spray/diagnostics.hpp"
#include "spray/io.hpp"

namespace spray {

/// Least-squares slope of log y against log x.
double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

/// One row of a study summary: metric, value, threshold and verdict.
struct Verdict {
    std::string metric;
    double value = 0.0;
    double threshold = 0.0;
    std::string relation;  // ">=", "<=" or "<"
    bool pass = false;
};
Verdict make_verdict(std::string metric, double value, std::string relation, double threshold);
void write_summary_csv(std::ostream& os, const std::vector<Verdict>& v);

using StepObserver = std::function<void(int level, long step, const CoupledState&, const FixedPointReport&)>;

// ---- energy: ledger residual under dt halving --------------------------------

struct EnergyLevel {
    double dt = 0.0;
    double E0 = 0.0;
    double max_abs_residual = 0.0;
    double max_residual = 0.0;
    long steps = 0;
    int max_fp_iters = 0;
    std::size_t monotonicity_violations = 0;
    std::vector<DiagnosticsRecord> records;
};

struct EnergyStudy {
    std::vector<EnergyLevel> levels;
    double slope = 0.0;
    std::vector<Verdict> verdicts;
    bool pass = false;
};

/// Runs the config at dt, dt/2, ... (`levels` runs). Verdicts: max rho <=
/// 5e-3 E0 at the base dt, and the slope of max|rho| >= 0.9.
EnergyStudy energy_study(const SimConfig& cfg, int levels = 3, const StepObserver& observer = {});
void write_energy_csv(std::ostream& os, const EnergyStudy& s);

// ---- iteration: fixed-point and Picard behaviour per step --------------------

struct IterationRow {
    long step = 0;
    double t = 0.0;
    int fp_iters = 0;
    double fp_last_residual = 0.0;
    double fp_contraction = 0.0;
    int picard_iters = 0;
    double picard_contraction = 0.0;
    std::size_t monotonicity_violations = 0;
};

struct IterationStudy {
    std::vector<IterationRow> rows;
    std::vector<Verdict> verdicts;
    bool pass = false;
};

IterationStudy iteration_study(const SimConfig& cfg);
void write_iteration_csv(std::ostream& os, const IterationStudy& s);

// ---- convergence: Picard vs exact breakup, drag decay under n_v refinement ----

struct PicardGapRow {
    double dt = 0.0;
    double gap = 0.0;  // sup |Picard - exact| after one substep
    int iterations = 0;
};

struct DragDecayRow {
    int n_v = 0;
    double ratio = 0.0;  // M2(T)/M2(0)
    double error = 0.0;  // |ratio - e^{-2 gamma T}|
};

struct ConvergenceStudy {
    std::vector<PicardGapRow> picard;
    double picard_slope = 0.0;
    std::vector<DragDecayRow> drag;
    std::vector<Verdict> verdicts;
    bool pass = false;
};

/// Picard against the exact integrator on the config's initial kinetic
/// state and kernel (lambda from the config, 0.5 if it is zero).
std::vector<PicardGapRow> picard_gap_ladder(const SimConfig& cfg, const std::vector<double>& dts);
/// Frozen u = 0, spatially uniform bump of radius r_max, run to t_final.
DragDecayRow drag_decay(const SimConfig& cfg, int n_v, double t_final = 1.0);
ConvergenceStudy convergence_study(const SimConfig& cfg,
                                   const std::vector<double>& picard_dts = {1e-2, 5e-3, 2.5e-3});
void write_convergence_csv(std::ostream& os, const ConvergenceStudy& s);

// ---- weak formulation residuals under dt refinement ---------------------------

/// Feeds every frame of a trajectory at step dt (initial frame included).
using TrajectorySource = std::function<void(double dt, WeakAccumulator& acc)>;

struct WeakRow {
    std::string test_id;
    std::string kind;  // fluid | kinetic
    std::vector<double> residuals;  // one per dt
    double scale = 0.0;
    double slope = 0.0;
    bool exact = false;  // every residual at rounding level of the oracle's scale
    bool pass = false;
};

struct WeakStudy {
    std::string name;
    std::vector<double> dts;
    std::vector<WeakRow> rows;
    bool pass = false;
};

WeakStudy weak_ladder(const std::string& name, const TrajectorySource& src, const std::vector<double>& dts,
                      const std::vector<FluidTestFn>& fluid, const std::vector<KineticTestFn>& kinetic,
                      double lambda, double c, double gamma, const BreakupKernel* kernel);
/// Ladder over the config's own runs at dt, dt/2, dt/4.
WeakStudy weakform_study(const SimConfig& cfg);
void write_weak_csv(std::ostream& os, const std::vector<WeakStudy>& studies);
std::vector<Verdict> weak_verdicts(const std::vector<WeakStudy>& studies);

/// Closed-form trajectories used as oracles.
/// 1D, u = 0, lambda = 0: f(t,x,xi) = e^{gamma t} f0(x - xi (e^{gamma t} - 1)/gamma, xi e^{gamma t}).
TrajectorySource pushforward_oracle(std::shared_ptr<const TorusGrid> xg, std::shared_ptr<const VelocityGrid> vg,
                                    double gamma, double t_final);
/// Spatially uniform f under breakup alone: f(t) = exp(lambda t (G - I)) f0.
TrajectorySource breakup_oracle(std::shared_ptr<const TorusGrid> xg, const BreakupKernel& kernel, double lambda,
                                double t_final);
/// Runs of the config itself at the requested dt.
TrajectorySource run_source(const SimConfig& cfg);

}  // namespace spray
