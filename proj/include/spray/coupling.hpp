#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "spray/fluid.hpp"
#include "spray/kernel.hpp"
#include "spray/kinetic.hpp"

namespace spray {

struct CoupledState {
    KineticState kinetic;
    FluidState fluid;
    double time = 0.0;
};

struct StepParams {
    double dt = 1e-3;
    double lambda = 0.0;
    double c = 1.0;      // fluid-side drag coupling
    double gamma = 1.0;  // particle drag rate
    double fp_tol = 1e-6;
    int fp_max = 20;
    bool exact_breakup = false;
    TransportOptions transport;
    PicardOptions picard;
    NsOptions ns;
};

struct FixedPointReport {
    int iterations = 0;
    /// |u^{k+1} - u^k|_{L2} per iteration.
    std::vector<double> residuals;
    bool converged = false;
    /// Geometric mean of successive residual ratios; 0 with fewer than 2.
    double contraction = 0.0;
    PicardReport picard;  // from the committed iterate
    TransportReport transport;
};

/// The kinetic half of one step: transport with u frozen, then breakup.
KineticState kinetic_step(const KineticState& f, const FrozenVelocity& u, const BreakupKernel& kernel,
                          const StepParams& p, TransportReport* tr = nullptr, PicardReport* pr = nullptr);

/// One step of the fixed-point map: given u~, advance f with u~ frozen, build
/// the drag from the new f and u~, advance the fluid from the old u. Iterates
/// until successive fluid iterates differ by at most fp_tol in L2.
CoupledState coupled_step(const CoupledState& state, const BreakupKernel& kernel, const StepParams& p,
                          FixedPointReport* report = nullptr);

/// Running energy balance. With c = gamma = 1,
/// E_fluid + E_kin + D_visc + D_drag - E_0 = residual; for other values the
/// kinetic terms carry the weights c/gamma and c that make this an identity.
struct EnergyLedger {
    double E_fluid = 0.0;
    double E_kin = 0.0;   // int int f (1 + |xi|^2/2)
    double D_visc = 0.0;  // mu int_0^t int |grad u|^2
    double D_drag = 0.0;  // c int_0^t int int f |u - xi|^2
    double E0 = 0.0;
    double residual = 0.0;
    double time = 0.0;
    // Integrands at the last update, for the trapezoid rule.
    double last_visc_rate = 0.0;
    double last_drag_rate = 0.0;
    double kin_weight = 1.0;  // c / gamma
};

double kinetic_energy(const KineticState& f);
/// int int f |u - xi|^2 with u the nodal fluid velocity.
double drag_dissipation(const KineticState& f, const std::vector<std::vector<double>>& u);

EnergyLedger ledger_start(const CoupledState& state, double c, double gamma);
/// Advances the dissipation integrals over [ledger.time, state.time] by the
/// trapezoid rule and refreshes the energies and residual.
EnergyLedger ledger_update(const EnergyLedger& ledger, const CoupledState& state, double c);

struct DiagnosticsRecord {
    double t = 0.0;
    double M0 = 0.0, M1 = 0.0, M2 = 0.0, M3 = 0.0;
    double E_fluid = 0.0, E_kin = 0.0, D_visc = 0.0, D_drag = 0.0;
    double residual = 0.0;
    double f_max = 0.0;
    int fp_iters = 0;
};

DiagnosticsRecord make_record(const CoupledState& state, const EnergyLedger& ledger, int fp_iters);

/// Header line plus one line per record, 17 significant digits.
void write_diagnostics_csv(std::ostream& os, const std::vector<DiagnosticsRecord>& rows);
std::string diagnostics_header();
std::string format_record(const DiagnosticsRecord& r);
std::vector<DiagnosticsRecord> read_diagnostics_csv(std::istream& is);

struct RunParams {
    StepParams step;
    double t_final = 0.0;
    int record_every = 1;
    /// Called after every committed step with the step index (1-based).
    std::function<void(long, const CoupledState&, const FixedPointReport&)> on_step;
    /// Called with each diagnostics row as it is recorded.
    std::function<void(const DiagnosticsRecord&)> on_record;
};

struct RunResult {
    CoupledState final_state;
    std::vector<DiagnosticsRecord> records;
    EnergyLedger ledger;
    long steps = 0;
    int max_fp_iters = 0;
    std::size_t monotonicity_violations = 0;
    double max_mass_drift = 0.0;  // relative, per transport step, before rescaling
    double max_abs_residual = 0.0;
    double max_residual = 0.0;
};

/// Advances from state.time to t_final in steps of dt (the last step is
/// shortened to land on t_final). Throws InvariantViolation on a negative or
/// non-finite f or a divergent velocity; records gathered so far are handed
/// to on_record before the throw.
RunResult run(const CoupledState& initial, const BreakupKernel& kernel, const RunParams& p);

/// Throws InvariantViolation when positivity or divergence-freeness fails.
void check_invariants(const CoupledState& state);

}  // namespace spray
