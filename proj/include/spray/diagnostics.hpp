#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "spray/coupling.hpp"

namespace spray {

/// Time-resolved sequence of coupled states (increasing times).
struct Trajectory {
    std::vector<CoupledState> frames;
    double lambda = 0.0;
    double c = 1.0;
    double gamma = 1.0;
};

/// phi(t, x) = cos(omega t) * a * cos(k . x + phase), with a . k = 0 so that
/// div phi = 0. k holds integer wavenumbers (multiples of 2 pi / L).
struct FluidTestFn {
    std::string id;
    std::array<int, 3> k{0, 0, 0};
    std::array<double, 3> a{0.0, 0.0, 0.0};
    double phase = 0.0;
    double omega = 0.0;
};

/// phi(t, x, xi) = cos(omega t) * cos(k . x + phase) * shape(xi) with
///   mass:   shape = 1
///   energy: shape = |xi|^2/2 * chi(|xi|), chi = 1 below r_in, 0 above r_out
///   bump:   shape = exp(1 - 1/q), q = 1 - |xi - center|^2 / radius^2 > 0
struct KineticTestFn {
    enum class Shape { mass, energy, bump };
    std::string id;
    Shape shape = Shape::mass;
    std::array<int, 3> k{0, 0, 0};
    double phase = 0.0;
    double omega = 0.0;
    std::array<double, 3> center{0.0, 0.0, 0.0};
    double radius = 1.0;
    double r_in = 0.0, r_out = 0.0;

    /// Value and xi-gradient of the shape factor.
    double shape_value(const double* xi, int dim, double* grad) const;
    /// Largest |xi| in the support (infinite for mass).
    double support_radius(int dim) const;
};

/// Fixed families drawn from a seed; the same (dim, r_max, seed) always
/// yields the same functions. The first fluid member has k = (1, ..); the
/// kinetic family is mass, cut-off energy, then bumps, the first with k = 0.
std::vector<FluidTestFn> fluid_test_functions(int dim, std::uint64_t seed, int count = 3);
std::vector<KineticTestFn> kinetic_test_functions(int dim, double r_max, std::uint64_t seed, int count = 2);

struct WeakResidualReport {
    double residual_fluid = 0.0;
    double residual_kinetic = 0.0;
    std::string test_id;
    /// Largest |pairing| or |time integrand| seen; residuals within rounding
    /// of this mean the identity holds exactly on the lattice.
    double scale = 0.0;
};

/// Streaming form of the weak residuals: frames are fed in time order and
/// only running sums are kept, so long fine-step runs need no stored
/// trajectory. Reports come back fluid functions first, then kinetic.
class WeakAccumulator {
public:
    WeakAccumulator(std::vector<FluidTestFn> fluid, std::vector<KineticTestFn> kinetic, double lambda, double c,
                    double gamma, const BreakupKernel* kernel);
    void add(const CoupledState& frame);
    std::vector<WeakResidualReport> reports() const;
    std::size_t frames() const noexcept { return frames_; }

private:
    struct Slot {
        double first = 0.0, last = 0.0, integral = 0.0, prev_integrand = 0.0, scale = 0.0;
    };
    std::vector<FluidTestFn> fluid_;
    std::vector<KineticTestFn> kinetic_;
    double lambda_, c_, gamma_;
    const BreakupKernel* kernel_;
    std::vector<Slot> slots_;
    std::size_t frames_ = 0;
    double last_time_ = 0.0;
};

/// |LHS - RHS| of
///   int u(T).phi(T) - int u(0).phi(0) - int_0^T int [u.phi_t + (u x u):grad phi - mu grad u:grad phi]
///   = int_0^T int F.phi,  F = -c int (u - xi) f dxi,
/// by nodal quadrature in x and the trapezoid rule in time.
WeakResidualReport weak_residual_fluid(const Trajectory& traj, const FluidTestFn& phi);

/// |LHS - RHS| of
///   int int f(T) phi(T) - int int f(0) phi(0)
///     - int_0^T int int f (phi_t + xi.grad_x phi + gamma (u - xi).grad_xi phi)
///   = int_0^T int int (-lambda f phi + lambda (G f) phi).
/// A kernel is needed when lambda > 0.
WeakResidualReport weak_residual_kinetic(const Trajectory& traj, const KineticTestFn& phi,
                                         const BreakupKernel* kernel);

/// Breakup part alone on one velocity slice:
/// |int (Gf) phi - int f phi| / int f |phi|, for the shape of phi.
double breakup_weak_defect(const BreakupKernel& kernel, std::span<const double> f, const KineticTestFn& phi);

/// Per-x margin RHS - LHS of
///   m_alpha f <= (|S^{d-1}|/(alpha+d) |f(x,.)|_inf + 1) (m_beta f)^{(alpha+d)/(beta+d)}
/// where f(x, .) is read as constant on each lattice cell.
std::vector<double> interpolation_check(const KineticState& state, double alpha, double beta);
/// int over the cube |xi - center|_inf <= h/2 of |xi|^alpha.
double cell_power_integral(const double* center, int dim, double h, double alpha);
double unit_sphere_area(int dim);

struct EnvelopeCheck {
    std::string name;
    bool pass = true;
    bool near = false;  // exceeded 90% of the envelope somewhere
    double worst_ratio = 0.0;  // max value / envelope
};

struct BoundInputs {
    std::vector<DiagnosticsRecord> rows;
    int dim = 2;
    double lambda = 0.0;
    double gamma = 1.0;
    double K = 1.0;       // from kernel_bounds
    double t_final = 0.0;
    double u_max = 0.0;   // max |u| over the run
};

struct BoundReport {
    std::vector<EnvelopeCheck> checks;
    bool pass = true;
};

/// Finiteness plus Gronwall envelopes:
///   f_max(t) <= f_max(0) e^{d gamma t} (1 + lambda K t e^{lambda K t e^{|d - lambda| T}})
///   M_0(t) <= M_0(0) (1 + 1e-9)
///   M_p(t) <= (M_p(0) + M_0) e^{p gamma U t} - M_0,  p = 1, 2, 3
BoundReport bound_suite(const BoundInputs& in);

}  // namespace spray
