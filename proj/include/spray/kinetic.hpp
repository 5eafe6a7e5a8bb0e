#pragma once

#include <array>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "spray/grid.hpp"
#include "spray/kernel.hpp"

namespace spray {

/// Nonnegative density f(x, xi) on TorusGrid x VelocityGrid, stored x-major
/// (index = x_node * vgrid.size() + xi_node).
struct KineticState {
    std::shared_ptr<const TorusGrid> xgrid;
    std::shared_ptr<const VelocityGrid> vgrid;
    std::vector<double> f;
    double time = 0.0;

    KineticState() = default;
    KineticState(std::shared_ptr<const TorusGrid> xg, std::shared_ptr<const VelocityGrid> vg, double t = 0.0);

    std::size_t nv() const noexcept { return vgrid->size(); }
    std::span<const double> slice(std::size_t x) const noexcept { return {f.data() + x * nv(), nv()}; }
    std::span<double> slice(std::size_t x) noexcept { return {f.data() + x * nv(), nv()}; }
    double max_value() const noexcept;
    /// Index of the first negative or non-finite entry, or -1.
    std::int64_t first_invalid() const noexcept;
};

/// Interpolation stencil for semi-Lagrangian lookups: 2, 4 points per axis
/// from the floor node, or 5 points centered on the nearest node.
enum class InterpOrder { linear, cubic, quartic };

/// A velocity field frozen in time, sampled at arbitrary torus points by
/// periodic interpolation of its nodal values. Stored component-major.
class FrozenVelocity {
public:
    FrozenVelocity() = default;
    FrozenVelocity(std::shared_ptr<const TorusGrid> grid, std::vector<std::vector<double>> comps,
                   InterpOrder order = InterpOrder::cubic);
    /// Spatially constant field.
    static FrozenVelocity uniform(std::shared_ptr<const TorusGrid> grid, std::span<const double> value);

    const TorusGrid& grid() const noexcept { return *grid_; }
    int dim() const noexcept { return grid_->dim(); }
    /// Nodal value of component a at node j.
    double at(int a, std::size_t j) const noexcept { return comps_[a][j]; }
    const std::vector<double>& component(int a) const noexcept { return comps_[a]; }
    double max_norm() const noexcept { return max_norm_; }
    /// Periodic interpolation at x; quartic is sampled as cubic.
    void sample(const double* x, double* out) const noexcept;

private:
    std::shared_ptr<const TorusGrid> grid_;
    std::vector<std::vector<double>> comps_;
    InterpOrder order_ = InterpOrder::cubic;
    bool constant_ = false;
    double max_norm_ = 0.0;
};

/// Callable velocity field u(x) used by the characteristic integrator; tests
/// plug closed-form fields in here.
using VelocityFn = std::function<void(const double* x, double* out)>;

struct FootPointField {
    int dim = 0;
    std::vector<double> x0;   // foot positions, wrapped into [0, L)
    std::vector<double> xi0;  // foot velocities
    double amplitude = 1.0;   // e^{dim gamma dt}
};

/// Integrates dx/dtau = xi, dxi/dtau = gamma (u(x) - xi) backward over dt
/// from (x, xi) with n_sub classical RK4 steps. Positions are not wrapped.
void integrate_characteristic(const VelocityFn& u, int dim, double dt, int n_sub, double* x, double* xi,
                              double gamma = 1.0);

/// Foot points of every phase node. Throws InvariantViolation("velocity
/// cutoff") when a foot velocity leaves r_max e^dt + |u|_inf (e^dt - 1)
/// (with gamma dt in place of dt).
FootPointField backward_foot_points(const TorusGrid& xg, const VelocityGrid& vg, const FrozenVelocity& u,
                                    double dt, int n_sub = 4, double gamma = 1.0);

struct TransportOptions {
    int n_sub = 4;
    double gamma = 1.0;
    InterpOrder x_order = InterpOrder::cubic;
    InterpOrder v_order = InterpOrder::quartic;
    /// Rescale the result so the global mass equals the input mass.
    bool conserve_mass = true;
};

struct TransportReport {
    double mass_before = 0.0;
    double mass_after = 0.0;  // before any mass rescaling
};

/// f_new(x, xi) = e^{dim gamma dt} * Interp(f)(foot(x, xi)). The interpolant is
/// clipped to [0, max of the enclosing cell corners], so f >= 0 is kept.
/// The centered velocity stencil keeps low speed moments free of the
/// one-sided bias a floor-based stencil has at small displacements.
KineticState transport_step(const KineticState& state, const FrozenVelocity& u, double dt,
                            const TransportOptions& opt = {}, TransportReport* report = nullptr);

struct PicardOptions {
    double tol = 1e-10;
    int max_iter = 200;
    /// When set, every iterate is compared entrywise with its predecessor.
    bool check_monotone = false;
};

struct PicardReport {
    int iterations = 0;
    double last_increment = 0.0;
    double contraction = 0.0;
    /// Entries with f^n < f^{n-1}; always 0 for a correct iteration.
    std::size_t monotonicity_violations = 0;
};

/// f^n = e^{-lambda dt} f_in + (1 - e^{-lambda dt}) Gain(f^{n-1}), f^0 = 0.
/// Returns the first iterate with |f^n - f^{n-1}|_inf <= tol.
KineticState breakup_substep_picard(const KineticState& state, const BreakupKernel& kernel, double lambda,
                                    double dt, const PicardOptions& opt = {}, PicardReport* report = nullptr);

/// exp(lambda dt (G - I)) f per spatial node by truncated power series.
KineticState breakup_substep_exact(const KineticState& state, const BreakupKernel& kernel, double lambda,
                                   double dt);

/// m_alpha f(x) = sum_xi |xi|^alpha f w.
std::vector<double> moment(const KineticState& state, double alpha);
/// M_alpha f = sum_x m_alpha f(x) h_x^d.
double global_moment(const KineticState& state, double alpha);
/// int xi f dxi at each node, component-major [dim][x].
std::vector<std::vector<double>> vector_moment(const KineticState& state);

}  // namespace spray
