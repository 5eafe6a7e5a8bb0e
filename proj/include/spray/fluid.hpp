#pragma once

#include <complex>
#include <memory>
#include <span>
#include <vector>

#include "spray/grid.hpp"
#include "spray/kinetic.hpp"

namespace spray {

using cplx = std::complex<double>;

/// FFT plans, wavenumbers and the Galerkin mask for one torus grid.
/// Coefficients are normalized: u_hat_k = N^{-d} sum_j u_j e^{-i k x_j}.
/// Not safe for concurrent use; it owns its transform buffers.
class SpectralContext {
public:
    SpectralContext(std::shared_ptr<const TorusGrid> grid, int m_modes);
    ~SpectralContext();
    SpectralContext(const SpectralContext&) = delete;
    SpectralContext& operator=(const SpectralContext&) = delete;

    const TorusGrid& grid() const noexcept { return *grid_; }
    std::shared_ptr<const TorusGrid> grid_ptr() const noexcept { return grid_; }
    int m_modes() const noexcept { return m_modes_; }
    std::size_t size() const noexcept { return grid_->size(); }

    /// Physical wavenumber component of mode j along axis a.
    double k(std::size_t j, int a) const noexcept { return k_[j * kMaxDim + a]; }
    double k2(std::size_t j) const noexcept { return k2_[j]; }
    /// True when |k|_inf <= m_modes.
    bool retained(std::size_t j) const noexcept { return mask_[j] != 0; }

    std::vector<cplx> forward(std::span<const double> field);
    std::vector<double> inverse(std::span<const cplx> coeffs);

    /// Largest m_modes for which the 2/3 rule removes all aliasing.
    static int max_dealiased_modes(int n_x) { return (n_x - 1) / 3; }

private:
    std::shared_ptr<const TorusGrid> grid_;
    int m_modes_;
    std::vector<double> k_;
    std::vector<double> k2_;
    std::vector<unsigned char> mask_;
    struct Plans;
    std::unique_ptr<Plans> plans_;
};

/// Divergence-free Galerkin velocity, one coefficient array per component.
struct FluidState {
    std::shared_ptr<SpectralContext> ctx;
    std::vector<std::vector<cplx>> u_hat;
    double time = 0.0;
    double mu = 0.0;

    FluidState() = default;
    FluidState(std::shared_ptr<SpectralContext> c, double viscosity, double t = 0.0);
    int dim() const noexcept { return ctx->grid().dim(); }
};

/// Mean-zero pressure on the torus grid.
struct PressureField {
    std::vector<double> values;
};

/// F = -c (u m0 - m1) on the torus grid, component-major.
struct DragForce {
    std::vector<std::vector<double>> comps;
};

/// (I - k k^T/|k|^2) on every k != 0 mode; the mean mode is untouched.
void leray_project(const SpectralContext& ctx, std::vector<std::vector<cplx>>& v_hat);
std::vector<std::vector<cplx>> leray_projected(const SpectralContext& ctx, std::vector<std::vector<cplx>> v_hat);

/// Galerkin state from nodal values: transform, truncate, project.
FluidState fluid_from_physical(std::shared_ptr<SpectralContext> ctx, double mu,
                               const std::vector<std::vector<double>>& comps, double t = 0.0);
std::vector<std::vector<double>> to_physical(const FluidState& u);

DragForce drag_force(const KineticState& kin, const std::vector<std::vector<double>>& u_nodal, double c);
DragForce drag_force(const KineticState& kin, const FluidState& u, double c);

struct NsOptions {
    double cfl_max = 0.5;
};

/// One integrating-factor Heun step of
/// du/dt = -P[(u.grad)u] - mu |k|^2 u + P F, F held fixed over the step.
FluidState ns_step(const FluidState& u, const DragForce& force, double dt, const NsOptions& opt = {});

/// Solves -Lap P = div((u.grad)u - F) spectrally, mean zero.
PressureField recover_pressure(const FluidState& u, const DragForce& force);

/// 1/2 int |u|^2.
double fluid_energy(const FluidState& u);
/// int |grad u|^2 (without the viscosity factor).
double grad_norm2(const FluidState& u);
/// max_k |k . u_hat_k| / max |u_hat|.
double divergence_residual(const FluidState& u);
/// int u . F over the torus.
double force_power(const FluidState& u, const DragForce& force);
/// max over nodes of |u|.
double max_speed(const std::vector<std::vector<double>>& comps);

struct TaylorGreen {
    FluidState state;
    PressureField pressure;
};

/// u = (sin kx cos ky, -cos kx sin ky) e^{-2 mu k^2 t},
/// P = (cos 2kx + cos 2ky) e^{-4 mu k^2 t}/4, with k = 2 pi / L. dim must be 2.
TaylorGreen taylor_green_reference(std::shared_ptr<SpectralContext> ctx, double t, double mu,
                                   double amplitude = 1.0);

}  // namespace spray
