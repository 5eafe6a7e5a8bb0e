#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "spray/grid.hpp"

namespace spray {

/// Angular profile of a self-similar kernel, T(xi, xi') =
/// H(|xi'|) * density(xi/|xi'|, xi'/|xi'|). At xi' = 0 both directions are
/// passed as zero vectors.
struct UnitSphereProfile {
    std::string name;
    std::function<double(std::span<const double> omega, std::span<const double> omega_prime)> density;
    std::function<double(double speed)> radial = [](double) { return 1.0; };

    static UnitSphereProfile isotropic();
    /// Forward-peaked family exp(kappa * omega . omega').
    static UnitSphereProfile von_mises(double kappa);
    /// Supported only on omega == omega'; assembles to the identity map.
    static UnitSphereProfile identity();
};

/// Discrete breakup kernel stored as one dense block per speed shell:
/// block(s)[t * n + j] = T(members[t], members[j]).
class BreakupKernel {
public:
    BreakupKernel(std::shared_ptr<const VelocityGrid> vgrid, std::vector<std::vector<double>> blocks);

    const VelocityGrid& vgrid() const noexcept { return *vgrid_; }
    std::shared_ptr<const VelocityGrid> vgrid_ptr() const noexcept { return vgrid_; }
    std::span<const double> block(std::size_t shell) const noexcept { return blocks_[shell]; }
    /// T(xi_i, xi_j) for arbitrary node indices (zero across shells).
    double entry(std::size_t i, std::size_t j) const noexcept;

    /// g(xi) = sum_j T(xi, xi_j) f(xi_j) w_j on one velocity slice.
    void gain(std::span<const double> f, std::span<double> out) const;

private:
    std::shared_ptr<const VelocityGrid> vgrid_;
    std::vector<std::vector<double>> blocks_;
    std::vector<std::size_t> local_index_;
};

BreakupKernel build_uniform_shell_kernel(std::shared_ptr<const VelocityGrid> vgrid);

/// Raw entries from the profile, then each source column rescaled so that
/// sum_xi T(xi, xi') w_xi = 1 on the grid. Throws if a column has zero mass.
BreakupKernel build_self_similar_kernel(std::shared_ptr<const VelocityGrid> vgrid,
                                        const UnitSphereProfile& profile);

std::vector<double> apply_gain(const BreakupKernel& kernel, std::span<const double> f);

/// Q f = -lambda f + lambda * gain(f).
std::vector<double> apply_breakup_operator(const BreakupKernel& kernel, double lambda,
                                           std::span<const double> f);

struct KernelBounds {
    double normalization_error = 0.0;  // max_j |sum_i T_ij w_i - 1|
    double K = 0.0;                    // max_i sum_j T_ij w_j
};

KernelBounds kernel_bounds(const BreakupKernel& kernel);

/// |sum |xi|^p (Q f) w| / sum |xi|^p f w for each p, on one velocity slice.
std::vector<double> moment_neutrality_residuals(const BreakupKernel& kernel, double lambda,
                                                std::span<const double> f,
                                                std::span<const double> powers);

/// JSON kernel files. Loading re-validates support, sign and normalization.
std::string kernel_to_json(const BreakupKernel& kernel);
BreakupKernel kernel_from_json(const std::string& text, std::shared_ptr<const VelocityGrid> vgrid);

}  // namespace spray
