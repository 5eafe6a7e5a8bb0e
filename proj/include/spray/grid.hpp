#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace spray {

inline constexpr int kMaxDim = 3;

/// Periodic grid on [0, length)^dim with n_x nodes per axis.
/// Flat node index is row-major with the last axis fastest.
class TorusGrid {
public:
    TorusGrid() = default;
    TorusGrid(int dim, int n_x, double length);

    int dim() const noexcept { return dim_; }
    int n_x() const noexcept { return n_x_; }
    double length() const noexcept { return length_; }
    double spacing() const noexcept { return spacing_; }
    std::size_t size() const noexcept { return size_; }
    /// h_x^dim, the quadrature weight of one spatial node.
    double cell_volume() const noexcept { return cell_volume_; }

    std::array<int, kMaxDim> unflatten(std::size_t j) const noexcept;
    std::size_t flatten(const std::array<int, kMaxDim>& idx) const noexcept;
    /// Coordinate of node j along `axis`.
    double coord(std::size_t j, int axis) const noexcept;
    /// Periodic wrap of an index along an axis.
    int wrap(int i) const noexcept {
        const int r = i % n_x_;
        return r < 0 ? r + n_x_ : r;
    }

    bool operator==(const TorusGrid&) const = default;

private:
    int dim_ = 0;
    int n_x_ = 0;
    double length_ = 0.0;
    double spacing_ = 0.0;
    std::size_t size_ = 0;
    double cell_volume_ = 0.0;
};

TorusGrid make_torus_grid(int dim, int n_x, double length);

/// Nodes of a velocity grid sharing one speed (within shell_tol).
struct SpeedShell {
    double radius = 0.0;
    std::vector<std::size_t> members;
    double total_weight = 0.0;
};

/// Cartesian velocity lattice on [-r_max, r_max]^dim (n_v nodes per axis,
/// spacing 2 r_max/(n_v-1)), restricted to the closed ball |xi| <= r_max.
class VelocityGrid {
public:
    VelocityGrid() = default;

    int dim() const noexcept { return dim_; }
    int n_v() const noexcept { return n_v_; }
    double r_max() const noexcept { return r_max_; }
    double shell_tol() const noexcept { return shell_tol_; }
    double spacing() const noexcept { return spacing_; }
    std::size_t size() const noexcept { return speeds_.size(); }

    std::span<const double> node(std::size_t i) const noexcept {
        return {coords_.data() + i * static_cast<std::size_t>(dim_),
                static_cast<std::size_t>(dim_)};
    }
    double speed(std::size_t i) const noexcept { return speeds_[i]; }
    double weight(std::size_t i) const noexcept { return weights_[i]; }
    std::span<const double> weights() const noexcept { return weights_; }
    std::span<const double> speeds() const noexcept { return speeds_; }

    const std::vector<SpeedShell>& shells() const noexcept { return shells_; }
    std::size_t shell_of(std::size_t i) const noexcept { return shell_of_[i]; }

    /// Lattice coordinate of integer index i along any axis.
    double lattice_coord(int i) const noexcept { return -r_max_ + i * spacing_; }
    /// Node index at a lattice multi-index, or -1 when the lattice point lies
    /// outside the ball or outside [0, n_v)^dim.
    std::int64_t node_at(const std::array<int, kMaxDim>& idx) const noexcept;
    const std::array<int, kMaxDim>& lattice_index(std::size_t i) const noexcept {
        return lattice_idx_[i];
    }
    /// Index of the node -xi.
    std::size_t mirror(std::size_t i) const noexcept;

    /// Sum of weights, i.e. the quadrature volume of the gridded ball.
    double total_weight() const noexcept;

    friend VelocityGrid make_velocity_grid(int, int, double, double);

private:
    int dim_ = 0;
    int n_v_ = 0;
    double r_max_ = 0.0;
    double shell_tol_ = 0.0;
    double spacing_ = 0.0;
    std::vector<double> coords_;
    std::vector<double> speeds_;
    std::vector<double> weights_;
    std::vector<std::array<int, kMaxDim>> lattice_idx_;
    std::vector<std::int64_t> lattice_to_node_;
    std::vector<SpeedShell> shells_;
    std::vector<std::size_t> shell_of_;
};

/// Builds the lattice, its midpoint weights h_v^dim and the speed shells.
/// Shells group consecutive sorted speeds whose gap is <= shell_tol.
VelocityGrid make_velocity_grid(int dim, int n_v, double r_max, double shell_tol);

/// Default shell tolerance for a cutoff radius.
inline double default_shell_tol(double r_max) { return 1e-9 * r_max; }

}  // namespace spray
