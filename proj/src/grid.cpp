#include "spray/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "spray/error.hpp"

namespace spray {

TorusGrid::TorusGrid(int dim, int n_x, double length)
    : dim_(dim), n_x_(n_x), length_(length), spacing_(length / n_x) {
    size_ = 1;
    for (int a = 0; a < dim; ++a) size_ *= static_cast<std::size_t>(n_x);
    cell_volume_ = std::pow(spacing_, dim);
}

std::array<int, kMaxDim> TorusGrid::unflatten(std::size_t j) const noexcept {
    std::array<int, kMaxDim> idx{0, 0, 0};
    for (int a = dim_ - 1; a >= 0; --a) {
        idx[a] = static_cast<int>(j % static_cast<std::size_t>(n_x_));
        j /= static_cast<std::size_t>(n_x_);
    }
    return idx;
}

std::size_t TorusGrid::flatten(const std::array<int, kMaxDim>& idx) const noexcept {
    std::size_t j = 0;
    for (int a = 0; a < dim_; ++a) j = j * static_cast<std::size_t>(n_x_) + static_cast<std::size_t>(idx[a]);
    return j;
}

double TorusGrid::coord(std::size_t j, int axis) const noexcept {
    return unflatten(j)[axis] * spacing_;
}

TorusGrid make_torus_grid(int dim, int n_x, double length) {
    if (dim < 1 || dim > kMaxDim) throw ContractError("torus grid: dim must be 1, 2 or 3");
    if (n_x < 4) throw ContractError("torus grid: n_x must be >= 4, got " + std::to_string(n_x));
    if (n_x % 2 != 0) throw ContractError("torus grid: n_x must be even, got " + std::to_string(n_x));
    if (!(length > 0.0)) throw ContractError("torus grid: length must be positive");
    return TorusGrid(dim, n_x, length);
}

std::int64_t VelocityGrid::node_at(const std::array<int, kMaxDim>& idx) const noexcept {
    std::size_t flat = 0;
    for (int a = 0; a < dim_; ++a) {
        if (idx[a] < 0 || idx[a] >= n_v_) return -1;
        flat = flat * static_cast<std::size_t>(n_v_) + static_cast<std::size_t>(idx[a]);
    }
    return lattice_to_node_[flat];
}

std::size_t VelocityGrid::mirror(std::size_t i) const noexcept {
    std::array<int, kMaxDim> m{0, 0, 0};
    for (int a = 0; a < dim_; ++a) m[a] = n_v_ - 1 - lattice_idx_[i][a];
    return static_cast<std::size_t>(node_at(m));
}

double VelocityGrid::total_weight() const noexcept {
    return std::accumulate(weights_.begin(), weights_.end(), 0.0);
}

VelocityGrid make_velocity_grid(int dim, int n_v, double r_max, double shell_tol) {
    if (dim < 1 || dim > kMaxDim) throw ContractError("velocity grid: dim must be 1, 2 or 3");
    if (n_v < 3) throw ContractError("velocity grid: n_v must be >= 3, got " + std::to_string(n_v));
    if (!(r_max > 0.0)) throw ContractError("velocity grid: r_max must be positive");
    if (!(shell_tol > 0.0)) throw ContractError("velocity grid: shell_tol must be positive");

    VelocityGrid g;
    g.dim_ = dim;
    g.n_v_ = n_v;
    g.r_max_ = r_max;
    g.shell_tol_ = shell_tol;
    g.spacing_ = 2.0 * r_max / (n_v - 1);

    // Symmetric construction so that -xi is bit-exactly a lattice coordinate.
    const double half = r_max / (n_v - 1);
    auto coord = [&](int i) { return (2 * i - (n_v - 1)) * half; };

    std::size_t lattice_size = 1;
    for (int a = 0; a < dim; ++a) lattice_size *= static_cast<std::size_t>(n_v);
    g.lattice_to_node_.assign(lattice_size, -1);

    const double r2_max = r_max * r_max * (1.0 + 1e-12);
    for (std::size_t flat = 0; flat < lattice_size; ++flat) {
        std::array<int, kMaxDim> idx{0, 0, 0};
        std::size_t rem = flat;
        for (int a = dim - 1; a >= 0; --a) {
            idx[a] = static_cast<int>(rem % static_cast<std::size_t>(n_v));
            rem /= static_cast<std::size_t>(n_v);
        }
        double r2 = 0.0;
        for (int a = 0; a < dim; ++a) r2 += coord(idx[a]) * coord(idx[a]);
        if (r2 > r2_max) continue;
        g.lattice_to_node_[flat] = static_cast<std::int64_t>(g.speeds_.size());
        for (int a = 0; a < dim; ++a) g.coords_.push_back(coord(idx[a]));
        g.speeds_.push_back(std::sqrt(r2));
        g.weights_.push_back(std::pow(g.spacing_, dim));
        g.lattice_idx_.push_back(idx);
    }
    if (g.speeds_.empty()) throw ContractError("velocity grid: no lattice node inside the ball");

    std::vector<std::size_t> order(g.speeds_.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return g.speeds_[a] < g.speeds_[b]; });

    g.shell_of_.assign(g.speeds_.size(), 0);
    for (std::size_t k = 0; k < order.size(); ++k) {
        const std::size_t i = order[k];
        if (k == 0 || g.speeds_[i] - g.speeds_[order[k - 1]] > shell_tol) g.shells_.emplace_back();
        SpeedShell& s = g.shells_.back();
        s.members.push_back(i);
        s.total_weight += g.weights_[i];
        g.shell_of_[i] = g.shells_.size() - 1;
    }
    for (SpeedShell& s : g.shells_) {
        std::sort(s.members.begin(), s.members.end());
        double sum = 0.0;
        for (std::size_t i : s.members) sum += g.speeds_[i];
        s.radius = sum / static_cast<double>(s.members.size());
    }
    return g;
}

}  // namespace spray
