#include "spray/kernel.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "spray/error.hpp"

namespace spray {

namespace {

constexpr double kNormTol = 1e-12;

std::vector<double> direction(std::span<const double> xi, double scale) {
    std::vector<double> out(xi.begin(), xi.end());
    if (scale > 0.0)
        for (double& v : out) v /= scale;
    else
        std::fill(out.begin(), out.end(), 0.0);
    return out;
}

}  // namespace

UnitSphereProfile UnitSphereProfile::isotropic() {
    return {"isotropic", [](std::span<const double>, std::span<const double>) { return 1.0; }};
}

UnitSphereProfile UnitSphereProfile::von_mises(double kappa) {
    return {"von_mises", [kappa](std::span<const double> w, std::span<const double> wp) {
                double dot = 0.0;
                for (std::size_t a = 0; a < w.size(); ++a) dot += w[a] * wp[a];
                return std::exp(kappa * dot);
            }};
}

UnitSphereProfile UnitSphereProfile::identity() {
    return {"identity", [](std::span<const double> w, std::span<const double> wp) {
                for (std::size_t a = 0; a < w.size(); ++a)
                    if (w[a] != wp[a]) return 0.0;
                return 1.0;
            }};
}

BreakupKernel::BreakupKernel(std::shared_ptr<const VelocityGrid> vgrid,
                             std::vector<std::vector<double>> blocks)
    : vgrid_(std::move(vgrid)), blocks_(std::move(blocks)) {
    const auto& shells = vgrid_->shells();
    if (blocks_.size() != shells.size())
        throw ContractError("breakup kernel: one block per shell required");
    local_index_.assign(vgrid_->size(), 0);
    for (std::size_t s = 0; s < shells.size(); ++s) {
        const std::size_t n = shells[s].members.size();
        if (blocks_[s].size() != n * n) throw ContractError("breakup kernel: block size mismatch");
        for (std::size_t t = 0; t < n; ++t) local_index_[shells[s].members[t]] = t;
    }
}

double BreakupKernel::entry(std::size_t i, std::size_t j) const noexcept {
    const std::size_t s = vgrid_->shell_of(i);
    if (s != vgrid_->shell_of(j)) return 0.0;
    const std::size_t n = vgrid_->shells()[s].members.size();
    return blocks_[s][local_index_[i] * n + local_index_[j]];
}

void BreakupKernel::gain(std::span<const double> f, std::span<double> out) const {
    const auto& shells = vgrid_->shells();
    for (std::size_t s = 0; s < shells.size(); ++s) {
        const auto& mem = shells[s].members;
        const std::size_t n = mem.size();
        const double* b = blocks_[s].data();
        for (std::size_t t = 0; t < n; ++t) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += b[t * n + j] * f[mem[j]] * vgrid_->weight(mem[j]);
            out[mem[t]] = acc;
        }
    }
}

BreakupKernel build_uniform_shell_kernel(std::shared_ptr<const VelocityGrid> vgrid) {
    const auto& shells = vgrid->shells();
    if (shells.empty()) throw ContractError("uniform kernel: velocity grid has no shells");
    std::vector<std::vector<double>> blocks;
    blocks.reserve(shells.size());
    for (const SpeedShell& s : shells) {
        const std::size_t n = s.members.size();
        blocks.emplace_back(n * n, 1.0 / s.total_weight);
    }
    return BreakupKernel(std::move(vgrid), std::move(blocks));
}

BreakupKernel build_self_similar_kernel(std::shared_ptr<const VelocityGrid> vgrid,
                                        const UnitSphereProfile& profile) {
    const auto& shells = vgrid->shells();
    std::vector<std::vector<double>> blocks;
    blocks.reserve(shells.size());
    for (const SpeedShell& s : shells) {
        const std::size_t n = s.members.size();
        std::vector<double> b(n * n, 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t src = s.members[j];
            const double sp = vgrid->speed(src);
            const auto wp = direction(vgrid->node(src), sp);
            const double h = profile.radial(sp);
            double mass = 0.0;
            for (std::size_t t = 0; t < n; ++t) {
                const std::size_t dst = s.members[t];
                const auto w = direction(vgrid->node(dst), sp);
                const double v = h * profile.density(w, wp);
                if (!(v >= 0.0) || !std::isfinite(v))
                    throw ContractError("self-similar kernel: profile '" + profile.name +
                                        "' returned a negative or non-finite density");
                b[t * n + j] = v;
                mass += v * vgrid->weight(dst);
            }
            if (!(mass > 0.0))
                throw ContractError("self-similar kernel: profile '" + profile.name +
                                    "' has zero mass on the shell of speed " + std::to_string(sp));
            for (std::size_t t = 0; t < n; ++t) b[t * n + j] /= mass;
        }
        blocks.push_back(std::move(b));
    }
    return BreakupKernel(std::move(vgrid), std::move(blocks));
}

std::vector<double> apply_gain(const BreakupKernel& kernel, std::span<const double> f) {
    if (f.size() != kernel.vgrid().size())
        throw ContractError("apply_gain: f has " + std::to_string(f.size()) + " entries, grid has " +
                            std::to_string(kernel.vgrid().size()));
    std::vector<double> g(f.size(), 0.0);
    kernel.gain(f, g);
    return g;
}

std::vector<double> apply_breakup_operator(const BreakupKernel& kernel, double lambda,
                                           std::span<const double> f) {
    if (lambda < 0.0) throw ContractError("breakup operator: lambda must be >= 0");
    std::vector<double> q = apply_gain(kernel, f);
    for (std::size_t i = 0; i < q.size(); ++i) q[i] = lambda * q[i] - lambda * f[i];
    return q;
}

KernelBounds kernel_bounds(const BreakupKernel& kernel) {
    const VelocityGrid& g = kernel.vgrid();
    KernelBounds kb;
    for (std::size_t s = 0; s < g.shells().size(); ++s) {
        const auto& mem = g.shells()[s].members;
        const std::size_t n = mem.size();
        const auto b = kernel.block(s);
        for (std::size_t j = 0; j < n; ++j) {
            double col = 0.0;
            for (std::size_t t = 0; t < n; ++t) col += b[t * n + j] * g.weight(mem[t]);
            kb.normalization_error = std::max(kb.normalization_error, std::abs(col - 1.0));
        }
        for (std::size_t t = 0; t < n; ++t) {
            double row = 0.0;
            for (std::size_t j = 0; j < n; ++j) row += b[t * n + j] * g.weight(mem[j]);
            kb.K = std::max(kb.K, row);
        }
    }
    return kb;
}

std::vector<double> moment_neutrality_residuals(const BreakupKernel& kernel, double lambda,
                                                std::span<const double> f,
                                                std::span<const double> powers) {
    const VelocityGrid& g = kernel.vgrid();
    const std::vector<double> q = apply_breakup_operator(kernel, lambda, f);
    std::vector<double> out;
    for (double p : powers) {
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double wp = std::pow(g.speed(i), p) * g.weight(i);
            num += wp * q[i];
            den += wp * std::abs(f[i]);
        }
        out.push_back(den > 0.0 ? std::abs(num) / den : std::abs(num));
    }
    return out;
}

std::string kernel_to_json(const BreakupKernel& kernel) {
    const VelocityGrid& g = kernel.vgrid();
    nlohmann::json j;
    j["format"] = "spray-kernel";
    j["version"] = 1;
    j["dim"] = g.dim();
    j["n_v"] = g.n_v();
    j["r_max"] = g.r_max();
    nlohmann::json shells = nlohmann::json::array();
    for (std::size_t s = 0; s < g.shells().size(); ++s) {
        const auto b = kernel.block(s);
        shells.push_back({{"members", g.shells()[s].members},
                          {"block", std::vector<double>(b.begin(), b.end())}});
    }
    j["shells"] = std::move(shells);
    return j.dump(1);
}

BreakupKernel kernel_from_json(const std::string& text, std::shared_ptr<const VelocityGrid> vgrid) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ContractError(std::string("kernel file: malformed JSON: ") + e.what());
    }
    try {
        if (j.at("format") != "spray-kernel" || j.at("version") != 1)
            throw ContractError("kernel file: unsupported format or version");
        if (j.at("dim").get<int>() != vgrid->dim() || j.at("n_v").get<int>() != vgrid->n_v() ||
            j.at("r_max").get<double>() != vgrid->r_max())
            throw ContractError("kernel file: grid parameters do not match the configuration");
        const auto& shells = j.at("shells");
        if (shells.size() != vgrid->shells().size())
            throw ContractError("kernel file: shell count does not match the velocity grid");
        std::vector<std::vector<double>> blocks;
        for (std::size_t s = 0; s < shells.size(); ++s) {
            const auto members = shells[s].at("members").get<std::vector<std::size_t>>();
            if (members != vgrid->shells()[s].members)
                throw ContractError("kernel file: shell " + std::to_string(s) +
                                    " members differ from the grid (support violation)");
            auto b = shells[s].at("block").get<std::vector<double>>();
            for (double v : b)
                if (!(v >= 0.0) || !std::isfinite(v))
                    throw ContractError("kernel file: negative or non-finite entry in shell " +
                                        std::to_string(s));
            blocks.push_back(std::move(b));
        }
        BreakupKernel k(std::move(vgrid), std::move(blocks));
        const KernelBounds kb = kernel_bounds(k);
        if (kb.normalization_error > kNormTol)
            throw ContractError("kernel file: normalization error " +
                                std::to_string(kb.normalization_error) + " exceeds 1e-12");
        return k;
    } catch (const nlohmann::json::exception& e) {
        throw ContractError(std::string("kernel file: ") + e.what());
    }
}

}  // namespace spray
