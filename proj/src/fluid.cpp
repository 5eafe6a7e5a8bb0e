#include "spray/fluid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <fftw3.h>

#include "spray/error.hpp"
#include "spray/parallel.hpp"

namespace spray {

struct SpectralContext::Plans {
    fftw_complex* buf = nullptr;
    fftw_plan fwd = nullptr;
    fftw_plan bwd = nullptr;
    ~Plans() {
        if (fwd) fftw_destroy_plan(fwd);
        if (bwd) fftw_destroy_plan(bwd);
        if (buf) fftw_free(buf);
    }
};

SpectralContext::SpectralContext(std::shared_ptr<const TorusGrid> grid, int m_modes)
    : grid_(std::move(grid)), m_modes_(m_modes), plans_(std::make_unique<Plans>()) {
    const int n = grid_->n_x();
    const int dim = grid_->dim();
    if (m_modes < 0 || m_modes > max_dealiased_modes(n))
        throw ContractError("spectral context: m_modes must lie in [0, " + std::to_string(max_dealiased_modes(n)) +
                            "] for n_x = " + std::to_string(n));
    const std::size_t N = grid_->size();
    k_.assign(N * kMaxDim, 0.0);
    k2_.assign(N, 0.0);
    mask_.assign(N, 0);
    const double k0 = 2.0 * std::numbers::pi / grid_->length();
    for (std::size_t j = 0; j < N; ++j) {
        const auto idx = grid_->unflatten(j);
        bool keep = true;
        for (int a = 0; a < dim; ++a) {
            const int ki = idx[a] <= n / 2 ? idx[a] : idx[a] - n;
            keep = keep && std::abs(ki) <= m_modes;
            k_[j * kMaxDim + a] = k0 * ki;
            k2_[j] += k_[j * kMaxDim + a] * k_[j * kMaxDim + a];
        }
        mask_[j] = keep ? 1 : 0;
    }
    int dims[kMaxDim];
    for (int a = 0; a < dim; ++a) dims[a] = n;
    plans_->buf = fftw_alloc_complex(N);
    plans_->fwd = fftw_plan_dft(dim, dims, plans_->buf, plans_->buf, FFTW_FORWARD, FFTW_ESTIMATE);
    plans_->bwd = fftw_plan_dft(dim, dims, plans_->buf, plans_->buf, FFTW_BACKWARD, FFTW_ESTIMATE);
}

SpectralContext::~SpectralContext() = default;

std::vector<cplx> SpectralContext::forward(std::span<const double> field) {
    const std::size_t N = size();
    for (std::size_t j = 0; j < N; ++j) {
        plans_->buf[j][0] = field[j];
        plans_->buf[j][1] = 0.0;
    }
    fftw_execute(plans_->fwd);
    std::vector<cplx> out(N);
    const double s = 1.0 / static_cast<double>(N);
    for (std::size_t j = 0; j < N; ++j) out[j] = cplx(plans_->buf[j][0] * s, plans_->buf[j][1] * s);
    return out;
}

std::vector<double> SpectralContext::inverse(std::span<const cplx> coeffs) {
    const std::size_t N = size();
    for (std::size_t j = 0; j < N; ++j) {
        plans_->buf[j][0] = coeffs[j].real();
        plans_->buf[j][1] = coeffs[j].imag();
    }
    fftw_execute(plans_->bwd);
    std::vector<double> out(N);
    for (std::size_t j = 0; j < N; ++j) out[j] = plans_->buf[j][0];
    return out;
}

FluidState::FluidState(std::shared_ptr<SpectralContext> c, double viscosity, double t)
    : ctx(std::move(c)), time(t), mu(viscosity) {
    u_hat.assign(ctx->grid().dim(), std::vector<cplx>(ctx->size(), cplx(0.0, 0.0)));
}

void leray_project(const SpectralContext& ctx, std::vector<std::vector<cplx>>& v) {
    const int dim = ctx.grid().dim();
    for (std::size_t j = 0; j < ctx.size(); ++j) {
        const double k2 = ctx.k2(j);
        if (k2 == 0.0) continue;
        cplx kv(0.0, 0.0);
        for (int a = 0; a < dim; ++a) kv += ctx.k(j, a) * v[a][j];
        for (int a = 0; a < dim; ++a) v[a][j] -= ctx.k(j, a) * kv / k2;
    }
}

std::vector<std::vector<cplx>> leray_projected(const SpectralContext& ctx, std::vector<std::vector<cplx>> v) {
    leray_project(ctx, v);
    return v;
}

namespace {

void truncate(const SpectralContext& ctx, std::vector<cplx>& c) {
    for (std::size_t j = 0; j < ctx.size(); ++j)
        if (!ctx.retained(j)) c[j] = cplx(0.0, 0.0);
}

/// -P T[(u.grad)u] + PF for the Galerkin system; pf is the projected force.
std::vector<std::vector<cplx>> rhs(SpectralContext& ctx, const std::vector<std::vector<cplx>>& uh,
                                   const std::vector<std::vector<cplx>>& pf) {
    const int dim = ctx.grid().dim();
    const std::size_t N = ctx.size();
    std::vector<std::vector<double>> u(dim);
    for (int a = 0; a < dim; ++a) u[a] = ctx.inverse(uh[a]);
    std::vector<std::vector<cplx>> out(dim);
    std::vector<cplx> d(N);
    for (int a = 0; a < dim; ++a) {
        std::vector<double> adv(N, 0.0);
        for (int b = 0; b < dim; ++b) {
            for (std::size_t j = 0; j < N; ++j) d[j] = cplx(0.0, ctx.k(j, b)) * uh[a][j];
            const std::vector<double> g = ctx.inverse(d);
            for (std::size_t j = 0; j < N; ++j) adv[j] += u[b][j] * g[j];
        }
        out[a] = ctx.forward(adv);
        truncate(ctx, out[a]);
    }
    leray_project(ctx, out);
    for (int a = 0; a < dim; ++a)
        for (std::size_t j = 0; j < N; ++j) out[a][j] = pf[a][j] - out[a][j];
    return out;
}

}  // namespace

FluidState fluid_from_physical(std::shared_ptr<SpectralContext> ctx, double mu,
                               const std::vector<std::vector<double>>& comps, double t) {
    FluidState s(ctx, mu, t);
    if (static_cast<int>(comps.size()) != s.dim()) throw ContractError("fluid_from_physical: component count");
    for (int a = 0; a < s.dim(); ++a) {
        s.u_hat[a] = ctx->forward(comps[a]);
        truncate(*ctx, s.u_hat[a]);
    }
    leray_project(*ctx, s.u_hat);
    return s;
}

std::vector<std::vector<double>> to_physical(const FluidState& u) {
    std::vector<std::vector<double>> out;
    for (int a = 0; a < u.dim(); ++a) out.push_back(u.ctx->inverse(u.u_hat[a]));
    return out;
}

DragForce drag_force(const KineticState& kin, const std::vector<std::vector<double>>& u, double c) {
    const int dim = kin.xgrid->dim();
    if (static_cast<int>(u.size()) != dim || u[0].size() != kin.xgrid->size())
        throw ContractError("drag_force: velocity grid does not match the kinetic grid");
    const std::vector<double> m0 = moment(kin, 0.0);
    const auto m1 = vector_moment(kin);
    DragForce F;
    F.comps.assign(dim, std::vector<double>(kin.xgrid->size()));
    for (int a = 0; a < dim; ++a)
        for (std::size_t j = 0; j < m0.size(); ++j) F.comps[a][j] = -c * (u[a][j] * m0[j] - m1[a][j]);
    return F;
}

DragForce drag_force(const KineticState& kin, const FluidState& u, double c) {
    if (u.ctx->grid().size() != kin.xgrid->size()) throw ContractError("drag_force: grid mismatch");
    return drag_force(kin, to_physical(u), c);
}

double max_speed(const std::vector<std::vector<double>>& comps) {
    double m = 0.0;
    for (std::size_t j = 0; j < comps[0].size(); ++j) {
        double s = 0.0;
        for (const auto& c : comps) s += c[j] * c[j];
        m = std::max(m, s);
    }
    return std::sqrt(m);
}

FluidState ns_step(const FluidState& u, const DragForce& force, double dt, const NsOptions& opt) {
    if (!(dt > 0.0)) throw ContractError("ns_step: dt must be positive");
    SpectralContext& ctx = *u.ctx;
    const int dim = u.dim();
    const std::size_t N = ctx.size();
    if (static_cast<int>(force.comps.size()) != dim || force.comps[0].size() != N)
        throw ContractError("ns_step: force grid does not match the fluid grid");

    const double umax = max_speed(to_physical(u));
    const double cfl = umax * dt / ctx.grid().spacing();
    if (cfl > opt.cfl_max)
        throw ContractError("ns_step: CFL number " + std::to_string(cfl) + " exceeds cfl_max " +
                            std::to_string(opt.cfl_max) + "; reduce dt");

    std::vector<std::vector<cplx>> pf(dim);
    for (int a = 0; a < dim; ++a) {
        pf[a] = ctx.forward(force.comps[a]);
        truncate(ctx, pf[a]);
    }
    leray_project(ctx, pf);

    std::vector<double> E(N);
    for (std::size_t j = 0; j < N; ++j) E[j] = std::exp(-u.mu * ctx.k2(j) * dt);

    const auto n0 = rhs(ctx, u.u_hat, pf);
    std::vector<std::vector<cplx>> stage(dim, std::vector<cplx>(N));
    for (int a = 0; a < dim; ++a)
        for (std::size_t j = 0; j < N; ++j) stage[a][j] = E[j] * (u.u_hat[a][j] + dt * n0[a][j]);
    const auto n1 = rhs(ctx, stage, pf);

    FluidState out(u.ctx, u.mu, u.time + dt);
    for (int a = 0; a < dim; ++a) {
        for (std::size_t j = 0; j < N; ++j)
            out.u_hat[a][j] = E[j] * (u.u_hat[a][j] + 0.5 * dt * n0[a][j]) + 0.5 * dt * n1[a][j];
        truncate(ctx, out.u_hat[a]);
    }
    leray_project(ctx, out.u_hat);
    return out;
}

PressureField recover_pressure(const FluidState& u, const DragForce& force) {
    SpectralContext& ctx = *u.ctx;
    const int dim = u.dim();
    const std::size_t N = ctx.size();
    const auto uphys = to_physical(u);
    std::vector<cplx> rhs_hat(N, cplx(0.0, 0.0));
    std::vector<cplx> d(N);
    for (int a = 0; a < dim; ++a) {
        std::vector<double> src(N, 0.0);
        for (int b = 0; b < dim; ++b) {
            for (std::size_t j = 0; j < N; ++j) d[j] = cplx(0.0, ctx.k(j, b)) * u.u_hat[a][j];
            const auto g = ctx.inverse(d);
            for (std::size_t j = 0; j < N; ++j) src[j] += uphys[b][j] * g[j];
        }
        for (std::size_t j = 0; j < N; ++j) src[j] -= force.comps[a][j];
        const auto sh = ctx.forward(src);
        // div of the source: i k_a s_a
        for (std::size_t j = 0; j < N; ++j) rhs_hat[j] += cplx(0.0, ctx.k(j, a)) * sh[j];
    }
    std::vector<cplx> p_hat(N, cplx(0.0, 0.0));
    for (std::size_t j = 0; j < N; ++j)
        if (ctx.k2(j) > 0.0) p_hat[j] = rhs_hat[j] / ctx.k2(j);
    return {ctx.inverse(p_hat)};
}

double fluid_energy(const FluidState& u) {
    const double vol = std::pow(u.ctx->grid().length(), u.dim());
    std::vector<double> terms;
    terms.reserve(u.ctx->size() * u.dim());
    for (const auto& c : u.u_hat)
        for (const cplx& v : c) terms.push_back(std::norm(v));
    return 0.5 * vol * pairwise_sum(terms);
}

double grad_norm2(const FluidState& u) {
    const double vol = std::pow(u.ctx->grid().length(), u.dim());
    std::vector<double> terms;
    terms.reserve(u.ctx->size() * u.dim());
    for (const auto& c : u.u_hat)
        for (std::size_t j = 0; j < c.size(); ++j) terms.push_back(u.ctx->k2(j) * std::norm(c[j]));
    return vol * pairwise_sum(terms);
}

double divergence_residual(const FluidState& u) {
    double worst = 0.0, umax = 0.0;
    for (std::size_t j = 0; j < u.ctx->size(); ++j) {
        cplx kv(0.0, 0.0);
        for (int a = 0; a < u.dim(); ++a) {
            kv += u.ctx->k(j, a) * u.u_hat[a][j];
            umax = std::max(umax, std::abs(u.u_hat[a][j]));
        }
        worst = std::max(worst, std::abs(kv));
    }
    return umax > 0.0 ? worst / umax : worst;
}

double force_power(const FluidState& u, const DragForce& force) {
    const auto up = to_physical(u);
    std::vector<double> terms(up[0].size(), 0.0);
    for (std::size_t j = 0; j < terms.size(); ++j)
        for (int a = 0; a < u.dim(); ++a) terms[j] += up[a][j] * force.comps[a][j];
    return pairwise_sum(terms) * u.ctx->grid().cell_volume();
}

TaylorGreen taylor_green_reference(std::shared_ptr<SpectralContext> ctx, double t, double mu, double amplitude) {
    const TorusGrid& g = ctx->grid();
    if (g.dim() != 2) throw ContractError("taylor_green_reference: requires dim = 2");
    const double k = 2.0 * std::numbers::pi / g.length();
    const double decay = amplitude * std::exp(-2.0 * mu * k * k * t);
    const double pdecay = amplitude * amplitude * std::exp(-4.0 * mu * k * k * t) / 4.0;
    std::vector<std::vector<double>> u(2, std::vector<double>(g.size()));
    PressureField p;
    p.values.resize(g.size());
    for (std::size_t j = 0; j < g.size(); ++j) {
        const double x = g.coord(j, 0), y = g.coord(j, 1);
        u[0][j] = decay * std::sin(k * x) * std::cos(k * y);
        u[1][j] = -decay * std::cos(k * x) * std::sin(k * y);
        p.values[j] = pdecay * (std::cos(2 * k * x) + std::cos(2 * k * y));
    }
    return {fluid_from_physical(std::move(ctx), mu, u, t), std::move(p)};
}

}  // namespace spray
