#include "spray/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "spray/error.hpp"
#include "spray/parallel.hpp"

namespace spray {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Smooth step pieces for the energy cutoff.
double psi(double z) { return z > 0.0 ? std::exp(-1.0 / z) : 0.0; }
double dpsi(double z) { return z > 0.0 ? std::exp(-1.0 / z) / (z * z) : 0.0; }

/// chi(r) = 1 for r <= r0, 0 for r >= r1, C-infinity in between.
double cutoff(double r, double r0, double r1, double* dchi) {
    if (r <= r0) {
        *dchi = 0.0;
        return 1.0;
    }
    if (r >= r1) {
        *dchi = 0.0;
        return 0.0;
    }
    const double w = r1 - r0;
    const double s = (r - r0) / w;
    const double A = psi(1.0 - s), B = psi(s);
    const double dA = -dpsi(1.0 - s), dB = dpsi(s);
    *dchi = (dA * B - A * dB) / ((A + B) * (A + B)) / w;
    return A / (A + B);
}

double time_factor(double omega, double t, double* dt) {
    *dt = -omega * std::sin(omega * t);
    return std::cos(omega * t);
}

/// Spectral derivative d u_a / d x_b at the nodes.
std::vector<double> derivative(const FluidState& u, int a, int b) {
    std::vector<cplx> d(u.ctx->size());
    for (std::size_t j = 0; j < d.size(); ++j) d[j] = cplx(0.0, u.ctx->k(j, b)) * u.u_hat[a][j];
    return u.ctx->inverse(d);
}

}  // namespace

double KineticTestFn::shape_value(const double* xi, int dim, double* grad) const {
    switch (shape) {
        case Shape::mass:
            for (int a = 0; a < dim; ++a) grad[a] = 0.0;
            return 1.0;
        case Shape::energy: {
            double r2 = 0.0;
            for (int a = 0; a < dim; ++a) r2 += xi[a] * xi[a];
            const double r = std::sqrt(r2);
            double dchi = 0.0;
            const double chi = cutoff(r, r_in, r_out, &dchi);
            // grad(r^2/2 chi) = xi chi + r^2/2 chi'(r) xi / r
            const double radial = r > 0.0 ? 0.5 * r * dchi : 0.0;
            for (int a = 0; a < dim; ++a) grad[a] = xi[a] * (chi + radial);
            return 0.5 * r2 * chi;
        }
        case Shape::bump: {
            double d2 = 0.0;
            for (int a = 0; a < dim; ++a) d2 += (xi[a] - center[a]) * (xi[a] - center[a]);
            const double q = 1.0 - d2 / (radius * radius);
            if (q <= 0.0) {
                for (int a = 0; a < dim; ++a) grad[a] = 0.0;
                return 0.0;
            }
            const double e = std::exp(1.0 - 1.0 / q);
            for (int a = 0; a < dim; ++a) grad[a] = e / (q * q) * (-2.0 * (xi[a] - center[a]) / (radius * radius));
            return e;
        }
    }
    return 0.0;
}

double KineticTestFn::support_radius(int dim) const {
    switch (shape) {
        case Shape::mass: return std::numeric_limits<double>::infinity();
        case Shape::energy: return r_out;
        case Shape::bump: {
            double c2 = 0.0;
            for (int a = 0; a < dim; ++a) c2 += center[a] * center[a];
            return std::sqrt(c2) + radius;
        }
    }
    return 0.0;
}

std::vector<FluidTestFn> fluid_test_functions(int dim, std::uint64_t seed, int count) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> kd(-2, 2);
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<FluidTestFn> out;
    for (int n = 0; n < count; ++n) {
        FluidTestFn f;
        f.id = "fluid_trig_" + std::to_string(n);
        f.phase = kTwoPi * ud(rng);
        f.omega = 0.5 + 1.5 * ud(rng);
        if (dim == 1) {
            f.a[0] = 1.0;
        } else {
            // the first member sits on the lowest diagonal mode, the rest are drawn
            if (n == 0) {
                for (int a = 0; a < dim; ++a) f.k[a] = 1;
            } else {
                do {
                    for (int a = 0; a < dim; ++a) f.k[a] = kd(rng);
                } while (f.k[0] == 0 && f.k[1] == 0 && (dim < 3 || f.k[2] == 0));
            }
            if (dim == 2) {
                f.a = {static_cast<double>(f.k[1]), -static_cast<double>(f.k[0]), 0.0};
            } else {
                std::array<double, 3> v{nd(rng), nd(rng), nd(rng)};
                double kk = 0.0, kv = 0.0;
                for (int a = 0; a < 3; ++a) {
                    kk += f.k[a] * f.k[a];
                    kv += f.k[a] * v[a];
                }
                for (int a = 0; a < 3; ++a) f.a[a] = v[a] - kv / kk * f.k[a];
            }
            double n2 = 0.0;
            for (int a = 0; a < dim; ++a) n2 += f.a[a] * f.a[a];
            for (int a = 0; a < dim; ++a) f.a[a] /= std::sqrt(n2);
        }
        out.push_back(f);
    }
    return out;
}

std::vector<KineticTestFn> kinetic_test_functions(int dim, double r_max, std::uint64_t seed, int count) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> kd(-2, 2);
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    std::vector<KineticTestFn> out;
    KineticTestFn mass;
    mass.id = "kinetic_mass";
    out.push_back(mass);
    KineticTestFn energy;
    energy.id = "kinetic_energy";
    energy.shape = KineticTestFn::Shape::energy;
    energy.r_in = 0.5 * r_max;
    energy.r_out = 0.9 * r_max;
    out.push_back(energy);
    for (int n = 0; n < count; ++n) {
        KineticTestFn b;
        b.id = "kinetic_bump_" + std::to_string(n);
        b.shape = KineticTestFn::Shape::bump;
        for (int a = 0; a < dim; ++a) b.k[a] = n == 0 ? 0 : kd(rng);
        b.phase = kTwoPi * ud(rng);
        b.omega = 0.5 + 1.5 * ud(rng);
        for (int a = 0; a < dim; ++a) b.center[a] = 0.3 * r_max * (2.0 * ud(rng) - 1.0) / std::sqrt(double(dim));
        b.radius = 0.6 * r_max;
        out.push_back(b);
    }
    return out;
}

namespace {

struct FrameData {
    std::vector<std::vector<double>> up;  // nodal u
    std::vector<std::vector<double>> du;  // du[a * dim + b] = d u_a / d x_b
    std::vector<double> m0;
    std::vector<std::vector<double>> m1;
    std::vector<double> breakup;  // G f - f per phase node
};

std::vector<double> phases(const TorusGrid& g, const std::array<int, 3>& k, double phase) {
    const double k0 = kTwoPi / g.length();
    std::vector<double> theta(g.size());
    for (std::size_t j = 0; j < g.size(); ++j) {
        double s = phase;
        for (int a = 0; a < g.dim(); ++a) s += k0 * k[a] * g.coord(j, a);
        theta[j] = s;
    }
    return theta;
}

/// Returns the pairing int u.phi at the frame time; *integrand receives
/// int [u.phi_t + (u x u):grad phi - mu grad u:grad phi + F.phi].
double fluid_terms(const CoupledState& fr, const FrameData& d, const FluidTestFn& phi, double c, double* integrand) {
    const TorusGrid& g = fr.fluid.ctx->grid();
    const int dim = g.dim();
    const std::size_t N = g.size();
    const double k0 = kTwoPi / g.length();
    const auto theta = phases(g, phi.k, phi.phase);
    double gd;
    const double gt = time_factor(phi.omega, fr.time, &gd);
    const bool kinetic = !d.m0.empty();
    std::vector<double> pair(N), bulk(N);
    for (std::size_t j = 0; j < N; ++j) {
        const double cs = std::cos(theta[j]), sn = std::sin(theta[j]);
        double p = 0.0, v = 0.0;
        for (int a = 0; a < dim; ++a) {
            p += d.up[a][j] * phi.a[a];
            v += d.up[a][j] * gd * phi.a[a] * cs;
            for (int b = 0; b < dim; ++b) {
                const double dphi = -gt * phi.a[a] * k0 * phi.k[b] * sn;  // d phi_a / d x_b
                v += (d.up[a][j] * d.up[b][j] - fr.fluid.mu * d.du[a * dim + b][j]) * dphi;
            }
            if (kinetic) v += -c * (d.up[a][j] * d.m0[j] - d.m1[a][j]) * gt * phi.a[a] * cs;
        }
        pair[j] = p * gt * cs;
        bulk[j] = v;
    }
    *integrand = pairwise_sum(bulk) * g.cell_volume();
    return pairwise_sum(pair) * g.cell_volume();
}

/// Pairing int int f phi; *integrand receives
/// int int f (phi_t + xi.grad_x phi + gamma (u - xi).grad_xi phi) + lambda (Gf - f) phi.
double kinetic_terms(const CoupledState& fr, const FrameData& d, const KineticTestFn& phi, double lambda,
                     double gamma, double* integrand) {
    const KineticState& f = fr.kinetic;
    const TorusGrid& g = *f.xgrid;
    const VelocityGrid& vg = *f.vgrid;
    const int dim = g.dim();
    const std::size_t N = g.size(), nv = vg.size();
    const double k0 = kTwoPi / g.length();
    const auto theta = phases(g, phi.k, phi.phase);
    std::vector<double> S(nv), dS(nv * dim), kxi(nv);
    for (std::size_t i = 0; i < nv; ++i) {
        S[i] = phi.shape_value(vg.node(i).data(), dim, &dS[i * dim]);
        double s = 0.0;
        for (int a = 0; a < dim; ++a) s += k0 * phi.k[a] * vg.node(i)[a];
        kxi[i] = s;
    }
    double gd;
    const double gt = time_factor(phi.omega, fr.time, &gd);
    const bool fluid = !d.up.empty();
    const bool breakup = !d.breakup.empty();
    std::vector<double> pair(N), bulk(N);
    for (std::size_t j = 0; j < N; ++j) {
        const auto s = f.slice(j);
        const double cs = std::cos(theta[j]), sn = std::sin(theta[j]);
        double p = 0.0, v = 0.0;
        for (std::size_t i = 0; i < nv; ++i) {
            const double w = vg.weight(i);
            if (breakup) v += lambda * d.breakup[j * nv + i] * gt * cs * S[i] * w;
            if (s[i] == 0.0) continue;
            const auto xi = vg.node(i);
            double drift = 0.0;
            for (int a = 0; a < dim; ++a) drift += ((fluid ? d.up[a][j] : 0.0) - xi[a]) * dS[i * dim + a];
            const double dphi = gd * cs * S[i] - gt * sn * S[i] * kxi[i] + gamma * gt * cs * drift;
            p += s[i] * S[i] * w;
            v += s[i] * dphi * w;
        }
        pair[j] = p * gt * cs;
        bulk[j] = v;
    }
    const double vol = g.cell_volume();
    *integrand = pairwise_sum(bulk) * vol;
    return pairwise_sum(pair) * vol;
}

}  // namespace

WeakAccumulator::WeakAccumulator(std::vector<FluidTestFn> fluid, std::vector<KineticTestFn> kinetic, double lambda,
                                 double c, double gamma, const BreakupKernel* kernel)
    : fluid_(std::move(fluid)), kinetic_(std::move(kinetic)), lambda_(lambda), c_(c), gamma_(gamma),
      kernel_(kernel), slots_(fluid_.size() + kinetic_.size()) {
    for (const FluidTestFn& phi : fluid_) {
        double ka = 0.0, an = 0.0;
        for (int a = 0; a < 3; ++a) {
            ka += phi.k[a] * phi.a[a];
            an = std::max(an, std::abs(phi.a[a]));
        }
        if (std::abs(ka) > 1e-10 * std::max(an, 1.0))
            throw ContractError("weak residual: test function " + phi.id + " is not divergence-free");
    }
    if (lambda_ > 0.0 && !kernel_ && !kinetic_.empty())
        throw ContractError("weak residual: lambda > 0 needs a kernel");
}

void WeakAccumulator::add(const CoupledState& fr) {
    if (frames_ > 0 && !(fr.time > last_time_)) throw ContractError("weak residual: frame times must increase");
    const bool has_fluid = fr.fluid.ctx != nullptr;
    const bool has_kinetic = !fr.kinetic.f.empty();
    if (frames_ == 0) {
        if (!fluid_.empty() && !has_fluid) throw ContractError("weak residual: fluid test functions need a fluid");
        if (!kinetic_.empty() && !has_kinetic)
            throw ContractError("weak residual: kinetic test functions need a kinetic state");
        if (has_kinetic) {
            const VelocityGrid& vg = *fr.kinetic.vgrid;
            for (KineticTestFn& phi : kinetic_) {
                for (int a = vg.dim(); a < 3; ++a) phi.k[a] = 0;
                if (phi.shape != KineticTestFn::Shape::mass && phi.support_radius(vg.dim()) >= vg.r_max())
                    throw ContractError("weak residual: support of " + phi.id + " touches |xi| = r_max");
            }
        }
    }
    FrameData d;
    if (has_fluid) {
        const int dim = fr.fluid.dim();
        d.up = to_physical(fr.fluid);
        if (!fluid_.empty()) {
            d.du.resize(dim * dim);
            for (int a = 0; a < dim; ++a)
                for (int b = 0; b < dim; ++b) d.du[a * dim + b] = derivative(fr.fluid, a, b);
        }
    }
    if (has_kinetic && !fluid_.empty()) {
        d.m0 = moment(fr.kinetic, 0.0);
        d.m1 = vector_moment(fr.kinetic);
    }
    if (has_kinetic && lambda_ > 0.0 && !kinetic_.empty()) {
        const std::size_t nv = fr.kinetic.nv(), N = fr.kinetic.xgrid->size();
        d.breakup.resize(N * nv);
        std::vector<double> g(nv);
        for (std::size_t j = 0; j < N; ++j) {
            const auto s = fr.kinetic.slice(j);
            kernel_->gain(s, g);
            for (std::size_t i = 0; i < nv; ++i) d.breakup[j * nv + i] = g[i] - s[i];
        }
    }
    for (std::size_t n = 0; n < slots_.size(); ++n) {
        double integrand = 0.0;
        const double pairing = n < fluid_.size()
                                   ? fluid_terms(fr, d, fluid_[n], c_, &integrand)
                                   : kinetic_terms(fr, d, kinetic_[n - fluid_.size()], lambda_, gamma_, &integrand);
        Slot& s = slots_[n];
        if (frames_ == 0) s.first = pairing;
        else s.integral += 0.5 * (fr.time - last_time_) * (integrand + s.prev_integrand);
        s.last = pairing;
        s.prev_integrand = integrand;
        s.scale = std::max({s.scale, std::abs(pairing), std::abs(integrand)});
    }
    last_time_ = fr.time;
    ++frames_;
}

std::vector<WeakResidualReport> WeakAccumulator::reports() const {
    if (frames_ < 2) throw ContractError("weak residual: trajectory needs at least two frames");
    std::vector<WeakResidualReport> out;
    for (std::size_t n = 0; n < slots_.size(); ++n) {
        const Slot& s = slots_[n];
        WeakResidualReport r;
        const double res = std::abs(s.last - s.first - s.integral);
        r.scale = s.scale;
        if (n < fluid_.size()) {
            r.residual_fluid = res;
            r.test_id = fluid_[n].id;
        } else {
            r.residual_kinetic = res;
            r.test_id = kinetic_[n - fluid_.size()].id;
        }
        out.push_back(r);
    }
    return out;
}

WeakResidualReport weak_residual_fluid(const Trajectory& traj, const FluidTestFn& phi) {
    WeakAccumulator acc({phi}, {}, traj.lambda, traj.c, traj.gamma, nullptr);
    for (const CoupledState& fr : traj.frames) acc.add(fr);
    return acc.reports().front();
}

WeakResidualReport weak_residual_kinetic(const Trajectory& traj, const KineticTestFn& phi,
                                         const BreakupKernel* kernel) {
    WeakAccumulator acc({}, {phi}, traj.lambda, traj.c, traj.gamma, kernel);
    for (const CoupledState& fr : traj.frames) acc.add(fr);
    return acc.reports().front();
}

double breakup_weak_defect(const BreakupKernel& kernel, std::span<const double> f, const KineticTestFn& phi) {
    const VelocityGrid& vg = kernel.vgrid();
    const std::size_t nv = vg.size();
    std::vector<double> g(nv), grad(vg.dim());
    kernel.gain(f, g);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < nv; ++i) {
        const double s = phi.shape_value(vg.node(i).data(), vg.dim(), grad.data());
        num += (g[i] - f[i]) * s * vg.weight(i);
        den += f[i] * std::abs(s) * vg.weight(i);
    }
    return den > 0.0 ? std::abs(num) / den : std::abs(num);
}

double unit_sphere_area(int dim) {
    switch (dim) {
        case 1: return 2.0;
        case 2: return 2.0 * std::numbers::pi;
        case 3: return 4.0 * std::numbers::pi;
    }
    throw ContractError("unit_sphere_area: dim must be 1, 2 or 3");
}

namespace {

constexpr int kGauss = 6;
constexpr double kGx[kGauss] = {-0.9324695142031521, -0.6612093864662645, -0.2386191860831969,
                                0.2386191860831969,  0.6612093864662645,  0.9324695142031521};
constexpr double kGw[kGauss] = {0.1713244923791704, 0.3607615730481386, 0.4679139345726910,
                                0.4679139345726910, 0.3607615730481386, 0.1713244923791704};

double gauss_cell(const double* c, int dim, double h, double alpha) {
    double sum = 0.0;
    int idx[3] = {0, 0, 0};
    int total = 1;
    for (int a = 0; a < dim; ++a) total *= kGauss;
    for (int q = 0; q < total; ++q) {
        int rem = q;
        double w = 1.0, r2 = 0.0;
        for (int a = 0; a < dim; ++a) {
            idx[a] = rem % kGauss;
            rem /= kGauss;
            const double x = c[a] + 0.5 * h * kGx[idx[a]];
            r2 += x * x;
            w *= 0.5 * h * kGw[idx[a]];
        }
        sum += w * std::pow(r2, 0.5 * alpha);
    }
    return sum;
}

double cell_rec(const double* c, int dim, double h, double alpha, int depth) {
    double dist2 = 0.0;
    for (int a = 0; a < dim; ++a) {
        const double d = std::max(0.0, std::abs(c[a]) - 0.5 * h);
        dist2 += d * d;
    }
    // Refine cells whose distance to the origin is below their size.
    if (depth > 0 && dist2 < h * h) {
        double sum = 0.0;
        double sub[3];
        for (int q = 0; q < (1 << dim); ++q) {
            for (int a = 0; a < dim; ++a) sub[a] = c[a] + ((q >> a) & 1 ? 0.25 : -0.25) * h;
            sum += cell_rec(sub, dim, 0.5 * h, alpha, depth - 1);
        }
        return sum;
    }
    return gauss_cell(c, dim, h, alpha);
}

}  // namespace

double cell_power_integral(const double* center, int dim, double h, double alpha) {
    if (alpha == 0.0) return std::pow(h, dim);
    return cell_rec(center, dim, h, alpha, 24);
}

std::vector<double> interpolation_check(const KineticState& state, double alpha, double beta) {
    if (!(alpha >= 0.0) || !(alpha < beta)) throw ContractError("interpolation_check: need 0 <= alpha < beta");
    const VelocityGrid& vg = *state.vgrid;
    const int d = vg.dim();
    const std::size_t nx = state.xgrid->size(), nv = vg.size();
    std::vector<double> wa(nv), wb(nv);
    for (std::size_t i = 0; i < nv; ++i) {
        wa[i] = cell_power_integral(vg.node(i).data(), d, vg.spacing(), alpha);
        wb[i] = cell_power_integral(vg.node(i).data(), d, vg.spacing(), beta);
    }
    const double C = unit_sphere_area(d) / (alpha + d);
    const double expo = (alpha + d) / (beta + d);
    std::vector<double> margin(nx);
    for (std::size_t j = 0; j < nx; ++j) {
        const auto s = state.slice(j);
        double ma = 0.0, mb = 0.0, fmax = 0.0;
        for (std::size_t i = 0; i < nv; ++i) {
            ma += wa[i] * s[i];
            mb += wb[i] * s[i];
            fmax = std::max(fmax, s[i]);
        }
        margin[j] = (C * fmax + 1.0) * std::pow(mb, expo) - ma;
    }
    return margin;
}

BoundReport bound_suite(const BoundInputs& in) {
    if (in.rows.empty()) throw SprayError("bound_suite: no diagnostics rows");
    BoundReport rep;
    const auto& r0 = in.rows.front();
    const double T = in.t_final > 0.0 ? in.t_final : in.rows.back().t;
    auto add = [&](const std::string& name, auto value, auto envelope, bool flag_near) {
        EnvelopeCheck c;
        c.name = name;
        for (std::size_t n = 0; n < in.rows.size(); ++n) {
            const auto& r = in.rows[n];
            const double v = value(r), e = envelope(r);
            if (!std::isfinite(v)) {
                c.pass = false;
                c.worst_ratio = std::numeric_limits<double>::infinity();
                continue;
            }
            const double ratio = e > 0.0 ? v / e : (v > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
            c.worst_ratio = std::max(c.worst_ratio, ratio);
            // rounding slack: at t = 0 the envelope equals the value
            if (v > e + 1e-12 * std::abs(e)) c.pass = false;
            if (flag_near && n > 0 && ratio > 0.9) c.near = true;
        }
        rep.pass = rep.pass && c.pass;
        rep.checks.push_back(c);
    };
    const double lk = in.lambda * in.K;
    add("f_max",
        [](const DiagnosticsRecord& r) { return r.f_max; },
        [&](const DiagnosticsRecord& r) {
            const double t = r.t - r0.t;
            return r0.f_max * std::exp(in.dim * in.gamma * t) *
                   (1.0 + lk * t * std::exp(lk * t * std::exp(std::abs(in.dim - in.lambda) * T)));
        },
        true);
    add("M0", [](const DiagnosticsRecord& r) { return r.M0; },
        [&](const DiagnosticsRecord&) { return r0.M0 * (1.0 + 1e-9); }, false);
    const double M0 = r0.M0;
    auto moment_env = [&](int p, double Mp0) {
        return [=, &in](const DiagnosticsRecord& r) {
            return (Mp0 + M0) * std::exp(p * in.gamma * in.u_max * (r.t - r0.t)) - M0;
        };
    };
    add("M1", [](const DiagnosticsRecord& r) { return r.M1; }, moment_env(1, r0.M1), true);
    add("M2", [](const DiagnosticsRecord& r) { return r.M2; }, moment_env(2, r0.M2), true);
    add("M3", [](const DiagnosticsRecord& r) { return r.M3; }, moment_env(3, r0.M3), true);
    return rep;
}

}  // namespace spray
