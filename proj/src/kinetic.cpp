#include "spray/kinetic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "spray/error.hpp"
#include "spray/parallel.hpp"

namespace spray {

namespace {

constexpr int kMaxStencil = 64;  // 4^3

/// Tensor-product Lagrange stencil for one point.
struct Stencil {
    int n = 0;
    std::int64_t idx[kMaxStencil];
    double w[kMaxStencil];
    bool corner[kMaxStencil];
};

/// 1D weights at fractional offset t in [0, 1). Offsets start at `first`.
inline int weights_1d(InterpOrder order, double t, double* w, int* first) {
    if (order == InterpOrder::quartic) order = InterpOrder::cubic;
    if (order == InterpOrder::linear) {
        w[0] = 1.0 - t;
        w[1] = t;
        *first = 0;
        return 2;
    }
    const double tm1 = t - 1.0, tm2 = t - 2.0, tp1 = t + 1.0;
    w[0] = -t * tm1 * tm2 / 6.0;
    w[1] = tp1 * tm1 * tm2 / 2.0;
    w[2] = -tp1 * t * tm2 / 2.0;
    w[3] = tp1 * t * tm1 / 6.0;
    *first = -1;
    return 4;
}

/// Periodic stencil on the torus for point x.
inline void torus_stencil(const TorusGrid& g, InterpOrder order, const double* x, Stencil& s) {
    const int dim = g.dim();
    const double h = g.spacing();
    int base[kMaxDim], first[kMaxDim], cnt[kMaxDim];
    double w1[kMaxDim][4];
    for (int a = 0; a < dim; ++a) {
        const double sa = x[a] / h;
        const double fl = std::floor(sa);
        base[a] = static_cast<int>(fl);
        cnt[a] = weights_1d(order, sa - fl, w1[a], &first[a]);
    }
    s.n = 1;
    for (int a = 0; a < dim; ++a) s.n *= cnt[a];
    for (int k = 0; k < s.n; ++k) {
        int rem = k;
        std::array<int, kMaxDim> idx{0, 0, 0};
        double w = 1.0;
        bool corner = true;
        for (int a = dim - 1; a >= 0; --a) {
            const int o = rem % cnt[a];
            rem /= cnt[a];
            const int off = first[a] + o;
            idx[a] = g.wrap(base[a] + off);
            w *= w1[a][o];
            corner = corner && (off == 0 || off == 1);
        }
        s.idx[k] = static_cast<std::int64_t>(g.flatten(idx));
        s.w[k] = w;
        s.corner[k] = corner;
    }
}

template <class Field>
inline void rk4_backward(const Field& u, int dim, double dt, int n_sub, double gamma, double* x, double* xi) {
    const double h = -dt / n_sub;
    double k1x[kMaxDim], k1v[kMaxDim], k2x[kMaxDim], k2v[kMaxDim], k3x[kMaxDim], k3v[kMaxDim],
        k4x[kMaxDim], k4v[kMaxDim], tx[kMaxDim], tv[kMaxDim], uu[kMaxDim];
    for (int step = 0; step < n_sub; ++step) {
        u(x, uu);
        for (int a = 0; a < dim; ++a) {
            k1x[a] = xi[a];
            k1v[a] = gamma * (uu[a] - xi[a]);
            tx[a] = x[a] + 0.5 * h * k1x[a];
            tv[a] = xi[a] + 0.5 * h * k1v[a];
        }
        u(tx, uu);
        for (int a = 0; a < dim; ++a) {
            k2x[a] = tv[a];
            k2v[a] = gamma * (uu[a] - tv[a]);
        }
        for (int a = 0; a < dim; ++a) {
            tx[a] = x[a] + 0.5 * h * k2x[a];
            tv[a] = xi[a] + 0.5 * h * k2v[a];
        }
        u(tx, uu);
        for (int a = 0; a < dim; ++a) {
            k3x[a] = tv[a];
            k3v[a] = gamma * (uu[a] - tv[a]);
        }
        for (int a = 0; a < dim; ++a) {
            tx[a] = x[a] + h * k3x[a];
            tv[a] = xi[a] + h * k3v[a];
        }
        u(tx, uu);
        for (int a = 0; a < dim; ++a) {
            k4x[a] = tv[a];
            k4v[a] = gamma * (uu[a] - tv[a]);
        }
        for (int a = 0; a < dim; ++a) {
            x[a] += h / 6.0 * (k1x[a] + 2.0 * k2x[a] + 2.0 * k3x[a] + k4x[a]);
            xi[a] += h / 6.0 * (k1v[a] + 2.0 * k2v[a] + 2.0 * k3v[a] + k4v[a]);
        }
    }
}

inline double wrap_coord(double x, double L) {
    double r = std::fmod(x, L);
    if (r < 0.0) r += L;
    if (r >= L) r -= L;
    return r;
}

double foot_speed_bound(const VelocityGrid& vg, const FrozenVelocity& u, double dt, double gamma) {
    const double growth = std::exp(gamma * dt);
    // Cubic interpolation may overshoot nodal values by the Lebesgue constant.
    const double lebesgue = std::pow(1.25, u.dim());
    return vg.r_max() * growth + lebesgue * u.max_norm() * (growth - 1.0);
}

void check_foot(double speed, double bound, double r_max) {
    if (speed > bound + 1e-12 * r_max)
        throw InvariantViolation("velocity cutoff", "foot speed " + std::to_string(speed) +
                                                        " exceeds enlarged ball radius " + std::to_string(bound));
}

/// Copy of f on the full velocity lattice with a zero margin, so stencil
/// lookups need no ball or bounds tests.
class PaddedLattice {
public:
    static constexpr int kMargin = 2;

    PaddedLattice(const VelocityGrid& vg, const std::vector<double>& f, std::size_t nx)
        : r_max_(vg.r_max()), h_(vg.spacing()), p_(vg.n_v() + 2 * kMargin), dim_(vg.dim()) {
        block_ = 1;
        for (int a = 0; a < dim_; ++a) block_ *= static_cast<std::size_t>(p_);
        data_.assign(nx * block_, 0.0);
        const std::size_t nv = vg.size();
        std::vector<std::size_t> where(nv);
        for (std::size_t i = 0; i < nv; ++i) {
            std::size_t flat = 0;
            for (int a = 0; a < dim_; ++a)
                flat = flat * static_cast<std::size_t>(p_) +
                       static_cast<std::size_t>(vg.lattice_index(i)[a] + kMargin);
            where[i] = flat;
        }
        for (std::size_t j = 0; j < nx; ++j) {
            double* dst = data_.data() + j * block_;
            const double* src = f.data() + j * nv;
            for (std::size_t i = 0; i < nv; ++i) dst[where[i]] = src[i];
        }
    }

    /// Lattice coordinate of xi measured from the first interior node.
    double scaled(double xi) const noexcept { return (xi + r_max_) / h_; }
    int stride() const noexcept { return p_; }
    std::size_t block() const noexcept { return block_; }
    const double* row(std::int64_t j) const noexcept { return data_.data() + static_cast<std::size_t>(j) * block_; }

private:
    double r_max_, h_;
    int p_, dim_;
    std::size_t block_ = 1;
    std::vector<double> data_;
};

/// Backward characteristics from every x node. When the foot stays within
/// half a cell of its node, u is sampled from a local quadratic model built
/// from centered differences; otherwise from the periodic interpolant.
class FootSolver {
public:
    FootSolver(const TorusGrid& xg, const FrozenVelocity& u, double bound, double dt, int n_sub, double gamma)
        : xg_(xg), u_(u), dt_(dt), gamma_(gamma), n_sub_(n_sub), dim_(xg.dim()) {
        local_ = bound * dt <= 0.5 * xg.spacing();
        if (!local_) return;
        const int d = dim_;
        stride_ = d + d * d + d * d * d;
        model_.assign(xg.size() * stride_, 0.0);
        const double h = xg.spacing();
        for (std::size_t j = 0; j < xg.size(); ++j) {
            const auto idx = xg.unflatten(j);
            auto at = [&](int a, std::array<int, kMaxDim> o) {
                auto q = idx;
                for (int b = 0; b < d; ++b) q[b] = xg.wrap(q[b] + o[b]);
                return u.at(a, xg.flatten(q));
            };
            double* m = model_.data() + j * stride_;
            for (int a = 0; a < d; ++a) {
                m[a] = u.at(a, j);
                for (int b = 0; b < d; ++b) {
                    std::array<int, kMaxDim> p1{0, 0, 0}, p2{0, 0, 0}, m1{0, 0, 0}, m2{0, 0, 0};
                    p1[b] = 1;
                    p2[b] = 2;
                    m1[b] = -1;
                    m2[b] = -2;
                    const double up1 = at(a, p1), up2 = at(a, p2), um1 = at(a, m1), um2 = at(a, m2);
                    m[d + a * d + b] = (-up2 + 8.0 * up1 - 8.0 * um1 + um2) / (12.0 * h);
                    for (int c = 0; c < d; ++c) {
                        double hess;
                        if (b == c) {
                            hess = (-up2 + 16.0 * up1 - 30.0 * m[a] + 16.0 * um1 - um2) / (12.0 * h * h);
                        } else {
                            std::array<int, kMaxDim> pp{0, 0, 0}, pm{0, 0, 0}, mp{0, 0, 0}, mm{0, 0, 0};
                            pp[b] = 1, pp[c] = 1;
                            pm[b] = 1, pm[c] = -1;
                            mp[b] = -1, mp[c] = 1;
                            mm[b] = -1, mm[c] = -1;
                            hess = (at(a, pp) - at(a, pm) - at(a, mp) + at(a, mm)) / (4.0 * h * h);
                        }
                        m[d + d * d + (a * d + b) * d + c] = hess;
                    }
                }
            }
        }
    }

    /// x0 is the arrival node position; on return x holds the wrapped foot
    /// position and xi the foot velocity.
    template <int D>
    void foot(std::size_t j, const double* x0, double* x, double* xi) const {
        if (local_) {
            const double* m = model_.data() + j * stride_;
            auto field = [m](const double* del, double* out) {
                for (int a = 0; a < D; ++a) {
                    double v = m[a];
                    const double* g = m + D + a * D;
                    const double* hs = m + D + D * D + a * D * D;
                    for (int b = 0; b < D; ++b) {
                        double hb = 0.0;
                        for (int c = 0; c < D; ++c) hb += hs[b * D + c] * del[c];
                        v += del[b] * (g[b] + 0.5 * hb);
                    }
                    out[a] = v;
                }
            };
            double del[kMaxDim] = {0.0, 0.0, 0.0};
            rk4_backward(field, D, dt_, n_sub_, gamma_, del, xi);
            for (int a = 0; a < D; ++a) x[a] = wrap_coord(x0[a] + del[a], xg_.length());
            return;
        }
        for (int a = 0; a < D; ++a) x[a] = x0[a];
        auto field = [this](const double* p, double* o) { u_.sample(p, o); };
        rk4_backward(field, D, dt_, n_sub_, gamma_, x, xi);
        for (int a = 0; a < D; ++a) x[a] = wrap_coord(x[a], xg_.length());
    }

    void foot(std::size_t j, double* x, double* xi) const {
        double x0[kMaxDim];
        for (int a = 0; a < dim_; ++a) x0[a] = xg_.coord(j, a);
        switch (dim_) {
            case 1: foot<1>(j, x0, x, xi); break;
            case 2: foot<2>(j, x0, x, xi); break;
            default: foot<3>(j, x0, x, xi); break;
        }
    }

private:
    const TorusGrid& xg_;
    const FrozenVelocity& u_;
    double dt_;
    double gamma_;
    int n_sub_;
    int dim_;
    bool local_ = false;
    int stride_ = 0;
    std::vector<double> model_;
};

/// Lagrange weights for N points. For N = 2, 4 the offset t in [0, 1) is
/// measured from the floor node and the stencil starts at offset 0 or -1;
/// for N = 5 t in [-1/2, 1/2] is measured from the nearest node and the
/// stencil is centered on it.
template <int N>
inline void weights_fixed(double t, double* w) {
    if constexpr (N == 2) {
        w[0] = 1.0 - t;
        w[1] = t;
    } else if constexpr (N == 4) {
        const double tm1 = t - 1.0, tm2 = t - 2.0, tp1 = t + 1.0;
        w[0] = -t * tm1 * tm2 / 6.0;
        w[1] = tp1 * tm1 * tm2 / 2.0;
        w[2] = -tp1 * t * tm2 / 2.0;
        w[3] = tp1 * t * tm1 / 6.0;
    } else {
        const double tp2 = t + 2.0, tp1 = t + 1.0, tm1 = t - 1.0, tm2 = t - 2.0;
        w[0] = tp1 * t * tm1 * tm2 / 24.0;
        w[1] = -tp2 * t * tm1 * tm2 / 6.0;
        w[2] = tp2 * tp1 * tm1 * tm2 / 4.0;
        w[3] = -tp2 * tp1 * t * tm2 / 6.0;
        w[4] = tp2 * tp1 * t * tm1 / 24.0;
    }
}

template <int N>
constexpr int stencil_first() {
    return N == 2 ? 0 : (N == 4 ? -1 : -2);
}

/// Base node of an N-point stencil for lattice coordinate s; t is set to the
/// offset its weights expect.
template <int N>
inline double stencil_base(double s, double* t) {
    const double b = N == 5 ? std::nearbyint(s) : std::floor(s);
    *t = s - b;
    return b;
}

constexpr int ipow(int b, int e) { return e == 0 ? 1 : b * ipow(b, e - 1); }

/// Clipped tensor interpolation at one foot point with NX (NV) points per
/// axis in x (xi).
template <int D, int NX, int NV>
inline double interp_node(const TorusGrid& xg, const PaddedLattice& pad, const double* x, const double* xi) {
    constexpr int first_x = stencil_first<NX>();
    constexpr int first_v = stencil_first<NV>();
    constexpr int SX = ipow(NX, D), SV = ipow(NV, D);
    const int n_x = xg.n_x();
    const int p = pad.stride();
    double wx[D][NX], wv[D][NV];
    int ix[D][NX], iv[D][NV];
    // Corners of the enclosing cell, for the upper clip.
    int cx[D][2], cv[D][2];
    bool ok = true;
    for (int a = 0; a < D; ++a) {
        const double sx = x[a] / xg.spacing();
        double t;
        const int bx = static_cast<int>(stencil_base<NX>(sx, &t));
        weights_fixed<NX>(t, wx[a]);
        for (int k = 0; k < NX; ++k) ix[a][k] = xg.wrap(bx + first_x + k);
        const int fx = static_cast<int>(std::floor(sx));
        cx[a][0] = xg.wrap(fx);
        cx[a][1] = xg.wrap(fx + 1);
        // Far outside the lattice every stencil point is zero anyway.
        const double sv = std::clamp(pad.scaled(xi[a]), -8.0, static_cast<double>(p + 8));
        const int bv = static_cast<int>(stencil_base<NV>(sv, &t)) + first_v + PaddedLattice::kMargin;
        weights_fixed<NV>(t, wv[a]);
        for (int k = 0; k < NV; ++k) {
            iv[a][k] = bv + k;
            ok = ok && iv[a][k] >= 0 && iv[a][k] < p;
        }
        const int fv = static_cast<int>(std::floor(sv)) + PaddedLattice::kMargin;
        cv[a][0] = fv;
        cv[a][1] = fv + 1;
    }
    if constexpr (D == 2) {
        if (ok) {
            // Contiguous NV x NV patch per x row.
            double wvv[NV * NV];
            for (int k0 = 0; k0 < NV; ++k0)
                for (int k1 = 0; k1 < NV; ++k1) wvv[k0 * NV + k1] = wv[0][k0] * wv[1][k1];
            const int patch = iv[0][0] * p + iv[1][0];
            double val = 0.0;
            for (int q0 = 0; q0 < NX; ++q0) {
                double accx = 0.0;
                for (int q1 = 0; q1 < NX; ++q1) {
                    const double* base = pad.row(static_cast<std::int64_t>(ix[0][q0]) * n_x + ix[1][q1]) + patch;
                    double acc = 0.0;
                    for (int k0 = 0; k0 < NV; ++k0)
                        for (int k1 = 0; k1 < NV; ++k1) acc += wvv[k0 * NV + k1] * base[k0 * p + k1];
                    accx += wx[1][q1] * acc;
                }
                val += wx[0][q0] * accx;
            }
            if (val <= 0.0) return 0.0;
            double hi = 0.0;
            for (int c0 = 0; c0 < 2; ++c0)
                for (int c1 = 0; c1 < 2; ++c1) {
                    const double* row = pad.row(static_cast<std::int64_t>(cx[0][c0]) * n_x + cx[1][c1]);
                    for (int e0 = 0; e0 < 2; ++e0)
                        for (int e1 = 0; e1 < 2; ++e1) hi = std::max(hi, row[cv[0][e0] * p + cv[1][e1]]);
                }
            return std::min(val, hi);
        }
    }
    std::int64_t rows[SX];
    double rw[SX];
    for (int q = 0; q < SX; ++q) {
        int rem = q;
        std::int64_t r = 0;
        double w = 1.0;
        for (int a = D - 1, mul = 1; a >= 0; --a) {
            const int k = rem % NX;
            rem /= NX;
            r += static_cast<std::int64_t>(ix[a][k]) * mul;
            mul *= n_x;
            w *= wx[a][k];
        }
        rows[q] = r;
        rw[q] = w;
    }
    int voff[SV];
    double vw[SV];
    for (int q = 0; q < SV; ++q) {
        int rem = q;
        int o = 0;
        double w = 1.0;
        bool in = true;
        for (int a = D - 1, mul = 1; a >= 0; --a) {
            const int k = rem % NV;
            rem /= NV;
            in = in && iv[a][k] >= 0 && iv[a][k] < p;
            o += iv[a][k] * mul;
            mul *= p;
            w *= wv[a][k];
        }
        // Index 0 of the padded block lies in the zero margin.
        voff[q] = (ok || in) ? o : 0;
        vw[q] = (ok || in) ? w : 0.0;
    }
    double val = 0.0;
    for (int q = 0; q < SX; ++q) {
        const double* row = pad.row(rows[q]);
        double acc = 0.0;
        for (int k = 0; k < SV; ++k) acc += vw[k] * row[voff[k]];
        val += rw[q] * acc;
    }
    if (val <= 0.0) return 0.0;
    // Upper clip: largest value on the corners of the enclosing cell.
    double hi = 0.0;
    for (int q = 0; q < ipow(2, D); ++q) {
        std::int64_t r = 0;
        for (int a = 0; a < D; ++a) r = r * n_x + cx[a][(q >> (D - 1 - a)) & 1];
        const double* row = pad.row(r);
        for (int s = 0; s < ipow(2, D); ++s) {
            int o = 0;
            bool in = true;
            for (int a = 0; a < D; ++a) {
                const int i = cv[a][(s >> (D - 1 - a)) & 1];
                in = in && i >= 0 && i < p;
                o = o * p + i;
            }
            if (in) hi = std::max(hi, row[o]);
        }
    }
    return std::min(val, hi);
}

template <int D, int NX, int NV>
void transport_slices(const TorusGrid& xg, const VelocityGrid& vg, const FootSolver& solver,
                      const PaddedLattice& pad, double amp, double bound, std::vector<double>& fout,
                      std::string& error) {
    const std::size_t nx = xg.size(), nv = vg.size();
    const double limit2 = (bound + 1e-12 * vg.r_max()) * (bound + 1e-12 * vg.r_max());
    // Each iteration writes one x-slice; the per-node arithmetic is identical
    // regardless of how the slices are distributed.
#pragma omp parallel for schedule(static)
    for (std::int64_t jj = 0; jj < static_cast<std::int64_t>(nx); ++jj) {
        const std::size_t j = static_cast<std::size_t>(jj);
        double x0[kMaxDim];
        for (int a = 0; a < D; ++a) x0[a] = xg.coord(j, a);
        for (std::size_t i = 0; i < nv; ++i) {
            double x[kMaxDim], xi[kMaxDim];
            const auto node = vg.node(i);
            for (int a = 0; a < D; ++a) xi[a] = node[a];
            solver.foot<D>(j, x0, x, xi);
            double sp2 = 0.0;
            for (int a = 0; a < D; ++a) sp2 += xi[a] * xi[a];
            if (sp2 > limit2) {
#pragma omp critical
                if (error.empty())
                    error = "foot speed " + std::to_string(std::sqrt(sp2)) + " exceeds enlarged ball radius " +
                            std::to_string(bound);
                continue;
            }
            fout[j * nv + i] = amp * interp_node<D, NX, NV>(xg, pad, x, xi);
        }
    }
}

template <int D>
void transport_dispatch(const TorusGrid& xg, const VelocityGrid& vg, const FootSolver& solver,
                        const PaddedLattice& pad, const TransportOptions& opt, double amp, double bound,
                        std::vector<double>& fout, std::string& error) {
    auto with_v = [&]<int NX>() {
        switch (opt.v_order) {
            case InterpOrder::linear: transport_slices<D, NX, 2>(xg, vg, solver, pad, amp, bound, fout, error); break;
            case InterpOrder::cubic: transport_slices<D, NX, 4>(xg, vg, solver, pad, amp, bound, fout, error); break;
            case InterpOrder::quartic: transport_slices<D, NX, 5>(xg, vg, solver, pad, amp, bound, fout, error); break;
        }
    };
    switch (opt.x_order) {
        case InterpOrder::linear: with_v.template operator()<2>(); break;
        case InterpOrder::cubic: with_v.template operator()<4>(); break;
        case InterpOrder::quartic: with_v.template operator()<5>(); break;
    }
}

}  // namespace

KineticState::KineticState(std::shared_ptr<const TorusGrid> xg, std::shared_ptr<const VelocityGrid> vg, double t)
    : xgrid(std::move(xg)), vgrid(std::move(vg)), time(t) {
    if (xgrid->dim() != vgrid->dim()) throw ContractError("kinetic state: x and xi dimensions differ");
    f.assign(xgrid->size() * vgrid->size(), 0.0);
}

double KineticState::max_value() const noexcept {
    double m = 0.0;
    for (double v : f) m = std::max(m, v);
    return m;
}

std::int64_t KineticState::first_invalid() const noexcept {
    for (std::size_t i = 0; i < f.size(); ++i)
        if (!(f[i] >= 0.0) || !std::isfinite(f[i])) return static_cast<std::int64_t>(i);
    return -1;
}

FrozenVelocity::FrozenVelocity(std::shared_ptr<const TorusGrid> grid, std::vector<std::vector<double>> comps,
                               InterpOrder order)
    : grid_(std::move(grid)), comps_(std::move(comps)), order_(order) {
    if (static_cast<int>(comps_.size()) != grid_->dim())
        throw ContractError("frozen velocity: need one component per dimension");
    for (const auto& c : comps_)
        if (c.size() != grid_->size()) throw ContractError("frozen velocity: component size mismatch");
    for (std::size_t j = 0; j < grid_->size(); ++j) {
        double n2 = 0.0;
        for (const auto& c : comps_) n2 += c[j] * c[j];
        max_norm_ = std::max(max_norm_, std::sqrt(n2));
    }
}

FrozenVelocity FrozenVelocity::uniform(std::shared_ptr<const TorusGrid> grid, std::span<const double> value) {
    std::vector<std::vector<double>> comps;
    for (int a = 0; a < grid->dim(); ++a) comps.emplace_back(grid->size(), value[a]);
    FrozenVelocity u(std::move(grid), std::move(comps), InterpOrder::linear);
    u.constant_ = true;
    return u;
}

void FrozenVelocity::sample(const double* x, double* out) const noexcept {
    const int dim = grid_->dim();
    if (constant_) {
        for (int a = 0; a < dim; ++a) out[a] = comps_[a][0];
        return;
    }
    Stencil s;
    torus_stencil(*grid_, order_, x, s);
    for (int a = 0; a < dim; ++a) {
        double acc = 0.0;
        const double* c = comps_[a].data();
        for (int k = 0; k < s.n; ++k) acc += s.w[k] * c[s.idx[k]];
        out[a] = acc;
    }
}

void integrate_characteristic(const VelocityFn& u, int dim, double dt, int n_sub, double* x, double* xi,
                              double gamma) {
    rk4_backward(u, dim, dt, n_sub, gamma, x, xi);
}

FootPointField backward_foot_points(const TorusGrid& xg, const VelocityGrid& vg, const FrozenVelocity& u,
                                    double dt, int n_sub, double gamma) {
    if (!(dt > 0.0)) throw ContractError("backward_foot_points: dt must be positive");
    if (!std::isfinite(u.max_norm())) throw ContractError("backward_foot_points: velocity field not finite");
    const int dim = xg.dim();
    const std::size_t nx = xg.size(), nv = vg.size();
    FootPointField fp;
    fp.dim = dim;
    fp.x0.resize(nx * nv * dim);
    fp.xi0.resize(nx * nv * dim);
    fp.amplitude = std::exp(dim * gamma * dt);
    const double bound = foot_speed_bound(vg, u, dt, gamma);
    const FootSolver solver(xg, u, bound, dt, n_sub, gamma);
    for (std::size_t j = 0; j < nx; ++j) {
        for (std::size_t i = 0; i < nv; ++i) {
            double x[kMaxDim], xi[kMaxDim];
            for (int a = 0; a < dim; ++a) xi[a] = vg.node(i)[a];
            solver.foot(j, x, xi);
            double sp2 = 0.0;
            const std::size_t o = (j * nv + i) * dim;
            for (int a = 0; a < dim; ++a) {
                fp.x0[o + a] = x[a];
                fp.xi0[o + a] = xi[a];
                sp2 += xi[a] * xi[a];
            }
            check_foot(std::sqrt(sp2), bound, vg.r_max());
        }
    }
    return fp;
}

KineticState transport_step(const KineticState& state, const FrozenVelocity& u, double dt,
                            const TransportOptions& opt, TransportReport* report) {
    if (dt < 0.0) throw ContractError("transport_step: dt must be >= 0");
    const TorusGrid& xg = *state.xgrid;
    const VelocityGrid& vg = *state.vgrid;
    if (u.dim() != xg.dim() || u.grid().size() != xg.size())
        throw ContractError("transport_step: velocity field grid does not match the kinetic grid");
    KineticState out(state.xgrid, state.vgrid, state.time + dt);
    if (report) report->mass_before = global_moment(state, 0.0);
    if (dt == 0.0) {
        out.f = state.f;
        if (report) report->mass_after = report->mass_before;
        return out;
    }
    const int dim = xg.dim();
    const std::size_t nx = xg.size();
    if (!(opt.gamma > 0.0)) throw ContractError("transport_step: gamma must be positive");
    const double amp = std::exp(dim * opt.gamma * dt);
    const double bound = foot_speed_bound(vg, u, dt, opt.gamma);
    const FootSolver solver(xg, u, bound, dt, opt.n_sub, opt.gamma);
    const PaddedLattice pad(vg, state.f, nx);

    std::string error;
    switch (dim) {
        case 1: transport_dispatch<1>(xg, vg, solver, pad, opt, amp, bound, out.f, error); break;
        case 2: transport_dispatch<2>(xg, vg, solver, pad, opt, amp, bound, out.f, error); break;
        default: transport_dispatch<3>(xg, vg, solver, pad, opt, amp, bound, out.f, error); break;
    }
    if (!error.empty()) throw InvariantViolation("velocity cutoff", error);
    if (report || opt.conserve_mass) {
        const double before = report ? report->mass_before : global_moment(state, 0.0);
        const double after = global_moment(out, 0.0);
        if (report) report->mass_after = after;
        if (opt.conserve_mass && after > 0.0) {
            const double s = before / after;
            for (double& v : out.f) v *= s;
        }
    }
    return out;
}

KineticState breakup_substep_picard(const KineticState& state, const BreakupKernel& kernel, double lambda,
                                    double dt, const PicardOptions& opt, PicardReport* report) {
    if (lambda < 0.0) throw ContractError("breakup_substep_picard: lambda must be >= 0");
    if (!(opt.tol > 0.0)) throw ContractError("breakup_substep_picard: tol must be positive");
    const std::size_t nx = state.xgrid->size(), nv = state.nv();
    const double decay = std::exp(-lambda * dt);
    const double gain_w = -std::expm1(-lambda * dt);

    KineticState prev(state.xgrid, state.vgrid, state.time);  // f^0 = 0
    KineticState cur(state.xgrid, state.vgrid, state.time);
    PicardReport rep;
    double last_inc = std::numeric_limits<double>::infinity();
    for (int n = 1; n <= opt.max_iter; ++n) {
        double inc = 0.0;
        std::size_t violations = 0;
#pragma omp parallel reduction(max : inc) reduction(+ : violations)
        {
            std::vector<double> g(nv);
#pragma omp for schedule(static)
            for (std::int64_t jj = 0; jj < static_cast<std::int64_t>(nx); ++jj) {
                const std::size_t j = static_cast<std::size_t>(jj);
                kernel.gain(prev.slice(j), g);
                const auto fin = state.slice(j);
                const auto fp = prev.slice(j);
                auto fc = cur.slice(j);
                for (std::size_t i = 0; i < nv; ++i) {
                    fc[i] = decay * fin[i] + gain_w * g[i];
                    inc = std::max(inc, std::abs(fc[i] - fp[i]));
                    if (opt.check_monotone && fc[i] < fp[i]) ++violations;
                }
            }
        }
        rep.iterations = n;
        rep.monotonicity_violations += violations;
        if (n > 1 && last_inc > 0.0) rep.contraction = inc / last_inc;
        rep.last_increment = inc;
        last_inc = inc;
        std::swap(prev.f, cur.f);
        if (inc <= opt.tol) {
            if (report) *report = rep;
            prev.time = state.time;
            return prev;
        }
    }
    if (report) *report = rep;
    throw ConvergenceError("breakup Picard iteration did not reach tol " + std::to_string(opt.tol) + " in " +
                               std::to_string(opt.max_iter) + " iterations (last contraction ratio " +
                               std::to_string(rep.contraction) + ")",
                           rep.contraction);
}

KineticState breakup_substep_exact(const KineticState& state, const BreakupKernel& kernel, double lambda,
                                   double dt) {
    if (lambda < 0.0) throw ContractError("breakup_substep_exact: lambda must be >= 0");
    constexpr int kMaxTerms = 50;
    const std::size_t nx = state.xgrid->size(), nv = state.nv();
    const double a = lambda * dt;
    const double decay = std::exp(-a);
    KineticState out(state.xgrid, state.vgrid, state.time);
    bool failed = false;
#pragma omp parallel
    {
        std::vector<double> term(nv), next(nv), sum(nv);
#pragma omp for schedule(static)
        for (std::int64_t jj = 0; jj < static_cast<std::int64_t>(nx); ++jj) {
            const std::size_t j = static_cast<std::size_t>(jj);
            const auto fin = state.slice(j);
            std::copy(fin.begin(), fin.end(), term.begin());
            std::copy(fin.begin(), fin.end(), sum.begin());
            double sum_norm = 0.0;
            for (double v : sum) sum_norm = std::max(sum_norm, std::abs(v));
            bool converged = (sum_norm == 0.0 || a == 0.0);
            for (int k = 1; k <= kMaxTerms && !converged; ++k) {
                kernel.gain(term, next);
                double tn = 0.0;
                for (std::size_t i = 0; i < nv; ++i) {
                    term[i] = next[i] * (a / k);
                    sum[i] += term[i];
                    tn = std::max(tn, std::abs(term[i]));
                }
                double sn = 0.0;
                for (double v : sum) sn = std::max(sn, std::abs(v));
                converged = tn < 1e-14 * sn;
            }
            if (!converged) {
#pragma omp atomic write
                failed = true;
            }
            auto fo = out.slice(j);
            for (std::size_t i = 0; i < nv; ++i) fo[i] = decay * sum[i];
        }
    }
    if (failed)
        throw ConvergenceError("exact breakup integrator: series did not converge within 50 terms (lambda*dt = " +
                                   std::to_string(a) + " too large)",
                               a);
    return out;
}

std::vector<double> moment(const KineticState& state, double alpha) {
    if (alpha < 0.0) throw ContractError("moment: alpha must be >= 0");
    const VelocityGrid& vg = *state.vgrid;
    const std::size_t nx = state.xgrid->size(), nv = vg.size();
    std::vector<double> wp(nv);
    for (std::size_t i = 0; i < nv; ++i) wp[i] = std::pow(vg.speed(i), alpha) * vg.weight(i);
    std::vector<double> m(nx);
    for (std::size_t j = 0; j < nx; ++j) {
        const auto s = state.slice(j);
        double acc = 0.0;
        for (std::size_t i = 0; i < nv; ++i) acc += wp[i] * s[i];
        m[j] = acc;
    }
    return m;
}

double global_moment(const KineticState& state, double alpha) {
    const std::vector<double> m = moment(state, alpha);
    return pairwise_sum(m) * state.xgrid->cell_volume();
}

std::vector<std::vector<double>> vector_moment(const KineticState& state) {
    const VelocityGrid& vg = *state.vgrid;
    const int dim = vg.dim();
    const std::size_t nx = state.xgrid->size(), nv = vg.size();
    std::vector<std::vector<double>> m(dim, std::vector<double>(nx, 0.0));
    for (std::size_t j = 0; j < nx; ++j) {
        const auto s = state.slice(j);
        for (int a = 0; a < dim; ++a) {
            double acc = 0.0;
            for (std::size_t i = 0; i < nv; ++i) acc += vg.node(i)[a] * s[i] * vg.weight(i);
            m[a][j] = acc;
        }
    }
    return m;
}

}  // namespace spray
