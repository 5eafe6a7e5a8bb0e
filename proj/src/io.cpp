#include "spray/io.hpp"

#include <openssl/evp.h>

#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <random>
#include <sstream>

#include "spray/error.hpp"

namespace spray {

static_assert(std::endian::native == std::endian::little, "snapshot I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'S', 'P', 'R', 'Y', 'S', 'N', 'A', 'P'};
constexpr std::int64_t kVersion = 1;

template <class T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T take(std::istream& is, const std::string& path) {
    T v{};
    if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw SprayError("snapshot " + path + ": truncated");
    return v;
}

std::string read_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw SprayError("cannot open " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

double spatial_profile(const SimConfig& cfg, const TorusGrid& g, std::size_t j) {
    const double k = 2.0 * std::numbers::pi / g.length();
    double p = 1.0;
    for (int a = 0; a < g.dim(); ++a) p *= std::cos(k * g.coord(j, a));
    return cfg.particle_n0 * (1.0 + cfg.particle_modulation * p);
}

/// Divergence-free field on the modes 1 <= |k|_inf <= 2, scaled so that
/// max |u| equals fluid_amplitude.
FluidState random_fluid(const SimConfig& cfg, const Setup& setup) {
    const TorusGrid& g = *setup.xgrid;
    const int d = cfg.dim;
    const double k0 = 2.0 * std::numbers::pi / g.length();
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<std::vector<double>> comps(d, std::vector<double>(g.size(), 0.0));
    std::array<int, 3> k{0, 0, 0};
    const int span = d == 3 ? 5 : 1;
    for (int n = 0; n < 25 * span; ++n) {
        int rem = n;
        for (int a = 0; a < d; ++a) {
            k[a] = rem % 5 - 2;
            rem /= 5;
        }
        // one representative of each +-k pair
        int first = 0;
        for (int a = d - 1; a >= 0 && first == 0; --a) first = k[a];
        if (first <= 0) continue;
        double kk = 0.0;
        for (int a = 0; a < d; ++a) kk += k[a] * k[a];
        for (int part = 0; part < 2; ++part) {
            std::array<double, 3> v{nd(rng), nd(rng), nd(rng)};
            double kv = 0.0;
            for (int a = 0; a < d; ++a) kv += k[a] * v[a];
            for (int a = 0; a < d; ++a) v[a] = (v[a] - kv / kk * k[a]) / kk;
            for (std::size_t j = 0; j < g.size(); ++j) {
                double th = 0.0;
                for (int a = 0; a < d; ++a) th += k0 * k[a] * g.coord(j, a);
                const double w = part == 0 ? std::cos(th) : std::sin(th);
                for (int a = 0; a < d; ++a) comps[a][j] += v[a] * w;
            }
        }
    }
    const double m = max_speed(comps);
    for (auto& c : comps)
        for (double& x : c) x *= cfg.fluid_amplitude / m;
    return fluid_from_physical(setup.ctx, cfg.mu, comps, 0.0);
}

}  // namespace

void write_snapshot(const std::string& path, const CoupledState& s) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw SprayError("cannot write " + path);
    const TorusGrid& g = *s.kinetic.xgrid;
    const VelocityGrid& v = *s.kinetic.vgrid;
    os.write(kMagic, 8);
    put<std::int64_t>(os, kVersion);
    put<std::int64_t>(os, g.dim());
    put<std::int64_t>(os, g.n_x());
    put<std::int64_t>(os, v.n_v());
    put<double>(os, v.r_max());
    put<double>(os, s.time);
    put<double>(os, g.length());
    put<std::int64_t>(os, static_cast<std::int64_t>(s.kinetic.f.size()));
    os.write(reinterpret_cast<const char*>(s.kinetic.f.data()), std::streamsize(s.kinetic.f.size() * sizeof(double)));
    const bool fluid = s.fluid.ctx != nullptr;
    put<std::int64_t>(os, fluid ? 1 : 0);
    if (fluid) {
        put<double>(os, s.fluid.mu);
        put<std::int64_t>(os, s.fluid.ctx->m_modes());
        for (const auto& comp : s.fluid.u_hat)
            for (const cplx& z : comp) {
                put<double>(os, z.real());
                put<double>(os, z.imag());
            }
    }
    if (!os) throw SprayError("write failed: " + path);
}

Snapshot read_snapshot(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw SprayError("cannot open snapshot " + path);
    char magic[8];
    if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) throw SprayError("snapshot " + path + ": bad magic");
    if (take<std::int64_t>(is, path) != kVersion) throw SprayError("snapshot " + path + ": unsupported version");
    Snapshot s;
    s.dim = int(take<std::int64_t>(is, path));
    s.n_x = int(take<std::int64_t>(is, path));
    s.n_v = int(take<std::int64_t>(is, path));
    s.r_max = take<double>(is, path);
    s.time = take<double>(is, path);
    s.length = take<double>(is, path);
    if (s.dim < 1 || s.dim > 3 || s.n_x < 4 || s.n_v < 3) throw SprayError("snapshot " + path + ": bad header");
    const auto count = take<std::int64_t>(is, path);
    if (count < 0 || count > (std::int64_t(1) << 40)) throw SprayError("snapshot " + path + ": bad size");
    s.f.resize(std::size_t(count));
    if (!is.read(reinterpret_cast<char*>(s.f.data()), std::streamsize(count * sizeof(double))))
        throw SprayError("snapshot " + path + ": truncated");
    s.has_fluid = take<std::int64_t>(is, path) != 0;
    if (s.has_fluid) {
        s.mu = take<double>(is, path);
        s.m_modes = int(take<std::int64_t>(is, path));
        std::size_t n = 1;
        for (int a = 0; a < s.dim; ++a) n *= std::size_t(s.n_x);
        s.u_hat.assign(s.dim, std::vector<cplx>(n));
        for (auto& comp : s.u_hat)
            for (cplx& z : comp) {
                const double re = take<double>(is, path);
                z = cplx(re, take<double>(is, path));
            }
    }
    if (is.peek() != std::char_traits<char>::eof()) throw SprayError("snapshot " + path + ": trailing bytes");
    return s;
}

std::string sha256_file(const std::string& path) { return sha256_hex(read_file(path)); }

InterpOrder parse_order(const std::string& s) {
    if (s == "linear") return InterpOrder::linear;
    if (s == "cubic") return InterpOrder::cubic;
    if (s == "quartic") return InterpOrder::quartic;
    throw ConfigError(0, "unknown interpolation order '" + s + "'");
}

double bump_integral(int dim, double a) {
    // |S^{d-1}| a^d int_0^1 s^{d-1} (1 - s^2)^4 ds, the radial part is B(d/2, 5)/2
    const double sphere = dim == 1 ? 2.0 : dim == 2 ? 2.0 * std::numbers::pi : 4.0 * std::numbers::pi;
    return sphere * std::pow(a, dim) * 0.5 * std::beta(0.5 * dim, 5.0);
}

Setup make_setup(const SimConfig& cfg) {
    Setup s;
    s.xgrid = std::make_shared<const TorusGrid>(make_torus_grid(cfg.dim, cfg.n_x, cfg.length));
    s.vgrid = std::make_shared<const VelocityGrid>(
        make_velocity_grid(cfg.dim, cfg.n_v, cfg.r_max, cfg.effective_shell_tol()));
    s.ctx = std::make_shared<SpectralContext>(s.xgrid, cfg.effective_m_modes());
    switch (cfg.kernel) {
        case KernelKind::uniform:
            s.kernel = std::make_shared<const BreakupKernel>(build_uniform_shell_kernel(s.vgrid));
            break;
        case KernelKind::isotropic:
            s.kernel = std::make_shared<const BreakupKernel>(
                build_self_similar_kernel(s.vgrid, UnitSphereProfile::isotropic()));
            break;
        case KernelKind::von_mises:
            s.kernel = std::make_shared<const BreakupKernel>(
                build_self_similar_kernel(s.vgrid, UnitSphereProfile::von_mises(cfg.kappa)));
            break;
        case KernelKind::identity:
            s.kernel = std::make_shared<const BreakupKernel>(
                build_self_similar_kernel(s.vgrid, UnitSphereProfile::identity()));
            break;
        case KernelKind::file:
            s.kernel = std::make_shared<const BreakupKernel>(kernel_from_json(read_file(cfg.kernel_file), s.vgrid));
            break;
    }
    return s;
}

CoupledState make_initial_state(const SimConfig& cfg, const Setup& setup) {
    CoupledState st;
    st.kinetic = KineticState(setup.xgrid, setup.vgrid, 0.0);
    const TorusGrid& g = *setup.xgrid;
    const VelocityGrid& vg = *setup.vgrid;
    const std::size_t nv = vg.size();
    switch (cfg.fluid) {
        case FluidInit::zero: st.fluid = FluidState(setup.ctx, cfg.mu, 0.0); break;
        case FluidInit::taylor_green:
            st.fluid = taylor_green_reference(setup.ctx, 0.0, cfg.mu, cfg.fluid_amplitude).state;
            break;
        case FluidInit::uniform: {
            std::vector<std::vector<double>> comps(cfg.dim, std::vector<double>(g.size()));
            for (int a = 0; a < cfg.dim; ++a) std::fill(comps[a].begin(), comps[a].end(), cfg.fluid_velocity[a]);
            st.fluid = fluid_from_physical(setup.ctx, cfg.mu, comps, 0.0);
            break;
        }
        case FluidInit::random: st.fluid = random_fluid(cfg, setup); break;
    }
    switch (cfg.particles) {
        case ParticleInit::zero: break;
        case ParticleInit::bump: {
            const double norm = bump_integral(cfg.dim, cfg.particle_radius);
            const double a2 = cfg.particle_radius * cfg.particle_radius;
            std::vector<double> prof(nv);
            for (std::size_t i = 0; i < nv; ++i) {
                const auto xi = vg.node(i);
                double d2 = 0.0;
                for (int a = 0; a < cfg.dim; ++a) d2 += (xi[a] - cfg.particle_velocity[a]) * (xi[a] - cfg.particle_velocity[a]);
                const double q = 1.0 - d2 / a2;
                prof[i] = q > 0.0 ? q * q * q * q / norm : 0.0;
            }
            for (std::size_t j = 0; j < g.size(); ++j) {
                const double rho = spatial_profile(cfg, g, j);
                for (std::size_t i = 0; i < nv; ++i) st.kinetic.f[j * nv + i] = rho * prof[i];
            }
            break;
        }
        case ParticleInit::monokinetic: {
            std::array<int, kMaxDim> idx{0, 0, 0};
            for (int a = 0; a < cfg.dim; ++a)
                idx[a] = int(std::lround((cfg.particle_velocity[a] + cfg.r_max) / vg.spacing()));
            const std::int64_t node = vg.node_at(idx);
            if (node < 0) throw ConfigError(0, "particle_velocity: nearest lattice node lies outside the velocity ball");
            for (std::size_t j = 0; j < g.size(); ++j)
                st.kinetic.f[j * nv + std::size_t(node)] = spatial_profile(cfg, g, j) / vg.weight(std::size_t(node));
            break;
        }
        case ParticleInit::snapshot: {
            const Snapshot s = read_snapshot(cfg.snapshot);
            if (s.dim != cfg.dim || s.n_x != cfg.n_x || s.n_v != cfg.n_v || s.r_max != cfg.r_max ||
                s.length != cfg.length || s.f.size() != st.kinetic.f.size())
                throw ConfigError(0, "snapshot: grid of " + cfg.snapshot + " does not match the config");
            st.kinetic.f = s.f;
            double vmax = 0.0;
            for (std::size_t j = 0; j < g.size(); ++j)
                for (std::size_t i = 0; i < nv; ++i)
                    if (s.f[j * nv + i] != 0.0) vmax = std::max(vmax, vg.speed(i));
            const double need = cfg.r_margin * (vmax + initial_fluid_speed(cfg));
            if (cfg.r_max < need * (1.0 - 1e-12))
                throw ConfigError(0, "r_max: must satisfy r_max >= r_margin * (max initial speed + |u0|_inf) = " +
                                         std::to_string(need));
            break;
        }
    }
    return st;
}

RunParams make_run_params(const SimConfig& cfg) {
    RunParams p;
    p.t_final = cfg.t_final;
    p.record_every = cfg.record_every;
    StepParams& s = p.step;
    s.dt = cfg.dt;
    s.lambda = cfg.lambda;
    s.c = cfg.c;
    s.gamma = cfg.gamma;
    s.fp_tol = cfg.fp_tol;
    s.fp_max = cfg.fp_max;
    s.exact_breakup = cfg.exact_breakup;
    s.transport.n_sub = cfg.n_sub;
    s.transport.gamma = cfg.gamma;
    s.transport.x_order = parse_order(cfg.x_order);
    s.transport.v_order = parse_order(cfg.v_order);
    s.transport.conserve_mass = cfg.conserve_mass;
    s.picard.tol = cfg.picard_tol;
    s.picard.max_iter = cfg.picard_max;
    s.picard.check_monotone = true;
    s.ns.cfl_max = cfg.cfl_max;
    return p;
}

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_manifest(const std::string& dir, RunManifest m, const std::vector<std::string>& files) {
    namespace fs = std::filesystem;
    nlohmann::ordered_json j;
    j["config_hash"] = m.config_hash;
    j["code_version"] = m.code_version;
    j["started"] = m.started;
    j["finished"] = m.finished;
    j["status"] = m.status;
    j["files"] = nlohmann::json::array();
    for (const std::string& f : files) {
        const fs::path p = fs::path(dir) / f;
        j["files"].push_back({{"path", f}, {"sha256", sha256_file(p.string())}, {"bytes", fs::file_size(p)}});
    }
    std::ofstream os(fs::path(dir) / "manifest.json");
    os << j.dump(2) << "\n";
    if (!os) throw SprayError("cannot write manifest in " + dir);
}

}  // namespace spray
