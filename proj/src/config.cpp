#include "spray/config.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>

#include "spray/error.hpp"

namespace spray {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double to_double(const std::string& v) {
    const char* b = v.data();
    const char* e = b + v.size();
    double out = 0.0;
    auto [p, ec] = std::from_chars(b, e, out);
    if (ec != std::errc() || p != e || !std::isfinite(out)) throw std::invalid_argument("expected a finite number, got '" + v + "'");
    return out;
}

long long to_int(const std::string& v) {
    long long out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) throw std::invalid_argument("expected an integer, got '" + v + "'");
    return out;
}

bool to_bool(const std::string& v) {
    if (v == "true" || v == "yes" || v == "1") return true;
    if (v == "false" || v == "no" || v == "0") return false;
    throw std::invalid_argument("expected true or false, got '" + v + "'");
}

std::array<double, 3> to_vec(const std::string& v) {
    std::array<double, 3> out{0.0, 0.0, 0.0};
    std::stringstream ss(v);
    std::string item;
    int n = 0;
    while (std::getline(ss, item, ',')) {
        if (n == 3) throw std::invalid_argument("at most 3 components");
        out[n++] = to_double(trim(item));
    }
    if (n == 0) throw std::invalid_argument("empty vector");
    return out;
}

std::string vec_str(const std::array<double, 3>& v) {
    return fmt_double(v[0]) + ", " + fmt_double(v[1]) + ", " + fmt_double(v[2]);
}

template <class E>
E to_enum(const std::string& v, const std::vector<std::pair<const char*, E>>& names) {
    for (const auto& [n, e] : names)
        if (v == n) return e;
    std::string all;
    for (const auto& [n, e] : names) all += (all.empty() ? "" : "|") + std::string(n);
    throw std::invalid_argument("expected one of " + all + ", got '" + v + "'");
}

template <class E>
std::string enum_str(E e, const std::vector<std::pair<const char*, E>>& names) {
    for (const auto& [n, x] : names)
        if (x == e) return n;
    return "?";
}

const std::vector<std::pair<const char*, KernelKind>> kKernelNames = {
    {"uniform", KernelKind::uniform}, {"isotropic", KernelKind::isotropic},
    {"von_mises", KernelKind::von_mises}, {"identity", KernelKind::identity}, {"file", KernelKind::file}};
const std::vector<std::pair<const char*, FluidInit>> kFluidNames = {
    {"zero", FluidInit::zero}, {"taylor_green", FluidInit::taylor_green}, {"uniform", FluidInit::uniform},
    {"random", FluidInit::random}};
const std::vector<std::pair<const char*, ParticleInit>> kParticleNames = {
    {"zero", ParticleInit::zero}, {"bump", ParticleInit::bump},
    {"monokinetic", ParticleInit::monokinetic}, {"snapshot", ParticleInit::snapshot}};

struct Key {
    const char* section;
    const char* name;
    std::function<void(SimConfig&, const std::string&)> set;
    std::function<std::string(const SimConfig&)> get;
};

#define NUM_KEY(sec, field) \
    Key{sec, #field, [](SimConfig& c, const std::string& v) { c.field = to_double(v); }, \
        [](const SimConfig& c) { return fmt_double(c.field); }}
#define INT_KEY(sec, field) \
    Key{sec, #field, [](SimConfig& c, const std::string& v) { c.field = static_cast<decltype(c.field)>(to_int(v)); }, \
        [](const SimConfig& c) { return std::to_string(c.field); }}
#define BOOL_KEY(sec, field) \
    Key{sec, #field, [](SimConfig& c, const std::string& v) { c.field = to_bool(v); }, \
        [](const SimConfig& c) { return std::string(c.field ? "true" : "false"); }}
#define STR_KEY(sec, field) \
    Key{sec, #field, [](SimConfig& c, const std::string& v) { c.field = v; }, \
        [](const SimConfig& c) { return c.field; }}
#define VEC_KEY(sec, field) \
    Key{sec, #field, [](SimConfig& c, const std::string& v) { c.field = to_vec(v); }, \
        [](const SimConfig& c) { return vec_str(c.field); }}
#define ENUM_KEY(sec, field, names) \
    Key{sec, #field, [](SimConfig& c, const std::string& v) { c.field = to_enum(v, names); }, \
        [](const SimConfig& c) { return enum_str(c.field, names); }}

const std::vector<Key>& keys() {
    static const std::vector<Key> k = {
        INT_KEY("grid", dim), INT_KEY("grid", n_x), INT_KEY("grid", n_v), NUM_KEY("grid", length),
        NUM_KEY("grid", r_max), NUM_KEY("grid", shell_tol), INT_KEY("grid", m_modes), NUM_KEY("grid", r_margin),
        NUM_KEY("physics", lambda), NUM_KEY("physics", mu), NUM_KEY("physics", c), NUM_KEY("physics", gamma),
        ENUM_KEY("kernel", kernel, kKernelNames), NUM_KEY("kernel", kappa), STR_KEY("kernel", kernel_file),
        NUM_KEY("time", dt), NUM_KEY("time", t_final), INT_KEY("time", record_every),
        NUM_KEY("solver", fp_tol), INT_KEY("solver", fp_max), NUM_KEY("solver", picard_tol),
        INT_KEY("solver", picard_max), NUM_KEY("solver", cfl_max), INT_KEY("solver", n_sub),
        STR_KEY("solver", x_order), STR_KEY("solver", v_order), BOOL_KEY("solver", conserve_mass),
        BOOL_KEY("solver", exact_breakup), INT_KEY("solver", threads), INT_KEY("solver", seed),
        ENUM_KEY("init", fluid, kFluidNames), NUM_KEY("init", fluid_amplitude), VEC_KEY("init", fluid_velocity),
        ENUM_KEY("init", particles, kParticleNames), NUM_KEY("init", particle_n0),
        NUM_KEY("init", particle_modulation), NUM_KEY("init", particle_radius),
        VEC_KEY("init", particle_velocity), STR_KEY("init", snapshot),
        STR_KEY("output", output_dir), INT_KEY("output", snapshot_every), BOOL_KEY("output", write_snapshots),
    };
    return k;
}

const Key* find_key(const std::string& section, const std::string& name) {
    for (const Key& k : keys())
        if (name == k.name && (section.empty() || section == k.section)) return &k;
    return nullptr;
}

void apply(SimConfig& cfg, const std::string& section, const std::string& name, const std::string& value,
           int line) {
    const Key* k = find_key(section, name);
    if (!k)
        throw ConfigError(line, "unknown key '" + (section.empty() ? "" : section + ".") + name + "'");
    try {
        k->set(cfg, value);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(line, std::string(k->name) + ": " + e.what());
    }
}

double norm3(const std::array<double, 3>& v, int dim) {
    double s = 0.0;
    for (int a = 0; a < dim; ++a) s += v[a] * v[a];
    return std::sqrt(s);
}

void require(bool ok, const std::string& key, const std::string& rule) {
    if (!ok) throw ConfigError(0, key + ": must satisfy " + rule);
}

SimConfig parse_lines(const std::string& text, std::map<std::string, int>* lines) {
    SimConfig cfg;
    std::istringstream is(text);
    std::string raw, section;
    int line = 0;
    while (std::getline(is, raw)) {
        ++line;
        const auto hash = raw.find('#');
        const std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']') throw ConfigError(line, "malformed section header '" + s + "'");
            section = trim(s.substr(1, s.size() - 2));
            static const char* known[] = {"grid", "physics", "kernel", "time", "solver", "init", "output"};
            bool ok = false;
            for (const char* k : known) ok = ok || section == k;
            if (!ok) throw ConfigError(line, "unknown section [" + section + "]");
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError(line, "expected 'key = value', got '" + s + "'");
        const std::string name = trim(s.substr(0, eq));
        if (section.empty()) throw ConfigError(line, "key '" + name + "' outside any section");
        const std::string full = section + "." + name;
        if (lines->count(full)) throw ConfigError(line, "duplicate key '" + full + "'");
        apply(cfg, section, name, trim(s.substr(eq + 1)), line);
        (*lines)[full] = line;
    }
    return cfg;
}

}  // namespace

double initial_particle_speed(const SimConfig& cfg) {
    switch (cfg.particles) {
        case ParticleInit::bump: return norm3(cfg.particle_velocity, cfg.dim) + cfg.particle_radius;
        case ParticleInit::monokinetic: return norm3(cfg.particle_velocity, cfg.dim);
        default: return 0.0;
    }
}

double initial_fluid_speed(const SimConfig& cfg) {
    switch (cfg.fluid) {
        case FluidInit::taylor_green:
        case FluidInit::random: return std::abs(cfg.fluid_amplitude);
        case FluidInit::uniform: return norm3(cfg.fluid_velocity, cfg.dim);
        default: return 0.0;
    }
}

void validate_config(const SimConfig& c) {
    require(c.dim >= 1 && c.dim <= 3, "dim", "1 <= dim <= 3");
    require(c.n_x >= 4 && c.n_x % 2 == 0, "n_x", "n_x >= 4 and even");
    require(c.n_v >= 3, "n_v", "n_v >= 3");
    require(c.length > 0.0, "length", "length > 0");
    require(c.shell_tol >= 0.0, "shell_tol", "shell_tol >= 0");
    require(c.m_modes >= 0 && c.m_modes <= c.n_x / 2 - 1, "m_modes", "0 <= m_modes <= n_x/2 - 1");
    require(c.r_margin >= 1.0, "r_margin", "r_margin >= 1");
    require(c.lambda >= 0.0, "lambda", "lambda >= 0");
    require(c.mu >= 0.0, "mu", "mu >= 0");
    require(c.c >= 0.0, "c", "c >= 0");
    require(c.gamma >= 0.0, "gamma", "gamma >= 0");
    require(c.kappa >= 0.0, "kappa", "kappa >= 0");
    require(c.kernel != KernelKind::file || !c.kernel_file.empty(), "kernel_file", "non-empty when kernel = file");
    require(c.dt > 0.0, "dt", "dt > 0");
    require(c.t_final > 0.0, "t_final", "t_final > 0");
    require(c.record_every >= 1, "record_every", "record_every >= 1");
    require(c.fp_tol > 0.0, "fp_tol", "fp_tol > 0");
    require(c.fp_max >= 1, "fp_max", "fp_max >= 1");
    require(c.picard_tol > 0.0, "picard_tol", "picard_tol > 0");
    require(c.picard_max >= 1, "picard_max", "picard_max >= 1");
    require(c.cfl_max > 0.0, "cfl_max", "cfl_max > 0");
    require(c.n_sub >= 1, "n_sub", "n_sub >= 1");
    auto order_ok = [](const std::string& s) { return s == "linear" || s == "cubic" || s == "quartic"; };
    require(order_ok(c.x_order), "x_order", "one of linear|cubic|quartic");
    require(order_ok(c.v_order), "v_order", "one of linear|cubic|quartic");
    require(c.threads >= 1, "threads", "threads >= 1");
    require(c.fluid != FluidInit::taylor_green || c.dim == 2, "fluid", "taylor_green only in dim 2");
    require(c.fluid != FluidInit::random || c.dim >= 2, "fluid", "random needs dim >= 2");
    require(c.particle_n0 >= 0.0, "particle_n0", "particle_n0 >= 0");
    require(std::abs(c.particle_modulation) <= 1.0, "particle_modulation", "|particle_modulation| <= 1");
    require(c.particle_radius > 0.0, "particle_radius", "particle_radius > 0");
    require(c.particles != ParticleInit::snapshot || !c.snapshot.empty(), "snapshot",
            "non-empty when particles = snapshot");
    require(c.snapshot_every >= 0, "snapshot_every", "snapshot_every >= 0");

    const double need = c.r_margin * (initial_particle_speed(c) + initial_fluid_speed(c));
    if (!(c.r_max > 0.0))
        throw ConfigError(0, "r_max: required; need r_max >= r_margin * (max initial speed + |u0|_inf) = " +
                                 fmt_double(need));
    if (c.r_max < need * (1.0 - 1e-12))
        throw ConfigError(0, "r_max: must satisfy r_max >= r_margin * (max initial speed + |u0|_inf) = " +
                                 fmt_double(need) + ", got " + fmt_double(c.r_max));
}

SimConfig parse_config(const std::string& text) { return parse_config(text, {}); }

SimConfig parse_config(const std::string& text, const std::vector<std::string>& overrides) {
    std::map<std::string, int> lines;
    SimConfig cfg = parse_lines(text, &lines);
    std::vector<std::string> overridden;
    for (const std::string& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) throw ConfigError(0, "override '" + o + "' is not key=value");
        std::string key = trim(o.substr(0, eq)), section;
        const auto dot = key.find('.');
        if (dot != std::string::npos) {
            section = key.substr(0, dot);
            key = key.substr(dot + 1);
        }
        apply(cfg, section, key, trim(o.substr(eq + 1)), 0);
        for (auto it = lines.begin(); it != lines.end();)
            it = it->first.substr(it->first.find('.') + 1) == key ? lines.erase(it) : std::next(it);
        overridden.push_back(key);
    }
    try {
        validate_config(cfg);
    } catch (const ConfigError& e) {
        // Point at the offending line when the key was given in the file.
        const std::string msg = e.what();
        const auto colon = msg.find(':');
        const std::string key = msg.substr(0, colon);
        for (const auto& [full, line] : lines)
            if (full.substr(full.find('.') + 1) == key) throw ConfigError(line, msg);
        for (const std::string& k : overridden)
            if (k == key) throw ConfigError(0, "--set " + msg);
        throw;
    }
    return cfg;
}

std::string emit_config(const SimConfig& cfg) {
    std::string out, section;
    for (const Key& k : keys()) {
        if (section != k.section) {
            section = k.section;
            out += (out.empty() ? "[" : "\n[") + section + "]\n";
        }
        out += std::string(k.name) + " = " + k.get(cfg) + "\n";
    }
    return out;
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw SprayError("sha256 failed");
    static const char* hex = "0123456789abcdef";
    std::string s;
    for (unsigned int i = 0; i < len; ++i) {
        s += hex[md[i] >> 4];
        s += hex[md[i] & 15];
    }
    return s;
}

std::string config_hash(const SimConfig& cfg) { return sha256_hex(emit_config(cfg)); }

}  // namespace spray
