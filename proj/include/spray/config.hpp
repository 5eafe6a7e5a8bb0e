#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace spray {

enum class KernelKind { uniform, isotropic, von_mises, identity, file };
enum class FluidInit { zero, taylor_green, uniform, random };
enum class ParticleInit { zero, bump, monokinetic, snapshot };

/// Every parameter of a run. Text form is flat sections with `key = value`
/// lines; see emit_config for the full key list.
struct SimConfig {
    // [grid]
    int dim = 2;
    int n_x = 32;
    int n_v = 15;
    double length = 6.283185307179586;
    double r_max = 0.0;      // required
    double shell_tol = 0.0;  // 0 -> 1e-9 r_max
    int m_modes = 0;         // 0 -> (n_x - 1) / 3
    double r_margin = 1.0;
    // [physics]
    double lambda = 0.0;
    double mu = 0.1;
    double c = 1.0;
    double gamma = 1.0;
    // [kernel]
    KernelKind kernel = KernelKind::uniform;
    double kappa = 2.0;
    std::string kernel_file;
    // [time]
    double dt = 1e-3;
    double t_final = 0.5;
    int record_every = 1;
    // [solver]
    double fp_tol = 1e-6;
    int fp_max = 20;
    double picard_tol = 1e-10;
    int picard_max = 200;
    double cfl_max = 0.5;
    int n_sub = 4;
    std::string x_order = "cubic";
    std::string v_order = "quartic";
    bool conserve_mass = true;
    bool exact_breakup = false;
    int threads = 1;
    std::uint64_t seed = 1;
    // [init]
    FluidInit fluid = FluidInit::zero;
    double fluid_amplitude = 1.0;  // taylor_green amplitude, or max |u0| for random
    std::array<double, 3> fluid_velocity{0.0, 0.0, 0.0};
    ParticleInit particles = ParticleInit::zero;
    double particle_n0 = 0.2;
    double particle_modulation = 0.5;  // n0 (1 + m prod cos x_a)
    double particle_radius = 2.0;      // bump support
    std::array<double, 3> particle_velocity{0.0, 0.0, 0.0};
    std::string snapshot;
    // [output]
    std::string output_dir;
    int snapshot_every = 0;  // 0: final state only
    bool write_snapshots = true;

    bool operator==(const SimConfig&) const = default;

    double effective_shell_tol() const { return shell_tol > 0.0 ? shell_tol : 1e-9 * r_max; }
    int effective_m_modes() const { return m_modes > 0 ? m_modes : (n_x - 1) / 3; }
};

/// Parses and validates. Throws ConfigError carrying the line number of the
/// first problem (0 for whole-file checks such as a missing r_max).
SimConfig parse_config(const std::string& text);
/// Applies `key=value` or `section.key=value` overrides after parsing.
SimConfig parse_config(const std::string& text, const std::vector<std::string>& overrides);
/// Canonical text: every key, fixed order, 17 significant digits.
std::string emit_config(const SimConfig& cfg);
/// SHA-256 (hex) of the canonical text.
std::string config_hash(const SimConfig& cfg);
/// Checks ranges and cross-field rules; throws ConfigError(0, ...).
void validate_config(const SimConfig& cfg);

/// Largest particle speed of the initial data and |u0|_inf implied by the
/// closed-form fields (snapshot speeds are checked on load).
double initial_particle_speed(const SimConfig& cfg);
double initial_fluid_speed(const SimConfig& cfg);

std::string sha256_hex(const std::string& bytes);

}  // namespace spray
