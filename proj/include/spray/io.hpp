#pragma once

#include <memory>
#include <string>
#include <vector>

#include "spray/config.hpp"
#include "spray/coupling.hpp"

namespace spray {

/// Binary snapshot, little-endian:
///   "SPRYSNAP" | int64 version | int64 d | int64 n_x | int64 n_v | f64 r_max | f64 time | f64 length
///   | int64 count | count f64 values of f (x-major, xi-minor)
///   | int64 has_fluid | [f64 mu | int64 m_modes | d blocks of n_x^d (re, im) f64 pairs]
struct Snapshot {
    int dim = 0, n_x = 0, n_v = 0;
    double r_max = 0.0, time = 0.0, length = 0.0;
    std::vector<double> f;
    bool has_fluid = false;
    double mu = 0.0;
    int m_modes = 0;
    std::vector<std::vector<cplx>> u_hat;
};

void write_snapshot(const std::string& path, const CoupledState& state);
/// Throws SprayError on a short, truncated or foreign file.
Snapshot read_snapshot(const std::string& path);

std::string sha256_file(const std::string& path);

/// Grids, spectral context and kernel for a config.
struct Setup {
    std::shared_ptr<const TorusGrid> xgrid;
    std::shared_ptr<const VelocityGrid> vgrid;
    std::shared_ptr<SpectralContext> ctx;
    std::shared_ptr<const BreakupKernel> kernel;
};

Setup make_setup(const SimConfig& cfg);
/// Initial state from the closed-form or snapshot initial data. Snapshot
/// input is checked against the grids but not for positivity; run() does that.
CoupledState make_initial_state(const SimConfig& cfg, const Setup& setup);
RunParams make_run_params(const SimConfig& cfg);
InterpOrder parse_order(const std::string& s);

/// Normalization factor of the bump profile (1 - |xi|^2/a^2)^4 over R^d.
double bump_integral(int dim, double a);

struct RunManifest {
    std::string config_hash;
    std::string code_version;
    std::string started, finished;  // UTC, ISO 8601
    std::string status;
};

/// Lists the files with their checksums and writes manifest.json into dir.
void write_manifest(const std::string& dir, RunManifest m, const std::vector<std::string>& files);
std::string utc_now();

}  // namespace spray
