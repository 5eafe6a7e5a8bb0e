// spraysim: command-line driver for runs, kernel checks and studies.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "spray/config.hpp"
#include "spray/diagnostics.hpp"
#include "spray/error.hpp"
#include "spray/io.hpp"
#include "spray/parallel.hpp"
#include "spray/study.hpp"

namespace fs = std::filesystem;
using namespace spray;

namespace {

enum Exit { kOk = 0, kFail = 1, kConfig = 2, kInvariant = 3 };

std::string slurp(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError(0, "cannot read config " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

SimConfig load(const std::string& path, const std::vector<std::string>& sets) {
    SimConfig cfg = parse_config(slurp(path), sets);
    set_threads(cfg.threads);
    return cfg;
}

/// -o wins, then output_dir from the config, then $SPRAYSIM_OUTPUT_ROOT/<hash>,
/// then ./spraysim_out/<hash>.
std::string output_dir(const std::string& flag, const SimConfig& cfg, const std::string& leaf) {
    if (!flag.empty()) return flag;
    if (!cfg.output_dir.empty()) return cfg.output_dir;
    const char* root = std::getenv("SPRAYSIM_OUTPUT_ROOT");
    const fs::path base = root && *root ? fs::path(root) : fs::path("spraysim_out");
    return (base / (config_hash(cfg).substr(0, 12) + leaf)).string();
}

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

int simulate(const std::string& path, const std::vector<std::string>& sets, const std::string& out_flag) {
    const SimConfig cfg = load(path, sets);
    const std::string dir = output_dir(out_flag, cfg, "");
    fs::create_directories(dir);
    RunManifest man;
    man.config_hash = config_hash(cfg);
    man.code_version = SPRAY_VERSION;
    man.started = utc_now();
    std::vector<std::string> files = {"config.txt", "diagnostics.csv"};
    {
        std::ofstream os(fs::path(dir) / "config.txt");
        os << emit_config(cfg);
    }
    std::cout << "# config hash " << man.config_hash << "\n" << emit_config(cfg);

    const Setup su = make_setup(cfg);
    const CoupledState s0 = make_initial_state(cfg, su);
    RunParams p = make_run_params(cfg);
    std::ofstream csv(fs::path(dir) / "diagnostics.csv");
    csv << diagnostics_header() << "\n";
    std::vector<DiagnosticsRecord> rows;
    p.on_record = [&](const DiagnosticsRecord& r) {
        csv << format_record(r) << "\n";
        csv.flush();
        rows.push_back(r);
    };
    double u_max = max_speed(to_physical(s0.fluid));
    auto snap = [&](const CoupledState& s, long step) {
        char name[40];
        std::snprintf(name, sizeof name, "snapshot_%08ld.bin", step);
        write_snapshot((fs::path(dir) / name).string(), s);
        files.push_back(name);
    };
    p.on_step = [&](long n, const CoupledState& s, const FixedPointReport&) {
        u_max = std::max(u_max, max_speed(to_physical(s.fluid)));
        if (cfg.write_snapshots && cfg.snapshot_every > 0 && n % cfg.snapshot_every == 0) snap(s, n);
    };
    int status = kOk;
    try {
        const RunResult r = run(s0, *su.kernel, p);
        if (cfg.write_snapshots && (cfg.snapshot_every == 0 || r.steps % cfg.snapshot_every != 0)) snap(r.final_state, r.steps);
        BoundInputs bi;
        bi.rows = rows;
        bi.dim = cfg.dim;
        bi.lambda = cfg.lambda;
        bi.gamma = cfg.gamma;
        bi.K = kernel_bounds(*su.kernel).K;
        bi.t_final = cfg.t_final;
        bi.u_max = u_max;
        const BoundReport br = bound_suite(bi);
        std::cout << "steps," << r.steps << "\nE0," << num(r.ledger.E0) << "\nmax_residual," << num(r.max_residual)
                  << "\nmax_abs_residual," << num(r.max_abs_residual) << "\nmax_fp_iters," << r.max_fp_iters
                  << "\nmonotonicity_violations," << r.monotonicity_violations << "\n";
        for (const EnvelopeCheck& c : br.checks)
            std::cout << "envelope_" << c.name << "," << (c.pass ? (c.near ? "PASS_NEAR" : "PASS") : "EXCEEDED") << ","
                      << num(c.worst_ratio) << "\n";
        man.status = "ok";
    } catch (const InvariantViolation& e) {
        std::cerr << "spraysim: " << e.what() << "\n";
        man.status = "invariant violated: " + e.invariant();
        status = kInvariant;
    }
    csv.close();
    man.finished = utc_now();
    write_manifest(dir, man, files);
    std::cout << "output," << dir << "\n";
    return status;
}

int kernel_check(const std::string& path, const std::vector<std::string>& sets, const std::string& write) {
    const SimConfig cfg = load(path, sets);
    const Setup su = make_setup(cfg);
    const BreakupKernel& k = *su.kernel;
    const VelocityGrid& vg = *su.vgrid;
    const KernelBounds b = kernel_bounds(k);
    // neutrality on a seeded random slice
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    std::vector<double> f(vg.size());
    for (double& v : f) v = ud(rng);
    const std::vector<double> powers = {0.0, 1.0, 2.0, 3.0};
    const double lambda = cfg.lambda > 0.0 ? cfg.lambda : 1.0;
    const auto q = moment_neutrality_residuals(k, lambda, f, powers);
    bool ok = b.normalization_error <= 1e-12;
    std::cout << "metric,value\n";
    std::cout << "normalization_error," << num(b.normalization_error) << "\n";
    std::cout << "K," << num(b.K) << "\n";
    std::cout << "nodes," << vg.size() << "\n";
    std::cout << "shells," << vg.shells().size() << "\n";
    for (std::size_t i = 0; i < powers.size(); ++i) {
        std::cout << "moment_residual_p" << int(powers[i]) << "," << num(q[i]) << "\n";
        ok = ok && q[i] <= 1e-9;
    }
    std::cout << "verdict," << (ok ? "PASS" : "FAIL") << "\n";
    std::cout << "shell,radius,members,total_weight\n";
    for (std::size_t s = 0; s < vg.shells().size(); ++s) {
        const SpeedShell& sh = vg.shells()[s];
        std::cout << s << "," << num(sh.radius) << "," << sh.members.size() << "," << num(sh.total_weight) << "\n";
    }
    if (!write.empty()) {
        std::ofstream os(write);
        os << kernel_to_json(k);
        if (!os) throw SprayError("cannot write " + write);
    }
    return ok ? kOk : kFail;
}

int study(const std::string& kind, const std::string& path, const std::vector<std::string>& sets,
          const std::string& out_flag) {
    const SimConfig cfg = load(path, sets);
    const std::string dir = output_dir(out_flag, cfg, "_" + kind);
    fs::create_directories(dir);
    std::ofstream table(fs::path(dir) / (kind + ".csv"));
    std::vector<Verdict> verdicts;
    if (kind == "energy") {
        const EnergyStudy s = energy_study(cfg);
        write_energy_csv(table, s);
        verdicts = s.verdicts;
    } else if (kind == "iteration") {
        const IterationStudy s = iteration_study(cfg);
        write_iteration_csv(table, s);
        verdicts = s.verdicts;
    } else if (kind == "convergence") {
        const ConvergenceStudy s = convergence_study(cfg);
        write_convergence_csv(table, s);
        verdicts = s.verdicts;
    } else if (kind == "weakform") {
        const std::vector<WeakStudy> s = {weakform_study(cfg)};
        write_weak_csv(table, s);
        verdicts = weak_verdicts(s);
    } else {
        throw ConfigError(0, "unknown study kind '" + kind + "'");
    }
    table.close();
    std::ofstream summary(fs::path(dir) / (kind + "_summary.csv"));
    write_summary_csv(summary, verdicts);
    write_summary_csv(std::cout, verdicts);
    std::cout << "output," << dir << "\n";
    bool ok = true;
    for (const Verdict& v : verdicts) ok = ok && v.pass;
    return ok ? kOk : kFail;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"spraysim: coupled Navier-Stokes / Vlasov-Boltzmann spray simulator"};
    app.set_version_flag("--version", std::string(SPRAY_VERSION));
    app.require_subcommand(1);
    std::string config, out, kind, write;
    std::vector<std::string> sets;

    auto* sim = app.add_subcommand("simulate", "run a configuration");
    sim->add_option("config", config, "config file")->required();
    sim->add_option("-o,--out", out, "output directory");
    sim->add_option("--set", sets, "override, key=value")->take_all();

    auto* ker = app.add_subcommand("kernel", "kernel tools");
    ker->require_subcommand(1);
    auto* chk = ker->add_subcommand("check", "normalization, K, shell census, moment neutrality");
    chk->add_option("config", config, "config file")->required();
    chk->add_option("--set", sets, "override, key=value")->take_all();
    chk->add_option("--write", write, "also write the kernel as JSON");

    auto* st = app.add_subcommand("study", "refinement and iteration studies");
    st->add_option("kind", kind, "convergence | energy | iteration | weakform")
        ->required()
        ->check(CLI::IsMember({"convergence", "energy", "iteration", "weakform"}));
    st->add_option("config", config, "config file")->required();
    st->add_option("-o,--out", out, "output directory");
    st->add_option("--set", sets, "override, key=value")->take_all();

    auto* cfgc = app.add_subcommand("config", "validate a config and print it with defaults");
    cfgc->add_option("config", config, "config file")->required();
    cfgc->add_option("--set", sets, "override, key=value")->take_all();

    CLI11_PARSE(app, argc, argv);
    try {
        if (*sim) return simulate(config, sets, out);
        if (*chk) return kernel_check(config, sets, write);
        if (*st) return study(kind, config, sets, out);
        if (*cfgc) {
            const SimConfig c = load(config, sets);
            std::cout << "# config hash " << config_hash(c) << "\n" << emit_config(c);
            return kOk;
        }
    } catch (const ConfigError& e) {
        std::cerr << "spraysim: config error: " << e.what() << "\n";
        return kConfig;
    } catch (const InvariantViolation& e) {
        std::cerr << "spraysim: " << e.what() << "\n";
        return kInvariant;
    } catch (const std::exception& e) {
        std::cerr << "spraysim: " << e.what() << "\n";
        return kFail;
    }
    return kFail;
}
