#include "irk/irk.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace {

struct Flags {
    std::string manifest;
    std::string problem;
    std::vector<std::string> schemes;
    std::vector<std::size_t> stages;
    std::vector<double> dts;
    double t_final = 0.0;
    std::vector<int> variants;
    std::string gamma;
    double newton_rtol = 0.0;
    double krylov_rtol = 0.0;
    std::string inner;
    std::string out;
    std::size_t n = 0;
    double nu = -1.0;
    double speed = 0.0;
    double lambda_re = 0.0;
    double lambda_im = 0.0;
    std::uint64_t seed = 0;
    std::string dae_mode;
    std::vector<double> dt_norms;
    std::vector<double> ratios;
};

void add_flags(CLI::App* cmd, Flags& f) {
    cmd->add_option("--manifest", f.manifest, "JSON run manifest; explicit flags override it");
    cmd->add_option("--problem", f.problem, "problem name");
    cmd->add_option("--scheme", f.schemes, "scheme family or family:stages (repeatable)");
    cmd->add_option("--stages", f.stages, "stage counts applied to bare --scheme families");
    cmd->add_option("--dt", f.dts, "time steps");
    cmd->add_option("--t-final", f.t_final, "final time");
    cmd->add_option("--variant", f.variants, "Newton-like variant(s) 0..3")->check(CLI::Range(0, 3));
    cmd->add_option("--gamma", f.gamma, "eta, star or a positive number");
    cmd->add_option("--newton-rtol", f.newton_rtol, "nonlinear relative tolerance");
    cmd->add_option("--krylov-rtol", f.krylov_rtol, "GMRES relative tolerance");
    cmd->add_option("--inner", f.inner, "inner block solver: exact or sgs:<sweeps>");
    cmd->add_option("--out", f.out, "CSV output path (manifest written to <out>.manifest.json)");
    cmd->add_option("--n", f.n, "grid size");
    cmd->add_option("--nu", f.nu, "viscosity / diffusivity");
    cmd->add_option("--speed", f.speed, "advection speed");
    cmd->add_option("--lambda-re", f.lambda_re, "Dahlquist eigenvalue, real part");
    cmd->add_option("--lambda-im", f.lambda_im, "Dahlquist eigenvalue, imaginary part");
    cmd->add_option("--seed", f.seed, "seed recorded in the manifest");
    cmd->add_option("--dae-mode", f.dae_mode, "coupled or reordered")
        ->check(CLI::IsMember({"coupled", "reordered"}));
    cmd->add_option("--dt-norm", f.dt_norms, "dt*||L|| values (condition study)");
    cmd->add_option("--ratio", f.ratios, "c in L2 = c L1 (condition study)");
}

bool set(const CLI::App* cmd, const char* name) { return cmd->count(name) > 0; }

irk::RunManifest build_manifest(const CLI::App* cmd, const std::string& experiment, const Flags& f) {
    irk::RunManifest m;
    if (set(cmd, "--manifest")) {
        std::ifstream in(f.manifest);
        if (!in) throw irk::ConfigError("cannot open manifest '" + f.manifest + "'");
        m = irk::manifest_from_json(nlohmann::json::parse(in));
    }
    m.experiment = experiment;
    if (set(cmd, "--problem")) m.problem.name = f.problem;
    if (set(cmd, "--n")) m.problem.n = f.n;
    if (set(cmd, "--nu")) m.problem.nu = f.nu;
    if (set(cmd, "--speed")) m.problem.speed = f.speed;
    if (set(cmd, "--lambda-re")) m.problem.lambda_re = f.lambda_re;
    if (set(cmd, "--lambda-im")) m.problem.lambda_im = f.lambda_im;
    if (set(cmd, "--scheme")) {
        m.schemes.clear();
        for (const auto& text : f.schemes) {
            if (text.find(':') == std::string::npos && !f.stages.empty() && !irk::is_dirk(irk::parse_family(text))) {
                for (std::size_t s : f.stages) m.schemes.push_back({irk::parse_family(text), s});
            } else {
                m.schemes.push_back(irk::parse_scheme(text));
            }
        }
    } else if (set(cmd, "--stages")) {
        const irk::Family fam = m.schemes.empty() ? irk::Family::Gauss : m.schemes.front().family;
        m.schemes.clear();
        for (std::size_t s : f.stages) m.schemes.push_back({fam, s});
    }
    if (set(cmd, "--dt")) m.dts = f.dts;
    if (set(cmd, "--t-final")) m.t_final = f.t_final;
    if (set(cmd, "--variant")) {
        m.variants = f.variants;
        m.solver.variant = irk::variant_from_int(f.variants.front());
    }
    if (set(cmd, "--gamma")) {
        if (f.gamma == "eta" || f.gamma == "star") {
            m.solver.precond.gamma_mode = irk::parse_gamma_mode(f.gamma);
        } else {
            m.solver.precond.gamma_mode = irk::GammaMode::Custom;
            try {
                m.solver.precond.custom_gamma = std::stod(f.gamma);
            } catch (const std::exception&) {
                throw irk::ConfigError("--gamma must be eta, star or a number");
            }
        }
    }
    if (set(cmd, "--newton-rtol")) m.solver.newton_rtol = f.newton_rtol;
    if (set(cmd, "--krylov-rtol")) m.solver.krylov_rtol = f.krylov_rtol;
    if (set(cmd, "--inner")) {
        if (f.inner == "exact") {
            m.solver.precond.inner_solver = irk::InnerSolverKind::Exact;
        } else if (f.inner.rfind("sgs:", 0) == 0) {
            m.solver.precond.inner_solver = irk::InnerSolverKind::FixedIterations;
            m.solver.precond.inner_iterations = std::stoi(f.inner.substr(4));
        } else {
            throw irk::ConfigError("--inner must be exact or sgs:<sweeps>");
        }
    }
    if (set(cmd, "--out")) m.output = f.out;
    if (set(cmd, "--seed")) m.seed = f.seed;
    if (set(cmd, "--dae-mode"))
        m.dae_mode = f.dae_mode == "coupled" ? irk::DaeMode::Coupled : irk::DaeMode::Reordered;
    if (set(cmd, "--dt-norm")) m.dt_norms = f.dt_norms;
    if (set(cmd, "--ratio")) m.operator_ratios = f.ratios;
    m.solver.validate();
    return m;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Implicit Runge-Kutta stage-solver experiments"};
    app.require_subcommand(1);
    Flags flags;
    const std::vector<std::pair<std::string, std::string>> commands{
        {"convergence", "final-time error and observed order per scheme and dt"},
        {"iterations", "nonlinear and Krylov iterations, preconditioner applications"},
        {"gamma-compare", "mean 2x2-block Krylov iterations with gamma = eta vs gamma*"},
        {"condition", "measured condition numbers of the preconditioned Schur complement"},
        {"dae-convergence", "error and order for index-1 DAE problems"}};
    std::vector<CLI::App*> subs;
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        add_flags(sub, flags);
        subs.push_back(sub);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    for (std::size_t i = 0; i < subs.size(); ++i) {
        if (!subs[i]->parsed()) continue;
        try {
            const irk::RunManifest m = build_manifest(subs[i], commands[i].first, flags);
            const irk::ExperimentResult res = irk::run_experiment(m);
            if (m.output.empty()) {
                res.table.write(std::cout);
            } else {
                std::ofstream csv(m.output);
                if (!csv) throw irk::ConfigError("cannot write '" + m.output + "'");
                res.table.write(csv);
                std::ofstream side(m.output + ".manifest.json");
                side << irk::to_json(m).dump(2) << '\n';
                std::cerr << "wrote " << m.output << " (" << res.table.rows.size() << " rows, manifest "
                          << res.hash << ")\n";
            }
            return res.any_failed ? 1 : 0;
        } catch (const irk::Error& e) {
            std::cerr << "error: " << e.what() << '\n';
            return 2;
        } catch (const nlohmann::json::exception& e) {
            std::cerr << "error: bad manifest: " << e.what() << '\n';
            return 2;
        }
    }
    return 2;
}
