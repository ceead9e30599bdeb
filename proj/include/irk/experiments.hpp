#pragma once

#include "irk/block2x2.hpp"
#include "irk/dae.hpp"
#include "irk/errors.hpp"
#include "irk/io.hpp"
#include "irk/nonlinear.hpp"
#include "irk/problems.hpp"
#include "irk/tableau.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

namespace irk {

struct SchemeSpec {
    Family family = Family::Gauss;
    std::size_t s = 2;

    ButcherTableau tableau() const { return make_tableau(family, s); }
    bool operator==(const SchemeSpec&) const = default;
};

/// "gauss:2", "radau:3", "sdirk2" (DIRK stage counts are implied).
inline SchemeSpec parse_scheme(const std::string& text) {
    const auto colon = text.find(':');
    SchemeSpec spec;
    spec.family = parse_family(text.substr(0, colon));
    if (colon != std::string::npos) {
        try {
            spec.s = std::stoul(text.substr(colon + 1));
        } catch (const std::exception&) {
            throw ConfigError("bad stage count in scheme '" + text + "'");
        }
    } else {
        spec.s = is_dirk(spec.family) ? 0 : 2;
    }
    if (is_dirk(spec.family)) spec.s = make_tableau(spec.family, spec.s).s;
    return spec;
}

inline std::string scheme_label(const SchemeSpec& s) { return std::string(family_name(s.family)) + ":" + std::to_string(s.s); }

/// Fine-step reference for problems without an exact solution.
struct ReferencePolicy {
    SchemeSpec scheme{Family::RadauIIA, 3};
    double step_divisor = 100.0;
    bool operator==(const ReferencePolicy&) const = default;
};

struct RunManifest {
    std::string experiment = "convergence";
    ProblemSpec problem;
    std::vector<SchemeSpec> schemes{{Family::Gauss, 2}};
    std::vector<double> dts{0.1};
    double t_final = 1.0;
    SolverConfig solver;
    /// Variant sweep for iteration studies; empty means solver.variant only.
    std::vector<int> variants;
    /// dt * ||L|| values for conditioning studies.
    std::vector<double> dt_norms{0.1, 1.0, 10.0, 100.0};
    /// Ratios c in L2 = c L1 for the distinct-operator regime.
    std::vector<double> operator_ratios;
    DaeMode dae_mode = DaeMode::Coupled;
    ReferencePolicy reference;
    std::string output;
    std::uint64_t seed = 0;
};

inline std::string gamma_mode_name(GammaMode m) {
    switch (m) {
        case GammaMode::Eta: return "eta";
        case GammaMode::Star: return "star";
        case GammaMode::Custom: return "custom";
    }
    return "star";
}

inline GammaMode parse_gamma_mode(const std::string& s) {
    if (s == "eta") return GammaMode::Eta;
    if (s == "star") return GammaMode::Star;
    if (s == "custom") return GammaMode::Custom;
    throw ConfigError("unknown gamma mode '" + s + "'");
}

inline nlohmann::json to_json(const SchemeSpec& s) { return {{"family", std::string(family_name(s.family))}, {"s", s.s}}; }

inline SchemeSpec scheme_from_json(const nlohmann::json& j) {
    return {parse_family(j.at("family").get<std::string>()), j.at("s").get<std::size_t>()};
}

inline nlohmann::json to_json(const SolverConfig& c) {
    return {{"variant", static_cast<int>(c.variant)},
            {"simplified_stage", c.simplified_stage},
            {"newton_rtol", c.newton_rtol},
            {"newton_atol", c.newton_atol},
            {"newton_maxit", c.newton_maxit},
            {"gamma", gamma_mode_name(c.precond.gamma_mode)},
            {"custom_gamma", c.precond.custom_gamma},
            {"inner_solver", c.precond.inner_solver == InnerSolverKind::Exact ? "exact" : "fixed"},
            {"inner_iterations", c.precond.inner_iterations},
            {"krylov_rtol", c.krylov_rtol},
            {"krylov_maxit", c.krylov_maxit},
            {"krylov_restart", c.krylov_restart},
            {"refresh", c.refresh == JacobianRefresh::EveryIteration ? "every" : "frozen"}};
}

inline SolverConfig solver_from_json(const nlohmann::json& j) {
    SolverConfig c;
    c.variant = variant_from_int(j.value("variant", static_cast<int>(c.variant)));
    c.simplified_stage = j.value("simplified_stage", c.simplified_stage);
    c.newton_rtol = j.value("newton_rtol", c.newton_rtol);
    c.newton_atol = j.value("newton_atol", c.newton_atol);
    c.newton_maxit = j.value("newton_maxit", c.newton_maxit);
    c.precond.gamma_mode = parse_gamma_mode(j.value("gamma", gamma_mode_name(c.precond.gamma_mode)));
    c.precond.custom_gamma = j.value("custom_gamma", c.precond.custom_gamma);
    const std::string inner = j.value("inner_solver", std::string("exact"));
    if (inner != "exact" && inner != "fixed") throw ConfigError("inner_solver must be 'exact' or 'fixed'");
    c.precond.inner_solver = inner == "exact" ? InnerSolverKind::Exact : InnerSolverKind::FixedIterations;
    c.precond.inner_iterations = j.value("inner_iterations", c.precond.inner_iterations);
    c.krylov_rtol = j.value("krylov_rtol", c.krylov_rtol);
    c.krylov_maxit = j.value("krylov_maxit", c.krylov_maxit);
    c.krylov_restart = j.value("krylov_restart", c.krylov_restart);
    const std::string refresh = j.value("refresh", std::string("every"));
    if (refresh != "every" && refresh != "frozen") throw ConfigError("refresh must be 'every' or 'frozen'");
    c.refresh = refresh == "every" ? JacobianRefresh::EveryIteration : JacobianRefresh::FrozenPerStep;
    return c;
}

inline nlohmann::json to_json(const RunManifest& m) {
    nlohmann::json j;
    j["experiment"] = m.experiment;
    j["problem"] = {{"name", m.problem.name},
                    {"n", m.problem.n},
                    {"nu", m.problem.nu},
                    {"speed", m.problem.speed},
                    {"lambda_re", m.problem.lambda_re},
                    {"lambda_im", m.problem.lambda_im}};
    j["schemes"] = nlohmann::json::array();
    for (const auto& s : m.schemes) j["schemes"].push_back(to_json(s));
    j["dts"] = m.dts;
    j["t_final"] = m.t_final;
    j["solver"] = to_json(m.solver);
    j["variants"] = m.variants;
    j["dt_norms"] = m.dt_norms;
    j["operator_ratios"] = m.operator_ratios;
    j["dae_mode"] = m.dae_mode == DaeMode::Coupled ? "coupled" : "reordered";
    j["reference"] = {{"scheme", to_json(m.reference.scheme)}, {"step_divisor", m.reference.step_divisor}};
    j["output"] = m.output;
    j["seed"] = m.seed;
    return j;
}

inline RunManifest manifest_from_json(const nlohmann::json& j) {
    RunManifest m;
    m.experiment = j.value("experiment", m.experiment);
    if (j.contains("problem")) {
        const auto& p = j["problem"];
        m.problem.name = p.value("name", m.problem.name);
        m.problem.n = p.value("n", m.problem.n);
        m.problem.nu = p.value("nu", m.problem.nu);
        m.problem.speed = p.value("speed", m.problem.speed);
        m.problem.lambda_re = p.value("lambda_re", m.problem.lambda_re);
        m.problem.lambda_im = p.value("lambda_im", m.problem.lambda_im);
    }
    if (j.contains("schemes")) {
        m.schemes.clear();
        for (const auto& s : j["schemes"]) m.schemes.push_back(scheme_from_json(s));
    }
    m.dts = j.value("dts", m.dts);
    m.t_final = j.value("t_final", m.t_final);
    if (j.contains("solver")) m.solver = solver_from_json(j["solver"]);
    m.variants = j.value("variants", m.variants);
    m.dt_norms = j.value("dt_norms", m.dt_norms);
    m.operator_ratios = j.value("operator_ratios", m.operator_ratios);
    const std::string mode = j.value("dae_mode", std::string("coupled"));
    if (mode != "coupled" && mode != "reordered") throw ConfigError("dae_mode must be 'coupled' or 'reordered'");
    m.dae_mode = mode == "coupled" ? DaeMode::Coupled : DaeMode::Reordered;
    if (j.contains("reference")) {
        m.reference.scheme = scheme_from_json(j["reference"].at("scheme"));
        m.reference.step_divisor = j["reference"].value("step_divisor", m.reference.step_divisor);
    }
    m.output = j.value("output", m.output);
    m.seed = j.value("seed", m.seed);
    return m;
}

/// FNV-1a 64 of the canonical (sorted-key) JSON text without the output
/// path, as 16 hex digits.
inline std::string manifest_hash(const RunManifest& m) {
    nlohmann::json j = to_json(m);
    j.erase("output");
    const std::string text = j.dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

struct ExperimentResult {
    CsvTable table;
    bool any_failed = false;
    std::string hash;
};

namespace detail {

inline std::vector<double> sorted_desc(std::vector<double> v) {
    if (v.empty()) throw ConfigError("manifest needs at least one dt");
    for (double d : v)
        if (!(d > 0.0)) throw ConfigError("dt values must be positive");
    std::sort(v.begin(), v.end(), std::greater<>());
    return v;
}

inline std::string rate_str(double e_prev, double e, double dt_prev, double dt) {
    if (!(e_prev > 0.0) || !(e > 0.0)) return "";
    return fmt(std::log(e_prev / e) / std::log(dt_prev / dt));
}

inline std::vector<int> variant_list(const RunManifest& m) {
    if (m.variants.empty()) return {static_cast<int>(m.solver.variant)};
    return m.variants;
}

struct Totals {
    StepStats stats;
    std::size_t steps = 0;
    bool ok = true;
    std::string failure;
};

inline Totals run_cell(const Problem& p, const StagePrep& prep, const SolverConfig& cfg, double t_final, double dt,
                       DaeMode mode) {
    Totals out;
    IntegrateOptions opts;
    opts.snapshot_every = 0;
    if (p.dae) {
        auto tr = dae_integrate(*p.dae, p.u0, p.w0, p.t0, t_final, dt, prep, cfg, mode, opts);
        out.stats = tr.total;
        out.steps = tr.steps.size();
        out.ok = tr.completed;
        out.failure = tr.failure;
    } else {
        auto tr = integrate(*p.ode, p.u0, p.t0, t_final, dt, prep, cfg, opts);
        out.stats = tr.total;
        out.steps = tr.steps.size();
        out.ok = tr.completed;
        out.failure = tr.failure;
    }
    return out;
}

}  // namespace detail

inline ExperimentResult run_dae_convergence(const RunManifest& m);

/// Final-time error and observed rate per scheme and dt, against the exact
/// solution or a fine-step reference.
inline ExperimentResult run_convergence(const RunManifest& m) {
    const Problem p = make_problem(m.problem);
    if (p.dae) return run_dae_convergence(m);
    ExperimentResult res;
    res.hash = manifest_hash(m);
    res.table.header = {"manifest", "problem", "scheme", "s", "order", "dt", "error", "rate", "status"};
    const auto dts = detail::sorted_desc(m.dts);
    Vector reference;
    if (p.exact) {
        reference = p.exact(m.t_final);
    } else {
        const double dt_ref = dts.back() / m.reference.step_divisor;
        auto tr = integrate(*p.ode, p.u0, p.t0, m.t_final, dt_ref, prepare_stages(m.reference.scheme.tableau()),
                            m.solver, {0, nullptr});
        if (!tr.completed) throw Error("reference solution failed: " + tr.failure);
        reference = tr.final_state();
    }
    for (const auto& sc : m.schemes) {
        const auto tab = sc.tableau();
        const auto prep = prepare_stages(tab);
        double e_prev = 0.0, dt_prev = 0.0;
        for (double dt : dts) {
            std::vector<std::string> row{res.hash, m.problem.name, std::string(family_name(sc.family)),
                                         std::to_string(tab.s), std::to_string(tab.order), fmt(dt)};
            try {
                auto tr = integrate(*p.ode, p.u0, p.t0, m.t_final, dt, prep, m.solver, {0, nullptr});
                if (!tr.completed) throw Error(tr.failure);
                Vector e = tr.final_state();
                for (std::size_t j = 0; j < e.size(); ++j) e[j] -= reference[j];
                const double err = grid_norm(e, p.h);
                row.push_back(fmt(err));
                row.push_back(dt_prev > 0.0 ? detail::rate_str(e_prev, err, dt_prev, dt) : "");
                row.push_back("ok");
                e_prev = err;
                dt_prev = dt;
            } catch (const Error& e) {
                row.insert(row.end(), {"", "", std::string("failed: ") + e.what()});
                res.any_failed = true;
                dt_prev = 0.0;
            }
            res.table.add(std::move(row));
        }
    }
    return res;
}

/// Errors in both variables against the exact solution of a DAE problem.
inline ExperimentResult run_dae_convergence(const RunManifest& m) {
    const Problem p = make_problem(m.problem);
    if (!p.dae) throw ConfigError("dae-convergence needs a DAE problem");
    if (!p.exact || !p.exact_w) throw ConfigError("dae-convergence needs an exact solution");
    ExperimentResult res;
    res.hash = manifest_hash(m);
    res.table.header = {"manifest", "problem", "scheme", "s",      "order",          "dt",
                        "error_u",  "error_w", "rate_u", "rate_w", "max_constraint", "status"};
    const auto dts = detail::sorted_desc(m.dts);
    const Vector ue = p.exact(m.t_final), we = p.exact_w(m.t_final);
    for (const auto& sc : m.schemes) {
        const auto tab = sc.tableau();
        const auto prep = prepare_stages(tab);
        double eu_prev = 0.0, ew_prev = 0.0, dt_prev = 0.0;
        for (double dt : dts) {
            std::vector<std::string> row{res.hash, m.problem.name, std::string(family_name(sc.family)),
                                         std::to_string(tab.s), std::to_string(tab.order), fmt(dt)};
            try {
                auto tr = dae_integrate(*p.dae, p.u0, p.w0, p.t0, m.t_final, dt, prep, m.solver, m.dae_mode, {0, nullptr});
                if (!tr.completed) throw Error(tr.failure);
                Vector du = tr.u.back(), dw = tr.w.back();
                for (std::size_t j = 0; j < du.size(); ++j) du[j] -= ue[j];
                for (std::size_t j = 0; j < dw.size(); ++j) dw[j] -= we[j];
                const double eu = grid_norm(du, p.h), ew = grid_norm(dw, p.h);
                const double gmax =
                    tr.constraint_norms.empty() ? 0.0
                                                : *std::max_element(tr.constraint_norms.begin(), tr.constraint_norms.end());
                row.push_back(fmt(eu));
                row.push_back(fmt(ew));
                row.push_back(dt_prev > 0.0 ? detail::rate_str(eu_prev, eu, dt_prev, dt) : "");
                row.push_back(dt_prev > 0.0 ? detail::rate_str(ew_prev, ew, dt_prev, dt) : "");
                row.push_back(fmt(gmax));
                row.push_back("ok");
                eu_prev = eu;
                ew_prev = ew;
                dt_prev = dt;
            } catch (const Error& e) {
                row.insert(row.end(), {"", "", "", "", "", std::string("failed: ") + e.what()});
                res.any_failed = true;
                dt_prev = 0.0;
            }
            res.table.add(std::move(row));
        }
    }
    return res;
}

/// Nonlinear/Krylov iteration totals and preconditioner applications. One
/// application is one diagonal-block solve: a Krylov iteration on a 2x2
/// eigen-block costs two, on a 1x1 block one.
inline ExperimentResult run_iterations(const RunManifest& m) {
    const Problem p = make_problem(m.problem);
    ExperimentResult res;
    res.hash = manifest_hash(m);
    res.table.header = {"manifest",
                        "problem",
                        "scheme",
                        "s",
                        "order",
                        "variant",
                        "dt",
                        "steps",
                        "nonlinear_iterations",
                        "krylov_iterations",
                        "precond_applications",
                        "constraint_applications",
                        "applications_per_step",
                        "status"};
    for (const auto& sc : m.schemes) {
        const auto tab = sc.tableau();
        const auto prep = prepare_stages(tab);
        for (int v : detail::variant_list(m)) {
            SolverConfig cfg = m.solver;
            cfg.variant = variant_from_int(v);
            for (double dt : m.dts) {
                std::vector<std::string> row{res.hash,
                                             m.problem.name,
                                             std::string(family_name(sc.family)),
                                             std::to_string(tab.s),
                                             std::to_string(tab.order),
                                             std::to_string(v),
                                             fmt(dt)};
                try {
                    const auto t = detail::run_cell(p, prep, cfg, m.t_final, dt, m.dae_mode);
                    const auto& st = t.stats;
                    row.insert(row.end(), {std::to_string(t.steps), std::to_string(st.nonlinear_iterations),
                                           std::to_string(st.krylov_iterations), std::to_string(st.precond_applications),
                                           std::to_string(st.constraint_applications),
                                           fmt(t.steps ? static_cast<double>(st.precond_applications) /
                                                             static_cast<double>(t.steps)
                                                       : 0.0),
                                           t.ok ? "ok" : "failed: " + t.failure});
                    if (!t.ok) res.any_failed = true;
                } catch (const Error& e) {
                    row.insert(row.end(), {"", "", "", "", "", "", std::string("failed: ") + e.what()});
                    res.any_failed = true;
                }
                res.table.add(std::move(row));
            }
        }
    }
    return res;
}

/// Mean Krylov iterations on the 2x2 eigen-blocks with gamma = eta versus
/// gamma = gamma*; block "all" averages over every 2x2 block solve.
inline ExperimentResult run_gamma_compare(const RunManifest& m) {
    const Problem p = make_problem(m.problem);
    ExperimentResult res;
    res.hash = manifest_hash(m);
    res.table.header = {"manifest", "problem", "scheme", "s",           "order", "dt",
                        "gamma",    "block",   "eta",    "beta",        "mean_krylov", "status"};
    for (const auto& sc : m.schemes) {
        const auto tab = sc.tableau();
        const auto prep = prepare_stages(tab);
        const bool complex = std::any_of(prep.schur.blocks.begin(), prep.schur.blocks.end(),
                                         [](const EigenBlock& b) { return b.size == 2; });
        for (double dt : m.dts) {
            for (GammaMode mode : {GammaMode::Eta, GammaMode::Star}) {
                std::vector<std::string> base{res.hash,
                                              m.problem.name,
                                              std::string(family_name(sc.family)),
                                              std::to_string(tab.s),
                                              std::to_string(tab.order),
                                              fmt(dt),
                                              gamma_mode_name(mode)};
                if (!complex) {
                    auto row = base;
                    row.insert(row.end(), {"all", "", "", "", "skipped: no complex eigen-block"});
                    res.table.add(std::move(row));
                    continue;
                }
                SolverConfig cfg = m.solver;
                cfg.precond.gamma_mode = mode;
                try {
                    const auto t = detail::run_cell(p, prep, cfg, m.t_final, dt, m.dae_mode);
                    const auto& st = t.stats;
                    std::size_t its = 0, solves = 0;
                    for (std::size_t b = 0; b < prep.schur.blocks.size(); ++b) {
                        const auto& blk = prep.schur.blocks[b];
                        if (blk.size != 2) continue;
                        const std::size_t bi = b < st.block_krylov.size() ? st.block_krylov[b] : 0;
                        const std::size_t bs = b < st.block_solves.size() ? st.block_solves[b] : 0;
                        its += bi;
                        solves += bs;
                        auto row = base;
                        row.insert(row.end(), {std::to_string(b), fmt(blk.eta), fmt(blk.beta),
                                               bs ? fmt(static_cast<double>(bi) / static_cast<double>(bs)) : "",
                                               t.ok ? "ok" : "failed: " + t.failure});
                        res.table.add(std::move(row));
                    }
                    auto row = base;
                    row.insert(row.end(), {"all", "", "",
                                           solves ? fmt(static_cast<double>(its) / static_cast<double>(solves)) : "",
                                           t.ok ? "ok" : "failed: " + t.failure});
                    res.table.add(std::move(row));
                    if (!t.ok) res.any_failed = true;
                } catch (const Error& e) {
                    auto row = base;
                    row.insert(row.end(), {"all", "", "", "", std::string("failed: ") + e.what()});
                    res.table.add(std::move(row));
                    res.any_failed = true;
                }
            }
        }
    }
    return res;
}

/// Measured condition number of the gamma*-preconditioned Schur complement
/// per eigen-block, for L1 = L2 = dt L and, per ratio c, L2 = c L1.
inline ExperimentResult run_condition(const RunManifest& m) {
    const Problem p = make_problem(m.problem);
    if (!p.op) throw ConfigError("condition study needs a linear operator");
    if (p.op->rows() > 512) throw ConfigError("condition study needs N <= 512");
    ExperimentResult res;
    res.hash = manifest_hash(m);
    res.table.header = {"manifest", "scheme", "s",     "block", "eta",   "beta",  "problem", "regime",
                        "ratio",    "dt",     "dt_norm", "gamma", "kappa", "bound", "within_bound"};
    const DenseMatrix l = p.op->to_dense();
    const double lnorm = p.op->norm_inf();
    const std::vector<double> dt_norms = m.dt_norms.empty() ? m.dts : m.dt_norms;
    std::vector<std::pair<BoundRegime, double>> regimes{{BoundRegime::General, 1.0}};
    for (double c : m.operator_ratios) regimes.emplace_back(BoundRegime::Distinct, c);
    for (const auto& sc : m.schemes) {
        const auto tab = sc.tableau();
        const auto prep = prepare_stages(tab);
        for (std::size_t b = 0; b < prep.schur.blocks.size(); ++b) {
            const auto& blk = prep.schur.blocks[b];
            const double gamma = m.solver.precond.gamma(blk.eta, blk.beta);
            for (const auto& [regime, c] : regimes) {
                for (double dn : dt_norms) {
                    const double dt = m.dt_norms.empty() ? dn : dn / lnorm;
                    const DenseMatrix l1 = dt * l;
                    const DenseMatrix l2 = (dt * c) * l;
                    std::vector<std::string> row{res.hash,
                                                 std::string(family_name(sc.family)),
                                                 std::to_string(tab.s),
                                                 std::to_string(b),
                                                 fmt(blk.eta),
                                                 fmt(blk.beta),
                                                 m.problem.name,
                                                 regime == BoundRegime::General ? "general" : "distinct",
                                                 fmt(c),
                                                 fmt(dt),
                                                 fmt(dt * lnorm),
                                                 fmt(gamma)};
                    try {
                        const double kappa = measure_kappa(l1, l2, blk.eta, blk.beta, gamma);
                        const double bound = kappa_bound(blk.eta, blk.beta, regime);
                        const bool within = kappa <= bound + 1e-6;
                        row.insert(row.end(), {fmt(kappa), fmt(bound), within ? "true" : "false"});
                    } catch (const Error& e) {
                        row.insert(row.end(), {"", "", std::string("failed: ") + e.what()});
                        res.any_failed = true;
                    }
                    res.table.add(std::move(row));
                }
            }
        }
    }
    return res;
}

inline ExperimentResult run_experiment(const RunManifest& m) {
    if (m.experiment == "convergence") return run_convergence(m);
    if (m.experiment == "iterations") return run_iterations(m);
    if (m.experiment == "gamma-compare") return run_gamma_compare(m);
    if (m.experiment == "condition") return run_condition(m);
    if (m.experiment == "dae-convergence") return run_dae_convergence(m);
    throw ConfigError("unknown experiment '" + m.experiment + "'");
}

}  // namespace irk
