#pragma once

#include "irk/errors.hpp"
#include "irk/krylov.hpp"
#include "irk/sparse.hpp"
#include "irk/stage_solver.hpp"
#include "irk/tableau.hpp"

#include <chrono>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace irk {

using Vector = std::vector<double>;
using RhsFn = std::function<Vector(std::span<const double> u, double t)>;
using LinearizeFn = std::function<SparseMatrix(std::span<const double> u, double t)>;

/// M u' = N(u, t). An empty mass means the identity.
struct OdeSystem {
    std::size_t dim = 0;
    std::optional<SparseMatrix> mass;
    RhsFn rhs;
    LinearizeFn linearize;

    SparseMatrix mass_matrix() const {
        if (mass) {
            if (mass->rows() != dim || mass->cols() != dim) throw DimensionError("OdeSystem: mass dimension mismatch");
            return *mass;
        }
        auto id = SparseMatrix::identity(dim);
        id.set_bandwidth_hint(0);
        return id;
    }

    Vector eval(std::span<const double> u, double t) const {
        Vector f = rhs(u, t);
        if (f.size() != dim) throw DimensionError("OdeSystem: rhs returned wrong length");
        return f;
    }

    SparseMatrix jacobian(std::span<const double> u, double t) const {
        SparseMatrix l = linearize(u, t);
        if (l.rows() != dim || l.cols() != dim) throw DimensionError("OdeSystem: linearization has wrong shape");
        return l;
    }
};

struct StageState {
    std::vector<Vector> k;
    Vector u_n;
    double t_n = 0.0;
    double dt = 0.0;
};

enum class JacobianRefresh { EveryIteration, FrozenPerStep };

struct SolverConfig {
    Variant variant = Variant::Triangular;
    std::size_t simplified_stage = 0;
    double newton_rtol = 1e-8;
    double newton_atol = 1e-14;
    std::size_t newton_maxit = 30;
    PrecondSpec precond;
    double krylov_rtol = 1e-5;
    std::size_t krylov_maxit = 200;
    std::size_t krylov_restart = 200;
    JacobianRefresh refresh = JacobianRefresh::EveryIteration;

    void validate() const {
        if (!(newton_rtol > 0.0 && newton_rtol < 1.0)) throw ConfigError("newton_rtol must lie in (0, 1)");
        if (!(krylov_rtol > 0.0 && krylov_rtol < 1.0)) throw ConfigError("krylov_rtol must lie in (0, 1)");
        if (newton_maxit == 0) throw ConfigError("newton_maxit must be positive");
        if (precond.gamma_mode == GammaMode::Custom && !(precond.custom_gamma > 0.0))
            throw ConfigError("custom gamma must be positive");
    }

    LinearSolveConfig linear() const { return {precond, {krylov_rtol, krylov_maxit, krylov_restart}}; }
};

struct StepStats {
    std::size_t nonlinear_iterations = 0;
    std::size_t krylov_iterations = 0;
    std::size_t precond_applications = 0;
    std::size_t constraint_applications = 0;
    std::size_t jacobian_assemblies = 0;
    /// Krylov iterations summed per eigen-block (DIRK: per stage).
    std::vector<std::size_t> block_krylov;
    /// Number of solves per eigen-block, for per-block means.
    std::vector<std::size_t> block_solves;
    std::vector<std::size_t> block_sizes;
    /// ||F|| / ||F_0|| after each nonlinear iteration, starting at 1.
    std::vector<double> residual_history;
    bool converged = false;
    double wall_seconds = 0.0;

    void record(const TransformedSolve& ts) {
        krylov_iterations += ts.krylov_iterations;
        precond_applications += ts.applications;
        constraint_applications += ts.constraint_applications;
        for (const auto& b : ts.blocks) add_block(b.block, b.size, b.report.iterations);
    }

    void add_block(std::size_t index, std::size_t size, std::size_t iterations) {
        if (block_krylov.size() <= index) {
            block_krylov.resize(index + 1, 0);
            block_solves.resize(index + 1, 0);
            block_sizes.resize(index + 1, 1);
        }
        block_krylov[index] += iterations;
        block_solves[index] += 1;
        block_sizes[index] = size;
    }

    void accumulate(const StepStats& o) {
        nonlinear_iterations += o.nonlinear_iterations;
        krylov_iterations += o.krylov_iterations;
        precond_applications += o.precond_applications;
        constraint_applications += o.constraint_applications;
        jacobian_assemblies += o.jacobian_assemblies;
        for (std::size_t b = 0; b < o.block_krylov.size(); ++b) {
            if (block_krylov.size() <= b) {
                block_krylov.resize(b + 1, 0);
                block_solves.resize(b + 1, 0);
                block_sizes.resize(b + 1, 1);
            }
            block_krylov[b] += o.block_krylov[b];
            block_solves[b] += o.block_solves[b];
            block_sizes[b] = o.block_sizes[b];
        }
        wall_seconds += o.wall_seconds;
    }
};

class StepFailure : public Error {
public:
    StepFailure(const std::string& what, StepStats stats) : Error(what), stats_(std::move(stats)) {}
    const StepStats& stats() const noexcept { return stats_; }

private:
    StepStats stats_;
};

namespace detail {

inline Vector stage_point(const ButcherTableau& t, const StageState& st, std::size_t i) {
    Vector u = st.u_n;
    for (std::size_t j = 0; j < t.s; ++j) {
        const double c = st.dt * t.a0(i, j);
        if (c == 0.0) continue;
        for (std::size_t m = 0; m < u.size(); ++m) u[m] += c * st.k[j][m];
    }
    return u;
}

inline void check_state(const OdeSystem& sys, const StageState& st, const ButcherTableau& t) {
    if (st.u_n.size() != sys.dim) throw DimensionError("stage state: u_n has wrong length");
    if (st.k.size() != t.s) throw DimensionError("stage state: expected one vector per stage");
    for (const auto& k : st.k)
        if (k.size() != sys.dim) throw DimensionError("stage state: stage vector has wrong length");
}

}  // namespace detail

/// Block i: N(u_n + dt sum_j a_ij k_j, t_n + c_i dt) - M k_i.
inline Vector stage_residual(const OdeSystem& sys, const StageState& st, const ButcherTableau& t) {
    detail::check_state(sys, st, t);
    const SparseMatrix m = sys.mass_matrix();
    const std::size_t n = sys.dim;
    Vector f(t.s * n);
    for (std::size_t i = 0; i < t.s; ++i) {
        const Vector u = detail::stage_point(t, st, i);
        Vector ni = sys.eval(u, st.t_n + t.c0[i] * st.dt);
        m.apply(st.k[i], std::span<double>(ni), -1.0, 1.0);
        std::copy(ni.begin(), ni.end(), f.begin() + static_cast<std::ptrdiff_t>(i * n));
    }
    return f;
}

namespace detail {

inline bool newton_done(double fnorm, double f0, const SolverConfig& cfg) {
    return fnorm <= std::max(cfg.newton_rtol * f0, cfg.newton_atol);
}

/// Stage-by-stage Newton for lower-triangular A0: stage i solves
/// M k_i = N(u_n + dt sum_{j<i} a_ij k_j + dt a_ii k_i) with (M - dt a_ii L).
inline StepStats dirk_stages(const OdeSystem& sys, StageState& st, const ButcherTableau& t, const SolverConfig& cfg,
                             const BlockSolver* solver) {
    StepStats stats;
    const SparseMatrix m = sys.mass_matrix();
    const std::size_t n = sys.dim;
    const auto lin = cfg.linear();
    stats.residual_history.push_back(1.0);
    stats.converged = true;
    for (std::size_t i = 0; i < t.s; ++i) {
        const double aii = t.a0(i, i);
        const double ti = st.t_n + t.c0[i] * st.dt;
        auto residual = [&]() {
            const Vector u = stage_point(t, st, i);
            Vector f = sys.eval(u, ti);
            m.apply(st.k[i], std::span<double>(f), -1.0, 1.0);
            return f;
        };
        Vector f = residual();
        const double f0 = detail::norm2(f);
        double fnorm = f0;
        std::optional<SparseMatrix> l;
        std::size_t it = 0;
        while (!newton_done(fnorm, f0, cfg)) {
            if (it == cfg.newton_maxit) {
                stats.converged = false;
                throw StepFailure("DIRK stage " + std::to_string(i) + " did not converge", stats);
            }
            if (!l || cfg.refresh == JacobianRefresh::EveryIteration) {
                l = sys.jacobian(stage_point(t, st, i), ti);
                ++stats.jacobian_assemblies;
            }
            // (M - dt a_ii L) dk = f, posed as (M / a_ii - dt L) dk = f / a_ii.
            Vector rhs(f);
            for (double& v : rhs) v /= aii;
            BlockRequest req;
            req.index = i;
            req.block = {i, 1, 1.0 / aii, 0.0, 0.0};
            req.mass = &m;
            req.dt = st.dt;
            req.diag0 = &*l;
            req.rhs = rhs;
            req.precond = &lin.precond;
            req.gmres = lin.gmres;
            BlockOutcome res;
            try {
                res = solver && *solver ? (*solver)(req) : solve_block_default(req);
            } catch (const IndexError&) {
                throw;
            } catch (const Error& e) {
                throw StepFailure(std::string("DIRK stage solve failed: ") + e.what(), stats);
            }
            if (!res.report.converged) throw StepFailure("DIRK stage GMRES did not converge", stats);
            for (std::size_t j = 0; j < n; ++j) st.k[i][j] += res.z[j];
            stats.krylov_iterations += res.report.iterations;
            stats.precond_applications += res.applications;
            stats.constraint_applications += res.constraint_applications;
            stats.add_block(i, 1, res.report.iterations);
            ++stats.nonlinear_iterations;
            ++it;
            f = residual();
            fnorm = detail::norm2(f);
            stats.residual_history.push_back(f0 > 0.0 ? fnorm / f0 : 0.0);
        }
    }
    return stats;
}

}  // namespace detail

/// Per-stage linearizations at the current stage points; a single operator
/// at the chosen stage suffices for the simplified variant.
inline std::vector<SparseMatrix> linearize_stages(const OdeSystem& sys, const StageState& st,
                                                  const ButcherTableau& t, const SolverConfig& cfg,
                                                  std::size_t& assemblies) {
    std::vector<SparseMatrix> ops;
    if (cfg.variant == Variant::Simplified) {
        const std::size_t i = cfg.simplified_stage;
        ops.push_back(sys.jacobian(detail::stage_point(t, st, i), st.t_n + t.c0[i] * st.dt));
        ++assemblies;
        return ops;
    }
    for (std::size_t i = 0; i < t.s; ++i) {
        ops.push_back(sys.jacobian(detail::stage_point(t, st, i), st.t_n + t.c0[i] * st.dt));
        ++assemblies;
    }
    return ops;
}

/// Preconditioned nonlinear Richardson x <- x + P^{-1} F on the stage
/// equations, starting from k = 0 unless stage vectors are supplied.
inline std::pair<StageState, StepStats> newton_like_step(const OdeSystem& sys, StageState st, const StagePrep& prep,
                                                         const SolverConfig& cfg,
                                                         const BlockSolver* solver = nullptr) {
    cfg.validate();
    const auto& t = prep.tableau;
    const auto wall0 = std::chrono::steady_clock::now();
    if (st.k.empty()) st.k.assign(t.s, Vector(sys.dim, 0.0));
    detail::check_state(sys, st, t);
    if (cfg.variant == Variant::Simplified && cfg.simplified_stage >= t.s)
        throw ConfigError("simplified stage index out of range");

    StepStats stats;
    if (t.lower_triangular()) {
        stats = detail::dirk_stages(sys, st, t, cfg, solver);
    } else {
        const SparseMatrix m = sys.mass_matrix();
        const std::size_t n = sys.dim;
        const auto lin = cfg.linear();
        Vector f = stage_residual(sys, st, t);
        const double f0 = detail::norm2(f);
        double fnorm = f0;
        stats.residual_history.push_back(1.0);
        std::optional<VariantJacobian> jac;
        while (!detail::newton_done(fnorm, f0, cfg)) {
            if (stats.nonlinear_iterations == cfg.newton_maxit) {
                throw StepFailure("nonlinear iteration did not converge in " + std::to_string(cfg.newton_maxit) +
                                      " iterations (relative residual " + std::to_string(fnorm / f0) + ")",
                                  stats);
            }
            if (!jac || cfg.refresh == JacobianRefresh::EveryIteration) {
                auto ops = linearize_stages(sys, st, t, cfg, stats.jacobian_assemblies);
                jac = build_variant_jacobian(prep, ops, cfg.variant, cfg.simplified_stage);
            }
            TransformedSolve ts;
            try {
                ts = solve_transformed_system(prep, m, *jac, st.dt, f, lin, solver);
            } catch (const IndexError&) {
                throw;
            } catch (const Error& e) {
                throw StepFailure(e.what(), stats);
            }
            stats.record(ts);
            for (std::size_t i = 0; i < t.s; ++i)
                for (std::size_t j = 0; j < n; ++j) st.k[i][j] += ts.dk[i * n + j];
            ++stats.nonlinear_iterations;
            f = stage_residual(sys, st, t);
            fnorm = detail::norm2(f);
            stats.residual_history.push_back(f0 > 0.0 ? fnorm / f0 : 0.0);
            if (!std::isfinite(fnorm)) throw StepFailure("nonlinear iteration diverged", stats);
        }
    }
    stats.converged = true;
    stats.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
    return {std::move(st), std::move(stats)};
}

/// u_{n+1} = u_n + dt sum_i b_i k_i.
inline Vector combine_stages(const ButcherTableau& t, const StageState& st) {
    Vector u = st.u_n;
    for (std::size_t i = 0; i < t.s; ++i)
        for (std::size_t j = 0; j < u.size(); ++j) u[j] += st.dt * t.b0[i] * st.k[i][j];
    return u;
}

inline Vector step(const OdeSystem& sys, std::span<const double> u_n, double t_n, double dt, const StagePrep& prep,
                   const SolverConfig& cfg, StepStats* stats = nullptr, const BlockSolver* solver = nullptr) {
    StageState st;
    st.u_n.assign(u_n.begin(), u_n.end());
    st.t_n = t_n;
    st.dt = dt;
    auto [done, s] = newton_like_step(sys, std::move(st), prep, cfg, solver);
    if (stats) *stats = std::move(s);
    return combine_stages(prep.tableau, done);
}

inline Vector step(const OdeSystem& sys, std::span<const double> u_n, double t_n, double dt, const ButcherTableau& t,
                   const SolverConfig& cfg, StepStats* stats = nullptr) {
    return step(sys, u_n, t_n, dt, prepare_stages(t), cfg, stats);
}

struct IntegrateOptions {
    /// Store every k-th state (the final state is always stored). 0 keeps
    /// only the initial and final states.
    std::size_t snapshot_every = 1;
    /// Optional per-step CSV stream.
    std::ostream* stats_csv = nullptr;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<Vector> states;
    std::vector<StepStats> steps;
    StepStats total;
    bool completed = true;
    std::string failure;

    const Vector& final_state() const { return states.back(); }
};

inline std::size_t step_count(double t0, double t_final, double dt) {
    if (!(dt > 0.0)) throw ConfigError("dt must be positive");
    const double ratio = (t_final - t0) / dt;
    const double rounded = std::round(ratio);
    if (ratio < -1e-9 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio))
        throw ConfigError("(t_final - t0) / dt must be a non-negative integer");
    return static_cast<std::size_t>(rounded);
}

inline void write_step_csv_header(std::ostream& os) {
    os << "step,nonlinear_iterations,krylov_iterations,block_krylov,precond_applications,constraint_applications,"
          "wall_seconds\n";
}

inline void write_step_csv(std::ostream& os, std::size_t step_index, const StepStats& s) {
    os << step_index << ',' << s.nonlinear_iterations << ',' << s.krylov_iterations << ',';
    for (std::size_t b = 0; b < s.block_krylov.size(); ++b) os << (b ? ";" : "") << s.block_krylov[b];
    os << ',' << s.precond_applications << ',' << s.constraint_applications << ',' << s.wall_seconds << '\n';
}

inline Trajectory integrate(const OdeSystem& sys, std::span<const double> u0, double t0, double t_final, double dt,
                            const StagePrep& prep, const SolverConfig& cfg, const IntegrateOptions& opts = {},
                            const BlockSolver* solver = nullptr) {
    const std::size_t steps = step_count(t0, t_final, dt);
    Trajectory traj;
    Vector u(u0.begin(), u0.end());
    if (u.size() != sys.dim) throw DimensionError("integrate: initial state has wrong length");
    traj.times.push_back(t0);
    traj.states.push_back(u);
    if (opts.stats_csv) write_step_csv_header(*opts.stats_csv);
    for (std::size_t n = 0; n < steps; ++n) {
        const double tn = t0 + static_cast<double>(n) * dt;
        StepStats s;
        try {
            u = step(sys, u, tn, dt, prep, cfg, &s, solver);
        } catch (const StepFailure& e) {
            traj.completed = false;
            traj.failure = "step " + std::to_string(n) + ": " + e.what();
            traj.total.accumulate(e.stats());
            if (traj.times.back() != tn) {
                traj.times.push_back(tn);
                traj.states.push_back(u);
            }
            return traj;
        }
        if (opts.stats_csv) write_step_csv(*opts.stats_csv, n, s);
        traj.total.accumulate(s);
        traj.steps.push_back(std::move(s));
        const bool last = n + 1 == steps;
        if (last || (opts.snapshot_every > 0 && (n + 1) % opts.snapshot_every == 0)) {
            traj.times.push_back(t0 + static_cast<double>(n + 1) * dt);
            traj.states.push_back(u);
        }
    }
    traj.total.converged = traj.completed;
    return traj;
}

inline Trajectory integrate(const OdeSystem& sys, std::span<const double> u0, double t0, double t_final, double dt,
                            const ButcherTableau& t, const SolverConfig& cfg, const IntegrateOptions& opts = {}) {
    return integrate(sys, u0, t0, t_final, dt, prepare_stages(t), cfg, opts);
}

}  // namespace irk
