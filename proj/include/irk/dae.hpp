#pragma once

#include "irk/block2x2.hpp"
#include "irk/errors.hpp"
#include "irk/krylov.hpp"
#include "irk/nonlinear.hpp"
#include "irk/sparse.hpp"
#include "irk/stage_solver.hpp"
#include "irk/tableau.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace irk {

/// Linearized blocks of (N, G) with respect to (u, w).
struct DaeBlocks {
    SparseMatrix lu, lw, gu, gw;
};

using DaeFn = std::function<Vector(std::span<const double> u, std::span<const double> w, double t)>;
using DaeBlocksFn = std::function<DaeBlocks(std::span<const double> u, std::span<const double> w, double t)>;

/// M u' = N(u, w, t), 0 = G(u, w, t), index 1 (G_w invertible).
struct DaeSystem {
    std::size_t dim_u = 0;
    std::size_t dim_w = 0;
    std::optional<SparseMatrix> mass;
    DaeFn rhs_n;
    DaeFn constraint_g;
    DaeBlocksFn blocks;

    SparseMatrix mass_matrix() const {
        if (mass) return *mass;
        auto id = SparseMatrix::identity(dim_u);
        id.set_bandwidth_hint(0);
        return id;
    }
};

struct DaeStageState {
    std::vector<Vector> k;
    std::vector<Vector> ell;
    Vector u_n, w_n;
    double t_n = 0.0;
    double dt = 0.0;
};

enum class DaeMode { Coupled, Reordered };

/// Placement of (u, w) in one combined vector: interleaved (u_0, w_0, u_1,
/// w_1, ...) when both parts have equal length, which keeps banded blocks
/// banded; concatenated (u, w) otherwise.
class DaeLayout {
public:
    DaeLayout(std::size_t nu, std::size_t nw) : nu_(nu), nw_(nw), interleaved_(nu == nw && nw > 0) {}

    std::size_t nu() const noexcept { return nu_; }
    std::size_t nw() const noexcept { return nw_; }
    std::size_t size() const noexcept { return nu_ + nw_; }
    bool interleaved() const noexcept { return interleaved_; }

    std::size_t u_index(std::size_t j) const noexcept { return interleaved_ ? 2 * j : j; }
    std::size_t w_index(std::size_t j) const noexcept { return interleaved_ ? 2 * j + 1 : nu_ + j; }

    /// (is_w, local index) of a combined index.
    std::pair<bool, std::size_t> locate(std::size_t c) const noexcept {
        if (interleaved_) return {c % 2 == 1, c / 2};
        return c < nu_ ? std::pair{false, c} : std::pair{true, c - nu_};
    }

    Vector join(std::span<const double> u, std::span<const double> w) const {
        Vector x(size());
        for (std::size_t j = 0; j < nu_; ++j) x[u_index(j)] = u[j];
        for (std::size_t j = 0; j < nw_; ++j) x[w_index(j)] = w[j];
        return x;
    }

    std::pair<Vector, Vector> split(std::span<const double> x) const {
        Vector u(nu_), w(nw_);
        for (std::size_t j = 0; j < nu_; ++j) u[j] = x[u_index(j)];
        for (std::size_t j = 0; j < nw_; ++j) w[j] = x[w_index(j)];
        return {std::move(u), std::move(w)};
    }

    SparseMatrix join_blocks(const SparseMatrix& a, const SparseMatrix& b, const SparseMatrix& c,
                             const SparseMatrix& d) const {
        std::vector<Triplet> t;
        for (auto e : a.triplets()) t.push_back({u_index(e.row), u_index(e.col), e.value});
        for (auto e : b.triplets()) t.push_back({u_index(e.row), w_index(e.col), e.value});
        for (auto e : c.triplets()) t.push_back({w_index(e.row), u_index(e.col), e.value});
        for (auto e : d.triplets()) t.push_back({w_index(e.row), w_index(e.col), e.value});
        std::optional<std::size_t> hint;
        if (interleaved_) {
            std::size_t h = 0;
            for (const SparseMatrix* m : {&a, &b, &c, &d}) h = std::max(h, m->bandwidth_hint().value_or(m->bandwidth()));
            hint = 2 * h + 1;
        }
        return SparseMatrix::from_triplets(size(), size(), std::move(t), hint);
    }

    DaeBlocks split_blocks(const SparseMatrix& x) const {
        std::vector<Triplet> t[4];
        const auto& rp = x.row_ptr();
        const auto& ci = x.col_idx();
        const auto& v = x.values();
        for (std::size_t r = 0; r < x.rows(); ++r) {
            const auto [rw, ri] = locate(r);
            for (std::size_t p = rp[r]; p < rp[r + 1]; ++p) {
                const auto [cw, cj] = locate(ci[p]);
                t[(rw ? 2 : 0) + (cw ? 1 : 0)].push_back({ri, cj, v[p]});
            }
        }
        std::optional<std::size_t> hint;
        if (interleaved_ && x.bandwidth_hint()) hint = *x.bandwidth_hint() / 2;
        return {SparseMatrix::from_triplets(nu_, nu_, std::move(t[0]), hint),
                SparseMatrix::from_triplets(nu_, nw_, std::move(t[1]), hint),
                SparseMatrix::from_triplets(nw_, nu_, std::move(t[2]), hint),
                SparseMatrix::from_triplets(nw_, nw_, std::move(t[3]), hint)};
    }

private:
    std::size_t nu_, nw_;
    bool interleaved_;
};

namespace detail {

inline void check_blocks(const DaeSystem& sys, const DaeBlocks& b) {
    const std::size_t nu = sys.dim_u, nw = sys.dim_w;
    if (b.lu.rows() != nu || b.lu.cols() != nu || b.lw.rows() != nu || b.lw.cols() != nw || b.gu.rows() != nw ||
        b.gu.cols() != nu || b.gw.rows() != nw || b.gw.cols() != nw)
        throw DimensionError("DaeSystem: linearized blocks have inconsistent shapes");
}

}  // namespace detail

/// The DAE as one system with singular mass diag(M, 0) over the combined
/// variable; stage equations and linearizations coincide with the DAE ones.
inline OdeSystem combined_system(const DaeSystem& sys, const DaeLayout& layout) {
    OdeSystem ode;
    ode.dim = layout.size();
    const SparseMatrix m = sys.mass_matrix();
    if (m.rows() != sys.dim_u) throw DimensionError("DaeSystem: mass dimension mismatch");
    if (sys.dim_w == 0) {
        ode.mass = m;
        ode.rhs = [&sys](std::span<const double> u, double t) { return sys.rhs_n(u, {}, t); };
        ode.linearize = [&sys](std::span<const double> u, double t) {
            auto b = sys.blocks(u, {}, t);
            detail::check_blocks(sys, b);
            return b.lu;
        };
        return ode;
    }
    ode.mass = layout.join_blocks(m, SparseMatrix::zero(sys.dim_u, sys.dim_w), SparseMatrix::zero(sys.dim_w, sys.dim_u),
                                  SparseMatrix::zero(sys.dim_w, sys.dim_w));
    ode.rhs = [&sys, layout](std::span<const double> x, double t) {
        auto [u, w] = layout.split(x);
        return layout.join(sys.rhs_n(u, w, t), sys.constraint_g(u, w, t));
    };
    ode.linearize = [&sys, layout](std::span<const double> x, double t) {
        auto [u, w] = layout.split(x);
        auto b = sys.blocks(u, w, t);
        detail::check_blocks(sys, b);
        return layout.join_blocks(b.lu, b.lw, b.gu, b.gw);
    };
    return ode;
}

/// Per stage: [N(U_i, W_i, t_i) - M k_i ; G(U_i, W_i, t_i)].
inline Vector dae_stage_residual(const DaeSystem& sys, const DaeStageState& st, const ButcherTableau& t) {
    const std::size_t nu = sys.dim_u, nw = sys.dim_w;
    if (st.k.size() != t.s || st.ell.size() != t.s || st.u_n.size() != nu || st.w_n.size() != nw)
        throw DimensionError("dae_stage_residual: inconsistent stage state");
    const SparseMatrix m = sys.mass_matrix();
    Vector f;
    f.reserve(t.s * (nu + nw));
    for (std::size_t i = 0; i < t.s; ++i) {
        Vector u = st.u_n, w = st.w_n;
        for (std::size_t j = 0; j < t.s; ++j) {
            const double c = st.dt * t.a0(i, j);
            for (std::size_t q = 0; q < nu; ++q) u[q] += c * st.k[j][q];
            for (std::size_t q = 0; q < nw; ++q) w[q] += c * st.ell[j][q];
        }
        const double ti = st.t_n + t.c0[i] * st.dt;
        Vector n = sys.rhs_n(u, w, ti);
        m.apply(st.k[i], std::span<double>(n), -1.0, 1.0);
        Vector g = sys.constraint_g(u, w, ti);
        f.insert(f.end(), n.begin(), n.end());
        f.insert(f.end(), g.begin(), g.end());
    }
    return f;
}

namespace detail {

/// True if every entry of a is below tol in magnitude.
inline bool negligible(const SparseMatrix& a, double tol) { return a.max_abs() <= tol; }

inline std::vector<double> constraint_solve(const SparseMatrix& gw, std::span<const double> rhs) {
    try {
        return BandedLu(gw).solve(rhs);
    } catch (const SingularMatrixError& e) {
        throw IndexError(std::string("algebraic block G_w is singular (not index 1): ") + e.what());
    }
}

}  // namespace detail

/// Block solver for the combined DAE stage system.
///
/// Coupled: GMRES on the whole eigen-block (differential and algebraic rows)
/// with the block-triangular preconditioner whose diagonal solves eliminate
/// the algebraic unknowns exactly; each diagonal solve counts one
/// differential and one constraint application.
///
/// Reordered: requires L_w = 0 and no algebraic coupling between the two
/// stages of a block. Solves the differential block first, then one
/// independent G_w solve per stage.
inline BlockSolver dae_block_solver(const DaeLayout& layout, DaeMode mode) {
    if (mode == DaeMode::Coupled) {
        return [](const BlockRequest& req) {
            BlockOutcome out = solve_block_default(req);
            out.constraint_applications = out.applications;
            return out;
        };
    }
    return [layout](const BlockRequest& req) {
        const std::size_t nu = layout.nu(), nw = layout.nw(), n = layout.size();
        const std::size_t nb = req.block.size;
        std::vector<DaeBlocks> diag;
        diag.push_back(layout.split_blocks(*req.diag0));
        if (nb == 2) diag.push_back(layout.split_blocks(*req.diag1));
        std::vector<DaeBlocks> couple;
        for (const SparseMatrix* c : {req.couple01, req.couple10})
            if (c) couple.push_back(layout.split_blocks(*c));
        double scale = 0.0;
        for (const auto& d : diag) scale = std::max({scale, d.lu.max_abs(), d.gu.max_abs(), d.gw.max_abs()});
        const double tol = 1e-12 * std::max(scale, 1e-300);
        for (const auto& d : diag)
            if (!detail::negligible(d.lw, tol)) throw IndexError("reordered DAE solve requires L_w = 0");
        for (const auto& c : couple)
            if (!detail::negligible(c.lw, tol) || !detail::negligible(c.gu, tol) || !detail::negligible(c.gw, tol))
                throw IndexError("reordered DAE solve requires no algebraic coupling inside an eigen-block");

        const auto mparts = layout.split_blocks(*req.mass);
        // Differential and algebraic right-hand sides per stage of the block.
        std::vector<Vector> bu(nb), bw(nb);
        for (std::size_t r = 0; r < nb; ++r) {
            auto [u, w] = layout.split(req.rhs.subspan(r * n, n));
            bu[r] = std::move(u);
            bw[r] = std::move(w);
        }
        BlockOutcome out;
        BlockRequest dreq = req;
        dreq.mass = &mparts.lu;
        dreq.diag0 = &diag[0].lu;
        dreq.diag1 = nb == 2 ? &diag[1].lu : nullptr;
        dreq.couple01 = req.couple01 ? &couple[0].lu : nullptr;
        dreq.couple10 = req.couple10 ? &couple[req.couple01 ? 1 : 0].lu : nullptr;
        Vector dr;
        for (const auto& b : bu) dr.insert(dr.end(), b.begin(), b.end());
        dreq.rhs = dr;
        BlockOutcome diff = solve_block_default(dreq);
        out.report = diff.report;
        out.applications = diff.applications;
        out.z.assign(nb * n, 0.0);
        for (std::size_t r = 0; r < nb; ++r) {
            std::span<const double> kr(diff.z.data() + r * nu, nu);
            // -dt (G_u k + G_w l) = b_w  =>  G_w l = -b_w / dt - G_u k
            Vector rhs(nw);
            for (std::size_t j = 0; j < nw; ++j) rhs[j] = -bw[r][j] / req.dt;
            diag[r].gu.apply(kr, std::span<double>(rhs), -1.0, 1.0);
            Vector lr = detail::constraint_solve(diag[r].gw, rhs);
            ++out.constraint_applications;
            Vector xr = layout.join(kr, lr);
            std::copy(xr.begin(), xr.end(), out.z.begin() + static_cast<std::ptrdiff_t>(r * n));
        }
        return out;
    };
}

/// Stand-alone 4x4 eigen-block solve (k_i, l_i, k_{i+1}, l_{i+1}) in the
/// combined layout; rhs and result are ordered [stage i ; stage i+1].
inline BlockOutcome solve_dae_block4x4(const DaeLayout& layout, const SparseMatrix& mass, const EigenBlock& block,
                                       double dt, const SparseMatrix& stage0, const SparseMatrix& stage1,
                                       const SparseMatrix* couple01, const SparseMatrix* couple10, DaeMode mode,
                                       std::span<const double> rhs, const PrecondSpec& precond,
                                       const GmresOptions& gmres_opts) {
    if (block.size != 2) throw DimensionError("solve_dae_block4x4: expected a 2x2 eigen-block");
    if (rhs.size() != 2 * layout.size()) throw DimensionError("solve_dae_block4x4: rhs length must be 2(Nu+Nw)");
    BlockRequest req;
    req.block = block;
    req.mass = &mass;
    req.dt = dt;
    req.diag0 = &stage0;
    req.diag1 = &stage1;
    req.couple01 = couple01;
    req.couple10 = couple10;
    req.rhs = rhs;
    req.precond = &precond;
    req.gmres = gmres_opts;
    BlockOutcome out = dae_block_solver(layout, mode)(req);
    if (!out.report.converged) throw StageSolveError(0, out.report, "DAE block GMRES did not converge");
    return out;
}

struct DaeTrajectory {
    std::vector<double> times;
    std::vector<Vector> u;
    std::vector<Vector> w;
    /// ||G(u_{n+1}, w_{n+1}, t_{n+1})|| after every accepted step.
    std::vector<double> constraint_norms;
    std::vector<StepStats> steps;
    StepStats total;
    bool completed = true;
    std::string failure;
};

inline void check_consistent(const DaeSystem& sys, std::span<const double> u0, std::span<const double> w0, double t0) {
    if (u0.size() != sys.dim_u || w0.size() != sys.dim_w) throw DimensionError("DAE initial state has wrong length");
    if (sys.dim_w == 0) return;
    const double g = detail::norm2(sys.constraint_g(u0, w0, t0));
    if (g > 1e-10) throw ConfigError("inconsistent DAE initial condition: ||G|| = " + std::to_string(g));
}

/// One DAE step; returns (u_{n+1}, w_{n+1}).
inline std::pair<Vector, Vector> dae_step(const DaeSystem& sys, std::span<const double> u_n,
                                          std::span<const double> w_n, double t_n, double dt, const StagePrep& prep,
                                          const SolverConfig& cfg, DaeMode mode, StepStats* stats = nullptr) {
    const DaeLayout layout(sys.dim_u, sys.dim_w);
    const OdeSystem ode = combined_system(sys, layout);
    const BlockSolver solver = sys.dim_w == 0 ? BlockSolver{} : dae_block_solver(layout, mode);
    const Vector x = layout.join(u_n, w_n);
    StepStats local;
    Vector next = step(ode, x, t_n, dt, prep, cfg, &local, sys.dim_w == 0 ? nullptr : &solver);
    if (stats) *stats = std::move(local);
    return layout.split(next);
}

inline DaeTrajectory dae_integrate(const DaeSystem& sys, std::span<const double> u0, std::span<const double> w0,
                                   double t0, double t_final, double dt, const StagePrep& prep,
                                   const SolverConfig& cfg, DaeMode mode, const IntegrateOptions& opts = {}) {
    check_consistent(sys, u0, w0, t0);
    const std::size_t steps = step_count(t0, t_final, dt);
    DaeTrajectory traj;
    Vector u(u0.begin(), u0.end()), w(w0.begin(), w0.end());
    traj.times.push_back(t0);
    traj.u.push_back(u);
    traj.w.push_back(w);
    if (opts.stats_csv) write_step_csv_header(*opts.stats_csv);
    for (std::size_t n = 0; n < steps; ++n) {
        const double tn = t0 + static_cast<double>(n) * dt;
        StepStats s;
        try {
            std::tie(u, w) = dae_step(sys, u, w, tn, dt, prep, cfg, mode, &s);
        } catch (const StepFailure& e) {
            traj.completed = false;
            traj.failure = "step " + std::to_string(n) + ": " + e.what();
            traj.total.accumulate(e.stats());
            return traj;
        }
        const double t1 = t0 + static_cast<double>(n + 1) * dt;
        traj.constraint_norms.push_back(sys.dim_w ? detail::norm2(sys.constraint_g(u, w, t1)) : 0.0);
        if (opts.stats_csv) write_step_csv(*opts.stats_csv, n, s);
        traj.total.accumulate(s);
        traj.steps.push_back(std::move(s));
        const bool last = n + 1 == steps;
        if (last || (opts.snapshot_every > 0 && (n + 1) % opts.snapshot_every == 0)) {
            traj.times.push_back(t1);
            traj.u.push_back(u);
            traj.w.push_back(w);
        }
    }
    traj.total.converged = traj.completed;
    return traj;
}

}  // namespace irk
