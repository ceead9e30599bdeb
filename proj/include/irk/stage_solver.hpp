#pragma once

#include "irk/block2x2.hpp"
#include "irk/dense.hpp"
#include "irk/errors.hpp"
#include "irk/krylov.hpp"
#include "irk/sparse.hpp"
#include "irk/tableau.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace irk {

enum class Variant { Simplified = 0, LumpedDiagonal = 1, WeightedDiagonal = 2, Triangular = 3 };

inline Variant variant_from_int(int v) {
    if (v < 0 || v > 3) throw ConfigError("variant must be 0, 1, 2 or 3");
    return static_cast<Variant>(v);
}

/// Block upper-triangular approximation of the Q0-conjugated stage Jacobian.
/// Block (k, l) is sum_i weight(k, l)[i] * L_i; empty weights mean a zero block.
struct VariantJacobian {
    std::size_t s = 0;
    std::vector<std::vector<double>> weights;
    std::vector<std::optional<SparseMatrix>> blocks;

    const std::vector<double>& weight(std::size_t k, std::size_t l) const { return weights[k * s + l]; }
    const SparseMatrix* block(std::size_t k, std::size_t l) const {
        const auto& b = blocks[k * s + l];
        return b ? &*b : nullptr;
    }
};

/// Stage-weight pattern of a variant, independent of the operators.
inline std::vector<std::vector<double>> variant_weights(const StagePrep& prep, Variant variant,
                                                        std::size_t simplified_stage = 0) {
    const std::size_t s = prep.stages();
    if (simplified_stage >= s) throw ConfigError("simplified stage index out of range");
    std::vector<std::vector<double>> w(s * s);
    for (std::size_t k = 0; k < s; ++k) {
        auto& diag = w[k * s + k];
        switch (variant) {
            case Variant::Simplified:
                diag.assign(s, 0.0);
                diag[simplified_stage] = 1.0;
                break;
            case Variant::LumpedDiagonal: {
                const auto& d = prep.dvec(k, k);
                std::size_t best = 0;
                for (std::size_t i = 1; i < s; ++i)
                    if (std::abs(d[i]) > std::abs(d[best])) best = i;
                diag.assign(s, 0.0);
                diag[best] = 1.0;
                break;
            }
            case Variant::WeightedDiagonal:
            case Variant::Triangular:
                diag = prep.dvec(k, k);
                break;
        }
    }
    if (variant == Variant::Triangular) {
        for (std::size_t k = 0; k < s; ++k)
            for (std::size_t l = 0; l < s; ++l)
                if (k != l && prep.block_of(l) >= prep.block_of(k)) w[k * s + l] = prep.dvec(k, l);
    }
    return w;
}

inline VariantJacobian build_variant_jacobian(const StagePrep& prep, std::span<const SparseMatrix> stage_ops,
                                              Variant variant, std::size_t simplified_stage = 0) {
    const std::size_t s = prep.stages();
    if (stage_ops.size() != s && !(variant == Variant::Simplified && stage_ops.size() == 1))
        throw DimensionError("build_variant_jacobian: expected one operator per stage");
    VariantJacobian jac;
    jac.s = s;
    jac.weights = variant_weights(prep, variant, simplified_stage);
    jac.blocks.resize(s * s);
    if (stage_ops.size() == 1) {
        for (std::size_t k = 0; k < s; ++k) jac.blocks[k * s + k] = stage_ops[0];
        return jac;
    }
    const std::size_t n = stage_ops[0].rows();
    for (std::size_t kl = 0; kl < s * s; ++kl) {
        const auto& w = jac.weights[kl];
        if (w.empty()) continue;
        std::vector<std::pair<double, const SparseMatrix*>> terms;
        std::size_t nonzero = 0, last = 0;
        for (std::size_t i = 0; i < s; ++i) {
            if (w[i] == 0.0) continue;
            terms.emplace_back(w[i], &stage_ops[i]);
            ++nonzero;
            last = i;
        }
        if (nonzero == 1 && w[last] == 1.0) {
            jac.blocks[kl] = stage_ops[last];
        } else {
            jac.blocks[kl] = combine(terms, n, n);
        }
    }
    return jac;
}

/// One diagonal block of the transformed system handed to a block solver.
/// For size 1: (eta M - dt D0) z = rhs. For size 2 the eigen-block operator
/// with diagonal operators D0, D1 and optional intra-block couplings.
struct BlockRequest {
    std::size_t index = 0;
    EigenBlock block;
    const SparseMatrix* mass = nullptr;
    double dt = 0.0;
    const SparseMatrix* diag0 = nullptr;
    const SparseMatrix* diag1 = nullptr;
    const SparseMatrix* couple01 = nullptr;
    const SparseMatrix* couple10 = nullptr;
    std::span<const double> rhs;
    const PrecondSpec* precond = nullptr;
    GmresOptions gmres;
};

struct BlockOutcome {
    std::vector<double> z;
    KrylovReport report;
    /// Diagonal-block solver applications, and the share of them spent on
    /// algebraic-constraint solves (DAE only).
    std::size_t applications = 0;
    std::size_t constraint_applications = 0;
};

using BlockSolver = std::function<BlockOutcome(const BlockRequest&)>;

class StageSolveError : public Error {
public:
    StageSolveError(std::size_t block, KrylovReport report, const std::string& what)
        : Error("stage solve failed in eigen-block " + std::to_string(block) + ": " + what),
          block_(block),
          report_(std::move(report)) {}

    std::size_t block() const noexcept { return block_; }
    const KrylovReport& report() const noexcept { return report_; }

private:
    std::size_t block_;
    KrylovReport report_;
};

inline Block2x2System make_block2x2(const BlockRequest& req) {
    Block2x2System sys;
    sys.eta = req.block.eta;
    sys.beta = req.block.beta;
    sys.phi = req.block.phi;
    sys.dt = req.dt;
    sys.m = *req.mass;
    sys.l1 = *req.diag0;
    sys.l2 = *req.diag1;
    if (req.couple01) sys.offdiag12 = *req.couple01;
    if (req.couple10) sys.offdiag21 = *req.couple10;
    return sys;
}

/// Preconditioned GMRES on one diagonal block: a direct or inexact inverse of
/// the shifted operator for 1x1 blocks, the block lower-triangular
/// preconditioner for 2x2 blocks.
inline BlockOutcome solve_block_default(const BlockRequest& req) {
    BlockOutcome out;
    const PrecondSpec spec = req.precond ? *req.precond : PrecondSpec{};
    if (req.block.size == 1) {
        const SparseMatrix a = combine({{req.block.eta, req.mass}, {-req.dt, req.diag0}});
        InnerSolver inner(a, spec.inner_solver, spec.inner_iterations);
        LinearOperator op{a.rows(), [&a](std::span<const double> x, std::span<double> y) { a.apply(x, y); }};
        Preconditioner pc{{a.rows(), [&inner](std::span<const double> x, std::span<double> y) {
                               auto v = inner.solve(x);
                               std::copy(v.begin(), v.end(), y.begin());
                           }},
                          1};
        auto res = gmres(op, req.rhs, &pc, req.gmres);
        out.z = std::move(res.x);
        out.report = std::move(res.report);
    } else {
        const Block2x2System sys = make_block2x2(req);
        auto res = solve_block2x2(sys, spec, req.rhs, req.gmres);
        out.z = std::move(res.x);
        out.report = std::move(res.report);
    }
    out.applications = out.report.precond_applications;
    return out;
}

struct BlockReport {
    std::size_t block = 0;
    std::size_t size = 1;
    KrylovReport report;
    std::size_t applications = 0;
    std::size_t constraint_applications = 0;
};

struct TransformedSolve {
    std::vector<double> dk;
    std::vector<BlockReport> blocks;
    std::size_t krylov_iterations = 0;
    std::size_t applications = 0;
    std::size_t constraint_applications = 0;
};

struct LinearSolveConfig {
    PrecondSpec precond;
    GmresOptions gmres;
};

/// Solves (A0^{-1} (x) M - dt diag(L_i)) x = rhs in the transformed basis:
/// applies (Q^T (x) I), block backward substitution over R with the variant's
/// approximate operator, then returns dk = (Q R (x) I) z, so that
/// (I (x) M - dt diag(L_i) (A0 (x) I)) dk = rhs when the approximation is exact.
inline TransformedSolve solve_transformed_system(const StagePrep& prep, const SparseMatrix& mass,
                                                 const VariantJacobian& jac, double dt, std::span<const double> rhs,
                                                 const LinearSolveConfig& cfg, const BlockSolver* solver = nullptr) {
    const std::size_t s = prep.stages();
    const std::size_t n = mass.rows();
    if (rhs.size() != s * n) throw DimensionError("solve_transformed_system: rhs length must be s*N");
    if (jac.s != s) throw DimensionError("solve_transformed_system: jacobian stage count mismatch");
    const auto& q = prep.schur.q;
    const auto& r = prep.schur.r;

    std::vector<double> g(s * n, 0.0);
    for (std::size_t k = 0; k < s; ++k)
        for (std::size_t i = 0; i < s; ++i) {
            const double c = q(i, k);
            if (c == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) g[k * n + j] += c * rhs[i * n + j];
        }

    TransformedSolve out;
    std::vector<double> z(s * n, 0.0);
    std::vector<double> tmp(n);
    const auto& blocks = prep.schur.blocks;
    for (std::size_t bi = blocks.size(); bi-- > 0;) {
        const EigenBlock& blk = blocks[bi];
        const std::size_t lo = blk.offset, hi = blk.offset + blk.size;
        std::vector<double> b(g.begin() + static_cast<std::ptrdiff_t>(lo * n),
                              g.begin() + static_cast<std::ptrdiff_t>(hi * n));
        // Subtract couplings to already solved rows: (r_kl M - dt Ptilde_kl) z_l.
        for (std::size_t k = lo; k < hi; ++k) {
            std::span<double> bk(b.data() + (k - lo) * n, n);
            for (std::size_t l = hi; l < s; ++l) {
                std::span<const double> zl(z.data() + l * n, n);
                if (r(k, l) != 0.0) mass.apply(zl, bk, -r(k, l), 1.0);
                if (const SparseMatrix* p = jac.block(k, l)) p->apply(zl, bk, dt, 1.0);
            }
        }
        BlockRequest req;
        req.index = bi;
        req.block = blk;
        req.mass = &mass;
        req.dt = dt;
        req.diag0 = jac.block(lo, lo);
        if (blk.size == 2) {
            req.diag1 = jac.block(lo + 1, lo + 1);
            req.couple01 = jac.block(lo, lo + 1);
            req.couple10 = jac.block(lo + 1, lo);
        }
        req.rhs = b;
        req.precond = &cfg.precond;
        req.gmres = cfg.gmres;
        BlockOutcome res;
        try {
            res = solver && *solver ? (*solver)(req) : solve_block_default(req);
        } catch (const StageSolveError&) {
            throw;
        } catch (const IndexError&) {
            throw;
        } catch (const Error& e) {
            throw StageSolveError(bi, {}, e.what());
        }
        if (!res.report.converged) {
            throw StageSolveError(bi, res.report,
                                  "GMRES did not converge (relative residual " +
                                      std::to_string(res.report.final_relative_residual) + ")");
        }
        std::copy(res.z.begin(), res.z.end(), z.begin() + static_cast<std::ptrdiff_t>(lo * n));
        out.krylov_iterations += res.report.iterations;
        out.applications += res.applications;
        out.constraint_applications += res.constraint_applications;
        out.blocks.push_back({bi, blk.size, std::move(res.report), res.applications, res.constraint_applications});
    }
    std::reverse(out.blocks.begin(), out.blocks.end());

    // dk = (Q R (x) I) z
    const DenseMatrix qr = q * r;
    out.dk.assign(s * n, 0.0);
    for (std::size_t i = 0; i < s; ++i)
        for (std::size_t k = 0; k < s; ++k) {
            const double c = qr(i, k);
            if (c == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) out.dk[i * n + j] += c * z[k * n + j];
        }
    return out;
}

}  // namespace irk
