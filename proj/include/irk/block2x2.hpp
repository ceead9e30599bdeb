#pragma once

#include "irk/dense.hpp"
#include "irk/errors.hpp"
#include "irk/krylov.hpp"
#include "irk/sparse.hpp"
#include "irk/tableau.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

namespace irk {

enum class GammaMode { Eta, Star, Custom };

enum class InnerSolverKind { Exact, FixedIterations };

/// Solve hook that replaces the shifted Schur approximation, e.g. with an
/// exact Schur-complement solve in tests.
using SchurSolveHook = std::function<std::vector<double>(std::span<const double>)>;

struct PrecondSpec {
    GammaMode gamma_mode = GammaMode::Star;
    double custom_gamma = 0.0;
    InnerSolverKind inner_solver = InnerSolverKind::Exact;
    int inner_iterations = 1;
    SchurSolveHook schur_override;

    double gamma(double eta, double beta) const {
        switch (gamma_mode) {
            case GammaMode::Eta: return eta;
            case GammaMode::Star: return gamma_star(eta, beta);
            case GammaMode::Custom:
                if (!(custom_gamma > 0.0)) throw ConfigError("PrecondSpec: custom gamma must be positive");
                return custom_gamma;
        }
        return eta;
    }
};

/// Direct (banded LU) or inexact (fixed SGS sweeps) inverse of one
/// diagonal block.
class InnerSolver {
public:
    InnerSolver(const SparseMatrix& a, InnerSolverKind kind, int iterations) {
        if (kind == InnerSolverKind::Exact) {
            impl_.emplace<BandedLu>(a);
        } else {
            impl_.emplace<SgsSweeps>(a, iterations);
        }
    }

    std::vector<double> solve(std::span<const double> rhs) const {
        return std::visit(
            [&](const auto& s) -> std::vector<double> {
                if constexpr (std::is_same_v<std::decay_t<decltype(s)>, std::monostate>) {
                    throw ConfigError("InnerSolver: not initialized");
                } else {
                    return s.solve(rhs);
                }
            },
            impl_);
    }

private:
    std::variant<std::monostate, BandedLu, SgsSweeps> impl_;
};

/// Mass-form 2x2 eigen-block system
///   [[eta M - dt L1,           phi M - dt O12],
///    [-(beta^2/phi) M - dt O21, eta M - dt L2 ]]
/// O12 / O21 are the intra-block couplings kept by the triangular variant.
struct Block2x2System {
    double eta = 1.0;
    double beta = 0.0;
    double phi = 1.0;
    double dt = 1.0;
    SparseMatrix m;
    SparseMatrix l1;
    SparseMatrix l2;
    std::optional<SparseMatrix> offdiag12;
    std::optional<SparseMatrix> offdiag21;

    std::size_t n() const noexcept { return m.rows(); }

    void validate() const {
        const std::size_t size = n();
        if (!m.square() || l1.rows() != size || l1.cols() != size || l2.rows() != size || l2.cols() != size)
            throw DimensionError("Block2x2System: operator dimensions differ");
        if ((offdiag12 && offdiag12->rows() != size) || (offdiag21 && offdiag21->rows() != size))
            throw DimensionError("Block2x2System: coupling dimensions differ");
        if (!(eta > 0.0)) throw DomainError("Block2x2System: eta must be positive");
        if (phi == 0.0) throw DomainError("Block2x2System: phi must be nonzero");
    }

    /// Diagonal block gamma M - dt L for the given stage operator.
    SparseMatrix shifted(double gamma, const SparseMatrix& l) const {
        return combine({{gamma, &m}, {-dt, &l}});
    }
};

inline std::vector<double> apply_block2x2(const Block2x2System& sys, std::span<const double> x) {
    sys.validate();
    const std::size_t n = sys.n();
    if (x.size() != 2 * n) throw DimensionError("apply_block2x2: expected vector of length 2N");
    auto x1 = x.subspan(0, n);
    auto x2 = x.subspan(n, n);
    std::vector<double> y(2 * n, 0.0);
    std::vector<double> mx1 = sys.m.apply(x1), mx2 = sys.m.apply(x2);
    std::vector<double> l1x1 = sys.l1.apply(x1), l2x2 = sys.l2.apply(x2);
    const double c21 = -sys.beta * sys.beta / sys.phi;
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = sys.eta * mx1[i] - sys.dt * l1x1[i] + sys.phi * mx2[i];
        y[n + i] = c21 * mx1[i] + sys.eta * mx2[i] - sys.dt * l2x2[i];
    }
    if (sys.offdiag12) {
        auto o = sys.offdiag12->apply(x2);
        for (std::size_t i = 0; i < n; ++i) y[i] -= sys.dt * o[i];
    }
    if (sys.offdiag21) {
        auto o = sys.offdiag21->apply(x1);
        for (std::size_t i = 0; i < n; ++i) y[n + i] -= sys.dt * o[i];
    }
    return y;
}

/// Block lower-triangular preconditioner
///   [[eta M - dt L1, 0], [-(beta^2/phi) M, gamma M - dt L2]]^{-1}
/// with gamma chosen by the PrecondSpec. The intra-block couplings are ignored here.
class Block2x2Preconditioner {
public:
    Block2x2Preconditioner(const Block2x2System& sys, const PrecondSpec& spec)
        : m_(sys.m),
          coupling_(sys.beta * sys.beta / sys.phi),
          gamma_(spec.gamma(sys.eta, sys.beta)),
          first_(sys.shifted(sys.eta, sys.l1), spec.inner_solver, spec.inner_iterations),
          schur_override_(spec.schur_override) {
        sys.validate();
        if (!schur_override_) {
            second_.emplace(sys.shifted(gamma_, sys.l2), spec.inner_solver, spec.inner_iterations);
        }
    }

    double gamma() const noexcept { return gamma_; }
    std::size_t n() const noexcept { return m_.rows(); }

    void apply(std::span<const double> r, std::span<double> z) const {
        const std::size_t n = m_.rows();
        if (r.size() != 2 * n || z.size() != 2 * n) throw DimensionError("Block2x2Preconditioner: size mismatch");
        auto z1 = first_.solve(r.subspan(0, n));
        auto mz1 = m_.apply(z1);
        std::vector<double> r2(n);
        for (std::size_t i = 0; i < n; ++i) r2[i] = r[n + i] + coupling_ * mz1[i];
        auto z2 = schur_override_ ? schur_override_(r2) : second_->solve(r2);
        std::copy(z1.begin(), z1.end(), z.begin());
        std::copy(z2.begin(), z2.end(), z.begin() + static_cast<std::ptrdiff_t>(n));
    }

    Preconditioner as_preconditioner() const {
        return {{2 * n(), [this](std::span<const double> x, std::span<double> y) { apply(x, y); }}, 2};
    }

private:
    SparseMatrix m_;
    double coupling_;
    double gamma_;
    InnerSolver first_;
    std::optional<InnerSolver> second_;
    SchurSolveHook schur_override_;
};

inline std::vector<double> precond_block2x2(const Block2x2System& sys, const PrecondSpec& spec,
                                            std::span<const double> r) {
    Block2x2Preconditioner p(sys, spec);
    std::vector<double> z(r.size());
    p.apply(r, z);
    return z;
}

/// GMRES on the 2x2 block system, right-preconditioned by the block
/// lower-triangular preconditioner (two block solves per iteration).
inline GmresResult solve_block2x2(const Block2x2System& sys, const PrecondSpec& spec, std::span<const double> rhs,
                                  const GmresOptions& opts) {
    Block2x2Preconditioner p(sys, spec);
    LinearOperator op{2 * sys.n(), [&sys](std::span<const double> x, std::span<double> y) {
                          auto v = apply_block2x2(sys, x);
                          std::copy(v.begin(), v.end(), y.begin());
                      }};
    auto pc = p.as_preconditioner();
    return gmres(op, rhs, &pc, opts);
}

namespace detail {

/// Largest eigenvalue of a symmetric tridiagonal matrix by Sturm bisection.
inline double tridiag_max_eig(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t m = a.size();
    double lo = a[0], hi = a[0];
    for (std::size_t i = 0; i < m; ++i) {
        const double r = (i > 0 ? std::abs(b[i - 1]) : 0.0) + (i + 1 < m ? std::abs(b[i]) : 0.0);
        lo = std::min(lo, a[i] - r);
        hi = std::max(hi, a[i] + r);
    }
    auto count_below = [&](double x) {
        std::size_t c = 0;
        double q = 1.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double bb = i > 0 ? b[i - 1] * b[i - 1] : 0.0;
            q = a[i] - x - (i > 0 ? bb / q : 0.0);
            if (q == 0.0) q = -1e-300;
            if (q < 0.0) ++c;
        }
        return c;
    };
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(std::abs(lo), std::abs(hi)) + 1e-300; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (count_below(mid) < m) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

/// Maximum eigenvalue of the symmetric part (L + L^T)/2, i.e. the rightmost
/// point of the field of values on the real axis. Lanczos with full
/// reorthogonalization; Assumption-2 style checks compare this against zero.
inline double field_of_values_bound(const SparseMatrix& l) {
    if (!l.square()) throw DimensionError("field_of_values_bound: matrix must be square");
    const std::size_t n = l.rows();
    if (n == 0) return 0.0;
    const SparseMatrix lt = l.transpose();
    auto apply_h = [&](const std::vector<double>& x) {
        auto y = l.apply(x);
        auto z = lt.apply(x);
        for (std::size_t i = 0; i < n; ++i) y[i] = 0.5 * (y[i] + z[i]);
        return y;
    };
    std::mt19937_64 rng(12345);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<double> v(n);
    for (double& e : v) e = dist(rng);
    const double v0 = detail::norm2(v);
    for (double& e : v) e /= v0;

    std::vector<std::vector<double>> basis{v};
    std::vector<double> alpha, beta;
    const std::size_t max_steps = std::min<std::size_t>(n, 400);
    double prev = 0.0;
    const double scale = std::max(l.norm_inf(), 1e-300);
    for (std::size_t j = 0; j < max_steps; ++j) {
        auto w = apply_h(basis[j]);
        const double a = detail::dot(w, basis[j]);
        alpha.push_back(a);
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& q : basis) {
                const double c = detail::dot(w, q);
                for (std::size_t i = 0; i < n; ++i) w[i] -= c * q[i];
            }
        const double bnext = detail::norm2(w);
        const double current = detail::tridiag_max_eig(alpha, beta);
        if (bnext <= 1e-13 * scale) return current;
        if (j >= 8 && j % 4 == 0 && std::abs(current - prev) <= 1e-13 * scale) return current;
        prev = current;
        beta.push_back(bnext);
        for (double& e : w) e /= bnext;
        basis.push_back(std::move(w));
    }
    return detail::tridiag_max_eig(alpha, beta);
}

/// Condition number of the right-preconditioned Schur complement
///   P = [eta I - L2 + beta^2 (eta I - L1)^{-1}] (gamma I - L2)^{-1}
/// for time-step-scaled operators L1, L2 (materialized densely).
inline double measure_kappa(const DenseMatrix& l1hat, const DenseMatrix& l2hat, double eta, double beta,
                            double gamma) {
    if (!l1hat.square() || l1hat.rows() != l2hat.rows() || !l2hat.square())
        throw DimensionError("measure_kappa: operator dimensions differ");
    const std::size_t n = l1hat.rows();
    if (n > 512) throw DimensionError("measure_kappa: N must not exceed 512");
    const DenseMatrix id = DenseMatrix::identity(n);
    try {
        const DenseMatrix a1inv = inverse(eta * id - l1hat);
        const DenseMatrix s = (eta * id - l2hat) + (beta * beta) * a1inv;
        const DenseMatrix shift_inv = inverse(gamma * id - l2hat);
        return cond2(s * shift_inv);
    } catch (const SingularMatrixError& e) {
        throw SingularMatrixError(std::string("measure_kappa: singular shift: ") + e.what());
    }
}

/// Builds the scaled operators dt * M^{-1} L_i from the block system.
inline double measure_kappa(const Block2x2System& sys, const PrecondSpec& spec) {
    sys.validate();
    const DenseMatrix minv = inverse(sys.m.to_dense());
    const DenseMatrix l1hat = sys.dt * (minv * sys.l1.to_dense());
    const DenseMatrix l2hat = sys.dt * (minv * sys.l2.to_dense());
    return measure_kappa(l1hat, l2hat, sys.eta, sys.beta, spec.gamma(sys.eta, sys.beta));
}

}  // namespace irk
