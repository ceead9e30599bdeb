#pragma once

#include "irk/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace irk {

/// y <- A x
using ApplyFn = std::function<void(std::span<const double> x, std::span<double> y)>;

struct LinearOperator {
    std::size_t n = 0;
    ApplyFn apply;
};

/// Right preconditioner. `applications_per_call` is the number of
/// diagonal-block solves performed per call; it drives the application count.
struct Preconditioner {
    LinearOperator op;
    std::size_t applications_per_call = 1;
};

struct KrylovReport {
    std::size_t iterations = 0;
    bool converged = false;
    /// Relative residual estimates, starting with 1 (the initial residual).
    std::vector<double> residual_history;
    std::size_t precond_applications = 0;
    /// Recomputed ||b - A x|| / ||b|| at exit.
    double final_relative_residual = 0.0;
    bool breakdown = false;
};

struct GmresOptions {
    double rtol = 1e-5;
    std::size_t maxit = 200;
    std::size_t restart = 200;
};

struct GmresResult {
    std::vector<double> x;
    KrylovReport report;
};

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

}  // namespace detail

/// Restarted GMRES with right preconditioning and a zero initial guess.
/// Preconditioned basis vectors are stored (flexible form), so each iteration
/// applies the preconditioner exactly once. The final residual is recomputed
/// explicitly; if it misses the tolerance the method restarts while budget
/// remains.
inline GmresResult gmres(const LinearOperator& op, std::span<const double> rhs, const Preconditioner* precond,
                         const GmresOptions& opts) {
    const std::size_t n = op.n;
    if (rhs.size() != n) throw DimensionError("gmres: rhs size mismatch");
    if (precond && precond->op.n != n) throw DimensionError("gmres: preconditioner size mismatch");
    if (!(opts.rtol > 0.0 && opts.rtol < 1.0)) throw ConfigError("gmres: rtol must lie in (0, 1)");

    GmresResult res;
    res.x.assign(n, 0.0);
    auto& rep = res.report;
    const double bnorm = detail::norm2(rhs);
    rep.residual_history.push_back(1.0);
    if (bnorm == 0.0) {
        rep.converged = true;
        return res;
    }
    const std::size_t m = std::max<std::size_t>(1, std::min(opts.restart, n + 1));
    std::vector<double> r(n), w(n), tmp(n);

    auto true_residual = [&]() {
        op.apply(res.x, tmp);
        for (std::size_t i = 0; i < n; ++i) r[i] = rhs[i] - tmp[i];
        return detail::norm2(r);
    };

    double rnorm = bnorm;
    std::copy(rhs.begin(), rhs.end(), r.begin());
    while (rep.iterations < opts.maxit) {
        std::vector<std::vector<double>> v(m + 1, std::vector<double>(n));
        std::vector<std::vector<double>> z(m, std::vector<double>(n));
        std::vector<std::vector<double>> h(m + 1, std::vector<double>(m, 0.0));
        std::vector<double> cs(m), sn(m), g(m + 1, 0.0);
        for (std::size_t i = 0; i < n; ++i) v[0][i] = r[i] / rnorm;
        g[0] = rnorm;
        std::size_t j = 0;
        for (; j < m && rep.iterations < opts.maxit; ++j) {
            if (precond) {
                precond->op.apply(v[j], z[j]);
                rep.precond_applications += precond->applications_per_call;
            } else {
                z[j] = v[j];
            }
            op.apply(z[j], w);
            ++rep.iterations;
            // Modified Gram-Schmidt with one reorthogonalization pass.
            for (int pass = 0; pass < 2; ++pass) {
                for (std::size_t i = 0; i <= j; ++i) {
                    const double hij = detail::dot(w, v[i]);
                    h[i][j] += hij;
                    for (std::size_t k = 0; k < n; ++k) w[k] -= hij * v[i][k];
                }
            }
            const double hnext = detail::norm2(w);
            h[j + 1][j] = hnext;
            for (std::size_t i = 0; i < j; ++i) {
                const double t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            const double denom = std::hypot(h[j][j], h[j + 1][j]);
            if (denom == 0.0) {
                cs[j] = 1.0;
                sn[j] = 0.0;
            } else {
                cs[j] = h[j][j] / denom;
                sn[j] = h[j + 1][j] / denom;
            }
            h[j][j] = cs[j] * h[j][j] + sn[j] * h[j + 1][j];
            h[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] = cs[j] * g[j];
            const double est = std::abs(g[j + 1]) / bnorm;
            rep.residual_history.push_back(std::min(est, rep.residual_history.back()));
            if (hnext <= 1e-14 * std::max(1.0, std::abs(h[j][j]))) {
                rep.breakdown = true;
                ++j;
                break;
            }
            if (est <= opts.rtol) {
                ++j;
                break;
            }
            for (std::size_t k = 0; k < n; ++k) v[j + 1][k] = w[k] / hnext;
        }
        // Back substitution for the least-squares coefficients.
        std::vector<double> y(j, 0.0);
        for (std::size_t i = j; i-- > 0;) {
            double s = g[i];
            for (std::size_t k = i + 1; k < j; ++k) s -= h[i][k] * y[k];
            if (h[i][i] == 0.0) {
                throw SingularMatrixError("gmres: singular Hessenberg system (breakdown on a singular operator)");
            }
            y[i] = s / h[i][i];
        }
        for (std::size_t i = 0; i < j; ++i)
            for (std::size_t k = 0; k < n; ++k) res.x[k] += y[i] * z[i][k];
        rnorm = true_residual();
        rep.final_relative_residual = rnorm / bnorm;
        if (rep.final_relative_residual <= opts.rtol) {
            rep.converged = true;
            return res;
        }
        if (rep.breakdown) {
            // The Krylov space is exhausted yet the residual does not pass.
            throw SingularMatrixError("gmres: breakdown with relative residual " +
                                      std::to_string(rep.final_relative_residual));
        }
        if (rnorm == 0.0) break;
    }
    rep.converged = rep.final_relative_residual <= opts.rtol;
    return res;
}

}  // namespace irk
