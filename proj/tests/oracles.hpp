#pragma once

// Reference computations for the tests, written independently of the
// library: plain nested vectors, Gauss-Jordan elimination, closed-form roots,
// polynomial integration, cyclic Jacobi, finite differences.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <random>
#include <stdexcept>
#include <vector>

namespace oracle {

using Mat = std::vector<std::vector<double>>;
using Vec = std::vector<double>;

inline Mat zeros(std::size_t r, std::size_t c) { return Mat(r, Vec(c, 0.0)); }

inline Mat eye(std::size_t n) {
    Mat m = zeros(n, n);
    for (std::size_t i = 0; i < n; ++i) m[i][i] = 1.0;
    return m;
}

inline Vec matvec(const Mat& a, const Vec& x) {
    Vec y(a.size(), 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < x.size(); ++j) y[i] += a[i][j] * x[j];
    return y;
}

inline Mat matmul(const Mat& a, const Mat& b) {
    Mat c = zeros(a.size(), b[0].size());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t k = 0; k < b.size(); ++k)
            for (std::size_t j = 0; j < b[0].size(); ++j) c[i][j] += a[i][k] * b[k][j];
    return c;
}

/// Gauss-Jordan elimination with full row pivoting; solves a x = b.
inline Vec solve(Mat a, Vec b) {
    const std::size_t n = a.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t p = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r][col]) > std::abs(a[p][col])) p = r;
        if (a[p][col] == 0.0) throw std::runtime_error("oracle::solve: singular");
        std::swap(a[p], a[col]);
        std::swap(b[p], b[col]);
        const double piv = a[col][col];
        for (std::size_t j = 0; j < n; ++j) a[col][j] /= piv;
        b[col] /= piv;
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col || a[r][col] == 0.0) continue;
            const double f = a[r][col];
            for (std::size_t j = 0; j < n; ++j) a[r][j] -= f * a[col][j];
            b[r] -= f * b[col];
        }
    }
    return b;
}

inline Mat inverse(const Mat& a) {
    const std::size_t n = a.size();
    Mat inv = zeros(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        Vec e(n, 0.0);
        e[j] = 1.0;
        Vec c = solve(a, e);
        for (std::size_t i = 0; i < n; ++i) inv[i][j] = c[i];
    }
    return inv;
}

/// Roots of x^2 + b x + c.
inline std::vector<std::complex<double>> quadratic_roots(double b, double c) {
    const std::complex<double> d = std::sqrt(std::complex<double>(b * b - 4.0 * c));
    return {(-b + d) / 2.0, (-b - d) / 2.0};
}

/// Eigenvalues of a 2x2 matrix from its characteristic polynomial.
inline std::vector<std::complex<double>> eig2(const Mat& a) {
    return quadratic_roots(-(a[0][0] + a[1][1]), a[0][0] * a[1][1] - a[0][1] * a[1][0]);
}

/// Eigenvalues of a 3x3 matrix: Cardano on the characteristic polynomial.
inline std::vector<std::complex<double>> eig3(const Mat& a) {
    const double tr = a[0][0] + a[1][1] + a[2][2];
    const double m2 = a[0][0] * a[1][1] - a[0][1] * a[1][0] + a[0][0] * a[2][2] - a[0][2] * a[2][0] +
                      a[1][1] * a[2][2] - a[1][2] * a[2][1];
    const double det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
                       a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
                       a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    // x^3 + B x^2 + C x + D
    const double B = -tr, C = m2, D = -det;
    const double p = C - B * B / 3.0;
    const double q = 2.0 * B * B * B / 27.0 - B * C / 3.0 + D;
    using cd = std::complex<double>;
    const cd disc = std::sqrt(cd(q * q / 4.0 + p * p * p / 27.0));
    cd u = std::pow(cd(-q / 2.0) + disc, 1.0 / 3.0);
    if (std::abs(u) < 1e-14) u = std::pow(cd(-q / 2.0) - disc, 1.0 / 3.0);
    const cd w(-0.5, std::sqrt(3.0) / 2.0);
    std::vector<cd> roots;
    for (int k = 0; k < 3; ++k) {
        const cd uk = u * std::pow(w, k);
        const cd vk = std::abs(uk) < 1e-300 ? cd(0.0) : -p / (3.0 * uk);
        roots.push_back(uk + vk - B / 3.0);
    }
    // One Newton polish per root on the cubic.
    for (auto& r : roots) {
        for (int it = 0; it < 3; ++it) {
            const cd f = ((r + B) * r + C) * r + D;
            const cd df = (3.0 * r + 2.0 * B) * r + C;
            if (std::abs(df) > 0.0) r -= f / df;
        }
    }
    return roots;
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
inline Vec symmetric_eigenvalues(Mat a) {
    const std::size_t n = a.size();
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off += a[i][j] * a[i][j];
        if (off < 1e-30) break;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                if (std::abs(a[p][q]) < 1e-300) continue;
                const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
    }
    Vec ev(n);
    for (std::size_t i = 0; i < n; ++i) ev[i] = a[i][i];
    std::sort(ev.begin(), ev.end());
    return ev;
}

/// Collocation coefficients a_ij = int_0^{c_i} l_j(x) dx and weights
/// b_j = int_0^1 l_j(x) dx, by expanding the Lagrange basis polynomials.
inline std::pair<Mat, Vec> collocation(const Vec& c) {
    const std::size_t s = c.size();
    Mat a = zeros(s, s);
    Vec b(s);
    for (std::size_t j = 0; j < s; ++j) {
        Vec poly{1.0};
        for (std::size_t m = 0; m < s; ++m) {
            if (m == j) continue;
            Vec next(poly.size() + 1, 0.0);
            const double d = c[j] - c[m];
            for (std::size_t k = 0; k < poly.size(); ++k) {
                next[k + 1] += poly[k] / d;
                next[k] -= poly[k] * c[m] / d;
            }
            poly = next;
        }
        auto integral = [&](double x) {
            double v = 0.0, xp = x;
            for (std::size_t k = 0; k < poly.size(); ++k, xp *= x) v += poly[k] * xp / static_cast<double>(k + 1);
            return v;
        };
        b[j] = integral(1.0);
        for (std::size_t i = 0; i < s; ++i) a[i][j] = integral(c[i]);
    }
    return {a, b};
}

/// Closed-form collocation nodes for small stage counts.
inline Vec gauss_nodes(std::size_t s) {
    if (s == 1) return {0.5};
    if (s == 2) return {0.5 - std::sqrt(3.0) / 6.0, 0.5 + std::sqrt(3.0) / 6.0};
    if (s == 3) return {0.5 - std::sqrt(15.0) / 10.0, 0.5, 0.5 + std::sqrt(15.0) / 10.0};
    throw std::runtime_error("gauss_nodes: s <= 3");
}

inline Vec radau_nodes(std::size_t s) {
    if (s == 1) return {1.0};
    if (s == 2) return {1.0 / 3.0, 1.0};
    if (s == 3) return {(4.0 - std::sqrt(6.0)) / 10.0, (4.0 + std::sqrt(6.0)) / 10.0, 1.0};
    throw std::runtime_error("radau_nodes: s <= 3");
}

inline Vec lobatto_nodes(std::size_t s) {
    if (s == 2) return {0.0, 1.0};
    if (s == 3) return {0.0, 0.5, 1.0};
    if (s == 4) return {0.0, 0.5 - std::sqrt(5.0) / 10.0, 0.5 + std::sqrt(5.0) / 10.0, 1.0};
    throw std::runtime_error("lobatto_nodes: 2 <= s <= 4");
}

/// Stability function R(z) = 1 + z b^T (I - z A)^{-1} 1.
inline double stability(const Mat& a, const Vec& b, double z) {
    const std::size_t s = b.size();
    Mat m = eye(s);
    for (std::size_t i = 0; i < s; ++i)
        for (std::size_t j = 0; j < s; ++j) m[i][j] -= z * a[i][j];
    const Vec y = solve(m, Vec(s, 1.0));
    double r = 1.0;
    for (std::size_t i = 0; i < s; ++i) r += z * b[i] * y[i];
    return r;
}

/// Dense stage system for M u' = L u: (I (x) M - dt A (x) L) k = 1 (x) L u_n.
inline Vec linear_stages(const Mat& a, const Mat& mass, const Mat& l, const Vec& un, double dt) {
    const std::size_t s = a.size(), n = un.size();
    Mat big = zeros(s * n, s * n);
    Vec rhs(s * n);
    const Vec lu = matvec(l, un);
    for (std::size_t i = 0; i < s; ++i) {
        for (std::size_t r = 0; r < n; ++r) {
            rhs[i * n + r] = lu[r];
            for (std::size_t j = 0; j < s; ++j)
                for (std::size_t c = 0; c < n; ++c)
                    big[i * n + r][j * n + c] = (i == j ? mass[r][c] : 0.0) - dt * a[i][j] * l[r][c];
        }
    }
    return solve(big, rhs);
}

/// Central finite-difference directional derivative of f at x along v.
inline Vec fd_directional(const std::function<Vec(const Vec&)>& f, const Vec& x, const Vec& v, double eps = 1e-6) {
    Vec xp = x, xm = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        xp[i] += eps * v[i];
        xm[i] -= eps * v[i];
    }
    const Vec fp = f(xp), fm = f(xm);
    Vec d(fp.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = (fp[i] - fm[i]) / (2.0 * eps);
    return d;
}

/// Full Newton on the stage equations of a scalar ODE u' = f(u), dense
/// Jacobian; returns the absolute residual norm after each iteration
/// (index 0 = initial) and the final stages.
inline std::pair<Vec, Vec> scalar_stage_newton(const Mat& a, double un, double dt,
                                               const std::function<double(double)>& f,
                                               const std::function<double(double)>& df, int iterations) {
    const std::size_t s = a.size();
    Vec k(s, 0.0), hist;
    auto residual = [&](const Vec& kk) {
        Vec r(s);
        for (std::size_t i = 0; i < s; ++i) {
            double u = un;
            for (std::size_t j = 0; j < s; ++j) u += dt * a[i][j] * kk[j];
            r[i] = f(u) - kk[i];
        }
        return r;
    };
    auto norm = [](const Vec& v) {
        double t = 0.0;
        for (double e : v) t += e * e;
        return std::sqrt(t);
    };
    Vec r = residual(k);
    hist.push_back(norm(r));
    for (int it = 0; it < iterations; ++it) {
        Mat j = zeros(s, s);
        for (std::size_t i = 0; i < s; ++i) {
            double u = un;
            for (std::size_t m = 0; m < s; ++m) u += dt * a[i][m] * k[m];
            for (std::size_t m = 0; m < s; ++m) j[i][m] = df(u) * dt * a[i][m] - (i == m ? 1.0 : 0.0);
        }
        Vec neg(s);
        for (std::size_t i = 0; i < s; ++i) neg[i] = -r[i];
        const Vec d = solve(j, neg);
        for (std::size_t i = 0; i < s; ++i) k[i] += d[i];
        r = residual(k);
        hist.push_back(norm(r));
    }
    return {hist, k};
}

inline Mat random_matrix(std::size_t n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> d(lo, hi);
    Mat m = zeros(n, n);
    for (auto& r : m)
        for (auto& v : r) v = d(rng);
    return m;
}

inline double max_abs_diff(const Vec& a, const Vec& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace oracle
