#pragma once

#include "irk/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace irk {

/// Small row-major dense matrix. Houses Butcher coefficient matrices, their
/// inverses and Schur factors, and materialized operators for conditioning
/// studies.
class DenseMatrix {
public:
    DenseMatrix() = default;

    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    DenseMatrix(std::initializer_list<std::initializer_list<double>> init) {
        rows_ = init.size();
        cols_ = rows_ ? init.begin()->size() : 0;
        data_.reserve(rows_ * cols_);
        for (const auto& row : init) {
            if (row.size() != cols_) {
                throw DimensionError("DenseMatrix: ragged initializer");
            }
            data_.insert(data_.end(), row.begin(), row.end());
        }
    }

    static DenseMatrix identity(std::size_t n) {
        DenseMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    static DenseMatrix diagonal(std::span<const double> d) {
        DenseMatrix m(d.size(), d.size());
        for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool square() const noexcept { return rows_ == cols_; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

    std::vector<double> column(std::size_t j) const {
        std::vector<double> c(rows_);
        for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
        return c;
    }

    const std::vector<double>& entries() const noexcept { return data_; }

    DenseMatrix transpose() const {
        DenseMatrix t(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : data_) m = std::max(m, std::abs(v));
        return m;
    }

    /// Maximum absolute row sum.
    double norm_inf() const {
        double m = 0.0;
        for (std::size_t i = 0; i < rows_; ++i) {
            double s = 0.0;
            for (double v : row(i)) s += std::abs(v);
            m = std::max(m, s);
        }
        return m;
    }

    bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }

    std::vector<double> apply(std::span<const double> x) const {
        if (x.size() != cols_) throw DimensionError("DenseMatrix::apply: size mismatch");
        std::vector<double> y(rows_, 0.0);
        for (std::size_t i = 0; i < rows_; ++i) {
            double s = 0.0;
            auto r = row(i);
            for (std::size_t j = 0; j < cols_; ++j) s += r[j] * x[j];
            y[i] = s;
        }
        return y;
    }

    friend DenseMatrix operator*(const DenseMatrix& a, const DenseMatrix& b) {
        if (a.cols_ != b.rows_) throw DimensionError("DenseMatrix product: size mismatch");
        DenseMatrix c(a.rows_, b.cols_);
        for (std::size_t i = 0; i < a.rows_; ++i)
            for (std::size_t k = 0; k < a.cols_; ++k) {
                const double aik = a(i, k);
                if (aik == 0.0) continue;
                for (std::size_t j = 0; j < b.cols_; ++j) c(i, j) += aik * b(k, j);
            }
        return c;
    }

    friend DenseMatrix operator-(const DenseMatrix& a, const DenseMatrix& b) {
        if (a.rows_ != b.rows_ || a.cols_ != b.cols_) throw DimensionError("DenseMatrix difference: size mismatch");
        DenseMatrix c = a;
        for (std::size_t i = 0; i < c.data_.size(); ++i) c.data_[i] -= b.data_[i];
        return c;
    }

    friend DenseMatrix operator+(const DenseMatrix& a, const DenseMatrix& b) {
        if (a.rows_ != b.rows_ || a.cols_ != b.cols_) throw DimensionError("DenseMatrix sum: size mismatch");
        DenseMatrix c = a;
        for (std::size_t i = 0; i < c.data_.size(); ++i) c.data_[i] += b.data_[i];
        return c;
    }

    friend DenseMatrix operator*(double s, const DenseMatrix& a) {
        DenseMatrix c = a;
        for (double& v : c.data_) v *= s;
        return c;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// LU factorization with partial pivoting, P·A = L·U packed in one matrix.
class DenseLu {
public:
    explicit DenseLu(const DenseMatrix& a) : lu_(a), piv_(a.rows()) {
        if (!a.square()) throw DimensionError("DenseLu: matrix must be square");
        const std::size_t n = a.rows();
        const double scale = a.norm_inf();
        const double tiny = 1e-14 * scale;
        for (std::size_t i = 0; i < n; ++i) piv_[i] = i;
        for (std::size_t k = 0; k < n; ++k) {
            std::size_t p = k;
            double best = std::abs(lu_(k, k));
            for (std::size_t i = k + 1; i < n; ++i) {
                if (std::abs(lu_(i, k)) > best) {
                    best = std::abs(lu_(i, k));
                    p = i;
                }
            }
            if (!(best >= tiny) || best == 0.0) {
                throw SingularMatrixError("DenseLu: pivot " + std::to_string(best) + " below 1e-14*||A||_inf at column " +
                                          std::to_string(k));
            }
            if (p != k) {
                std::swap_ranges(lu_.row(k).begin(), lu_.row(k).end(), lu_.row(p).begin());
                std::swap(piv_[k], piv_[p]);
            }
            const double inv = 1.0 / lu_(k, k);
            for (std::size_t i = k + 1; i < n; ++i) {
                const double l = lu_(i, k) * inv;
                lu_(i, k) = l;
                if (l == 0.0) continue;
                for (std::size_t j = k + 1; j < n; ++j) lu_(i, j) -= l * lu_(k, j);
            }
        }
    }

    std::size_t size() const noexcept { return lu_.rows(); }

    std::vector<double> solve(std::span<const double> rhs) const {
        const std::size_t n = lu_.rows();
        if (rhs.size() != n) throw DimensionError("DenseLu::solve: size mismatch");
        std::vector<double> x(n);
        for (std::size_t i = 0; i < n; ++i) x[i] = rhs[piv_[i]];
        for (std::size_t i = 0; i < n; ++i) {
            double s = x[i];
            for (std::size_t j = 0; j < i; ++j) s -= lu_(i, j) * x[j];
            x[i] = s;
        }
        for (std::size_t i = n; i-- > 0;) {
            double s = x[i];
            for (std::size_t j = i + 1; j < n; ++j) s -= lu_(i, j) * x[j];
            x[i] = s / lu_(i, i);
        }
        return x;
    }

    DenseMatrix inverse() const {
        const std::size_t n = lu_.rows();
        DenseMatrix inv(n, n);
        std::vector<double> e(n, 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            std::fill(e.begin(), e.end(), 0.0);
            e[j] = 1.0;
            auto col = solve(e);
            for (std::size_t i = 0; i < n; ++i) inv(i, j) = col[i];
        }
        return inv;
    }

private:
    DenseMatrix lu_;
    std::vector<std::size_t> piv_;
};

inline std::vector<double> lu_solve(const DenseMatrix& a, std::span<const double> rhs) {
    return DenseLu(a).solve(rhs);
}

inline DenseMatrix inverse(const DenseMatrix& a) { return DenseLu(a).inverse(); }

/// One diagonal block of a standardized real Schur form. Size-2 blocks read
/// [[eta, phi], [-beta^2/phi, eta]] and carry eigenvalues eta +- i beta.
struct EigenBlock {
    std::size_t offset = 0;
    std::size_t size = 1;
    double eta = 0.0;
    double beta = 0.0;
    double phi = 0.0;
};

/// a = q * r * q^T with q orthogonal and r block upper triangular.
struct SchurForm {
    DenseMatrix q;
    DenseMatrix r;
    std::vector<EigenBlock> blocks;
};

namespace detail {

/// Rotation (cs, sn) such that G^T [[a,b],[c,d]] G is upper triangular (real
/// eigenvalues) or has equal diagonal entries (complex pair), where
/// G = [[cs, -sn], [sn, cs]]. Follows the LAPACK dlanv2 construction.
struct Rotation {
    double cs = 1.0;
    double sn = 0.0;
};

inline double sign_of(double v) { return v >= 0.0 ? 1.0 : -1.0; }

inline void rotate(DenseMatrix& h, DenseMatrix& z, std::size_t i, Rotation g) {
    const std::size_t n = h.rows();
    for (std::size_t j = 0; j < n; ++j) {
        const double a = h(i, j), b = h(i + 1, j);
        h(i, j) = g.cs * a + g.sn * b;
        h(i + 1, j) = -g.sn * a + g.cs * b;
    }
    for (std::size_t k = 0; k < n; ++k) {
        const double a = h(k, i), b = h(k, i + 1);
        h(k, i) = g.cs * a + g.sn * b;
        h(k, i + 1) = -g.sn * a + g.cs * b;
        const double za = z(k, i), zb = z(k, i + 1);
        z(k, i) = g.cs * za + g.sn * zb;
        z(k, i + 1) = -g.sn * za + g.cs * zb;
    }
}

/// Standardizes the 2x2 diagonal block at (i, i+1). Returns true if the block
/// carries a complex pair (and stays 2x2), false if it was split.
inline bool standardize_block(DenseMatrix& h, DenseMatrix& z, std::size_t i) {
    constexpr double eps = std::numeric_limits<double>::epsilon();
    double a = h(i, i), b = h(i, i + 1), c = h(i + 1, i), d = h(i + 1, i + 1);
    if (c == 0.0) return false;
    if (b == 0.0) {
        rotate(h, z, i, {0.0, 1.0});
        h(i + 1, i) = 0.0;
        return false;
    }
    if (a - d == 0.0 && sign_of(b) != sign_of(c)) return true;

    const double temp = a - d;
    double p = 0.5 * temp;
    const double bcmax = std::max(std::abs(b), std::abs(c));
    const double bcmis = std::min(std::abs(b), std::abs(c)) * sign_of(b) * sign_of(c);
    const double scale = std::max(std::abs(p), bcmax);
    double zz = (p / scale) * p + (bcmax / scale) * bcmis;
    if (zz >= 4.0 * eps) {
        zz = p + sign_of(p) * std::sqrt(scale) * std::sqrt(zz);
        const double tau = std::hypot(c, zz);
        rotate(h, z, i, {zz / tau, c / tau});
        h(i + 1, i) = 0.0;
        return false;
    }
    const double sigma = b + c;
    const double tau = std::hypot(sigma, temp);
    const double cs = std::sqrt(0.5 * (1.0 + std::abs(sigma) / tau));
    const double sn = -(p / (tau * cs)) * sign_of(sigma);
    rotate(h, z, i, {cs, sn});
    const double mean = 0.5 * (h(i, i) + h(i + 1, i + 1));
    h(i, i) = mean;
    h(i + 1, i + 1) = mean;
    b = h(i, i + 1);
    c = h(i + 1, i);
    if (c == 0.0) return false;
    if (b == 0.0) {
        rotate(h, z, i, {0.0, 1.0});
        h(i + 1, i) = 0.0;
        return false;
    }
    if (sign_of(b) == sign_of(c)) {
        // Equal-diagonal form with real eigenvalues: one more rotation splits it.
        const double sab = std::sqrt(std::abs(b));
        const double sac = std::sqrt(std::abs(c));
        const double t = 1.0 / std::sqrt(std::abs(b + c));
        rotate(h, z, i, {sab * t, sac * t});
        h(i + 1, i) = 0.0;
        return false;
    }
    return true;
}

}  // namespace detail

/// Real Schur decomposition by Householder Hessenberg reduction followed by
/// Francis double-shift QR with deflation. Complex-pair blocks are rotated to
/// equal diagonals.
inline SchurForm real_schur(const DenseMatrix& a) {
    if (!a.square()) throw DimensionError("real_schur: matrix must be square");
    if (a.rows() > 16) throw DimensionError("real_schur: supports s <= 16");
    if (!a.all_finite()) throw DomainError("real_schur: non-finite entries");
    const std::size_t n = a.rows();
    DenseMatrix h = a;
    DenseMatrix z = DenseMatrix::identity(n);

    // Hessenberg reduction.
    for (std::size_t k = 0; k + 2 < n; ++k) {
        const std::size_t len = n - k - 1;
        std::vector<double> v(len);
        double norm = 0.0;
        for (std::size_t i = 0; i < len; ++i) {
            v[i] = h(k + 1 + i, k);
            norm += v[i] * v[i];
        }
        norm = std::sqrt(norm);
        if (norm == 0.0) continue;
        const double alpha = v[0] > 0.0 ? -norm : norm;
        v[0] -= alpha;
        double vn = 0.0;
        for (double e : v) vn += e * e;
        if (vn == 0.0) continue;
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < len; ++i) s += v[i] * h(k + 1 + i, j);
            s *= 2.0 / vn;
            for (std::size_t i = 0; i < len; ++i) h(k + 1 + i, j) -= s * v[i];
        }
        for (std::size_t r = 0; r < n; ++r) {
            double s = 0.0, sz = 0.0;
            for (std::size_t i = 0; i < len; ++i) {
                s += h(r, k + 1 + i) * v[i];
                sz += z(r, k + 1 + i) * v[i];
            }
            s *= 2.0 / vn;
            sz *= 2.0 / vn;
            for (std::size_t i = 0; i < len; ++i) {
                h(r, k + 1 + i) -= s * v[i];
                z(r, k + 1 + i) -= sz * v[i];
            }
        }
        for (std::size_t i = k + 2; i < n; ++i) h(i, k) = 0.0;
    }

    const double hnorm = std::max(h.max_abs(), std::numeric_limits<double>::min());
    const std::size_t max_sweeps = 30 * n;
    std::size_t sweeps = 0;
    int its = 0;
    std::ptrdiff_t hi = static_cast<std::ptrdiff_t>(n) - 1;
    while (hi >= 1) {
        std::ptrdiff_t l = hi;
        for (; l > 0; --l) {
            double s = std::abs(h(l - 1, l - 1)) + std::abs(h(l, l));
            if (s == 0.0) s = hnorm;
            if (std::abs(h(l, l - 1)) <= 1e-14 * s) {
                h(l, l - 1) = 0.0;
                break;
            }
        }
        if (l == hi) {
            hi -= 1;
            its = 0;
            continue;
        }
        if (l == hi - 1) {
            hi -= 2;
            its = 0;
            continue;
        }
        if (++sweeps > max_sweeps) {
            throw DecompositionError("real_schur: QR iteration did not converge after " + std::to_string(max_sweeps) +
                                     " sweeps");
        }
        ++its;
        double x = h(hi, hi), y = h(hi - 1, hi - 1), w = h(hi, hi - 1) * h(hi - 1, hi);
        if (its % 10 == 0) {
            const double s = std::abs(h(hi, hi - 1)) + std::abs(h(hi - 1, hi - 2));
            x = y = 0.75 * s;
            w = -0.4375 * s * s;
        }
        const double tr = x + y;
        const double det = x * y - w;
        const std::ptrdiff_t m = l;
        double p = h(m, m) * h(m, m) + h(m, m + 1) * h(m + 1, m) - tr * h(m, m) + det;
        double q = h(m + 1, m) * (h(m, m) + h(m + 1, m + 1) - tr);
        double r = h(m + 1, m) * h(m + 2, m + 1);
        for (std::ptrdiff_t k = m; k <= hi - 1; ++k) {
            const int nr = (k < hi - 1) ? 3 : 2;
            if (k > m) {
                p = h(k, k - 1);
                q = h(k + 1, k - 1);
                r = (nr == 3) ? h(k + 2, k - 1) : 0.0;
            }
            double alpha = std::sqrt(p * p + q * q + r * r);
            if (alpha == 0.0) continue;
            if (p > 0.0) alpha = -alpha;
            const double v[3] = {p - alpha, q, r};
            const double vn = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
            const double f = 2.0 / vn;
            const std::size_t c0 = static_cast<std::size_t>(std::max<std::ptrdiff_t>(k - 1, 0));
            for (std::size_t j = c0; j < n; ++j) {
                double s = 0.0;
                for (int i = 0; i < nr; ++i) s += v[i] * h(k + i, j);
                s *= f;
                for (int i = 0; i < nr; ++i) h(k + i, j) -= s * v[i];
            }
            const std::size_t rmax = static_cast<std::size_t>(std::min<std::ptrdiff_t>(k + 3, hi));
            for (std::size_t rr = 0; rr <= rmax; ++rr) {
                double s = 0.0;
                for (int i = 0; i < nr; ++i) s += h(rr, k + i) * v[i];
                s *= f;
                for (int i = 0; i < nr; ++i) h(rr, k + i) -= s * v[i];
            }
            for (std::size_t rr = 0; rr < n; ++rr) {
                double s = 0.0;
                for (int i = 0; i < nr; ++i) s += z(rr, k + i) * v[i];
                s *= f;
                for (int i = 0; i < nr; ++i) z(rr, k + i) -= s * v[i];
            }
            if (k > m) {
                h(k + 1, k - 1) = 0.0;
                if (nr == 3) h(k + 2, k - 1) = 0.0;
            }
        }
    }

    SchurForm out;
    std::size_t i = 0;
    while (i < n) {
        if (i + 1 < n && h(i + 1, i) != 0.0 && detail::standardize_block(h, z, i)) {
            out.blocks.push_back({i, 2, 0.0, 0.0, 0.0});
            i += 2;
        } else {
            out.blocks.push_back({i, 1, 0.0, 0.0, 0.0});
            i += 1;
        }
    }
    for (std::size_t row = 0; row < n; ++row)
        for (std::size_t col = 0; col < row; ++col) {
            bool in_block = false;
            for (const auto& b : out.blocks)
                if (b.size == 2 && row == b.offset + 1 && col == b.offset) in_block = true;
            if (!in_block) h(row, col) = 0.0;
        }
    for (auto& b : out.blocks) {
        b.eta = h(b.offset, b.offset);
        if (b.size == 2) {
            b.phi = h(b.offset, b.offset + 1);
            b.beta = std::sqrt(-h(b.offset, b.offset + 1) * h(b.offset + 1, b.offset));
        }
    }
    out.q = std::move(z);
    out.r = std::move(h);
    return out;
}

/// Singular values by one-sided Jacobi (Hestenes) rotations, descending.
inline std::vector<double> singular_values(const DenseMatrix& a) {
    // Orthogonalize the rows of a (the columns of a^T); contiguous access.
    DenseMatrix u = a;
    const std::size_t m = u.rows();
    const std::size_t n = u.cols();
    constexpr double tol = 1e-15;
    for (int sweep = 0; sweep < 80; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < m; ++p) {
            for (std::size_t q = p + 1; q < m; ++q) {
                auto rp = u.row(p);
                auto rq = u.row(q);
                double alpha = 0.0, beta = 0.0, gamma = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    alpha += rp[k] * rp[k];
                    beta += rq[k] * rq[k];
                    gamma += rp[k] * rq[k];
                }
                if (gamma == 0.0 || std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = detail::sign_of(zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t k = 0; k < n; ++k) {
                    const double x = rp[k], y = rq[k];
                    rp[k] = c * x - s * y;
                    rq[k] = s * x + c * y;
                }
            }
        }
        if (!rotated) break;
    }
    std::vector<double> sv(m);
    for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        for (double v : u.row(i)) s += v * v;
        sv[i] = std::sqrt(s);
    }
    std::sort(sv.begin(), sv.end(), std::greater<>());
    return sv;
}

/// 2-norm condition number sigma_max / sigma_min.
inline double cond2(const DenseMatrix& a) {
    if (!a.square()) throw DimensionError("cond2: matrix must be square");
    const auto sv = singular_values(a);
    if (sv.empty()) return 1.0;
    if (!(sv.back() >= 1e-300)) throw SingularMatrixError("cond2: smallest singular value below 1e-300");
    return sv.front() / sv.back();
}

}  // namespace irk
