#pragma once

#include "irk/dense.hpp"
#include "irk/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace irk {

struct Triplet {
    std::size_t row;
    std::size_t col;
    double value;
};

/// Compressed sparse row matrix with sorted, unique column indices per row.
class SparseMatrix {
public:
    SparseMatrix() = default;

    SparseMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), row_ptr_(rows + 1, 0) {}

    /// Duplicate entries are summed; explicit zeros are kept so that the
    /// structural pattern survives.
    static SparseMatrix from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> t,
                                      std::optional<std::size_t> bandwidth = std::nullopt) {
        for (const auto& e : t) {
            if (e.row >= rows || e.col >= cols) throw DimensionError("from_triplets: index out of range");
            if (!std::isfinite(e.value)) throw DomainError("from_triplets: non-finite value");
        }
        std::sort(t.begin(), t.end(), [](const Triplet& a, const Triplet& b) {
            return a.row != b.row ? a.row < b.row : a.col < b.col;
        });
        SparseMatrix m(rows, cols);
        m.bandwidth_ = bandwidth;
        for (std::size_t k = 0; k < t.size(); ++k) {
            if (!m.col_.empty() && k > 0 && t[k].row == t[k - 1].row && t[k].col == t[k - 1].col) {
                m.val_.back() += t[k].value;
                continue;
            }
            m.col_.push_back(t[k].col);
            m.val_.push_back(t[k].value);
            m.row_ptr_[t[k].row + 1]++;
        }
        for (std::size_t i = 0; i < rows; ++i) m.row_ptr_[i + 1] += m.row_ptr_[i];
        return m;
    }

    static SparseMatrix identity(std::size_t n, double scale = 1.0) {
        std::vector<Triplet> t;
        t.reserve(n);
        for (std::size_t i = 0; i < n; ++i) t.push_back({i, i, scale});
        return from_triplets(n, n, std::move(t), 0);
    }

    static SparseMatrix zero(std::size_t rows, std::size_t cols) {
        SparseMatrix m(rows, cols);
        m.bandwidth_ = 0;
        return m;
    }

    static SparseMatrix from_dense(const DenseMatrix& d) {
        std::vector<Triplet> t;
        for (std::size_t i = 0; i < d.rows(); ++i)
            for (std::size_t j = 0; j < d.cols(); ++j)
                if (d(i, j) != 0.0) t.push_back({i, j, d(i, j)});
        return from_triplets(d.rows(), d.cols(), std::move(t));
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t nnz() const noexcept { return val_.size(); }
    bool square() const noexcept { return rows_ == cols_; }

    const std::vector<std::size_t>& row_ptr() const noexcept { return row_ptr_; }
    const std::vector<std::size_t>& col_idx() const noexcept { return col_; }
    const std::vector<double>& values() const noexcept { return val_; }

    std::optional<std::size_t> bandwidth_hint() const noexcept { return bandwidth_; }
    void set_bandwidth_hint(std::optional<std::size_t> b) noexcept { bandwidth_ = b; }

    /// Largest |i - j| over stored entries.
    std::size_t bandwidth() const {
        std::size_t b = 0;
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
                b = std::max(b, i > col_[k] ? i - col_[k] : col_[k] - i);
        return b;
    }

    double at(std::size_t i, std::size_t j) const {
        auto first = col_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i]);
        auto last = col_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i + 1]);
        auto it = std::lower_bound(first, last, j);
        return (it != last && *it == j) ? val_[static_cast<std::size_t>(it - col_.begin())] : 0.0;
    }

    /// y = alpha * A x + beta * y
    void apply(std::span<const double> x, std::span<double> y, double alpha = 1.0, double beta = 0.0) const {
        if (x.size() != cols_ || y.size() != rows_) throw DimensionError("SparseMatrix::apply: size mismatch");
        for (std::size_t i = 0; i < rows_; ++i) {
            double s = 0.0;
            for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) s += val_[k] * x[col_[k]];
            y[i] = alpha * s + (beta == 0.0 ? 0.0 : beta * y[i]);
        }
    }

    std::vector<double> apply(std::span<const double> x) const {
        std::vector<double> y(rows_);
        apply(x, y);
        return y;
    }

    SparseMatrix transpose() const {
        std::vector<Triplet> t;
        t.reserve(nnz());
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) t.push_back({col_[k], i, val_[k]});
        return from_triplets(cols_, rows_, std::move(t), bandwidth_);
    }

    DenseMatrix to_dense() const {
        DenseMatrix d(rows_, cols_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) d(i, col_[k]) += val_[k];
        return d;
    }

    std::vector<Triplet> triplets() const {
        std::vector<Triplet> t;
        t.reserve(nnz());
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) t.push_back({i, col_[k], val_[k]});
        return t;
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : val_) m = std::max(m, std::abs(v));
        return m;
    }

    double norm_inf() const {
        double m = 0.0;
        for (std::size_t i = 0; i < rows_; ++i) {
            double s = 0.0;
            for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) s += std::abs(val_[k]);
            m = std::max(m, s);
        }
        return m;
    }

    SparseMatrix scaled(double s) const {
        SparseMatrix m = *this;
        for (double& v : m.val_) v *= s;
        return m;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<std::size_t> row_ptr_{0};
    std::vector<std::size_t> col_;
    std::vector<double> val_;
    std::optional<std::size_t> bandwidth_;
};

/// sum_k coeff_k * A_k; terms with a zero coefficient are skipped. The
/// bandwidth hint is the largest hint among contributing terms.
inline SparseMatrix combine(std::span<const std::pair<double, const SparseMatrix*>> terms, std::size_t rows,
                            std::size_t cols) {
    std::vector<Triplet> t;
    std::optional<std::size_t> hint;
    bool all_hinted = true;
    for (const auto& [c, m] : terms) {
        if (c == 0.0 || m == nullptr) continue;
        if (m->rows() != rows || m->cols() != cols) throw DimensionError("combine: size mismatch");
        for (auto e : m->triplets()) t.push_back({e.row, e.col, c * e.value});
        if (m->bandwidth_hint()) {
            hint = std::max(hint.value_or(0), *m->bandwidth_hint());
        } else {
            all_hinted = false;
        }
    }
    return SparseMatrix::from_triplets(rows, cols, std::move(t), all_hinted ? hint : std::nullopt);
}

inline SparseMatrix combine(std::initializer_list<std::pair<double, const SparseMatrix*>> terms) {
    std::vector<std::pair<double, const SparseMatrix*>> v(terms);
    for (const auto& [c, m] : v)
        if (m != nullptr) return combine(std::span<const std::pair<double, const SparseMatrix*>>(v), m->rows(), m->cols());
    throw DimensionError("combine: no operands");
}

/// Banded LU with partial pivoting (lower bandwidth kl, upper kl + ku after
/// fill). Entries farther than the band from the diagonal, such as periodic
/// wrap-around couplings, are folded in through a Sherman-Morrison-Woodbury
/// bordered correction of rank equal to the number of affected columns.
class BandedLu {
public:
    explicit BandedLu(const SparseMatrix& a) : BandedLu(a, a.bandwidth_hint().value_or(a.bandwidth())) {}

    BandedLu(const SparseMatrix& a, std::size_t bandwidth) : n_(a.rows()), kl_(bandwidth), ku_(bandwidth) {
        if (!a.square()) throw DimensionError("BandedLu: matrix must be square");
        kl_ = ku_ = std::min(bandwidth, n_ ? n_ - 1 : 0);
        width_ = 2 * kl_ + ku_ + 1;
        band_.assign(n_ * width_, 0.0);
        piv_.resize(n_);
        const double scale = a.norm_inf();
        // Outlier entries grouped by column form U; V selects those columns.
        std::vector<std::pair<std::size_t, std::vector<std::pair<std::size_t, double>>>> outliers;
        for (const auto& e : a.triplets()) {
            const std::size_t dist = e.row > e.col ? e.row - e.col : e.col - e.row;
            if (dist <= kl_) {
                at(e.row, e.col) += e.value;
            } else if (e.value != 0.0) {
                auto it = std::find_if(outliers.begin(), outliers.end(),
                                       [&](const auto& o) { return o.first == e.col; });
                if (it == outliers.end()) {
                    outliers.push_back({e.col, {}});
                    it = std::prev(outliers.end());
                }
                it->second.push_back({e.row, e.value});
            }
        }
        factor(scale);
        if (!outliers.empty()) {
            const std::size_t m = outliers.size();
            cols_.resize(m);
            y_.assign(m, std::vector<double>(n_, 0.0));
            for (std::size_t c = 0; c < m; ++c) {
                cols_[c] = outliers[c].first;
                std::vector<double> u(n_, 0.0);
                for (auto [r, v] : outliers[c].second) u[r] += v;
                y_[c] = band_solve(u);
            }
            DenseMatrix cap(m, m);
            for (std::size_t r = 0; r < m; ++r)
                for (std::size_t c = 0; c < m; ++c) cap(r, c) = (r == c ? 1.0 : 0.0) + y_[c][cols_[r]];
            try {
                capacitance_.emplace(cap);
            } catch (const SingularMatrixError&) {
                throw SingularMatrixError("BandedLu: singular bordered correction");
            }
        }
    }

    std::size_t size() const noexcept { return n_; }

    std::vector<double> solve(std::span<const double> rhs) const {
        if (rhs.size() != n_) throw DimensionError("BandedLu::solve: size mismatch");
        auto x = band_solve(rhs);
        if (capacitance_) {
            std::vector<double> vx(cols_.size());
            for (std::size_t c = 0; c < cols_.size(); ++c) vx[c] = x[cols_[c]];
            auto t = capacitance_->solve(vx);
            for (std::size_t c = 0; c < cols_.size(); ++c)
                for (std::size_t i = 0; i < n_; ++i) x[i] -= y_[c][i] * t[c];
        }
        return x;
    }

    void solve(std::span<const double> rhs, std::span<double> out) const {
        auto x = solve(rhs);
        std::copy(x.begin(), x.end(), out.begin());
    }

    /// Rank of the bordered correction (0 for a purely banded matrix).
    std::size_t correction_rank() const noexcept { return cols_.size(); }

private:
    double& at(std::size_t i, std::size_t j) { return band_[i * width_ + (j + kl_ - i)]; }
    double at(std::size_t i, std::size_t j) const { return band_[i * width_ + (j + kl_ - i)]; }

    void factor(double scale) {
        const double tiny = 1e-14 * scale;
        for (std::size_t k = 0; k < n_; ++k) {
            const std::size_t last_row = std::min(n_ - 1, k + kl_);
            const std::size_t last_col = std::min(n_ - 1, k + kl_ + ku_);
            std::size_t p = k;
            double best = std::abs(at(k, k));
            for (std::size_t i = k + 1; i <= last_row; ++i) {
                if (std::abs(at(i, k)) > best) {
                    best = std::abs(at(i, k));
                    p = i;
                }
            }
            if (best == 0.0 || best < tiny) {
                throw SingularMatrixError("BandedLu: zero pivot at row " + std::to_string(k));
            }
            piv_[k] = p;
            if (p != k) {
                for (std::size_t j = k; j <= last_col; ++j) std::swap(at(k, j), at(p, j));
            }
            const double inv = 1.0 / at(k, k);
            for (std::size_t i = k + 1; i <= last_row; ++i) {
                const double l = at(i, k) * inv;
                at(i, k) = l;
                if (l == 0.0) continue;
                for (std::size_t j = k + 1; j <= last_col; ++j) at(i, j) -= l * at(k, j);
            }
        }
    }

    std::vector<double> band_solve(std::span<const double> rhs) const {
        std::vector<double> x(rhs.begin(), rhs.end());
        for (std::size_t k = 0; k < n_; ++k) {
            if (piv_[k] != k) std::swap(x[k], x[piv_[k]]);
            const std::size_t last_row = std::min(n_ - 1, k + kl_);
            for (std::size_t i = k + 1; i <= last_row; ++i) x[i] -= at(i, k) * x[k];
        }
        for (std::size_t k = n_; k-- > 0;) {
            const std::size_t last_col = std::min(n_ - 1, k + kl_ + ku_);
            double s = x[k];
            for (std::size_t j = k + 1; j <= last_col; ++j) s -= at(k, j) * x[j];
            x[k] = s / at(k, k);
        }
        return x;
    }

    std::size_t n_ = 0;
    std::size_t kl_ = 0;
    std::size_t ku_ = 0;
    std::size_t width_ = 1;
    std::vector<double> band_;
    std::vector<std::size_t> piv_;
    std::vector<std::size_t> cols_;
    std::vector<std::vector<double>> y_;
    std::optional<DenseLu> capacitance_;
};

/// Fixed number of symmetric Gauss-Seidel sweeps from a zero initial guess.
/// A linear, inexact stand-in for one cycle of a multigrid-type inner solver.
class SgsSweeps {
public:
    SgsSweeps(SparseMatrix a, int sweeps) : a_(std::move(a)), sweeps_(std::max(sweeps, 1)), diag_(a_.rows()) {
        for (std::size_t i = 0; i < a_.rows(); ++i) {
            diag_[i] = a_.at(i, i);
            if (diag_[i] == 0.0) throw SingularMatrixError("SgsSweeps: zero diagonal at row " + std::to_string(i));
        }
    }

    std::vector<double> solve(std::span<const double> rhs) const {
        const std::size_t n = a_.rows();
        std::vector<double> x(n, 0.0);
        const auto& rp = a_.row_ptr();
        const auto& ci = a_.col_idx();
        const auto& v = a_.values();
        auto relax = [&](std::size_t i) {
            double s = rhs[i];
            for (std::size_t k = rp[i]; k < rp[i + 1]; ++k)
                if (ci[k] != i) s -= v[k] * x[ci[k]];
            x[i] = s / diag_[i];
        };
        for (int sweep = 0; sweep < sweeps_; ++sweep) {
            for (std::size_t i = 0; i < n; ++i) relax(i);
            for (std::size_t i = n; i-- > 0;) relax(i);
        }
        return x;
    }

private:
    SparseMatrix a_;
    int sweeps_;
    std::vector<double> diag_;
};

}  // namespace irk
