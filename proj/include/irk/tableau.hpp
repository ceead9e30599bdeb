#pragma once

#include "irk/dense.hpp"
#include "irk/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace irk {

enum class Family { Gauss, RadauIIA, LobattoIIIC, SDIRK1, SDIRK2, SDIRK3, SDIRK4 };

inline std::string_view family_name(Family f) {
    switch (f) {
        case Family::Gauss: return "gauss";
        case Family::RadauIIA: return "radau";
        case Family::LobattoIIIC: return "lobatto";
        case Family::SDIRK1: return "sdirk1";
        case Family::SDIRK2: return "sdirk2";
        case Family::SDIRK3: return "sdirk3";
        case Family::SDIRK4: return "sdirk4";
    }
    return "unknown";
}

inline Family parse_family(std::string_view name) {
    for (Family f : {Family::Gauss, Family::RadauIIA, Family::LobattoIIIC, Family::SDIRK1, Family::SDIRK2,
                     Family::SDIRK3, Family::SDIRK4}) {
        if (family_name(f) == name) return f;
    }
    if (name == "radauiia" || name == "radau-iia") return Family::RadauIIA;
    if (name == "lobattoiiic" || name == "lobatto-iiic") return Family::LobattoIIIC;
    throw ConfigError("unknown scheme family '" + std::string(name) + "'");
}

inline bool is_dirk(Family f) {
    return f == Family::SDIRK1 || f == Family::SDIRK2 || f == Family::SDIRK3 || f == Family::SDIRK4;
}

struct ButcherTableau {
    Family family = Family::Gauss;
    std::size_t s = 0;
    DenseMatrix a0;
    std::vector<double> b0;
    std::vector<double> c0;
    int order = 0;

    /// e.g. "gauss(2)"
    std::string label() const { return std::string(family_name(family)) + "(" + std::to_string(s) + ")"; }

    /// Last abscissa is 1 and the last row of a0 equals b0.
    bool stiffly_accurate() const {
        if (s == 0 || std::abs(c0.back() - 1.0) > 1e-12) return false;
        for (std::size_t j = 0; j < s; ++j)
            if (std::abs(a0(s - 1, j) - b0[j]) > 1e-12) return false;
        return true;
    }

    bool lower_triangular() const {
        for (std::size_t i = 0; i < s; ++i)
            for (std::size_t j = i + 1; j < s; ++j)
                if (a0(i, j) != 0.0) return false;
        return true;
    }
};

namespace detail {

/// Legendre values P_0..P_n and derivatives at x.
inline std::pair<std::vector<double>, std::vector<double>> legendre(std::size_t n, double x) {
    std::vector<double> p(n + 1), dp(n + 1);
    p[0] = 1.0;
    dp[0] = 0.0;
    if (n >= 1) {
        p[1] = x;
        dp[1] = 1.0;
    }
    for (std::size_t k = 1; k < n; ++k) {
        const double kk = static_cast<double>(k);
        p[k + 1] = ((2.0 * kk + 1.0) * x * p[k] - kk * p[k - 1]) / (kk + 1.0);
        dp[k + 1] = dp[k - 1] + (2.0 * kk + 1.0) * p[k];
    }
    return {p, dp};
}

/// Simple roots of f on the open interval (-1, 1). Candidates come from a
/// Chebyshev-distributed scan; each bracketed root is refined by Newton steps
/// safeguarded with bisection to 1e-14.
inline std::vector<double> interior_roots(const std::function<std::pair<double, double>(double)>& f,
                                          std::size_t expected) {
    const std::size_t scan = 400 * (expected + 1);
    std::vector<double> grid(scan + 1);
    for (std::size_t i = 0; i <= scan; ++i) {
        grid[i] = -std::cos(std::numbers::pi * static_cast<double>(i) / static_cast<double>(scan));
    }
    std::vector<double> roots;
    for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
        double lo = grid[i], hi = grid[i + 1];
        if (i + 2 == grid.size()) hi = std::nextafter(1.0, 0.0);
        double flo = f(lo).first, fhi = f(hi).first;
        if (flo == 0.0) {
            roots.push_back(lo);
            continue;
        }
        if ((flo > 0.0) == (fhi > 0.0)) continue;
        double x = 0.5 * (lo + hi);
        for (int it = 0; it < 100; ++it) {
            auto [fx, dfx] = f(x);
            if (fx == 0.0) break;
            if ((fx > 0.0) == (flo > 0.0)) {
                lo = x;
                flo = fx;
            } else {
                hi = x;
            }
            double next = (dfx != 0.0) ? x - fx / dfx : 0.5 * (lo + hi);
            if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
            const double step = std::abs(next - x);
            x = next;
            if (step <= 1e-14 * std::max(1.0, std::abs(x)) || hi - lo <= 1e-15) break;
        }
        roots.push_back(x);
    }
    std::sort(roots.begin(), roots.end());
    roots.erase(std::unique(roots.begin(), roots.end(), [](double a, double b) { return std::abs(a - b) < 1e-12; }),
                roots.end());
    if (roots.size() != expected) {
        throw ConfigError("node computation found " + std::to_string(roots.size()) + " roots, expected " +
                          std::to_string(expected));
    }
    return roots;
}

/// Quadrature weights integrating polynomials of degree < s exactly on [0,1].
inline std::vector<double> quadrature_weights(const std::vector<double>& c) {
    const std::size_t s = c.size();
    DenseMatrix v(s, s);
    std::vector<double> rhs(s);
    for (std::size_t q = 0; q < s; ++q) {
        for (std::size_t j = 0; j < s; ++j) v(q, j) = std::pow(c[j], static_cast<double>(q));
        rhs[q] = 1.0 / static_cast<double>(q + 1);
    }
    return lu_solve(v, rhs);
}

/// Collocation coefficients: sum_j a_ij c_j^(q-1) = c_i^q / q, q = 1..s.
inline DenseMatrix collocation_matrix(const std::vector<double>& c) {
    const std::size_t s = c.size();
    DenseMatrix v(s, s);
    for (std::size_t q = 0; q < s; ++q)
        for (std::size_t j = 0; j < s; ++j) v(q, j) = std::pow(c[j], static_cast<double>(q));
    DenseLu lu(v);
    DenseMatrix a(s, s);
    std::vector<double> rhs(s);
    for (std::size_t i = 0; i < s; ++i) {
        for (std::size_t q = 0; q < s; ++q)
            rhs[q] = std::pow(c[i], static_cast<double>(q + 1)) / static_cast<double>(q + 1);
        auto row = lu.solve(rhs);
        for (std::size_t j = 0; j < s; ++j) a(i, j) = row[j];
    }
    return a;
}

/// Lobatto IIIC: a_i1 = b_1 and sum_j a_ij c_j^(q-1) = c_i^q / q for q < s.
inline DenseMatrix lobatto_iiic_matrix(const std::vector<double>& c, const std::vector<double>& b) {
    const std::size_t s = c.size();
    const std::size_t m = s - 1;
    DenseMatrix v(m, m);
    for (std::size_t q = 0; q < m; ++q)
        for (std::size_t j = 0; j < m; ++j) v(q, j) = std::pow(c[j + 1], static_cast<double>(q));
    DenseLu lu(v);
    DenseMatrix a(s, s);
    std::vector<double> rhs(m);
    for (std::size_t i = 0; i < s; ++i) {
        a(i, 0) = b[0];
        for (std::size_t q = 0; q < m; ++q) {
            rhs[q] = std::pow(c[i], static_cast<double>(q + 1)) / static_cast<double>(q + 1);
            if (q == 0) rhs[q] -= b[0];  // c_1 = 0 contributes only to q = 1
        }
        auto row = lu.solve(rhs);
        for (std::size_t j = 0; j < m; ++j) a(i, j + 1) = row[j];
    }
    return a;
}

inline ButcherTableau dirk(Family f, std::size_t s, int order, DenseMatrix a) {
    ButcherTableau t;
    t.family = f;
    t.s = s;
    t.order = order;
    t.c0.resize(s);
    t.b0.resize(s);
    for (std::size_t i = 0; i < s; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < s; ++j) sum += a(i, j);
        t.c0[i] = sum;
        t.b0[i] = a(s - 1, i);
    }
    t.a0 = std::move(a);
    return t;
}

}  // namespace detail

/// Builds the Butcher tableau of an s-stage scheme. Collocation nodes are
/// Legendre / Radau / Lobatto roots; SDIRK schemes have a fixed stage count
/// (pass s = 0 for the default).
inline ButcherTableau make_tableau(Family family, std::size_t s) {
    using detail::legendre;
    switch (family) {
        case Family::Gauss:
        case Family::RadauIIA:
        case Family::LobattoIIIC: {
            const std::size_t min_s = family == Family::LobattoIIIC ? 2 : 1;
            if (s < min_s || s > 8) {
                throw ConfigError(std::string(family_name(family)) + " supports " + std::to_string(min_s) +
                                  ".." + "8 stages, got " + std::to_string(s));
            }
            std::vector<double> x;
            if (family == Family::Gauss) {
                x = detail::interior_roots(
                    [s](double v) {
                        auto [p, dp] = legendre(s, v);
                        return std::pair{p[s], dp[s]};
                    },
                    s);
            } else if (family == Family::RadauIIA) {
                if (s > 1) {
                    x = detail::interior_roots(
                        [s](double v) {
                            auto [p, dp] = legendre(s, v);
                            return std::pair{p[s] - p[s - 1], dp[s] - dp[s - 1]};
                        },
                        s - 1);
                }
                x.push_back(1.0);
            } else {
                if (s > 2) {
                    x = detail::interior_roots(
                        [s](double v) {
                            auto [p, dp] = legendre(s, v);
                            return std::pair{p[s] - p[s - 2], dp[s] - dp[s - 2]};
                        },
                        s - 2);
                }
                x.insert(x.begin(), -1.0);
                x.push_back(1.0);
            }
            ButcherTableau t;
            t.family = family;
            t.s = s;
            t.c0.resize(s);
            for (std::size_t i = 0; i < s; ++i) t.c0[i] = 0.5 * (x[i] + 1.0);
            if (family == Family::LobattoIIIC) t.c0.front() = 0.0;
            if (family != Family::Gauss) t.c0.back() = 1.0;
            t.b0 = detail::quadrature_weights(t.c0);
            if (family == Family::LobattoIIIC) {
                t.a0 = detail::lobatto_iiic_matrix(t.c0, t.b0);
                t.order = static_cast<int>(2 * s) - 2;
            } else {
                t.a0 = detail::collocation_matrix(t.c0);
                t.order = family == Family::Gauss ? static_cast<int>(2 * s) : static_cast<int>(2 * s) - 1;
            }
            if (family == Family::RadauIIA) {
                for (std::size_t j = 0; j < s; ++j) t.a0(s - 1, j) = t.b0[j];
            }
            return t;
        }
        case Family::SDIRK1: {
            if (s != 0 && s != 1) throw ConfigError("sdirk1 has exactly 1 stage");
            return detail::dirk(family, 1, 1, DenseMatrix{{1.0}});
        }
        case Family::SDIRK2: {
            if (s != 0 && s != 2) throw ConfigError("sdirk2 has exactly 2 stages");
            const double g = 1.0 - 1.0 / std::numbers::sqrt2;
            return detail::dirk(family, 2, 2, DenseMatrix{{g, 0.0}, {1.0 - g, g}});
        }
        case Family::SDIRK3: {
            if (s != 0 && s != 3) throw ConfigError("sdirk3 has exactly 3 stages");
            // Alexander's L-stable scheme; g is the middle root of 6g^3 - 18g^2 + 9g - 1.
            const double g = 0.43586652150845899941601945;
            const double b1 = -(6.0 * g * g - 16.0 * g + 1.0) / 4.0;
            const double b2 = (6.0 * g * g - 20.0 * g + 5.0) / 4.0;
            return detail::dirk(family, 3, 3,
                                DenseMatrix{{g, 0.0, 0.0}, {(1.0 - g) / 2.0, g, 0.0}, {b1, b2, g}});
        }
        case Family::SDIRK4: {
            if (s != 0 && s != 5) throw ConfigError("sdirk4 has exactly 5 stages");
            return detail::dirk(family, 5, 4,
                                DenseMatrix{{0.25, 0.0, 0.0, 0.0, 0.0},
                                            {0.5, 0.25, 0.0, 0.0, 0.0},
                                            {17.0 / 50.0, -1.0 / 25.0, 0.25, 0.0, 0.0},
                                            {371.0 / 1360.0, -137.0 / 2720.0, 15.0 / 544.0, 0.25, 0.0},
                                            {25.0 / 24.0, -49.0 / 48.0, 125.0 / 16.0, -85.0 / 12.0, 0.25}});
        }
    }
    throw ConfigError("unsupported scheme family");
}

/// Everything the stage solvers need from a tableau: A0^{-1}, its real Schur
/// form, and the d-vectors weighting per-stage operators in the Q0-conjugated
/// Jacobian.
struct StagePrep {
    ButcherTableau tableau;
    DenseMatrix a0inv;
    SchurForm schur;
    /// d[k * s + l][i] = Q0(i, k) * Q0(i, l)
    std::vector<std::vector<double>> d;

    std::size_t stages() const noexcept { return tableau.s; }

    const std::vector<double>& dvec(std::size_t k, std::size_t l) const { return d[k * tableau.s + l]; }

    /// Index of the eigen-block containing Schur row k.
    std::size_t block_of(std::size_t k) const {
        for (std::size_t b = 0; b < schur.blocks.size(); ++b) {
            const auto& blk = schur.blocks[b];
            if (k >= blk.offset && k < blk.offset + blk.size) return b;
        }
        throw DimensionError("block_of: row out of range");
    }
};

inline StagePrep prepare_stages(const ButcherTableau& t) {
    StagePrep prep;
    prep.tableau = t;
    const std::size_t s = t.s;
    try {
        prep.a0inv = inverse(t.a0);
    } catch (const SingularMatrixError& e) {
        throw ConfigError(std::string("prepare_stages: singular coefficient matrix: ") + e.what());
    }
    if (t.lower_triangular()) {
        // Reversing the stage order makes the lower-triangular inverse upper
        // triangular: an exact real Schur form with 1x1 blocks.
        DenseMatrix j(s, s);
        for (std::size_t i = 0; i < s; ++i) j(i, s - 1 - i) = 1.0;
        prep.schur.q = j;
        prep.schur.r = j * prep.a0inv * j;
        for (std::size_t i = 0; i < s; ++i) prep.schur.blocks.push_back({i, 1, prep.schur.r(i, i), 0.0, 0.0});
    } else {
        prep.schur = real_schur(prep.a0inv);
    }
    for (const auto& b : prep.schur.blocks) {
        if (!(b.eta > 0.0)) {
            throw EigenvalueAssumptionError("prepare_stages: eigenvalue real part " + std::to_string(b.eta) +
                                            " is not positive for " + t.label());
        }
    }
    prep.d.assign(s * s, std::vector<double>(s, 0.0));
    const auto& q = prep.schur.q;
    for (std::size_t k = 0; k < s; ++k)
        for (std::size_t l = 0; l < s; ++l)
            for (std::size_t i = 0; i < s; ++i) prep.d[k * s + l][i] = q(i, k) * q(i, l);
    return prep;
}

/// Optimal Schur-complement shift eta + beta^2 / eta.
inline double gamma_star(double eta, double beta) {
    if (!(eta > 0.0)) throw DomainError("gamma_star: eta must be positive");
    return eta + beta * beta / eta;
}

enum class BoundRegime { General, Distinct };

/// Upper bound on the condition number of the gamma*-preconditioned Schur
/// complement: 1 + beta^2/(2 eta^2) when both stage operators coincide,
/// 2 + beta^2/eta^2 when they differ.
inline double kappa_bound(double eta, double beta, BoundRegime regime = BoundRegime::General) {
    if (!(eta > 0.0)) throw DomainError("kappa_bound: eta must be positive");
    const double r = beta * beta / (eta * eta);
    return regime == BoundRegime::General ? 1.0 + 0.5 * r : 2.0 + r;
}

}  // namespace irk
