#pragma once

#include "irk/block2x2.hpp"
#include "irk/dae.hpp"
#include "irk/errors.hpp"
#include "irk/nonlinear.hpp"
#include "irk/sparse.hpp"

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace irk {

enum class ProblemKind { OdeLinear, OdeNonlinear, DaeIndex1 };
enum class FovClass { Snsd, Skew, General };

inline std::string fov_class_name(FovClass c) {
    switch (c) {
        case FovClass::Snsd: return "snsd";
        case FovClass::Skew: return "skew";
        case FovClass::General: return "general";
    }
    return "general";
}

struct ProblemSpec {
    std::string name = "heat1d";
    std::size_t n = 64;
    double nu = 0.02;
    double speed = 1.0;
    /// Dahlquist eigenvalue.
    double lambda_re = -1.0;
    double lambda_im = 0.0;
};

struct Problem {
    ProblemSpec spec;
    ProblemKind kind = ProblemKind::OdeLinear;
    FovClass fov = FovClass::General;
    double t0 = 0.0;
    std::optional<OdeSystem> ode;
    std::optional<DaeSystem> dae;
    Vector u0;
    Vector w0;
    /// Exact solution of the (semi-discrete) system, when known.
    std::function<Vector(double)> exact;
    std::function<Vector(double)> exact_w;
    /// Constant linear operator of linear problems (or the Jacobian at u0).
    std::optional<SparseMatrix> op;
    /// Grid spacing used by norms of grid functions (1 for non-PDE problems).
    double h = 1.0;
};

namespace detail {

inline SparseMatrix periodic_stencil(std::size_t n, double lower, double diag, double upper) {
    if (n < 3) throw ConfigError("periodic grids need at least 3 points");
    std::vector<Triplet> t;
    for (std::size_t j = 0; j < n; ++j) {
        t.push_back({j, (j + n - 1) % n, lower});
        t.push_back({j, j, diag});
        t.push_back({j, (j + 1) % n, upper});
    }
    return SparseMatrix::from_triplets(n, n, std::move(t), 1);
}

inline SparseMatrix dirichlet_stencil(std::size_t n, double lower, double diag, double upper) {
    std::vector<Triplet> t;
    for (std::size_t j = 0; j < n; ++j) {
        if (j > 0) t.push_back({j, j - 1, lower});
        t.push_back({j, j, diag});
        if (j + 1 < n) t.push_back({j, j + 1, upper});
    }
    return SparseMatrix::from_triplets(n, n, std::move(t), 1);
}

inline OdeSystem linear_system(SparseMatrix l) {
    OdeSystem sys;
    sys.dim = l.rows();
    auto shared = std::make_shared<const SparseMatrix>(std::move(l));
    sys.rhs = [shared](std::span<const double> u, double) { return shared->apply(u); };
    sys.linearize = [shared](std::span<const double>, double) { return *shared; };
    return sys;
}

inline void verify_fov(const SparseMatrix& l, FovClass c, const std::string& name) {
    const double bound = field_of_values_bound(l);
    const double tol = 1e-8 * std::max(1.0, l.norm_inf());
    if ((c == FovClass::Snsd && bound > tol) || (c == FovClass::Skew && std::abs(bound) > tol))
        throw ConfigError(name + ": operator does not match its field-of-values class " + fov_class_name(c));
}

}  // namespace detail

/// u' = lambda u; a complex lambda is realized as the 2x2 real system for
/// (Re u, Im u).
inline Problem make_dahlquist(const ProblemSpec& spec) {
    Problem p;
    p.spec = spec;
    p.kind = ProblemKind::OdeLinear;
    const double re = spec.lambda_re, im = spec.lambda_im;
    if (im == 0.0) {
        p.op = SparseMatrix::from_triplets(1, 1, {{0, 0, re}}, 0);
        p.u0 = {1.0};
        p.exact = [re](double t) { return Vector{std::exp(re * t)}; };
    } else {
        p.op = SparseMatrix::from_triplets(2, 2, {{0, 0, re}, {0, 1, -im}, {1, 0, im}, {1, 1, re}}, 1);
        p.u0 = {1.0, 0.0};
        p.exact = [re, im](double t) {
            const double a = std::exp(re * t);
            return Vector{a * std::cos(im * t), a * std::sin(im * t)};
        };
    }
    if (im == 0.0) {
        p.fov = re <= 0.0 ? FovClass::Snsd : FovClass::General;
    } else {
        p.fov = re == 0.0 ? FovClass::Skew : FovClass::General;
    }
    p.ode = detail::linear_system(*p.op);
    return p;
}

/// u_t = nu u_xx on (0, 1), homogeneous Dirichlet, N interior points,
/// h = 1/(N+1), u(0) = sin(pi x).
inline Problem make_heat1d(const ProblemSpec& spec) {
    if (spec.n < 1) throw ConfigError("heat1d: N must be positive");
    if (!(spec.nu > 0.0)) throw ConfigError("heat1d: diffusivity must be positive");
    Problem p;
    p.spec = spec;
    p.kind = ProblemKind::OdeLinear;
    p.fov = FovClass::Snsd;
    const std::size_t n = spec.n;
    const double h = 1.0 / static_cast<double>(n + 1);
    p.h = h;
    const double c = spec.nu / (h * h);
    p.op = detail::dirichlet_stencil(n, c, -2.0 * c, c);
    p.u0.resize(n);
    for (std::size_t j = 0; j < n; ++j) p.u0[j] = std::sin(std::numbers::pi * h * static_cast<double>(j + 1));
    const double s = std::sin(std::numbers::pi * h / 2.0);
    const double mu = -4.0 * c * s * s;
    const Vector shape = p.u0;
    p.exact = [shape, mu](double t) {
        Vector u = shape;
        for (double& v : u) v *= std::exp(mu * t);
        return u;
    };
    p.ode = detail::linear_system(*p.op);
    return p;
}

/// u_t = -a u_x on [0, 1) periodic, central differences, u(0) = sin(2 pi x).
inline Problem make_advection1d(const ProblemSpec& spec) {
    Problem p;
    p.spec = spec;
    p.kind = ProblemKind::OdeLinear;
    p.fov = FovClass::Skew;
    const std::size_t n = spec.n;
    const double h = 1.0 / static_cast<double>(n);
    p.h = h;
    const double a = spec.speed;
    p.op = detail::periodic_stencil(n, a / (2.0 * h), 0.0, -a / (2.0 * h));
    p.u0.resize(n);
    for (std::size_t j = 0; j < n; ++j) p.u0[j] = std::sin(2.0 * std::numbers::pi * h * static_cast<double>(j));
    const double omega = a * std::sin(2.0 * std::numbers::pi * h) / h;
    p.exact = [n, h, omega](double t) {
        Vector u(n);
        for (std::size_t j = 0; j < n; ++j) u[j] = std::sin(2.0 * std::numbers::pi * h * static_cast<double>(j) - omega * t);
        return u;
    };
    p.ode = detail::linear_system(*p.op);
    return p;
}

/// u_t = -a u_x + nu u_xx on [0, 1) periodic, u(0) = sin(2 pi x).
inline Problem make_advdiff1d(const ProblemSpec& spec) {
    if (!(spec.nu >= 0.0)) throw ConfigError("advdiff1d: diffusivity must be non-negative");
    Problem p;
    p.spec = spec;
    p.kind = ProblemKind::OdeLinear;
    p.fov = FovClass::General;
    const std::size_t n = spec.n;
    const double h = 1.0 / static_cast<double>(n);
    p.h = h;
    const double a = spec.speed, c = spec.nu / (h * h);
    p.op = detail::periodic_stencil(n, a / (2.0 * h) + c, -2.0 * c, -a / (2.0 * h) + c);
    p.u0.resize(n);
    for (std::size_t j = 0; j < n; ++j) p.u0[j] = std::sin(2.0 * std::numbers::pi * h * static_cast<double>(j));
    const double omega = a * std::sin(2.0 * std::numbers::pi * h) / h;
    const double s = std::sin(std::numbers::pi * h);
    const double decay = -4.0 * c * s * s;
    p.exact = [n, h, omega, decay](double t) {
        Vector u(n);
        for (std::size_t j = 0; j < n; ++j)
            u[j] = std::exp(decay * t) * std::sin(2.0 * std::numbers::pi * h * static_cast<double>(j) - omega * t);
        return u;
    };
    p.ode = detail::linear_system(*p.op);
    return p;
}

/// u_t + (u^2/2)_x = nu u_xx on [0, 2 pi) periodic with conservative central
/// differences; u(0) = 1 + sin(x)/2. The linearization is the exact Jacobian.
inline Problem make_burgers1d(const ProblemSpec& spec) {
    if (!(spec.nu >= 0.0)) throw ConfigError("burgers1d: viscosity must be non-negative");
    if (spec.n < 3) throw ConfigError("burgers1d: N must be at least 3");
    Problem p;
    p.spec = spec;
    p.kind = ProblemKind::OdeNonlinear;
    p.fov = FovClass::General;
    const std::size_t n = spec.n;
    const double h = 2.0 * std::numbers::pi / static_cast<double>(n);
    p.h = h;
    const double nu = spec.nu;
    OdeSystem sys;
    sys.dim = n;
    sys.rhs = [n, h, nu](std::span<const double> u, double) {
        Vector f(n);
        const double c = nu / (h * h);
        for (std::size_t j = 0; j < n; ++j) {
            const double um = u[(j + n - 1) % n], up = u[(j + 1) % n];
            f[j] = -(up * up - um * um) / (4.0 * h) + c * (up - 2.0 * u[j] + um);
        }
        return f;
    };
    sys.linearize = [n, h, nu](std::span<const double> u, double) {
        const double c = nu / (h * h);
        std::vector<Triplet> t;
        t.reserve(3 * n);
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t jm = (j + n - 1) % n, jp = (j + 1) % n;
            t.push_back({j, jm, u[jm] / (2.0 * h) + c});
            t.push_back({j, j, -2.0 * c});
            t.push_back({j, jp, -u[jp] / (2.0 * h) + c});
        }
        return SparseMatrix::from_triplets(n, n, std::move(t), 1);
    };
    p.u0.resize(n);
    for (std::size_t j = 0; j < n; ++j) p.u0[j] = 1.0 + 0.5 * std::sin(h * static_cast<double>(j));
    p.op = sys.linearize(p.u0, 0.0);
    p.ode = std::move(sys);
    return p;
}

/// u' = -u + w, 0 = w - cos(t), u(0) = w(0) = 1.
inline Problem make_dae_manufactured(const ProblemSpec& spec) {
    Problem p;
    p.spec = spec;
    p.kind = ProblemKind::DaeIndex1;
    p.fov = FovClass::Snsd;
    DaeSystem sys;
    sys.dim_u = 1;
    sys.dim_w = 1;
    sys.rhs_n = [](std::span<const double> u, std::span<const double> w, double) { return Vector{-u[0] + w[0]}; };
    sys.constraint_g = [](std::span<const double>, std::span<const double> w, double t) {
        return Vector{w[0] - std::cos(t)};
    };
    sys.blocks = [](std::span<const double>, std::span<const double>, double) {
        return DaeBlocks{SparseMatrix::from_triplets(1, 1, {{0, 0, -1.0}}, 0),
                         SparseMatrix::from_triplets(1, 1, {{0, 0, 1.0}}, 0), SparseMatrix::zero(1, 1),
                         SparseMatrix::from_triplets(1, 1, {{0, 0, 1.0}}, 0)};
    };
    p.dae = std::move(sys);
    p.u0 = {1.0};
    p.w0 = {1.0};
    p.exact = [](double t) { return Vector{0.5 * (std::cos(t) + std::sin(t)) + 0.5 * std::exp(-t)}; };
    p.exact_w = [](double t) { return Vector{std::cos(t)}; };
    p.op = SparseMatrix::from_triplets(1, 1, {{0, 0, -1.0}}, 0);
    return p;
}

namespace detail {

/// Five-point Laplacian on an nx-by-ny grid, periodic in x, homogeneous
/// Dirichlet in y; index j * nx + i.
inline SparseMatrix channel_laplacian(std::size_t nx, std::size_t ny, double hx, double hy) {
    std::vector<Triplet> t;
    const double cx = 1.0 / (hx * hx), cy = 1.0 / (hy * hy);
    for (std::size_t j = 0; j < ny; ++j)
        for (std::size_t i = 0; i < nx; ++i) {
            const std::size_t p = j * nx + i;
            t.push_back({p, p, -2.0 * cx - 2.0 * cy});
            t.push_back({p, j * nx + (i + 1) % nx, cx});
            t.push_back({p, j * nx + (i + nx - 1) % nx, cx});
            if (j > 0) t.push_back({p, p - nx, cy});
            if (j + 1 < ny) t.push_back({p, p + nx, cy});
        }
    return SparseMatrix::from_triplets(nx * ny, nx * ny, std::move(t), nx);
}

/// -(u omega_x + v omega_y) with u = psi_y, v = -psi_x, all central
/// differences; returned as the matrix acting on omega for the given psi.
inline SparseMatrix channel_advection(std::span<const double> psi, std::size_t nx, std::size_t ny, double hx,
                                      double hy) {
    std::vector<Triplet> t;
    auto at = [&](std::size_t i, long j) -> double {
        if (j < 0 || j >= static_cast<long>(ny)) return 0.0;
        return psi[static_cast<std::size_t>(j) * nx + i];
    };
    for (std::size_t j = 0; j < ny; ++j)
        for (std::size_t i = 0; i < nx; ++i) {
            const std::size_t p = j * nx + i;
            const std::size_t ip = (i + 1) % nx, im = (i + nx - 1) % nx;
            const long jl = static_cast<long>(j);
            const double u = (at(i, jl + 1) - at(i, jl - 1)) / (2.0 * hy);
            const double v = -(at(ip, jl) - at(im, jl)) / (2.0 * hx);
            t.push_back({p, j * nx + ip, -u / (2.0 * hx)});
            t.push_back({p, j * nx + im, u / (2.0 * hx)});
            if (j + 1 < ny) t.push_back({p, p + nx, -v / (2.0 * hy)});
            if (j > 0) t.push_back({p, p - nx, v / (2.0 * hy)});
        }
    return SparseMatrix::from_triplets(nx * ny, nx * ny, std::move(t), nx);
}

}  // namespace detail

/// Vorticity-streamfunction flow in a channel, periodic in x on [0, 2 pi),
/// walls psi = omega = 0 at y = 0, pi:
///   omega_t = -(u omega_x + v omega_y) + nu Lap omega,   0 = Lap psi + omega.
/// The linearization lags the advecting velocity, so L_w = 0.
inline Problem make_shear_layer_small(const ProblemSpec& spec) {
    const std::size_t nx = spec.n;
    if (nx < 4 || nx > 64) throw ConfigError("shear_layer_small: grid size must be between 4 and 64");
    if (!(spec.nu > 0.0)) throw ConfigError("shear_layer_small: viscosity must be positive");
    const std::size_t ny = nx / 2 > 2 ? nx / 2 : 3;
    const double hx = 2.0 * std::numbers::pi / static_cast<double>(nx);
    const double hy = std::numbers::pi / static_cast<double>(ny + 1);
    const std::size_t n = nx * ny;
    Problem p;
    p.spec = spec;
    p.kind = ProblemKind::DaeIndex1;
    p.fov = FovClass::General;
    p.h = std::sqrt(hx * hy);
    auto lap = std::make_shared<const SparseMatrix>(detail::channel_laplacian(nx, ny, hx, hy));
    const double nu = spec.nu;
    DaeSystem sys;
    sys.dim_u = n;
    sys.dim_w = n;
    sys.rhs_n = [lap, nx, ny, hx, hy, nu](std::span<const double> om, std::span<const double> psi, double) {
        Vector f = detail::channel_advection(psi, nx, ny, hx, hy).apply(om);
        lap->apply(om, std::span<double>(f), nu, 1.0);
        return f;
    };
    sys.constraint_g = [lap](std::span<const double> om, std::span<const double> psi, double) {
        Vector g = lap->apply(psi);
        for (std::size_t q = 0; q < g.size(); ++q) g[q] += om[q];
        return g;
    };
    sys.blocks = [lap, nx, ny, hx, hy, nu, n](std::span<const double>, std::span<const double> psi, double) {
        SparseMatrix adv = detail::channel_advection(psi, nx, ny, hx, hy);
        SparseMatrix lu = combine({{1.0, &adv}, {nu, lap.get()}});
        auto id = SparseMatrix::identity(n);
        id.set_bandwidth_hint(0);
        return DaeBlocks{std::move(lu), SparseMatrix::zero(n, n), std::move(id), *lap};
    };
    p.u0.resize(n);
    for (std::size_t j = 0; j < ny; ++j)
        for (std::size_t i = 0; i < nx; ++i) {
            const double x = hx * static_cast<double>(i), y = hy * static_cast<double>(j + 1);
            p.u0[j * nx + i] = std::sin(2.0 * y) * (1.0 + 0.2 * std::cos(x)) + 0.5 * std::sin(y) * std::sin(x);
        }
    Vector rhs(n);
    for (std::size_t q = 0; q < n; ++q) rhs[q] = -p.u0[q];
    p.w0 = BandedLu(*lap).solve(rhs);
    p.op = *lap;
    p.dae = std::move(sys);
    return p;
}

inline const std::vector<std::string>& problem_names() {
    static const std::vector<std::string> names{"dahlquist", "heat1d",           "advection1d",      "advdiff1d",
                                                "burgers1d", "dae_manufactured", "shear_layer_small"};
    return names;
}

/// Builds a catalog problem and checks its field-of-values label.
inline Problem make_problem(const ProblemSpec& spec) {
    Problem p;
    if (spec.name == "dahlquist") {
        p = make_dahlquist(spec);
    } else if (spec.name == "heat1d") {
        p = make_heat1d(spec);
    } else if (spec.name == "advection1d") {
        p = make_advection1d(spec);
    } else if (spec.name == "advdiff1d") {
        p = make_advdiff1d(spec);
    } else if (spec.name == "burgers1d") {
        p = make_burgers1d(spec);
    } else if (spec.name == "dae_manufactured") {
        p = make_dae_manufactured(spec);
    } else if (spec.name == "shear_layer_small") {
        p = make_shear_layer_small(spec);
    } else {
        throw ConfigError("unknown problem '" + spec.name + "'");
    }
    if (p.op && p.kind != ProblemKind::DaeIndex1) detail::verify_fov(*p.op, p.fov, spec.name);
    return p;
}

/// sqrt(h * sum e_j^2), the grid 2-norm.
inline double grid_norm(std::span<const double> e, double h) {
    double s = 0.0;
    for (double v : e) s += v * v;
    return std::sqrt(h * s);
}

}  // namespace irk
