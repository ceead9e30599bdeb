#include "irk/block2x2.hpp"
#include "irk/stage_solver.hpp"
#include "irk/tableau.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace {

using irk::Block2x2System;
using irk::DenseMatrix;
using irk::Family;
using irk::PrecondSpec;
using irk::SparseMatrix;
using irk::Triplet;

SparseMatrix scalar(double v) { return SparseMatrix::from_triplets(1, 1, {{0, 0, v}}, 0); }

// 1D Dirichlet Laplacian scaled by c: c * tridiag(1, -2, 1).
SparseMatrix dirichlet(std::size_t n, double c) {
    std::vector<Triplet> t;
    for (std::size_t i = 0; i < n; ++i) {
        t.push_back({i, i, -2.0 * c});
        if (i > 0) t.push_back({i, i - 1, c});
        if (i + 1 < n) t.push_back({i, i + 1, c});
    }
    return SparseMatrix::from_triplets(n, n, t, 1);
}

// Periodic central difference scaled by c (skew-symmetric).
SparseMatrix skew(std::size_t n, double c) {
    std::vector<Triplet> t;
    for (std::size_t i = 0; i < n; ++i) {
        t.push_back({i, (i + 1) % n, c});
        t.push_back({i, (i + n - 1) % n, -c});
    }
    return SparseMatrix::from_triplets(n, n, t, 1);
}

oracle::Mat to_oracle(const SparseMatrix& a) {
    oracle::Mat m = oracle::zeros(a.rows(), a.cols());
    for (const auto& t : a.triplets()) m[t.row][t.col] += t.value;
    return m;
}

Block2x2System make_sys(double eta, double beta, double phi, double dt, SparseMatrix l1, SparseMatrix l2) {
    Block2x2System sys;
    sys.eta = eta;
    sys.beta = beta;
    sys.phi = phi;
    sys.dt = dt;
    sys.m = SparseMatrix::identity(l1.rows());
    sys.l1 = std::move(l1);
    sys.l2 = std::move(l2);
    return sys;
}

std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    std::vector<double> v(n);
    for (auto& e : v) e = d(rng);
    return v;
}

// Exact Schur complement solve S z = r with
// S = eta M - dt L2 + beta^2 M (eta M - dt L1)^{-1} M, for M = I.
irk::SchurSolveHook exact_schur(const Block2x2System& sys) {
    const std::size_t n = sys.n();
    oracle::Mat a1 = to_oracle(sys.l1), l2 = to_oracle(sys.l2);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) a1[i][j] = (i == j ? sys.eta : 0.0) - sys.dt * a1[i][j];
    const oracle::Mat a1inv = oracle::inverse(a1);
    oracle::Mat s = oracle::zeros(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            s[i][j] = (i == j ? sys.eta : 0.0) - sys.dt * l2[i][j] + sys.beta * sys.beta * a1inv[i][j];
    return [s](std::span<const double> r) { return oracle::solve(s, std::vector<double>(r.begin(), r.end())); };
}

irk::LinearSolveConfig tight() {
    irk::LinearSolveConfig cfg;
    cfg.gmres.rtol = 1e-13;
    return cfg;
}

}  // namespace

TEST(ApplyBlock2x2, ScalarExample) {
    const auto sys = make_sys(3.0, std::sqrt(3.0), 1.0, 1.0, scalar(-1.0), scalar(-2.0));
    const auto y = irk::apply_block2x2(sys, std::vector<double>{1.0, 1.0});
    EXPECT_NEAR(y[0], 5.0, 1e-14);
    EXPECT_NEAR(y[1], 2.0, 1e-14);
}

TEST(ApplyBlock2x2, ZeroOperatorsGiveCouplingColumn) {
    const auto sys = make_sys(2.0, 1.5, 0.5, 1.0, SparseMatrix::zero(3, 3), SparseMatrix::zero(3, 3));
    std::vector<double> x(6, 0.0);
    x[0] = 1.0;
    const auto y = irk::apply_block2x2(sys, x);
    EXPECT_NEAR(y[0], 2.0, 1e-15);
    EXPECT_NEAR(y[3], -1.5 * 1.5 / 0.5, 1e-14);
    for (std::size_t i : {1u, 2u, 4u, 5u}) EXPECT_EQ(y[i], 0.0);
}

TEST(ApplyBlock2x2, OffDiagonalCouplingsAndErrors) {
    auto sys = make_sys(1.0, 1.0, 1.0, 0.5, scalar(0.0), scalar(0.0));
    sys.offdiag12 = scalar(2.0);
    sys.offdiag21 = scalar(4.0);
    const auto y = irk::apply_block2x2(sys, std::vector<double>{1.0, 1.0});
    EXPECT_NEAR(y[0], 1.0 + 1.0 - 0.5 * 2.0, 1e-15);
    EXPECT_NEAR(y[1], -1.0 + 1.0 - 0.5 * 4.0, 1e-15);
    EXPECT_THROW(irk::apply_block2x2(sys, std::vector<double>{1.0}), irk::DimensionError);
    sys.phi = 0.0;
    EXPECT_THROW(irk::apply_block2x2(sys, std::vector<double>{1.0, 1.0}), irk::DomainError);
}

TEST(PrecondBlock2x2, ScalarExample) {
    const auto sys = make_sys(3.0, std::sqrt(3.0), 1.0, 1.0, scalar(0.0), scalar(0.0));
    const auto z = irk::precond_block2x2(sys, PrecondSpec{}, std::vector<double>{1.0, 0.0});
    EXPECT_NEAR(z[0], 1.0 / 3.0, 1e-15);
    EXPECT_NEAR(z[1], 0.25, 1e-15);
}

TEST(PrecondBlock2x2, GammaModes) {
    PrecondSpec spec;
    EXPECT_NEAR(spec.gamma(3.0, std::sqrt(3.0)), 4.0, 1e-15);
    spec.gamma_mode = irk::GammaMode::Eta;
    EXPECT_EQ(spec.gamma(3.0, std::sqrt(3.0)), 3.0);
    spec.gamma_mode = irk::GammaMode::Custom;
    spec.custom_gamma = -1.0;
    EXPECT_THROW(spec.gamma(3.0, 1.0), irk::ConfigError);
    spec.custom_gamma = 2.5;
    EXPECT_EQ(spec.gamma(3.0, 1.0), 2.5);
    // A real block has no shift to choose.
    PrecondSpec by_eta;
    by_eta.gamma_mode = irk::GammaMode::Eta;
    EXPECT_EQ(PrecondSpec{}.gamma(2.0, 0.0), by_eta.gamma(2.0, 0.0));
}

TEST(PrecondBlock2x2, BetaZeroIsExactInverse) {
    std::mt19937_64 rng(1);
    // With beta = 0 the preconditioner is the block-diagonal inverse.
    const auto sys = make_sys(2.0, 0.0, 1.0, 0.1, dirichlet(16, 50.0), dirichlet(16, 80.0));
    const auto r = random_vector(32, rng);
    const auto z = irk::precond_block2x2(sys, PrecondSpec{}, r);
    const auto a1 = sys.shifted(2.0, sys.l1), a2 = sys.shifted(2.0, sys.l2);
    const auto y1 = a1.apply(std::span<const double>(z).subspan(0, 16));
    const auto y2 = a2.apply(std::span<const double>(z).subspan(16, 16));
    for (std::size_t i = 0; i < 16; ++i) {
        EXPECT_NEAR(y1[i], r[i], 1e-12);
        EXPECT_NEAR(y2[i], r[16 + i], 1e-12);
    }
}

TEST(PrecondBlock2x2, ExactSchurConvergesInTwoIterations) {
    std::mt19937_64 rng(2);
    for (int kind = 0; kind < 2; ++kind) {
        const std::size_t n = 24;
        const auto l1 = kind == 0 ? dirichlet(n, 30.0) : skew(n, 7.0);
        const auto l2 = kind == 0 ? dirichlet(n, 45.0) : skew(n, 4.0);
        auto sys = make_sys(3.0, std::sqrt(3.0), 1.0, 0.2, l1, l2);
        PrecondSpec spec;
        spec.schur_override = exact_schur(sys);
        const auto b = random_vector(2 * n, rng);
        const auto res = irk::solve_block2x2(sys, spec, b, {1e-10, 50, 50});
        EXPECT_TRUE(res.report.converged);
        EXPECT_LE(res.report.iterations, 2u) << kind;
    }
}

TEST(PrecondBlock2x2, ApplicationsAreTwoPerIteration) {
    std::mt19937_64 rng(3);
    auto sys = make_sys(3.0, std::sqrt(3.0), 1.0, 0.05, dirichlet(32, 1000.0), dirichlet(32, 1000.0));
    const auto b = random_vector(64, rng);
    const auto res = irk::solve_block2x2(sys, PrecondSpec{}, b, {1e-8, 100, 100});
    ASSERT_TRUE(res.report.converged);
    EXPECT_EQ(res.report.precond_applications, 2 * res.report.iterations);
    const auto y = irk::apply_block2x2(sys, res.x);
    double err = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < 64; ++i) {
        err += (y[i] - b[i]) * (y[i] - b[i]);
        nb += b[i] * b[i];
    }
    EXPECT_LE(std::sqrt(err / nb), 1e-8);
}

TEST(PrecondBlock2x2, InexactInnerStillConverges) {
    std::mt19937_64 rng(4);
    auto sys = make_sys(3.0, std::sqrt(3.0), 1.0, 0.01, dirichlet(32, 1000.0), dirichlet(32, 1000.0));
    PrecondSpec spec;
    spec.inner_solver = irk::InnerSolverKind::FixedIterations;
    spec.inner_iterations = 2;
    const auto res = irk::solve_block2x2(sys, spec, random_vector(64, rng), {1e-8, 200, 200});
    EXPECT_TRUE(res.report.converged);
}

TEST(FieldOfValues, SignByOperatorClass) {
    EXPECT_LT(irk::field_of_values_bound(dirichlet(40, 1.0)), 0.0);
    EXPECT_NEAR(irk::field_of_values_bound(skew(40, 3.0)), 0.0, 1e-8);
    EXPECT_NEAR(irk::field_of_values_bound(SparseMatrix::identity(5)), 1.0, 1e-8);
}

TEST(FieldOfValues, MatchesJacobiEigenvalues) {
    std::mt19937_64 rng(5);
    for (std::size_t n : {6u, 15u, 30u}) {
        const auto m = oracle::random_matrix(n, rng);
        DenseMatrix d(n, n);
        oracle::Mat sym = oracle::zeros(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                d(i, j) = m[i][j];
                sym[i][j] = 0.5 * (m[i][j] + m[j][i]);
            }
        const double want = oracle::symmetric_eigenvalues(sym).back();
        EXPECT_NEAR(irk::field_of_values_bound(SparseMatrix::from_dense(d)), want, 1e-8 * std::max(1.0, std::abs(want)));
    }
}

TEST(MeasureKappa, ZeroOperatorsGiveOne) {
    const DenseMatrix z(4, 4);
    EXPECT_NEAR(irk::measure_kappa(z, z, 3.0, std::sqrt(3.0), irk::gamma_star(3.0, std::sqrt(3.0))), 1.0, 1e-12);
}

TEST(MeasureKappa, HeatBlockWithinPublishedBound) {
    const double h = 1.0 / 65.0;
    const double dt = 10.0 * h * h;
    auto sys = make_sys(3.0, std::sqrt(3.0), 1.0, dt, dirichlet(64, 1.0 / (h * h)), dirichlet(64, 1.0 / (h * h)));
    const double k = irk::measure_kappa(sys, PrecondSpec{});
    EXPECT_LE(k, 1.17);
    EXPECT_LE(k, irk::kappa_bound(3.0, std::sqrt(3.0)) + 1e-6);
    EXPECT_GE(k, 1.0);
}

TEST(MeasureKappa, DistinctOperatorsWithinBound) {
    const double eta = 3.0, beta = std::sqrt(3.0);
    auto sys = make_sys(eta, beta, 1.0, 1.0, dirichlet(32, 5.0), dirichlet(32, 10.0));
    EXPECT_LE(irk::measure_kappa(sys, PrecondSpec{}), 2.0 + beta * beta / (eta * eta) + 1e-6);
}

TEST(MeasureKappa, BoundHoldsForEveryBlockAndStepSize) {
    const std::size_t n = 24;
    const auto lap = dirichlet(n, 1.0);
    const auto adv = skew(n, 0.5);
    for (Family f : {Family::Gauss, Family::RadauIIA, Family::LobattoIIIC}) {
        for (std::size_t s = 2; s <= 5; ++s) {
            const auto prep = irk::prepare_stages(irk::make_tableau(f, s));
            for (const auto& b : prep.schur.blocks) {
                if (b.size != 2) continue;
                for (const SparseMatrix* l : {&lap, &adv}) {
                    for (double dtn : {0.1, 1.0, 10.0, 100.0}) {
                        const double dt = dtn / l->norm_inf();
                        const DenseMatrix lh = dt * l->to_dense();
                        const double k = irk::measure_kappa(lh, lh, b.eta, b.beta, irk::gamma_star(b.eta, b.beta));
                        EXPECT_LE(k, irk::kappa_bound(b.eta, b.beta) + 1e-6);
                    }
                }
            }
        }
    }
}

TEST(MeasureKappa, RejectsLargeOrMismatched) {
    EXPECT_THROW(irk::measure_kappa(DenseMatrix(3, 3), DenseMatrix(4, 4), 1.0, 1.0, 2.0), irk::DimensionError);
    EXPECT_THROW(irk::measure_kappa(DenseMatrix(513, 513), DenseMatrix(513, 513), 1.0, 1.0, 2.0), irk::DimensionError);
}

TEST(TransformedSystem, BackwardEulerIsOneShiftedSolve) {
    const auto prep = irk::prepare_stages(irk::make_tableau(Family::RadauIIA, 1));
    const auto l = dirichlet(10, 3.0);
    const std::vector<SparseMatrix> ops{l};
    const auto jac = irk::build_variant_jacobian(prep, ops, irk::Variant::Triangular);
    std::mt19937_64 rng(6);
    const auto f = random_vector(10, rng);
    const auto res = irk::solve_transformed_system(prep, SparseMatrix::identity(10), jac, 0.4, f, tight());
    oracle::Mat a = to_oracle(l);
    for (std::size_t i = 0; i < 10; ++i)
        for (std::size_t j = 0; j < 10; ++j) a[i][j] = (i == j ? 1.0 : 0.0) - 0.4 * a[i][j];
    EXPECT_LE(oracle::max_abs_diff(res.dk, oracle::solve(a, f)), 1e-11);
    EXPECT_EQ(res.blocks.size(), 1u);
}

TEST(TransformedSystem, DahlquistMatchesDenseStageSolve) {
    const auto t = irk::make_tableau(Family::Gauss, 2);
    const auto prep = irk::prepare_stages(t);
    const std::vector<SparseMatrix> ops{scalar(-1.0), scalar(-1.0)};
    const auto jac = irk::build_variant_jacobian(prep, ops, irk::Variant::Triangular);
    const std::vector<double> rhs{-1.0, -1.0};  // L u_n with u_n = 1
    const auto res = irk::solve_transformed_system(prep, SparseMatrix::identity(1), jac, 0.1, rhs, tight());
    const double r3 = std::sqrt(3.0);
    const oracle::Mat a{{0.25, 0.25 - r3 / 6.0}, {0.25 + r3 / 6.0, 0.25}};
    const auto want = oracle::linear_stages(a, {{1.0}}, {{-1.0}}, {1.0}, 0.1);
    EXPECT_LE(oracle::max_abs_diff(res.dk, want), 1e-10);
}

TEST(TransformedSystem, ConsistentWithDenseSolveForAllSchemes) {
    std::mt19937_64 rng(7);
    const std::size_t n = 12;
    const auto l = [&] {
        auto d = dirichlet(n, 20.0);
        auto k = skew(n, 3.0);
        return irk::combine({{1.0, &d}, {1.0, &k}});
    }();
    const oracle::Mat lo = to_oracle(l);
    const oracle::Mat mass = oracle::eye(n);
    for (Family f : {Family::Gauss, Family::RadauIIA, Family::LobattoIIIC, Family::SDIRK2, Family::SDIRK3}) {
        for (std::size_t s = 1; s <= 4; ++s) {
            if (f == Family::LobattoIIIC && s == 1) continue;
            if (irk::is_dirk(f) && s > 1) continue;
            const auto t = irk::make_tableau(f, irk::is_dirk(f) ? 0 : s);
            const auto prep = irk::prepare_stages(t);
            const std::vector<SparseMatrix> ops(t.s, l);
            const auto un = random_vector(n, rng);
            const auto lu = l.apply(un);
            std::vector<double> rhs;
            for (std::size_t i = 0; i < t.s; ++i) rhs.insert(rhs.end(), lu.begin(), lu.end());
            oracle::Mat a = oracle::zeros(t.s, t.s);
            for (std::size_t i = 0; i < t.s; ++i)
                for (std::size_t j = 0; j < t.s; ++j) a[i][j] = t.a0(i, j);
            const auto want = oracle::linear_stages(a, mass, lo, un, 0.05);
            for (int v = 0; v <= 3; ++v) {
                const auto jac = irk::build_variant_jacobian(prep, ops, irk::variant_from_int(v));
                const auto res = irk::solve_transformed_system(prep, SparseMatrix::identity(n), jac, 0.05, rhs, tight());
                EXPECT_LE(oracle::max_abs_diff(res.dk, want), 1e-9) << t.label() << " variant " << v;
            }
        }
    }
}

TEST(TransformedSystem, EqualOperatorsMakeVariantsAgree) {
    std::mt19937_64 rng(8);
    const auto prep = irk::prepare_stages(irk::make_tableau(Family::RadauIIA, 3));
    const auto l = dirichlet(16, 40.0);
    const std::vector<SparseMatrix> ops(3, l);
    const std::vector<SparseMatrix> single{l};
    const auto rhs = random_vector(48, rng);
    const auto ref = irk::solve_transformed_system(
        prep, SparseMatrix::identity(16), irk::build_variant_jacobian(prep, single, irk::Variant::Simplified), 0.1,
        rhs, tight());
    for (int v = 1; v <= 3; ++v) {
        const auto jac = irk::build_variant_jacobian(prep, ops, irk::variant_from_int(v));
        const auto res = irk::solve_transformed_system(prep, SparseMatrix::identity(16), jac, 0.1, rhs, tight());
        EXPECT_LE(oracle::max_abs_diff(res.dk, ref.dk), 1e-12) << v;
    }
}

TEST(TransformedSystem, ApplicationsFollowBlockSizes) {
    std::mt19937_64 rng(9);
    const auto prep = irk::prepare_stages(irk::make_tableau(Family::Gauss, 3));
    const auto l = dirichlet(20, 100.0);
    const std::vector<SparseMatrix> ops(3, l);
    const auto jac = irk::build_variant_jacobian(prep, ops, irk::Variant::WeightedDiagonal);
    irk::LinearSolveConfig cfg;
    const auto res = irk::solve_transformed_system(prep, SparseMatrix::identity(20), jac, 0.1, random_vector(60, rng), cfg);
    std::size_t want = 0, its = 0;
    for (const auto& b : res.blocks) {
        want += b.size * b.report.iterations;
        its += b.report.iterations;
        EXPECT_EQ(b.applications, b.size * b.report.iterations);
    }
    EXPECT_EQ(res.applications, want);
    EXPECT_EQ(res.krylov_iterations, its);
}

TEST(TransformedSystem, NonConvergenceCarriesBlockIndex) {
    std::mt19937_64 rng(10);
    const auto prep = irk::prepare_stages(irk::make_tableau(Family::Gauss, 2));
    const auto l = dirichlet(40, 1e4);
    const std::vector<SparseMatrix> ops(2, l);
    const auto jac = irk::build_variant_jacobian(prep, ops, irk::Variant::Triangular);
    irk::LinearSolveConfig cfg;
    cfg.precond.inner_solver = irk::InnerSolverKind::FixedIterations;
    cfg.gmres = {1e-12, 1, 1};
    try {
        irk::solve_transformed_system(prep, SparseMatrix::identity(40), jac, 1.0, random_vector(80, rng), cfg);
        FAIL() << "expected StageSolveError";
    } catch (const irk::StageSolveError& e) {
        EXPECT_EQ(e.block(), 0u);
        EXPECT_FALSE(e.report().converged);
    }
}

TEST(VariantJacobian, WeightPatterns) {
    const auto prep = irk::prepare_stages(irk::make_tableau(Family::Gauss, 4));
    const auto w0 = irk::variant_weights(prep, irk::Variant::Simplified);
    const auto w1 = irk::variant_weights(prep, irk::Variant::LumpedDiagonal);
    const auto w2 = irk::variant_weights(prep, irk::Variant::WeightedDiagonal);
    const auto w3 = irk::variant_weights(prep, irk::Variant::Triangular);
    for (std::size_t k = 0; k < 4; ++k) {
        EXPECT_EQ(w0[k * 4 + k][0], 1.0);
        const auto& d = prep.dvec(k, k);
        const auto& lump = w1[k * 4 + k];
        const std::size_t pick = static_cast<std::size_t>(std::max_element(lump.begin(), lump.end()) - lump.begin());
        for (std::size_t i = 0; i < 4; ++i) EXPECT_GE(std::abs(d[pick]), std::abs(d[i]));
        EXPECT_EQ(w2[k * 4 + k], d);
        for (std::size_t l = 0; l < 4; ++l) {
            if (l == k) continue;
            EXPECT_TRUE(w0[k * 4 + l].empty());
            EXPECT_TRUE(w2[k * 4 + l].empty());
            if (prep.block_of(l) >= prep.block_of(k)) {
                EXPECT_EQ(w3[k * 4 + l], prep.dvec(k, l));
            } else {
                EXPECT_TRUE(w3[k * 4 + l].empty());
            }
        }
    }
    // Some diagonal block of four-stage Gauss is dominated by the last stage.
    bool found = false;
    for (std::size_t k = 0; k < 4; ++k)
        if (w1[k * 4 + k][3] == 1.0 && std::abs(prep.dvec(k, k)[3] - 0.970) < 2e-3) found = true;
    EXPECT_TRUE(found);
    EXPECT_THROW(irk::variant_weights(prep, irk::Variant::Simplified, 4), irk::ConfigError);
    EXPECT_THROW(irk::variant_from_int(4), irk::ConfigError);
}

TEST(VariantJacobian, TwoStageGaussLumpedPicksDistinctStages) {
    const auto prep = irk::prepare_stages(irk::make_tableau(Family::Gauss, 2));
    const auto w1 = irk::variant_weights(prep, irk::Variant::LumpedDiagonal);
    EXPECT_NE(w1[0][0], w1[3][0]);
    EXPECT_EQ(w1[0][0] + w1[3][0], 1.0);
}
