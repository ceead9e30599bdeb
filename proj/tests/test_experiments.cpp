#include "irk/experiments.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

namespace {

using irk::Family;
using irk::RunManifest;

std::string csv(const irk::ExperimentResult& r) {
    std::ostringstream os;
    r.table.write(os);
    return os.str();
}

double cell(const irk::ExperimentResult& r, std::size_t row, const std::string& col) {
    return std::stod(r.table.rows.at(row).at(r.table.column(col)));
}

std::string text(const irk::ExperimentResult& r, std::size_t row, const std::string& col) {
    return r.table.rows.at(row).at(r.table.column(col));
}

RunManifest dahlquist_convergence() {
    RunManifest m;
    m.experiment = "convergence";
    m.problem = {"dahlquist", 1, 0.0, 1.0, -1.0, 0.0};
    m.schemes = {{Family::Gauss, 2}};
    m.dts = {0.2, 0.1, 0.05};
    m.t_final = 1.0;
    m.solver.newton_rtol = 1e-13;
    m.solver.krylov_rtol = 1e-13;
    return m;
}

}  // namespace

TEST(Manifest, JsonRoundTripPreservesHash) {
    RunManifest m = dahlquist_convergence();
    m.variants = {0, 3};
    m.operator_ratios = {0.5, 2.0};
    m.dae_mode = irk::DaeMode::Reordered;
    m.solver.precond.gamma_mode = irk::GammaMode::Eta;
    m.solver.refresh = irk::JacobianRefresh::FrozenPerStep;
    m.seed = 42;
    const auto back = irk::manifest_from_json(nlohmann::json::parse(irk::to_json(m).dump()));
    EXPECT_EQ(irk::to_json(back), irk::to_json(m));
    EXPECT_EQ(irk::manifest_hash(back), irk::manifest_hash(m));
    EXPECT_EQ(irk::manifest_hash(m).size(), 16u);
    RunManifest other = m;
    other.t_final = 2.0;
    EXPECT_NE(irk::manifest_hash(other), irk::manifest_hash(m));
    other = m;
    other.output = "elsewhere.csv";
    EXPECT_EQ(irk::manifest_hash(other), irk::manifest_hash(m));
}

TEST(Manifest, RejectsBadFields) {
    EXPECT_THROW(irk::manifest_from_json(nlohmann::json{{"dae_mode", "sideways"}}), irk::ConfigError);
    EXPECT_THROW(irk::manifest_from_json(nlohmann::json{{"solver", {{"refresh", "sometimes"}}}}), irk::ConfigError);
    EXPECT_THROW(irk::manifest_from_json(nlohmann::json{{"solver", {{"gamma", "delta"}}}}), irk::ConfigError);
    RunManifest m;
    m.experiment = "bogus";
    EXPECT_THROW(irk::run_experiment(m), irk::ConfigError);
    m = dahlquist_convergence();
    m.dts = {0.1, -0.1};
    EXPECT_THROW(irk::run_experiment(m), irk::ConfigError);
}

TEST(Manifest, SchemeParsing) {
    EXPECT_EQ(irk::parse_scheme("radau:3"), (irk::SchemeSpec{Family::RadauIIA, 3}));
    EXPECT_EQ(irk::parse_scheme("gauss"), (irk::SchemeSpec{Family::Gauss, 2}));
    EXPECT_EQ(irk::parse_scheme("sdirk3").s, 3u);
    EXPECT_THROW(irk::parse_scheme("gauss:x"), irk::ConfigError);
    EXPECT_THROW(irk::parse_scheme("heun:2"), irk::ConfigError);
}

TEST(Convergence, DahlquistGaussRate) {
    const auto r = irk::run_experiment(dahlquist_convergence());
    ASSERT_FALSE(r.any_failed);
    ASSERT_EQ(r.table.rows.size(), 3u);
    for (std::size_t i = 1; i < 3; ++i) EXPECT_NEAR(cell(r, i, "rate"), 4.0, 0.2);
    for (const auto& row : r.table.rows) EXPECT_EQ(row[0], r.hash);
}

TEST(Convergence, DeterministicOutput) {
    RunManifest m = dahlquist_convergence();
    m.problem = {"burgers1d", 32, 0.05};
    m.dts = {0.1, 0.05};
    m.t_final = 0.2;
    m.reference.step_divisor = 10.0;
    m.solver.newton_rtol = 1e-10;
    m.solver.krylov_rtol = 1e-11;
    EXPECT_EQ(csv(irk::run_experiment(m)), csv(irk::run_experiment(m)));
}

TEST(Convergence, ConstantSolutionHasZeroError) {
    RunManifest m = dahlquist_convergence();
    m.problem.lambda_re = 0.0;
    const auto r = irk::run_experiment(m);
    ASSERT_FALSE(r.any_failed);
    for (std::size_t i = 0; i < r.table.rows.size(); ++i) {
        EXPECT_EQ(cell(r, i, "error"), 0.0);
        EXPECT_EQ(text(r, i, "rate"), "");
    }
}

TEST(Convergence, DaeRadauRate) {
    RunManifest m;
    m.experiment = "dae-convergence";
    m.problem = {"dae_manufactured"};
    m.schemes = {{Family::RadauIIA, 2}};
    m.dts = {0.2, 0.1, 0.05};
    m.t_final = 2.0;
    m.solver.newton_rtol = 1e-13;
    m.solver.krylov_rtol = 1e-13;
    const auto r = irk::run_experiment(m);
    ASSERT_FALSE(r.any_failed);
    for (std::size_t i = 1; i < 3; ++i) EXPECT_NEAR(cell(r, i, "rate_u"), 3.0, 0.3);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_LE(cell(r, i, "max_constraint"), 1e-11);
    // The convergence experiment routes DAE problems to the same study.
    m.experiment = "convergence";
    EXPECT_EQ(irk::run_experiment(m).table.header, r.table.header);
}

TEST(Iterations, BackwardEulerOnLinearProblemSolvesInOneIteration) {
    RunManifest m;
    m.experiment = "iterations";
    m.problem = {"heat1d", 32, 1.0};
    m.schemes = {{Family::RadauIIA, 1}};
    m.dts = {0.01};
    m.t_final = 0.05;
    const auto r = irk::run_experiment(m);
    ASSERT_FALSE(r.any_failed);
    const double steps = cell(r, 0, "steps");
    EXPECT_EQ(steps, 5.0);
    EXPECT_EQ(cell(r, 0, "nonlinear_iterations"), steps);
    EXPECT_EQ(cell(r, 0, "krylov_iterations"), steps);
    EXPECT_EQ(cell(r, 0, "precond_applications"), steps);
}

TEST(Iterations, ComplexBlocksCountTwoApplicationsPerIteration) {
    RunManifest m;
    m.experiment = "iterations";
    m.problem = {"burgers1d", 64, 0.02};
    m.schemes = {{Family::Gauss, 2}, {Family::Gauss, 4}};
    m.dts = {0.05};
    m.t_final = 0.1;
    const auto r = irk::run_experiment(m);
    ASSERT_FALSE(r.any_failed);
    for (std::size_t i = 0; i < r.table.rows.size(); ++i)
        EXPECT_EQ(cell(r, i, "precond_applications"), 2.0 * cell(r, i, "krylov_iterations"));
}

TEST(Iterations, FullyImplicitCheaperThanDirkAtEqualAccuracy) {
    RunManifest m;
    m.problem = {"burgers1d", 128, 0.02};
    m.schemes = {{Family::Gauss, 2}, {Family::SDIRK2, 2}};
    m.dts = {0.2, 0.1, 0.05, 0.025, 0.0125, 0.00625, 0.003125};
    m.t_final = 0.8;
    m.reference.step_divisor = 10.0;
    m.experiment = "convergence";
    m.solver.newton_rtol = 1e-10;
    m.solver.krylov_rtol = 1e-10;
    const auto err = irk::run_experiment(m);
    m.experiment = "iterations";
    m.solver = irk::SolverConfig{};
    const auto cost = irk::run_experiment(m);
    ASSERT_FALSE(err.any_failed || cost.any_failed);
    ASSERT_EQ(err.table.rows.size(), cost.table.rows.size());
    // Cheapest run per scheme reaching the target error; rows are ordered by
    // scheme, then by decreasing dt in both tables.
    const double target = 1e-5;
    double best[2] = {1e300, 1e300};
    for (std::size_t i = 0; i < err.table.rows.size(); ++i) {
        const std::size_t sc = text(err, i, "scheme") == "gauss" ? 0 : 1;
        ASSERT_EQ(text(err, i, "dt"), text(cost, i, "dt"));
        if (cell(err, i, "error") <= target) best[sc] = std::min(best[sc], cell(cost, i, "precond_applications"));
    }
    ASSERT_LT(best[0], 1e300);
    ASSERT_LT(best[1], 1e300);
    EXPECT_LT(best[0], best[1]);
}

TEST(Iterations, VariantSweepIsMonotone) {
    RunManifest m;
    m.experiment = "iterations";
    m.problem = {"burgers1d", 128, 0.02};
    m.schemes = {{Family::Gauss, 2}, {Family::RadauIIA, 3}};
    m.variants = {0, 1, 2, 3};
    m.dts = {0.2};
    m.t_final = 0.4;
    const auto r = irk::run_experiment(m);
    ASSERT_FALSE(r.any_failed);
    ASSERT_EQ(r.table.rows.size(), 8u);
    for (std::size_t sc = 0; sc < 2; ++sc)
        for (std::size_t v = 1; v < 4; ++v)
            EXPECT_LE(cell(r, 4 * sc + v, "nonlinear_iterations"), cell(r, 4 * sc + v - 1, "nonlinear_iterations"))
                << "scheme " << sc << " variant " << v;
}

TEST(Iterations, NonConvergenceIsReportedPerCell) {
    RunManifest m;
    m.experiment = "iterations";
    m.problem = {"burgers1d", 64, 0.02};
    m.schemes = {{Family::Gauss, 2}};
    m.dts = {0.5};
    m.t_final = 0.5;
    m.solver.newton_maxit = 1;
    const auto r = irk::run_experiment(m);
    EXPECT_TRUE(r.any_failed);
    EXPECT_EQ(text(r, 0, "status").rfind("failed", 0), 0u);
}

TEST(GammaCompare, StarNeverWorseOnHeat) {
    RunManifest m;
    m.experiment = "gamma-compare";
    m.problem = {"heat1d", 64, 1.0};
    m.schemes = {{Family::Gauss, 4}};
    m.dts = {0.01, 0.1, 1.0};
    m.t_final = 1.0;
    const auto r = irk::run_experiment(m);
    ASSERT_FALSE(r.any_failed);
    std::vector<double> eta, star;
    for (std::size_t i = 0; i < r.table.rows.size(); ++i) {
        if (text(r, i, "block") != "all") continue;
        (text(r, i, "gamma") == "eta" ? eta : star).push_back(cell(r, i, "mean_krylov"));
    }
    ASSERT_EQ(eta.size(), 3u);
    ASSERT_EQ(star.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_LE(star[i], eta[i] + 1e-12) << "dt index " << i;
}

TEST(GammaCompare, RealSpectrumIsSkipped) {
    RunManifest m;
    m.experiment = "gamma-compare";
    m.problem = {"heat1d", 16, 1.0};
    m.schemes = {{Family::RadauIIA, 1}, {Family::SDIRK2, 2}};
    m.dts = {0.1};
    m.t_final = 0.1;
    const auto r = irk::run_experiment(m);
    ASSERT_EQ(r.table.rows.size(), 4u);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(text(r, i, "status").rfind("skipped", 0), 0u);
}

TEST(Condition, MeasuredWithinTabulatedBounds) {
    RunManifest m;
    m.experiment = "condition";
    m.problem = {"heat1d", 64, 1.0};
    m.schemes = {{Family::Gauss, 2}, {Family::LobattoIIIC, 2}};
    m.operator_ratios = {0.5, 2.0};
    const auto r = irk::run_experiment(m);
    ASSERT_FALSE(r.any_failed);
    for (std::size_t i = 0; i < r.table.rows.size(); ++i) {
        EXPECT_EQ(text(r, i, "within_bound"), "true") << i;
        if (text(r, i, "regime") == "general") {
            const double cap = text(r, i, "scheme") == "gauss" ? 1.17 : 1.50;
            EXPECT_LE(cell(r, i, "kappa"), cap + 1e-6);
        }
    }
    // 2 schemes x 1 block x 3 regimes x 4 dt values.
    EXPECT_EQ(r.table.rows.size(), 24u);
    std::set<std::string> dt_norms;
    for (std::size_t i = 0; i < r.table.rows.size(); ++i) dt_norms.insert(text(r, i, "dt_norm"));
    EXPECT_EQ(dt_norms.size(), 4u);
}
