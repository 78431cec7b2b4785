#include <gtest/gtest.h>

#include <cmath>

#include "quadlasso/solver.hpp"
#include "test_support.hpp"

using namespace quadlasso;
using quadlasso::testing::max_abs_diff;
using quadlasso::testing::random_matrix;
using quadlasso::testing::random_vector;

namespace {

StructureMatrix structure_for(int which, const DenseMatrix& x) {
    switch (which) {
        case 0: return build_structure(StructureKind::lasso(), x.cols());
        case 1: return build_structure(StructureKind::elastic_net(), x.cols());
        case 2: return build_structure(StructureKind::smooth_lasso(), x.cols());
        default: return build_structure(StructureKind::weighted_fusion_from_design(x), x.cols());
    }
}

double lambda_max(const DenseMatrix& x, const DenseVector& y) {
    return 2.0 * norm_inf(matvec_transposed(x, y).span()) / static_cast<double>(x.rows());
}

// Subgradient check written from the augmented least-squares problem, not from the solver.
double augmented_kkt(const DenseVector& b, const DenseMatrix& x, const DenseVector& y,
                     const StructureMatrix& s, double lambda, double mu) {
    const AugmentedProblem a = augment(x, y, s, mu);
    const DenseVector r = subtract(matvec(a.xaug, b), a.yaug);
    const DenseVector g = scale(matvec_transposed(a.xaug, r), 2.0 / static_cast<double>(x.rows()));
    double worst = 0.0;
    for (std::size_t j = 0; j < b.size(); ++j) {
        const double v = b[j] == 0.0 ? std::max(0.0, std::abs(g[j]) - lambda)
                                     : std::abs(g[j] + lambda * (b[j] > 0 ? 1.0 : -1.0));
        worst = std::max(worst, v);
    }
    return worst;
}

// Projected coordinate descent on the dual of the 1-D total-variation prox:
// min_z 0.5 |v - D'z|^2 subject to |z_i| <= gamma, with u = v - D'z.
DenseVector tv_prox_dual_oracle(const DenseVector& v, double gamma) {
    const std::size_t p = v.size();
    if (p < 2) return v;
    std::vector<double> z(p - 1, 0.0);
    auto primal = [&] {
        std::vector<double> u(v.values());
        for (std::size_t i = 0; i + 1 < p; ++i) {
            u[i] += z[i];
            u[i + 1] -= z[i];
        }
        return u;
    };
    for (int sweep = 0; sweep < 200000; ++sweep) {
        double moved = 0.0;
        for (std::size_t i = 0; i + 1 < p; ++i) {
            std::vector<double> u = primal();
            // d/dz_i of 0.5|u|^2 where u_i = ... + z_i and u_{i+1} = ... - z_i
            const double target = z[i] - (u[i] - u[i + 1]) / 2.0;
            const double next = std::clamp(target, -gamma, gamma);
            moved = std::max(moved, std::abs(next - z[i]));
            z[i] = next;
        }
        if (moved < 1e-15) break;
    }
    return DenseVector(primal());
}

}  // namespace

TEST(SoftThreshold, Examples) {
    EXPECT_EQ(soft_threshold(3.0, 1.0), 2.0);
    EXPECT_EQ(soft_threshold(-0.5, 1.0), 0.0);
    EXPECT_EQ(soft_threshold(-3.0, 1.0), -2.0);
}

TEST(Objective, ZeroBetaIsMeanSquare) {
    const DenseMatrix x{{1, 2}, {3, 4}, {5, 6}};
    const DenseVector y{1, -2, 2};
    const StructureMatrix s = build_structure(StructureKind::smooth_lasso(), 2);
    const PenaltyConfig cfg{0.7, 0.3, StructureKind::smooth_lasso()};
    EXPECT_DOUBLE_EQ(objective(DenseVector(2), x, y, cfg, s), 9.0 / 3.0);
}

TEST(Objective, ExactLeastSquaresHasZeroLoss) {
    const DenseMatrix x{{2, 1}, {1, 3}};
    const DenseVector b{0.5, -1.0};
    const DenseVector y = matvec(x, b);
    const StructureMatrix s = build_structure(StructureKind::lasso(), 2);
    EXPECT_NEAR(objective(b, x, y, {0.0, 0.0, StructureKind::lasso()}, s), 0.0, 1e-15);
}

TEST(Objective, MatchesAugmentedCriterion) {
    std::mt19937_64 rng(41);
    for (int rep = 0; rep < 30; ++rep) {
        const DenseMatrix x = random_matrix(8, 5, rng);
        const DenseVector y = random_vector(8, rng);
        const DenseVector b = random_vector(5, rng);
        const StructureMatrix s = structure_for(rep % 4, x);
        const double lambda = 0.3, mu = 0.8;
        const AugmentedProblem a = augment(x, y, s, mu);
        const double aug = norm2_squared(subtract(a.yaug, matvec(a.xaug, b)).span()) / 8.0 +
                           lambda * norm1(b.span());
        const double direct = objective(b, x, y, {lambda, mu, s.kind}, s);
        EXPECT_NEAR(direct, aug, 1e-12 * aug);
    }
}

TEST(Fit, NullSolutionAboveThreshold) {
    std::mt19937_64 rng(43);
    const DenseMatrix x = random_matrix(15, 6, rng);
    const DenseVector y = random_vector(15, rng);
    const StructureMatrix s = build_structure(StructureKind::smooth_lasso(), 6);
    const FitResult r = fit(x, y, {lambda_max(x, y) * 1.01, 0.5, s.kind}, s);
    EXPECT_TRUE(r.converged);
    EXPECT_TRUE(r.active_set.empty());
    for (double v : r.beta) EXPECT_EQ(v, 0.0);
}

TEST(Fit, ScalarClosedForm) {
    const DenseMatrix x{{1.0}, {2.0}, {-1.0}, {0.5}};
    const DenseVector y{1.0, 3.0, -2.0, 0.0};
    const StructureMatrix s = build_structure(StructureKind::elastic_net(), 1);
    const double lambda = 0.4, mu = 0.25;
    const double xx = (1 + 4 + 1 + 0.25) / 4.0;
    const double xy = (1 + 6 + 2 + 0) / 4.0;
    const double expect = soft_threshold(xy, lambda / 2.0) / (xx + mu);
    SolverSettings st;
    st.kkt_tol = 1e-13;
    const FitResult r = fit(x, y, {lambda, mu, s.kind}, s, st);
    EXPECT_NEAR(r.beta[0], expect, 1e-12);
    const OracleResult o = kkt_oracle_fit(x, y, {lambda, mu, s.kind}, s);
    EXPECT_NEAR(o.beta[0], expect, 1e-12);
    EXPECT_TRUE(o.unique);
}

TEST(Fit, AgreesWithSignEnumerationOracle) {
    std::mt19937_64 rng(47);
    std::uniform_int_distribution<int> pd(2, 8), nd(5, 20);
    std::uniform_real_distribution<double> ud(0.05, 0.9), md(0.0, 2.0);
    for (int rep = 0; rep < 120; ++rep) {
        const int p = pd(rng), n = nd(rng);
        const DenseMatrix x = random_matrix(n, p, rng);
        const DenseVector y = random_vector(n, rng);
        const StructureMatrix s = structure_for(rep % 4, x);
        const double mu = rep % 4 == 0 ? 0.0 : md(rng);
        const PenaltyConfig cfg{ud(rng) * lambda_max(x, y), mu, s.kind};
        SolverSettings st;
        st.kkt_tol = 1e-10;
        const FitResult r = fit(x, y, cfg, s, st);
        ASSERT_TRUE(r.converged) << "rep " << rep;
        const OracleResult o = kkt_oracle_fit(x, y, cfg, s);
        EXPECT_LE(max_abs_diff(r.beta, o.beta), 1e-6) << "rep " << rep;
        const double fo = objective(o.beta, x, y, cfg, s);
        EXPECT_LE(std::abs(r.objective - fo), 1e-10 * std::abs(fo)) << "rep " << rep;
    }
}

TEST(Fit, ConvergedMeansIndependentKktHolds) {
    std::mt19937_64 rng(53);
    for (int rep = 0; rep < 40; ++rep) {
        const DenseMatrix x = random_matrix(20, 30, rng);
        const DenseVector y = random_vector(20, rng);
        const StructureMatrix s = structure_for(rep % 4, x);
        const PenaltyConfig cfg{0.2 * lambda_max(x, y), 0.3, s.kind};
        const FitResult r = fit(x, y, cfg, s);
        ASSERT_TRUE(r.converged);
        EXPECT_LE(r.kkt_residual, 1e-8);
        EXPECT_LE(augmented_kkt(r.beta, x, y, s, cfg.lambda, cfg.mu), 1e-8 * (1 + 1e-6));
        EXPECT_NEAR(r.objective, objective(r.beta, x, y, cfg, s), 1e-10 * r.objective);
        std::vector<std::size_t> support;
        for (std::size_t j = 0; j < r.beta.size(); ++j)
            if (r.beta[j] != 0.0) support.push_back(j);
        EXPECT_EQ(r.active_set, support);
    }
}

TEST(Fit, ZeroMuMatchesLasso) {
    std::mt19937_64 rng(59);
    for (int rep = 0; rep < 20; ++rep) {
        const DenseMatrix x = random_matrix(25, 12, rng);
        const DenseVector y = random_vector(25, rng);
        const double lambda = 0.1 * lambda_max(x, y);
        SolverSettings st;
        st.kkt_tol = 1e-11;
        const StructureMatrix lasso = build_structure(StructureKind::lasso(), 12);
        const FitResult ref = fit(x, y, {lambda, 0.0, lasso.kind}, lasso, st);
        for (int which = 1; which < 4; ++which) {
            const StructureMatrix s = structure_for(which, x);
            const FitResult r = fit(x, y, {lambda, 0.0, s.kind}, s, st);
            EXPECT_LE(max_abs_diff(r.beta, ref.beta), 1e-8);
        }
    }
}

TEST(Fit, ObjectiveTraceIsMonotone) {
    std::mt19937_64 rng(61);
    for (int rep = 0; rep < 10; ++rep) {
        const DenseMatrix x = random_matrix(30, 50, rng);
        const DenseVector y = random_vector(30, rng);
        const StructureMatrix s = structure_for(rep % 4, x);
        SolverSettings st;
        st.record_trace = true;
        const FitResult r = fit(x, y, {0.05 * lambda_max(x, y), 0.01, s.kind}, s, st);
        ASSERT_FALSE(r.objective_trace.empty());
        for (std::size_t k = 1; k < r.objective_trace.size(); ++k)
            EXPECT_LE(r.objective_trace[k], r.objective_trace[k - 1] + 1e-12 * std::abs(r.objective_trace[k - 1]));
    }
}

TEST(Fit, DeterministicAndWarmStartIndependent) {
    std::mt19937_64 rng(67);
    const DenseMatrix x = random_matrix(20, 15, rng);
    const DenseVector y = random_vector(20, rng);
    const StructureMatrix s = build_structure(StructureKind::smooth_lasso(), 15);
    const PenaltyConfig cfg{0.1 * lambda_max(x, y), 0.2, s.kind};
    const FitResult a = fit(x, y, cfg, s);
    const FitResult b = fit(x, y, cfg, s);
    EXPECT_EQ(a.beta, b.beta);
    EXPECT_EQ(a.iterations, b.iterations);
    const DenseVector warm = random_vector(15, rng);
    const FitResult c = fit(x, y, cfg, s, {}, &warm);
    EXPECT_LE(max_abs_diff(a.beta, c.beta), 1e-6);
}

TEST(Fit, NonConvergenceReportsBestIterate) {
    std::mt19937_64 rng(71);
    const DenseMatrix x = random_matrix(20, 40, rng);
    const DenseVector y = random_vector(20, rng);
    const StructureMatrix s = build_structure(StructureKind::lasso(), 40);
    SolverSettings st;
    st.max_iter = 3;
    const FitResult r = fit(x, y, {0.01 * lambda_max(x, y), 0.0, s.kind}, s, st);
    EXPECT_FALSE(r.converged);
    EXPECT_EQ(r.iterations, 3u);
    EXPECT_GT(r.kkt_residual, st.kkt_tol);
}

TEST(Fit, RejectsBadInput) {
    const StructureMatrix s = build_structure(StructureKind::lasso(), 2);
    const DenseMatrix x{{1, 2}, {3, 4}};
    EXPECT_THROW(fit(x, DenseVector{1, 2, 3}, {0.1, 0.0, s.kind}, s), DimensionError);
    EXPECT_THROW(fit(x, DenseVector{1, 2}, {-0.1, 0.0, s.kind}, s), std::invalid_argument);
    EXPECT_THROW(fit(x, DenseVector{1, 2}, {0.1, -1.0, s.kind}, s), std::invalid_argument);
    SolverSettings st;
    st.max_iter = 0;
    EXPECT_THROW(fit(x, DenseVector{1, 2}, {0.1, 0.0, s.kind}, s, st), std::invalid_argument);
}

TEST(KktOracle, HugeLambdaGivesZeroAndLargePRejected) {
    std::mt19937_64 rng(73);
    const DenseMatrix x = random_matrix(10, 4, rng);
    const DenseVector y = random_vector(10, rng);
    const StructureMatrix s = build_structure(StructureKind::elastic_net(), 4);
    const OracleResult o = kkt_oracle_fit(x, y, {1e6, 0.1, s.kind}, s);
    EXPECT_EQ(o.beta, DenseVector(4));
    const DenseMatrix big = random_matrix(20, 13, rng);
    const StructureMatrix s13 = build_structure(StructureKind::lasso(), 13);
    EXPECT_THROW(kkt_oracle_fit(big, random_vector(20, rng), {0.1, 0.0, s13.kind}, s13),
                 std::invalid_argument);
}

TEST(KktOracle, FlagsNonUniqueSolutions) {
    // duplicated column: any split of the weight between the twins is optimal
    const DenseMatrix x{{1, 1}, {2, 2}, {-1, -1}};
    const DenseVector y{1, 2, -1};
    const StructureMatrix s = build_structure(StructureKind::lasso(), 2);
    const OracleResult o = kkt_oracle_fit(x, y, {0.5, 0.0, s.kind}, s);
    EXPECT_FALSE(o.unique);
    EXPECT_EQ(o.beta[0] * o.beta[1], 0.0);
}

TEST(TvProx, TrivialCases) {
    const DenseVector v{0.3, -1.0, 2.0};
    EXPECT_EQ(tv_prox(v, 0.0), v);
    const DenseVector big = tv_prox(v, 1e6);
    for (double e : big) EXPECT_NEAR(e, (0.3 - 1.0 + 2.0) / 3.0, 1e-12);
}

TEST(TvProx, TwoPointProblem) {
    const DenseVector u = tv_prox(DenseVector{0.0, 2.0}, 0.5);
    EXPECT_NEAR(u[0], 0.5, 1e-15);
    EXPECT_NEAR(u[1], 1.5, 1e-15);
}

TEST(TvProx, MatchesDualOracle) {
    std::mt19937_64 rng(79);
    std::uniform_int_distribution<int> pd(1, 9);
    std::uniform_real_distribution<double> gd(0.0, 2.0);
    for (int rep = 0; rep < 200; ++rep) {
        const DenseVector v = scale(random_vector(pd(rng), rng), 2.0);
        const double gamma = gd(rng);
        EXPECT_LE(max_abs_diff(tv_prox(v, gamma), tv_prox_dual_oracle(v, gamma)), 1e-8)
            << "rep " << rep;
    }
}

TEST(TvProx, LongSignalOptimality) {
    // optimality of u: the dual z from cumulative residuals stays inside [-gamma, gamma]
    std::mt19937_64 rng(83);
    for (int rep = 0; rep < 20; ++rep) {
        const DenseVector v = scale(random_vector(500, rng), 3.0);
        const double gamma = 0.7;
        const DenseVector u = tv_prox(v, gamma);
        double z = 0.0;
        for (std::size_t i = 0; i + 1 < v.size(); ++i) {
            z += u[i] - v[i];
            EXPECT_LE(std::abs(z), gamma + 1e-9);
            if (u[i + 1] > u[i]) EXPECT_NEAR(z, gamma, 1e-9);
            if (u[i + 1] < u[i]) EXPECT_NEAR(z, -gamma, 1e-9);
        }
        z += u[v.size() - 1] - v[v.size() - 1];
        EXPECT_NEAR(z, 0.0, 1e-9);
    }
}

TEST(FusedLasso, ZeroFusionMatchesLasso) {
    std::mt19937_64 rng(89);
    for (int rep = 0; rep < 10; ++rep) {
        const DenseMatrix x = random_matrix(25, 10, rng);
        const DenseVector y = random_vector(25, rng);
        const double lambda = 0.1 * lambda_max(x, y);
        SolverSettings st;
        st.kkt_tol = 1e-11;
        const StructureMatrix s = build_structure(StructureKind::lasso(), 10);
        const FitResult ref = fit(x, y, {lambda, 0.0, s.kind}, s, st);
        const FitResult r = fused_lasso_fit(x, y, lambda, 0.0, st);
        EXPECT_TRUE(r.converged);
        EXPECT_LE(max_abs_diff(r.beta, ref.beta), 1e-8);
    }
}

TEST(FusedLasso, OrthogonalDesignIsProx) {
    const std::size_t n = 6;
    const DenseMatrix x = add(DenseMatrix(n, n), DenseMatrix::identity(n), std::sqrt(6.0));
    const DenseVector y{1.0, 2.5, 2.4, -1.0, 0.0, 0.3};
    const double mu = 0.4;
    const FitResult r = fused_lasso_fit(x, y, 0.0, mu);
    EXPECT_TRUE(r.converged);
    const DenseVector expect = tv_prox(scale(y, 1.0 / std::sqrt(6.0)), mu / 2.0);
    EXPECT_LE(max_abs_diff(r.beta, expect), 1e-8);
}

TEST(FusedLasso, NoCoordinateOrBlockMoveImproves) {
    std::mt19937_64 rng(97);
    for (int rep = 0; rep < 30; ++rep) {
        const std::size_t p = 2 + rep % 5;
        const DenseMatrix x = random_matrix(12, p, rng);
        const DenseVector y = random_vector(12, rng);
        const double lambda = 0.1 * lambda_max(x, y), mu = 0.3;
        const FitResult r = fused_lasso_fit(x, y, lambda, mu);
        ASSERT_TRUE(r.converged);
        for (std::size_t a = 0; a < p; ++a) {
            for (std::size_t b = a; b < p; ++b) {
                for (double h : {1e-3, -1e-3, 1e-5, -1e-5}) {
                    DenseVector t = r.beta;
                    for (std::size_t j = a; j <= b; ++j) t[j] += h;
                    EXPECT_GE(fused_objective(t, x, y, lambda, mu), r.objective - 1e-10);
                }
            }
        }
    }
}
