#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "quadlasso/tuning.hpp"
#include "test_support.hpp"

using namespace quadlasso;
using quadlasso::testing::random_matrix;
using quadlasso::testing::random_vector;

namespace {

const TuningVariant kAll[] = {TuningVariant::RestrictedEigen, TuningVariant::Balanced,
                              TuningVariant::Coherence,       TuningVariant::Estimation,
                              TuningVariant::SignRecovery,    TuningVariant::SupportInclusion,
                              TuningVariant::FiniteVariance,  TuningVariant::Experimental};

double golden_section_min(double (*f)(double, double), double arg, double lo, double hi) {
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - g * (b - a), d = a + g * (b - a);
    for (int i = 0; i < 300; ++i) {
        if (f(c, arg) < f(d, arg)) {
            b = d;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        d = a + g * (b - a);
    }
    return f(0.5 * (a + b), arg);
}

double nem_objective(double q, double p) { return (q - 1.0) * std::pow(p, 2.0 / q); }

}  // namespace

TEST(TheoreticalLambda, DirectEvaluation) {
    EXPECT_NEAR(theoretical_lambda(1.0, 100, 8, 0.05, TuningVariant::RestrictedEigen),
                4.0 * std::sqrt(2.0) * std::sqrt(std::log(160.0) / 100.0), 1e-14);
    EXPECT_NEAR(theoretical_lambda(1.0, 100, 8, 0.05, TuningVariant::RestrictedEigen), 1.2744,
                1e-4);
}

TEST(TheoreticalLambda, LogCollapsesToTwo) {
    const std::size_t p = 2;
    const double eta = 2.0 / std::exp(2.0);
    EXPECT_NEAR(theoretical_lambda(1.0, 100, p, eta, TuningVariant::RestrictedEigen),
                4.0 * std::sqrt(2.0) * std::sqrt(2.0 / 100.0), 1e-14);
}

TEST(TheoreticalLambda, ExperimentalIgnoresEta) {
    const double expect = 2.0 * std::sqrt(2.0) * 3.0 * std::sqrt(std::log(100.0) / 30.0);
    EXPECT_NEAR(theoretical_lambda(3.0, 30, 100, 0.5, TuningVariant::Experimental), expect, 1e-14);
    EXPECT_NEAR(theoretical_lambda(3.0, 30, 100, 0.01, TuningVariant::Experimental), expect, 1e-14);
}

TEST(TheoreticalLambda, ConstantsPerVariant) {
    const double root = std::sqrt(std::log(50.0 / 0.1) / 40.0);
    EXPECT_NEAR(theoretical_lambda(1, 40, 50, 0.1, TuningVariant::Coherence),
                8 * std::sqrt(2.0) * root, 1e-14);
    EXPECT_NEAR(theoretical_lambda(1, 40, 50, 0.1, TuningVariant::Estimation),
                2 * std::sqrt(2.0) * root, 1e-14);
    EXPECT_NEAR(theoretical_lambda(1, 40, 50, 0.1, TuningVariant::SupportInclusion),
                16 * std::sqrt(std::log(50.0 / std::sqrt(0.1 * 50.0 / 51.0)) / 40.0), 1e-14);
    EXPECT_NEAR(theoretical_lambda(1, 40, 50, 0.1, TuningVariant::FiniteVariance, 2.0),
                nongaussian_lambda(1, 40, 50, 0.1, 2.0), 1e-15);
}

TEST(TheoreticalLambda, RejectsInvalidRanges) {
    EXPECT_THROW(theoretical_lambda(0.0, 10, 5, 0.1, TuningVariant::RestrictedEigen),
                 std::invalid_argument);
    EXPECT_THROW(theoretical_lambda(1.0, 10, 1, 0.1, TuningVariant::RestrictedEigen),
                 std::invalid_argument);
    EXPECT_THROW(theoretical_lambda(1.0, 10, 5, 1.0, TuningVariant::RestrictedEigen),
                 std::invalid_argument);
    EXPECT_THROW(theoretical_lambda(1.0, 0.5, 5, 0.1, TuningVariant::RestrictedEigen),
                 std::invalid_argument);
    EXPECT_THROW(theoretical_lambda(1.0, 10, 5, 0.1, TuningVariant::FiniteVariance),
                 std::invalid_argument);
}

TEST(TheoreticalLambda, Monotonicity) {
    for (TuningVariant v : kAll) {
        const std::optional<double> l = 1.3;
        for (double n : {10.0, 50.0, 200.0}) {
            for (std::size_t p : {5u, 40u, 300u}) {
                for (double eta : {0.05, 0.2, 0.6}) {
                    const double base = theoretical_lambda(1.0, n, p, eta, v, l);
                    EXPECT_GT(base, theoretical_lambda(1.0, n * 1.5, p, eta, v, l));
                    EXPECT_LT(base, theoretical_lambda(1.0, n, p * 2, eta, v, l));
                    if (v != TuningVariant::Experimental)
                        EXPECT_GT(base, theoretical_lambda(1.0, n, p, eta * 1.2, v, l));
                }
            }
        }
    }
}

TEST(TheoreticalMu, Examples) {
    EXPECT_DOUBLE_EQ(theoretical_mu(1.0, 4, 1.0, TuningVariant::Balanced), 1.0);
    EXPECT_DOUBLE_EQ(theoretical_mu(0.8, 1, 0.1, TuningVariant::Coherence), 1.0);
    EXPECT_DOUBLE_EQ(theoretical_mu(0.8, 1, 0.1, TuningVariant::SignRecovery), 2.0);
    EXPECT_THROW(theoretical_mu(1.0, 4, 0.0, TuningVariant::Balanced), UnpenalizedStructureError);
    EXPECT_THROW(theoretical_mu(0.0, 4, 1.0, TuningVariant::Balanced), std::invalid_argument);
    EXPECT_THROW(theoretical_mu(1.0, 0, 1.0, TuningVariant::Balanced), std::invalid_argument);
}

TEST(TheoreticalMu, IncreasingSmoothTruth) {
    // b*_j = (4 + 0.1 j)^2 on the first 40 of 500 coordinates; J~ is the path Laplacian
    std::vector<double> b(500, 0.0);
    for (int j = 1; j <= 40; ++j) b[j - 1] = (4.0 + 0.1 * j) * (4.0 + 0.1 * j);
    double ss = 0.0;
    for (std::size_t j = 0; j < b.size(); ++j) {
        const double left = j == 0 ? 0.0 : b[j] - b[j - 1];
        const double right = j + 1 == b.size() ? 0.0 : b[j] - b[j + 1];
        ss += (left + right) * (left + right);
    }
    const double lambda = 0.7;
    EXPECT_NEAR(theoretical_mu(lambda, 40, std::sqrt(ss), TuningVariant::Balanced),
                lambda * std::sqrt(40.0) / (2.0 * std::sqrt(ss)), 1e-15);
}

TEST(KNem, EightMatchesGoldenSection) {
    const KNem k = k_nem_detail(8);
    EXPECT_TRUE(k.interior);
    EXPECT_NEAR(k.value, golden_section_min(nem_objective, 8.0, 2.0, 50.0), 1e-10);
    EXPECT_NEAR(k.value, 7.918, 1.5e-3);
    EXPECT_NEAR(k.q, 2.486, 1e-3);
}

TEST(KNem, TwoUsesBoundary) {
    const KNem k = k_nem_detail(2);
    EXPECT_FALSE(k.interior);
    EXPECT_DOUBLE_EQ(k.value, 2.0);
    EXPECT_NEAR(k.value, golden_section_min(nem_objective, 2.0, 2.0, 50.0), 1e-10);
    EXPECT_THROW(k_nem(1), std::invalid_argument);
}

TEST(KNem, BracketAndStationarity) {
    for (std::size_t p : {8u, 100u, 1000u, 4088u}) {
        const KNem k = k_nem_detail(p);
        const double lp = std::log(static_cast<double>(p));
        EXPECT_GT(k.value, 2 * std::numbers::e * lp - 3 * std::numbers::e);
        EXPECT_LT(k.value, 2 * std::numbers::e * lp - std::numbers::e);
        ASSERT_TRUE(k.interior);
        const double h = 1e-6 * k.q;
        const double dp = static_cast<double>(p);
        const double deriv = (nem_objective(k.q + h, dp) - nem_objective(k.q - h, dp)) / (2 * h);
        EXPECT_LE(std::abs(deriv), 1e-6 * k.value);
    }
}

TEST(NongaussianLambda, Examples) {
    const double kn = k_nem(8);
    EXPECT_NEAR(nongaussian_lambda(1.0, kn, 8, 1.0, 1.0), 4.0, 1e-14);
    EXPECT_NEAR(nongaussian_lambda(1.0, 100, 8, 0.1, 1.0), 4.0 * std::sqrt(kn / 10.0), 1e-14);
    EXPECT_NEAR(nongaussian_lambda(1.0, 100, 8, 0.1, 1.0), 3.56, 5e-3);
    EXPECT_GT(nongaussian_lambda(1.0, 100, 8, 0.1, 1.0), nongaussian_lambda(1.0, 200, 8, 0.1, 1.0));
    EXPECT_LT(nongaussian_lambda(1.0, 100, 8, 0.1, 1.0), nongaussian_lambda(1.0, 100, 80, 0.1, 1.0));
}

TEST(EventLambdas, Formulas) {
    EXPECT_NEAR(gaussian_event_lambda(2.0, 50, 100, 0.1, 0.5),
                4.0 * std::sqrt(2.0) * 2.0 * std::sqrt(std::log(1000.0) / 50.0), 1e-13);
    EXPECT_NEAR(finite_variance_event_lambda(1.0, 50, 100, 0.1, 0.5, 3.0),
                4.0 * std::sqrt(k_nem(100) * 3.0 / 5.0), 1e-13);
}

TEST(Grids, Shapes) {
    const auto g = log_grid(1e-3, 1.0, 4);
    ASSERT_EQ(g.size(), 4u);
    EXPECT_DOUBLE_EQ(g[0], 1.0);
    EXPECT_NEAR(g[1], 0.1, 1e-15);
    EXPECT_DOUBLE_EQ(g[3], 1e-3);
    const auto mu = default_mu_grid();
    ASSERT_EQ(mu.size(), 21u);
    EXPECT_EQ(mu[0], 0.0);
    EXPECT_DOUBLE_EQ(mu[1], 1e-4);
    EXPECT_DOUBLE_EQ(mu[20], 10.0);
}

TEST(Grids, NullLambdaZeroesFit) {
    std::mt19937_64 rng(3);
    const DenseMatrix x = random_matrix(20, 10, rng);
    const DenseVector y = random_vector(20, rng);
    const auto grid = default_lambda_grid(x, y);
    ASSERT_EQ(grid.size(), 50u);
    const StructureMatrix s = build_structure(StructureKind::lasso(), 10);
    EXPECT_TRUE(fit(x, y, {grid.front() * (1 + 1e-12), 0.0, s.kind}, s).active_set.empty());
    EXPECT_FALSE(fit(x, y, {grid.front() * 0.95, 0.0, s.kind}, s).active_set.empty());
}

TEST(Folds, BalancedAndDeterministic) {
    const auto a = fold_assignment(23, 5, 99);
    EXPECT_EQ(a, fold_assignment(23, 5, 99));
    EXPECT_NE(a, fold_assignment(23, 5, 100));
    std::vector<int> counts(5, 0);
    for (auto f : a) ++counts[f];
    for (int c : counts) EXPECT_TRUE(c == 4 || c == 5);
}

TEST(CrossValidate, SingleCellWins) {
    std::mt19937_64 rng(5);
    const DenseMatrix x = random_matrix(20, 6, rng);
    const DenseVector y = random_vector(20, rng);
    const StructureMatrix s = build_structure(StructureKind::smooth_lasso(), 6);
    const CVResult r = cross_validate(x, y, s, {0.3}, {0.2}, 4, 1);
    EXPECT_EQ(r.best_lambda, 0.3);
    EXPECT_EQ(r.best_mu, 0.2);
    ASSERT_EQ(r.cv_error_surface.size(), 1u);
    EXPECT_EQ(r.cv_error_surface[0].fold_errors.size(), 4u);
}

TEST(CrossValidate, ZeroMuGridIsLassoCv) {
    std::mt19937_64 rng(7);
    const DenseMatrix x = random_matrix(30, 8, rng);
    const DenseVector y = random_vector(30, rng);
    const auto lambdas = default_lambda_grid(x, y, 10);
    SolverSettings st;
    st.kkt_tol = 1e-11;
    const StructureMatrix sl = build_structure(StructureKind::smooth_lasso(), 8);
    const StructureMatrix la = build_structure(StructureKind::lasso(), 8);
    const CVResult a = cross_validate(x, y, sl, lambdas, {0.0}, 5, 3, st);
    const CVResult b = cross_validate(x, y, la, lambdas, {0.0}, 5, 3, st);
    EXPECT_EQ(a.best_lambda, b.best_lambda);
    for (std::size_t i = 0; i < a.cv_error_surface.size(); ++i)
        EXPECT_NEAR(a.cv_error_surface[i].mean_error, b.cv_error_surface[i].mean_error, 1e-9);
}

TEST(CrossValidate, SurfaceIsFoldAverageAndDeterministic) {
    std::mt19937_64 rng(11);
    const DenseMatrix x = random_matrix(24, 10, rng);
    const DenseVector y = random_vector(24, rng);
    const StructureMatrix s = build_structure(StructureKind::elastic_net(), 10);
    const auto lambdas = default_lambda_grid(x, y, 6);
    const std::vector<double> mus{0.0, 0.1, 1.0};
    const CVResult a = cross_validate(x, y, s, lambdas, mus, 6, 42);
    const CVResult b = cross_validate(x, y, s, lambdas, mus, 6, 42);
    ASSERT_EQ(a.cv_error_surface.size(), 18u);
    double best = 1e300;
    for (std::size_t i = 0; i < 18; ++i) {
        const CVCell& c = a.cv_error_surface[i];
        EXPECT_EQ(c.mean_error, b.cv_error_surface[i].mean_error);
        ASSERT_EQ(c.fold_errors.size(), 6u);
        double sum = 0.0;
        for (double e : c.fold_errors) sum += e;
        EXPECT_DOUBLE_EQ(c.mean_error, sum / 6.0);
        best = std::min(best, c.mean_error);
    }
    const CVCell& chosen = a.cv_error_surface[best_cell(a.cv_error_surface)];
    EXPECT_EQ(chosen.mean_error, best);
    EXPECT_EQ(chosen.lambda, a.best_lambda);
    EXPECT_EQ(chosen.mu, a.best_mu);
}

TEST(CrossValidate, TiesPreferMoreRegularization) {
    std::vector<CVCell> cells(4);
    cells[0] = {0.1, 0.0, 1.0, 0.0, {}};
    cells[1] = {0.5, 0.0, 1.0, 0.0, {}};
    cells[2] = {0.5, 2.0, 1.0, 0.0, {}};
    cells[3] = {0.9, 0.0, 1.5, 0.0, {}};
    EXPECT_EQ(best_cell(cells), 2u);
}

TEST(CrossValidate, RejectsBadFolds) {
    std::mt19937_64 rng(13);
    const DenseMatrix x = random_matrix(5, 3, rng);
    const DenseVector y = random_vector(5, rng);
    const StructureMatrix s = build_structure(StructureKind::lasso(), 3);
    EXPECT_THROW(cross_validate(x, y, s, {0.1}, {0.0}, 1, 0), std::invalid_argument);
    EXPECT_THROW(cross_validate(x, y, s, {0.1}, {0.0}, 6, 0), std::invalid_argument);
    EXPECT_THROW(cross_validate(x, y, s, {}, {0.0}, 2, 0), std::invalid_argument);
}

TEST(CrossValidate, FusedRuns) {
    std::mt19937_64 rng(17);
    const DenseMatrix x = random_matrix(20, 8, rng);
    const DenseVector y = random_vector(20, rng);
    const CVResult r =
        cross_validate_fused(x, y, default_lambda_grid(x, y, 5), {0.0, 0.1}, 4, 9);
    EXPECT_EQ(r.cv_error_surface.size(), 10u);
}
