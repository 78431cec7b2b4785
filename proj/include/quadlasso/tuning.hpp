#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "quadlasso/solver.hpp"

namespace quadlasso {

/// Which calibration of (lambda, mu) to use. The constant in front of
/// sigma sqrt(log(p/eta)/n) differs with the guarantee it is meant to deliver.
enum class TuningVariant {
    RestrictedEigen,     // lambda 4 sqrt2; prediction / seminorm / l1 risk bounds
    Balanced,            // same lambda, mu chosen to balance the two penalty terms
    Coherence,           // lambda 8 sqrt2, mu = lambda / (8 |J~b*|_inf)
    Estimation,          // lambda 2 sqrt2; l2 and sup-norm estimation bounds
    SignRecovery,        // lambda 4 sqrt2, mu = lambda / (4 |J~b*|_inf)
    SupportInclusion,    // lambda 16 sqrt(log(p / sqrt(eta p / (1 + p))) / n)
    FiniteVariance,      // lambda 4 sigma sqrt(K_Nem L / (n eta))
    Experimental,        // lambda 2 sqrt2 sigma sqrt(log p / n), no eta
};

std::string_view to_string(TuningVariant v);
std::optional<TuningVariant> parse_tuning_variant(std::string_view name);

/// |J~ b*| is zero, so the mu formulas divide by zero; the caller has to pick mu.
class UnpenalizedStructureError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

struct TheoreticalTuning {
    double lambda_n = 0.0;
    double mu_n = 0.0;
    double eta = 0.0;
    TuningVariant variant = TuningVariant::RestrictedEigen;
};

/// `l_stat` (the design statistic n^-1 sum_i max_j x_ij^2) is required for FiniteVariance.
double theoretical_lambda(double sigma, double n, std::size_t p, double eta, TuningVariant v,
                          std::optional<double> l_stat = std::nullopt);

/// `structure_norm` is |J~ b*|_2 for Balanced, RestrictedEigen, Estimation, FiniteVariance
/// and Experimental, and |J~ b*|_inf for the other variants.
double theoretical_mu(double lambda, std::size_t sparsity, double structure_norm, TuningVariant v);

/// True when theoretical_mu expects the sup norm of J~ b*.
bool mu_uses_sup_norm(TuningVariant v);

struct KNem {
    double value = 0.0;
    double q = 2.0;         // minimizer of (q - 1) p^(2/q) over q >= 2
    bool interior = false;  // q is a stationary point rather than the boundary q = 2
};

KNem k_nem_detail(std::size_t p);
double k_nem(std::size_t p);

double nongaussian_lambda(double sigma, double n, std::size_t p, double eta, double l_stat);

/// lambda making P(max_j 2|X_j' eps / n| <= tau lambda) >= 1 - eta for Gaussian noise.
double gaussian_event_lambda(double sigma, double n, std::size_t p, double eta, double tau);
/// Same event for zero-mean finite-variance noise, through the Nemirovski moment bound.
double finite_variance_event_lambda(double sigma, double n, std::size_t p, double eta, double tau,
                                    double l_stat);

/// `count` log-spaced points from hi down to lo.
std::vector<double> log_grid(double lo, double hi, std::size_t count);
/// 2 max_j |X_j'y| / n, the smallest lambda giving the all-zero fit.
double null_lambda(const DenseMatrix& x, const DenseVector& y);
std::vector<double> default_lambda_grid(const DenseMatrix& x, const DenseVector& y,
                                        std::size_t count = 50, double ratio = 1e-3);
std::vector<double> default_mu_grid(std::size_t count = 20, double lo = 1e-4, double hi = 10.0);

struct CVCell {
    double lambda = 0.0;
    double mu = 0.0;
    double mean_error = 0.0;
    double std_error = 0.0;  // sample standard deviation across folds
    std::vector<double> fold_errors;
};

struct CVResult {
    double best_lambda = 0.0;
    double best_mu = 0.0;
    std::vector<CVCell> cv_error_surface;  // lambda-major, in grid order
    std::size_t folds = 0;
};

/// Fold k holds the rows whose position in a seeded permutation is k mod folds.
std::vector<std::size_t> fold_assignment(std::size_t n, std::size_t folds, std::uint64_t seed);

CVResult cross_validate(const DenseMatrix& x, const DenseVector& y, const StructureMatrix& s,
                        const std::vector<double>& lambda_grid, const std::vector<double>& mu_grid,
                        std::size_t folds, std::uint64_t seed, const SolverSettings& settings = {});

/// Cross-validation over (lambda, mu_fuse) for the fused-lasso comparator.
CVResult cross_validate_fused(const DenseMatrix& x, const DenseVector& y,
                              const std::vector<double>& lambda_grid,
                              const std::vector<double>& mu_grid, std::size_t folds,
                              std::uint64_t seed, const SolverSettings& settings = {});

/// Index of the best cell: smallest mean error, ties to larger lambda, then larger mu.
std::size_t best_cell(const std::vector<CVCell>& cells);

}  // namespace quadlasso
