#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "quadlasso/numkernel.hpp"
#include "quadlasso/structure.hpp"

namespace quadlasso {

// Criterion convention: |y - X b|^2 / n + lambda |b|_1 + mu b' J~ b.
// Because the loss carries 1/n without a 1/2, the stationarity condition reads
// |(K b - X'y/n)_j| <= lambda / 2, with K = X'X/n + mu J~. Most Lasso software
// uses 1/(2n) instead, which halves lambda relative to this library.

struct PenaltyConfig {
    double lambda = 0.0;
    double mu = 0.0;
    StructureKind structure;
};

struct SolverSettings {
    std::size_t max_iter = 50000;
    double kkt_tol = 1e-8;
    bool restart = true;
    bool record_trace = false;
};

struct FitResult {
    DenseVector beta;
    double objective = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    double kkt_residual = 0.0;
    std::vector<std::size_t> active_set;
    std::vector<double> objective_trace;  // filled when SolverSettings::record_trace
};

/// No sign pattern passed verification in kkt_oracle_fit.
class DegenerateProblemError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct OracleResult {
    DenseVector beta;
    bool unique = true;  // false when several sign patterns verified
};

double soft_threshold(double z, double t);

double objective(const DenseVector& beta, const DenseMatrix& x, const DenseVector& y,
                 const PenaltyConfig& cfg, const StructureMatrix& s);

/// Subgradient violation: |g_j + lambda sign(b_j)| on the support, max(|g_j| - lambda, 0)
/// off it, with g = (2/n) X~'(X~ b - y~) recomputed from X and y.
double kkt_residual(const DenseVector& beta, const DenseMatrix& x, const DenseVector& y,
                    const PenaltyConfig& cfg, const StructureMatrix& s);

/// Accelerated proximal gradient with backtracking and function-value restart.
/// `warm_start` only changes the starting point, never the problem.
FitResult fit(const DenseMatrix& x, const DenseVector& y, const PenaltyConfig& cfg,
              const StructureMatrix& s, const SolverSettings& settings = {},
              const DenseVector* warm_start = nullptr);

namespace detail {
struct GramForm;
}

/// Gram-form data of one problem (X'X/n + mu J~, X'y/n, |y|^2/n and the top eigenvalue),
/// built once and shared by every lambda of a path. Keeps references to x, y and s, which
/// must outlive it.
class PreparedProblem {
public:
    PreparedProblem(const DenseMatrix& x, const DenseVector& y, const StructureMatrix& s,
                    double mu);
    /// No quadratic term; the form used by the fused lasso.
    PreparedProblem(const DenseMatrix& x, const DenseVector& y);

    const DenseMatrix& x() const noexcept { return *x_; }
    const DenseVector& y() const noexcept { return *y_; }
    const StructureMatrix* structure() const noexcept { return s_; }
    double mu() const noexcept { return mu_; }
    const detail::GramForm& form() const noexcept { return *form_; }

private:
    const DenseMatrix* x_;
    const DenseVector* y_;
    const StructureMatrix* s_ = nullptr;
    double mu_ = 0.0;
    std::shared_ptr<const detail::GramForm> form_;
};

/// Same as fit(x, y, {lambda, mu, s}, s, ...) on a prepared problem.
FitResult fit(const PreparedProblem& prob, double lambda, const SolverSettings& settings = {},
              const DenseVector* warm_start = nullptr);

/// Exhaustive search over the 3^p sign patterns; each pattern solves the stationarity
/// system on its support and is kept only if signs and the off-support bound check out.
OracleResult kkt_oracle_fit(const DenseMatrix& x, const DenseVector& y, const PenaltyConfig& cfg,
                            const StructureMatrix& s);

/// argmin_u 0.5 |u - v|^2 + gamma sum_j |u_j - u_{j-1}|.
DenseVector tv_prox(const DenseVector& v, double gamma);

/// |y - X b|^2 / n + lambda |b|_1 + mu_fuse sum_j |b_j - b_{j-1}|.
double fused_objective(const DenseVector& beta, const DenseMatrix& x, const DenseVector& y,
                       double lambda, double mu_fuse);

/// kkt_residual holds the prox-gradient mapping norm |L (b - prox(b - grad/L))|_inf.
FitResult fused_lasso_fit(const DenseMatrix& x, const DenseVector& y, double lambda,
                          double mu_fuse, const SolverSettings& settings = {},
                          const DenseVector* warm_start = nullptr);
/// `prob` must be built without a quadratic term.
FitResult fused_lasso_fit(const PreparedProblem& prob, double lambda, double mu_fuse,
                          const SolverSettings& settings = {},
                          const DenseVector* warm_start = nullptr);

}  // namespace quadlasso
