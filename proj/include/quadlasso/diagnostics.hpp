#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "quadlasso/noise.hpp"
#include "quadlasso/solver.hpp"
#include "quadlasso/tuning.hpp"

namespace quadlasso {

using IndexSet = std::vector<std::size_t>;

/// Psi = X'X / n and the expanded Gram matrix Kn = Psi + mu J~.
struct GramPair {
    DenseMatrix psi;
    DenseMatrix kn;
    double mu = 0.0;
};

GramPair build_gram(const DenseMatrix& x, const StructureMatrix& s, double mu);
/// Same, starting from a given Psi (population or hand-built Gram matrices).
GramPair gram_from_psi(const DenseMatrix& psi, const StructureMatrix& s, double mu);

enum class ConeKind {
    Quadratic,  // |D_{Theta^c}|_1 <= rho |D_Theta|_2
    Linear,     // |D_{Theta^c}|_1 <= rho |D_Theta|_1, rho = 4 for the restricted-eigenvalue cone
};

struct ConeSpec {
    IndexSet theta;
    double rho_n = 0.0;
    ConeKind cone_kind = ConeKind::Quadratic;
    IndexSet ratio_set;  // Rayleigh denominator support; empty means theta
};

struct PhiEstimate {
    double phi_estimate = 0.0;     // min over sampled cone directions: an upper estimate
    double phi_lower_bound = 0.0;  // max(lambda_min(Kn), 0): certified
};

/// Thrown when phi <= 0, so no bound can be evaluated.
class AssumptionFailedError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

PhiEstimate estimate_phi(const GramPair& g, const ConeSpec& cone, std::size_t samples = 500,
                         std::uint64_t seed = 0);

struct CoherenceCheck {
    double t = 0.0;  // |A*| max_{j in A*, k not in A*} |Kn_jk|
    bool passes = false;
    double phi_for_threshold = 0.0;
    double mutual_coherence_t = 0.0;  // |A*| max_{j in A*, k != j} |Kn_jk|
};

CoherenceCheck coherence_check(const GramPair& g, const IndexSet& astar);

/// n^-1 sum_i max_j x_ij^2.
double assumption_E_L(const DenseMatrix& x);

/// A* = {j : beta_j != 0}.
IndexSet support_of(const DenseVector& beta);

/// A* together with every index coupled to it through J~. Gives A* for the Lasso and
/// Elastic-Net and A* plus its neighbours for the Smooth-Lasso.
IndexSet neighbor_set(const DenseVector& beta_star, const StructureMatrix& s);

/// The m largest |delta_j| outside b (m defaults to |b|); requires m + |b| < p.
IndexSet largest_outside(const DenseVector& delta, const IndexSet& b,
                         std::optional<std::size_t> m = std::nullopt);

/// 4 sqrt|A*| + (4 mu / lambda) |J~ b*|_2.
double cone_radius(double lambda, double mu, std::size_t sparsity, double structure_norm2);

/// 2 / phi * (1 + rho / sqrt(m)).
double c_tilde(double phi, double rho_n, std::size_t m);

struct BoundRecord {
    TuningVariant variant = TuningVariant::Balanced;
    double phi = 0.0;
    double rho_n = 0.0;
    std::size_t sparsity = 0;
    bool degenerate = false;  // lambda = 0
    std::optional<double> prediction;
    std::optional<double> seminorm;
    std::optional<double> l1;
    std::optional<double> l2;    // whole vector, or restricted to A* for the sign variants
    std::optional<double> sup;
    std::optional<double> c_tilde;
};

struct BoundOptions {
    /// Size of the set C; enables the l2 / sup bounds of the sparse-J~ variants.
    std::optional<std::size_t> m;
};

/// Right-hand sides of the risk bounds attached to `variant`, evaluated at phi.
BoundRecord evaluate_bounds(const DenseVector& beta_star, const StructureMatrix& s, double lambda,
                            double mu, double phi, TuningVariant variant,
                            const BoundOptions& opts = {});

struct ThresholdResult {
    DenseVector beta;
    IndexSet selected;
    double threshold = 0.0;
};

/// Zeros every |beta_j| < threshold.
ThresholdResult threshold_select(const DenseVector& beta, double threshold);
/// threshold = c_tilde (lambda sqrt(sparsity) + mu |J~ b*|_2).
ThresholdResult threshold_select(const FitResult& fit, double c_tilde, double lambda, double mu,
                                 std::size_t sparsity, double structure_norm2);

struct SignReport {
    bool all_match = false;
    IndexSet mismatches;
    bool support_match = false;     // signs agree on A*
    bool support_included = false;  // {j : beta_hat_j != 0} is inside A*
};

SignReport sign_consistency(const DenseVector& beta_hat, const DenseVector& beta_star);

/// Frequency of max_j 2 |X_j' eps / n| <= tau lambda over fresh noise draws.
double concentration_event_rate(const DenseMatrix& x, double sigma, double lambda, double tau,
                                NoiseKind noise, std::size_t replications, std::uint64_t seed);

struct DiagnoseOptions {
    std::optional<DenseVector> beta_star;
    std::optional<IndexSet> astar;
    std::optional<double> lambda;  // defaults to the theoretical value of `variant`
    TuningVariant variant = TuningVariant::Balanced;
    double sigma = 1.0;
    double eta = 0.1;
    std::size_t samples = 500;
    std::uint64_t seed = 0;
};

struct DiagnosticsReport {
    std::size_t n = 0;
    std::size_t p = 0;
    double mu = 0.0;
    double phi_estimate = 0.0;
    double phi_lower_bound = 0.0;
    IndexSet theta;
    double rho_n = 0.0;
    std::optional<CoherenceCheck> coherence;
    double L = 0.0;
    double k_nem = 0.0;
    double psi_eig_min = 0.0;
    double psi_eig_max = 0.0;
    double kn_eig_min = 0.0;
    double kn_eig_max = 0.0;
    std::optional<double> alpha;
    std::optional<double> lambda;
    std::optional<BoundRecord> bound_values;
};

DiagnosticsReport diagnose(const DenseMatrix& x, const StructureMatrix& s, double mu,
                           const DiagnoseOptions& opts = {});

}  // namespace quadlasso
