#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "quadlasso/diagnostics.hpp"
#include "quadlasso/noise.hpp"
#include "quadlasso/solver.hpp"

namespace quadlasso {

enum class Example { A, B, C, D, PseudoReal1, PseudoReal2 };

std::string_view to_string(Example e);
std::optional<Example> parse_example(std::string_view name);

struct ExampleSpec {
    Example example = Example::A;
    std::size_t p = 8;
    std::size_t n = 20;
    double sigma = 1.0;
    double rho = 0.5;  // Example A only
    std::uint64_t seed = 0;
    NoiseKind noise = NoiseKind::Gaussian;
};

/// Throws std::invalid_argument naming the offending field.
void validate(const ExampleSpec& spec);

struct TruthInstance {
    Example example = Example::A;
    DenseVector beta_star;
    IndexSet astar;
    DenseMatrix psi_true;
    DenseMatrix psi_chol;  // lower Cholesky factor of psi_true; empty for Example B
    double alpha = 0.0;    // sum of squared successive differences of beta*
};

TruthInstance make_truth(const ExampleSpec& spec);

/// Training and test data of one replication, drawn from seeds derived from (spec.seed, r).
struct ReplicationData {
    DenseMatrix x;
    DenseVector y;
    DenseMatrix x_test;
    DenseVector y_test;
};

ReplicationData draw_replication(const ExampleSpec& spec, const TruthInstance& truth,
                                 std::size_t r);

/// Rows i.i.d. N(0, Psi), columns then rescaled so that |X_j|_n^2 = 1.
DenseMatrix sample_design(const TruthInstance& truth, std::size_t n, std::uint64_t seed);

/// Rescales every nonzero column to |X_j|_n^2 = 1.
void standardize_columns(DenseMatrix& x);

/// Ones up to n/4 - 1, then the linear ramp 1 - (4/n)(j - n/4) for j = n/4 .. n/2 - 1.
DenseVector piecewise_linear_truth(std::size_t n);

/// Unit diagonal with eps on the first off-diagonals.
DenseMatrix tridiagonal_gram(std::size_t p, double eps);

enum class Method { Lasso, SLasso, ElasticNet, FusedLasso };
enum class TuningMode { Th, Cv, Est };

std::string_view to_string(Method m);
std::string_view to_string(TuningMode t);
std::optional<Method> parse_method(std::string_view name);
std::optional<TuningMode> parse_tuning_mode(std::string_view name);

struct GridSpec {
    std::size_t lambda_count = 50;
    double lambda_ratio = 1e-3;
    std::size_t mu_count = 20;
    double mu_lo = 1e-4;
    double mu_hi = 10.0;
};

struct ReplicationConfig {
    ReplicationConfig() { cv_settings.kkt_tol = 1e-6; }

    std::vector<Method> methods{Method::Lasso, Method::SLasso, Method::ElasticNet,
                                Method::FusedLasso};
    std::vector<TuningMode> tunings{TuningMode::Th};
    std::size_t replications = 1;
    std::size_t folds = 10;
    GridSpec grids;
    SolverSettings settings;     // final fits
    SolverSettings cv_settings;  // grid searches of the Cv and Est modes
    double eta = 0.1;
    bool record_timing = false;  // off keeps the CSV byte-stable
    std::size_t threads = 1;
};

struct ReplicationRecord {
    std::size_t replication = 0;
    Method method = Method::Lasso;
    TuningMode tuning = TuningMode::Th;
    double lambda = 0.0;
    double mu = 0.0;
    double pred_err = 0.0;
    double l2_err = 0.0;
    double l1_err = 0.0;
    double sup_err = 0.0;
    double seminorm_err = 0.0;  // (b* - b)' J~ (b* - b) with the Smooth-Lasso J~
    double j_norm_fit = 0.0;    // |J b|_2 with the Smooth-Lasso J
    std::size_t support_size = 0;
    bool sign_match = false;
    double seconds = 0.0;
    bool converged = false;
};

struct ReplicationReport {
    ExampleSpec spec;
    std::vector<ReplicationRecord> records;  // replication-major, then method, then tuning
};

/// Mean squared test residual of beta* itself, per replication (the "truth" baseline).
std::vector<double> truth_prediction_errors(const ExampleSpec& spec, std::size_t replications);

ReplicationReport run_replications(const ExampleSpec& spec, const ReplicationConfig& cfg);

void write_report_csv(const ReplicationReport& report, std::ostream& out);

/// Type-7 sample quantile (linear interpolation between order statistics).
double quantile(std::vector<double> values, double q);

struct MetricSummary {
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
};

struct GroupSummary {
    Method method = Method::Lasso;
    TuningMode tuning = TuningMode::Th;
    std::size_t count = 0;
    std::size_t not_converged = 0;
    std::vector<std::pair<std::string, MetricSummary>> metrics;  // fixed order
};

std::vector<GroupSummary> summarize(const ReplicationReport& report);

/// The metric columns of a record by name, in the order summaries use.
const std::vector<std::string>& metric_names();
double metric_value(const ReplicationRecord& r, std::string_view name);

}  // namespace quadlasso
