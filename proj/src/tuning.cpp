#include "quadlasso/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <string>

#include "quadlasso/rng.hpp"

namespace quadlasso {

namespace {

constexpr double kSqrt2 = std::numbers::sqrt2;

void check_common(double sigma, double n, std::size_t p, const char* who) {
    if (!(sigma > 0.0) || !std::isfinite(sigma))
        throw std::invalid_argument(std::string(who) + ": sigma must be > 0");
    if (!(n >= 1.0) || !std::isfinite(n))
        throw std::invalid_argument(std::string(who) + ": n must be >= 1");
    if (p < 2) throw std::invalid_argument(std::string(who) + ": p must be >= 2");
}

void check_eta(double eta, bool allow_one, const char* who) {
    const bool ok = eta > 0.0 && (allow_one ? eta <= 1.0 : eta < 1.0);
    if (!ok) {
        throw std::invalid_argument(std::string(who) + ": eta must lie in (0, " +
                                    (allow_one ? "1]" : "1)"));
    }
}

// Fits along one lambda path of a training fold at fixed mu.
using PathFitter = std::function<FitResult(double lambda, const DenseVector* warm)>;
using FoldFitter =
    std::function<PathFitter(const DenseMatrix& xt, const DenseVector& yt, double mu)>;

CVResult run_cv(const DenseMatrix& x, const DenseVector& y, const std::vector<double>& lambdas,
                const std::vector<double>& mus, std::size_t folds, std::uint64_t seed,
                const FoldFitter& fitter) {
    const std::size_t n = x.rows();
    if (folds < 2 || folds > n) {
        throw std::invalid_argument("cross_validate: folds = " + std::to_string(folds) +
                                    " must lie in [2, n = " + std::to_string(n) + "]");
    }
    if (lambdas.empty() || mus.empty()) throw std::invalid_argument("cross_validate: empty grid");
    for (double l : lambdas)
        if (!(l >= 0.0)) throw std::invalid_argument("cross_validate: negative lambda in grid");
    for (double m : mus)
        if (!(m >= 0.0)) throw std::invalid_argument("cross_validate: negative mu in grid");

    const std::vector<std::size_t> assign = fold_assignment(n, folds, seed);
    // walk lambda from large to small so each fit warm-starts from its neighbour
    std::vector<std::size_t> path(lambdas.size());
    for (std::size_t i = 0; i < path.size(); ++i) path[i] = i;
    std::stable_sort(path.begin(), path.end(),
                     [&](std::size_t a, std::size_t b) { return lambdas[a] > lambdas[b]; });

    const std::size_t p = x.cols();
    std::vector<std::vector<double>> errors(lambdas.size() * mus.size(),
                                            std::vector<double>(folds, 0.0));
    for (std::size_t f = 0; f < folds; ++f) {
        std::vector<std::size_t> train, val;
        for (std::size_t i = 0; i < n; ++i) (assign[i] == f ? val : train).push_back(i);
        if (val.empty() || train.empty()) {
            throw std::invalid_argument("cross_validate: fold " + std::to_string(f) +
                                        " has no rows");
        }
        DenseMatrix xt(train.size(), p), xv(val.size(), p);
        DenseVector yt(train.size()), yv(val.size());
        for (std::size_t r = 0; r < train.size(); ++r) {
            std::copy(x.row(train[r]).begin(), x.row(train[r]).end(), xt.row(r).begin());
            yt[r] = y[train[r]];
        }
        for (std::size_t r = 0; r < val.size(); ++r) {
            std::copy(x.row(val[r]).begin(), x.row(val[r]).end(), xv.row(r).begin());
            yv[r] = y[val[r]];
        }
        for (std::size_t mi = 0; mi < mus.size(); ++mi) {
            DenseVector warm(p);
            const PathFitter along = fitter(xt, yt, mus[mi]);
            for (std::size_t li : path) {
                const FitResult r = along(lambdas[li], &warm);
                const DenseVector resid = subtract(yv, matvec(xv, r.beta));
                errors[li * mus.size() + mi][f] =
                    norm2_squared(resid.span()) / static_cast<double>(val.size());
                warm = r.beta;
            }
        }
    }

    CVResult out;
    out.folds = folds;
    for (std::size_t li = 0; li < lambdas.size(); ++li) {
        for (std::size_t mi = 0; mi < mus.size(); ++mi) {
            CVCell c;
            c.lambda = lambdas[li];
            c.mu = mus[mi];
            c.fold_errors = std::move(errors[li * mus.size() + mi]);
            double sum = 0.0;
            for (double e : c.fold_errors) sum += e;
            c.mean_error = sum / static_cast<double>(folds);
            double ss = 0.0;
            for (double e : c.fold_errors) ss += (e - c.mean_error) * (e - c.mean_error);
            c.std_error = std::sqrt(ss / static_cast<double>(folds - 1));
            out.cv_error_surface.push_back(std::move(c));
        }
    }
    const CVCell& best = out.cv_error_surface[best_cell(out.cv_error_surface)];
    out.best_lambda = best.lambda;
    out.best_mu = best.mu;
    return out;
}

}  // namespace

std::string_view to_string(TuningVariant v) {
    switch (v) {
        case TuningVariant::RestrictedEigen: return "restricted-eigen";
        case TuningVariant::Balanced: return "balanced";
        case TuningVariant::Coherence: return "coherence";
        case TuningVariant::Estimation: return "estimation";
        case TuningVariant::SignRecovery: return "sign-recovery";
        case TuningVariant::SupportInclusion: return "support-inclusion";
        case TuningVariant::FiniteVariance: return "finite-variance";
        case TuningVariant::Experimental: return "experimental";
    }
    return "unknown";
}

std::optional<TuningVariant> parse_tuning_variant(std::string_view name) {
    for (auto v : {TuningVariant::RestrictedEigen, TuningVariant::Balanced,
                   TuningVariant::Coherence, TuningVariant::Estimation,
                   TuningVariant::SignRecovery, TuningVariant::SupportInclusion,
                   TuningVariant::FiniteVariance, TuningVariant::Experimental}) {
        if (to_string(v) == name) return v;
    }
    return std::nullopt;
}

double theoretical_lambda(double sigma, double n, std::size_t p, double eta, TuningVariant v,
                          std::optional<double> l_stat) {
    check_common(sigma, n, p, "theoretical_lambda");
    const double dp = static_cast<double>(p);
    if (v == TuningVariant::Experimental) return 2.0 * kSqrt2 * sigma * std::sqrt(std::log(dp) / n);
    if (v == TuningVariant::FiniteVariance) {
        if (!l_stat) {
            throw std::invalid_argument(
                "theoretical_lambda: the finite-variance variant needs the design statistic L");
        }
        return nongaussian_lambda(sigma, n, p, eta, *l_stat);
    }
    check_eta(eta, false, "theoretical_lambda");
    const double root = sigma * std::sqrt(std::log(dp / eta) / n);
    switch (v) {
        case TuningVariant::RestrictedEigen:
        case TuningVariant::Balanced:
        case TuningVariant::SignRecovery:
            return 4.0 * kSqrt2 * root;
        case TuningVariant::Coherence:
            return 8.0 * kSqrt2 * root;
        case TuningVariant::Estimation:
            return 2.0 * kSqrt2 * root;
        case TuningVariant::SupportInclusion:
            return 16.0 * sigma * std::sqrt(std::log(dp / std::sqrt(eta * dp / (1.0 + dp))) / n);
        default:
            break;
    }
    throw std::logic_error("theoretical_lambda: unhandled variant");
}

bool mu_uses_sup_norm(TuningVariant v) {
    return v == TuningVariant::Coherence || v == TuningVariant::SignRecovery ||
           v == TuningVariant::SupportInclusion;
}

double theoretical_mu(double lambda, std::size_t sparsity, double structure_norm,
                      TuningVariant v) {
    if (!(lambda > 0.0)) throw std::invalid_argument("theoretical_mu: lambda must be > 0");
    if (!(structure_norm >= 0.0) || !std::isfinite(structure_norm))
        throw std::invalid_argument("theoretical_mu: structure norm must be finite and >= 0");
    if (structure_norm == 0.0) {
        throw UnpenalizedStructureError(
            "theoretical_mu: J~ b* vanishes, so the structure places no constraint on mu");
    }
    switch (v) {
        case TuningVariant::Coherence: return lambda / (8.0 * structure_norm);
        case TuningVariant::SignRecovery:
        case TuningVariant::SupportInclusion: return lambda / (4.0 * structure_norm);
        default: break;
    }
    if (sparsity < 1) throw std::invalid_argument("theoretical_mu: sparsity must be >= 1");
    return lambda * std::sqrt(static_cast<double>(sparsity)) / (2.0 * structure_norm);
}

KNem k_nem_detail(std::size_t p) {
    if (p < 2) throw std::invalid_argument("k_nem: p must be >= 2");
    const double dp = static_cast<double>(p);
    auto f = [dp](double q) { return (q - 1.0) * std::pow(dp, 2.0 / q); };
    KNem best{f(2.0), 2.0, false};
    // f'(q) has the sign of q^2 - a q + a with a = 2 log p; the larger root is a local minimum
    const double a = 2.0 * std::log(dp);
    const double disc = a * a - 4.0 * a;
    if (disc >= 0.0) {
        const double q = 0.5 * (a + std::sqrt(disc));
        if (q > 2.0 && f(q) < best.value) best = {f(q), q, true};
    }
    return best;
}

double k_nem(std::size_t p) { return k_nem_detail(p).value; }

double nongaussian_lambda(double sigma, double n, std::size_t p, double eta, double l_stat) {
    check_common(sigma, n, p, "nongaussian_lambda");
    check_eta(eta, true, "nongaussian_lambda");
    if (!(l_stat > 0.0)) throw std::invalid_argument("nongaussian_lambda: L must be > 0");
    return 4.0 * sigma * std::sqrt(k_nem(p) * l_stat / (n * eta));
}

double gaussian_event_lambda(double sigma, double n, std::size_t p, double eta, double tau) {
    check_common(sigma, n, p, "gaussian_event_lambda");
    check_eta(eta, false, "gaussian_event_lambda");
    if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("gaussian_event_lambda: tau in (0,1]");
    return 2.0 * kSqrt2 / tau * sigma * std::sqrt(std::log(static_cast<double>(p) / eta) / n);
}

double finite_variance_event_lambda(double sigma, double n, std::size_t p, double eta, double tau,
                                    double l_stat) {
    check_common(sigma, n, p, "finite_variance_event_lambda");
    check_eta(eta, true, "finite_variance_event_lambda");
    if (!(tau > 0.0 && tau <= 1.0))
        throw std::invalid_argument("finite_variance_event_lambda: tau in (0,1]");
    if (!(l_stat > 0.0)) throw std::invalid_argument("finite_variance_event_lambda: L must be > 0");
    return 2.0 * sigma / tau * std::sqrt(k_nem(p) * l_stat / (n * eta));
}

std::vector<double> log_grid(double lo, double hi, std::size_t count) {
    if (!(lo > 0.0) || !(hi >= lo)) throw std::invalid_argument("log_grid: need 0 < lo <= hi");
    if (count == 0) throw std::invalid_argument("log_grid: count must be >= 1");
    std::vector<double> g(count);
    if (count == 1) {
        g[0] = hi;
        return g;
    }
    const double llo = std::log(lo), lhi = std::log(hi);
    for (std::size_t i = 0; i < count; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(count - 1);
        g[i] = std::exp(lhi + t * (llo - lhi));
    }
    g.front() = hi;
    g.back() = lo;
    return g;
}

double null_lambda(const DenseMatrix& x, const DenseVector& y) {
    return 2.0 * norm_inf(matvec_transposed(x, y).span()) / static_cast<double>(x.rows());
}

std::vector<double> default_lambda_grid(const DenseMatrix& x, const DenseVector& y,
                                        std::size_t count, double ratio) {
    const double top = null_lambda(x, y);
    if (!(top > 0.0)) return {0.0};
    return log_grid(ratio * top, top, count);
}

std::vector<double> default_mu_grid(std::size_t count, double lo, double hi) {
    std::vector<double> g{0.0};
    std::vector<double> rest = log_grid(lo, hi, count);
    std::reverse(rest.begin(), rest.end());
    g.insert(g.end(), rest.begin(), rest.end());
    return g;
}

std::vector<std::size_t> fold_assignment(std::size_t n, std::size_t folds, std::uint64_t seed) {
    if (folds == 0) throw std::invalid_argument("fold_assignment: folds must be >= 1");
    Rng rng(seed);
    const std::vector<std::size_t> perm = random_permutation(n, rng);
    std::vector<std::size_t> assign(n);
    for (std::size_t pos = 0; pos < n; ++pos) assign[perm[pos]] = pos % folds;
    return assign;
}

std::size_t best_cell(const std::vector<CVCell>& cells) {
    if (cells.empty()) throw std::invalid_argument("best_cell: empty surface");
    std::size_t best = 0;
    for (std::size_t i = 1; i < cells.size(); ++i) {
        const CVCell& a = cells[i];
        const CVCell& b = cells[best];
        if (a.mean_error < b.mean_error ||
            (a.mean_error == b.mean_error &&
             (a.lambda > b.lambda || (a.lambda == b.lambda && a.mu > b.mu)))) {
            best = i;
        }
    }
    return best;
}

CVResult cross_validate(const DenseMatrix& x, const DenseVector& y, const StructureMatrix& s,
                        const std::vector<double>& lambda_grid, const std::vector<double>& mu_grid,
                        std::size_t folds, std::uint64_t seed, const SolverSettings& settings) {
    if (s.p() != x.cols()) throw DimensionError("cross_validate: structure does not match X");
    if (y.size() != x.rows()) throw DimensionError("cross_validate: y does not match X");
    FoldFitter fitter = [&](const DenseMatrix& xt, const DenseVector& yt, double mu) -> PathFitter {
        auto prob = std::make_shared<PreparedProblem>(xt, yt, s, mu);
        return [prob, &settings](double lambda, const DenseVector* warm) {
            return fit(*prob, lambda, settings, warm);
        };
    };
    return run_cv(x, y, lambda_grid, mu_grid, folds, seed, fitter);
}

CVResult cross_validate_fused(const DenseMatrix& x, const DenseVector& y,
                              const std::vector<double>& lambda_grid,
                              const std::vector<double>& mu_grid, std::size_t folds,
                              std::uint64_t seed, const SolverSettings& settings) {
    if (y.size() != x.rows()) throw DimensionError("cross_validate_fused: y does not match X");
    FoldFitter fitter = [&](const DenseMatrix& xt, const DenseVector& yt, double mu) -> PathFitter {
        auto prob = std::make_shared<PreparedProblem>(xt, yt);
        return [prob, mu, &settings](double lambda, const DenseVector* warm) {
            return fused_lasso_fit(*prob, lambda, mu, settings, warm);
        };
    };
    return run_cv(x, y, lambda_grid, mu_grid, folds, seed, fitter);
}

}  // namespace quadlasso
