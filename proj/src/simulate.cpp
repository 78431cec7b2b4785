#include "quadlasso/simulate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <random>
#include <stdexcept>
#include <thread>

#include "quadlasso/io.hpp"
#include "quadlasso/rng.hpp"
#include "quadlasso/tuning.hpp"

namespace quadlasso {

namespace {

constexpr double kGroupNoise = 0.1;  // idiosyncratic sd in Example B, variance 0.01

DenseMatrix toeplitz(std::size_t p, double (*f)(double, double), double arg) {
    DenseMatrix m(p, p);
    for (std::size_t j = 0; j < p; ++j)
        for (std::size_t k = 0; k < p; ++k)
            m(j, k) = f(std::abs(static_cast<double>(j) - static_cast<double>(k)), arg);
    return m;
}

double power_decay(double d, double rho) { return std::pow(rho, d); }
double exp_decay(double d, double) { return std::exp(-d); }

double bump(double j, double centre, double width) {
    const double u = (j - centre) / width;
    return 10.0 * std::exp(-1.0 / (1.0 - u * u));
}

double mean_squared_residual(const DenseMatrix& x, const DenseVector& y, const DenseVector& b) {
    const DenseVector r = subtract(y, matvec(x, b));
    return norm2_squared(r.span()) / static_cast<double>(x.rows());
}

struct MethodProblem {
    Method method;
    StructureMatrix structure;  // unused for the fused lasso
};

FitResult fit_method(const MethodProblem& mp, const DenseMatrix& x, const DenseVector& y,
                     double lambda, double mu, const SolverSettings& st,
                     const DenseVector* warm = nullptr) {
    if (mp.method == Method::FusedLasso) return fused_lasso_fit(x, y, lambda, mu, st, warm);
    PenaltyConfig cfg{lambda, mp.method == Method::Lasso ? 0.0 : mu, mp.structure.kind};
    return fit(x, y, cfg, mp.structure, st, warm);
}

std::vector<double> mu_grid_for(Method m, const GridSpec& g) {
    if (m == Method::Lasso) return {0.0};
    return default_mu_grid(g.mu_count, g.mu_lo, g.mu_hi);
}

struct Choice {
    double lambda = 0.0;
    double mu = 0.0;
    FitResult fit;
};

Choice choose_th(const MethodProblem& mp, const ExampleSpec& spec, const TruthInstance& truth,
                 const StructureMatrix& slasso, const ReplicationData& d,
                 const ReplicationConfig& cfg) {
    Choice c;
    c.lambda = theoretical_lambda(spec.sigma, static_cast<double>(spec.n), spec.p, cfg.eta,
                                  TuningVariant::Experimental);
    const StructureMatrix& s = mp.method == Method::ElasticNet ? mp.structure : slasso;
    if (mp.method != Method::Lasso) {
        const double n2 = norm2(jtilde_times(s, truth.beta_star).span());
        try {
            c.mu = theoretical_mu(c.lambda, truth.astar.size(), n2, TuningVariant::Balanced);
        } catch (const UnpenalizedStructureError&) {
            c.mu = 0.0;
        }
    }
    c.fit = fit_method(mp, d.x, d.y, c.lambda, c.mu, cfg.settings);
    return c;
}

Choice choose_cv(const MethodProblem& mp, const ReplicationData& d,
                 const ReplicationConfig& cfg, std::uint64_t fold_seed) {
    const std::vector<double> lambdas =
        default_lambda_grid(d.x, d.y, cfg.grids.lambda_count, cfg.grids.lambda_ratio);
    const std::vector<double> mus = mu_grid_for(mp.method, cfg.grids);
    const CVResult cv =
        mp.method == Method::FusedLasso
            ? cross_validate_fused(d.x, d.y, lambdas, mus, cfg.folds, fold_seed, cfg.cv_settings)
            : cross_validate(d.x, d.y, mp.structure, lambdas, mus, cfg.folds, fold_seed,
                             cfg.cv_settings);
    Choice c;
    c.lambda = cv.best_lambda;
    c.mu = cv.best_mu;
    c.fit = fit_method(mp, d.x, d.y, c.lambda, c.mu, cfg.settings);
    return c;
}

Choice choose_est(const MethodProblem& mp, const TruthInstance& truth, const ReplicationData& d,
                  const ReplicationConfig& cfg) {
    const std::vector<double> lambdas =
        default_lambda_grid(d.x, d.y, cfg.grids.lambda_count, cfg.grids.lambda_ratio);
    const std::vector<double> mus = mu_grid_for(mp.method, cfg.grids);
    Choice best;
    double best_err = std::numeric_limits<double>::infinity();
    for (double mu : mus) {
        const PreparedProblem prob = mp.method == Method::FusedLasso
                                         ? PreparedProblem(d.x, d.y)
                                         : PreparedProblem(d.x, d.y, mp.structure,
                                                           mp.method == Method::Lasso ? 0.0 : mu);
        DenseVector warm(d.x.cols());
        for (double lambda : lambdas) {
            const FitResult f = mp.method == Method::FusedLasso
                                    ? fused_lasso_fit(prob, lambda, mu, cfg.cv_settings, &warm)
                                    : fit(prob, lambda, cfg.cv_settings, &warm);
            warm = f.beta;
            const double err = norm2(subtract(f.beta, truth.beta_star).span());
            if (err < best_err) {
                best_err = err;
                best.lambda = lambda;
                best.mu = mu;
                best.fit = f;
            }
        }
    }
    best.fit = fit_method(mp, d.x, d.y, best.lambda, best.mu, cfg.settings, &best.fit.beta);
    return best;
}

ReplicationRecord make_record(std::size_t r, Method m, TuningMode t, const Choice& c,
                              const TruthInstance& truth, const StructureMatrix& slasso,
                              const ReplicationData& d, double seconds) {
    ReplicationRecord rec;
    rec.replication = r;
    rec.method = m;
    rec.tuning = t;
    rec.lambda = c.lambda;
    rec.mu = c.mu;
    const DenseVector diff = subtract(c.fit.beta, truth.beta_star);
    rec.pred_err = mean_squared_residual(d.x_test, d.y_test, c.fit.beta);
    rec.l2_err = norm2(diff.span());
    rec.l1_err = norm1(diff.span());
    rec.sup_err = norm_inf(diff.span());
    rec.seminorm_err = quad_penalty(diff, slasso);
    rec.j_norm_fit = std::sqrt(quad_penalty(c.fit.beta, slasso));
    rec.support_size = c.fit.active_set.size();
    rec.sign_match = sign_consistency(c.fit.beta, truth.beta_star).all_match;
    rec.seconds = seconds;
    rec.converged = c.fit.converged;
    return rec;
}

}  // namespace

ReplicationData draw_replication(const ExampleSpec& spec, const TruthInstance& truth,
                                 std::size_t r) {
    const std::uint64_t base = derive_seed(spec.seed, r);
    ReplicationData d;
    d.x = sample_design(truth, spec.n, derive_seed(base, 0));
    d.y = add(matvec(d.x, truth.beta_star), sample_noise(spec.n, spec.sigma, spec.noise,
                                                          derive_seed(base, 1)));
    d.x_test = sample_design(truth, spec.n, derive_seed(base, 2));
    d.y_test = add(matvec(d.x_test, truth.beta_star),
                   sample_noise(spec.n, spec.sigma, spec.noise, derive_seed(base, 3)));
    return d;
}

std::string_view to_string(Example e) {
    switch (e) {
        case Example::A: return "A";
        case Example::B: return "B";
        case Example::C: return "C";
        case Example::D: return "D";
        case Example::PseudoReal1: return "PseudoReal1";
        case Example::PseudoReal2: return "PseudoReal2";
    }
    return "A";
}

std::optional<Example> parse_example(std::string_view name) {
    for (Example e : {Example::A, Example::B, Example::C, Example::D, Example::PseudoReal1,
                      Example::PseudoReal2})
        if (name == to_string(e)) return e;
    return std::nullopt;
}

void validate(const ExampleSpec& spec) {
    if (!(spec.sigma > 0.0) || !std::isfinite(spec.sigma))
        throw std::invalid_argument("sigma: must be finite and > 0");
    if (spec.n < 2) throw std::invalid_argument("n: must be >= 2");
    switch (spec.example) {
        case Example::A:
            if (spec.p != 8) throw std::invalid_argument("p: Example A fixes p = 8");
            if (spec.n != 20) throw std::invalid_argument("n: Example A fixes n = 20");
            if (!(spec.rho > 0.0 && spec.rho < 1.0))
                throw std::invalid_argument("rho: Example A needs rho in (0, 1)");
            break;
        case Example::B:
        case Example::C:
            if (spec.p < 15) throw std::invalid_argument("p: this example needs p >= 15");
            break;
        case Example::D:
            if (spec.p < 40) throw std::invalid_argument("p: Example D needs p >= 40");
            break;
        case Example::PseudoReal1:
            if (spec.p != 1023) throw std::invalid_argument("p: PseudoReal1 fixes p = 1023");
            if (spec.n != 71) throw std::invalid_argument("n: PseudoReal1 fixes n = 71");
            break;
        case Example::PseudoReal2:
            if (spec.p != 300) throw std::invalid_argument("p: PseudoReal2 fixes p = 300");
            if (spec.n != 71) throw std::invalid_argument("n: PseudoReal2 fixes n = 71");
            break;
    }
}

TruthInstance make_truth(const ExampleSpec& spec) {
    validate(spec);
    const std::size_t p = spec.p;
    TruthInstance t;
    t.example = spec.example;
    t.beta_star = DenseVector(p);
    DenseVector& b = t.beta_star;
    switch (spec.example) {
        case Example::A:
            b[0] = 3.0;
            b[1] = 1.5;
            b[4] = 2.0;
            t.psi_true = toeplitz(p, power_decay, spec.rho);
            break;
        case Example::B: {
            for (std::size_t j = 0; j < 15; ++j) b[j] = 3.0;
            t.psi_true = DenseMatrix::identity(p);
            const double c = 1.0 / (1.0 + kGroupNoise * kGroupNoise);
            for (std::size_t j = 0; j < 15; ++j)
                for (std::size_t k = 0; k < 15; ++k)
                    if (j != k && j / 5 == k / 5) t.psi_true(j, k) = c;
            break;
        }
        case Example::C:
            for (std::size_t j = 1; j <= 15; ++j) {
                const double v = 3.0 - 0.2 * static_cast<double>(j);
                b[j - 1] = v * v;
            }
            t.psi_true = toeplitz(p, exp_decay, 0.0);
            break;
        case Example::D:
            for (std::size_t j = 1; j <= 40; ++j) {
                const double v = 4.0 + 0.1 * static_cast<double>(j);
                b[j - 1] = v * v;
            }
            t.psi_true = toeplitz(p, exp_decay, 0.0);
            break;
        case Example::PseudoReal1:
            for (std::size_t j = 1; j <= 250; ++j) b[j - 1] = bump(double(j), 125.0, 125.1);
            t.psi_true = toeplitz(p, power_decay, 0.5);
            break;
        case Example::PseudoReal2:
            for (std::size_t j = 1; j <= 50; ++j) b[j - 1] = bump(double(j), 25.0, 25.1);
            t.psi_true = toeplitz(p, power_decay, 0.5);
            break;
    }
    t.astar = support_of(b);
    t.alpha = smoothness(b);
    if (spec.example != Example::B) {
        try {
            t.psi_chol = cholesky(t.psi_true);
        } catch (const NotPositiveDefiniteError&) {
            throw std::invalid_argument("make_truth: Psi not PD");
        }
    }
    return t;
}

void standardize_columns(DenseMatrix& x) {
    const double n = static_cast<double>(x.rows());
    for (std::size_t j = 0; j < x.cols(); ++j) {
        double ss = 0.0;
        for (std::size_t i = 0; i < x.rows(); ++i) ss += x(i, j) * x(i, j);
        if (ss == 0.0) continue;
        const double f = std::sqrt(n / ss);
        for (std::size_t i = 0; i < x.rows(); ++i) x(i, j) *= f;
    }
}

DenseMatrix sample_design(const TruthInstance& truth, std::size_t n, std::uint64_t seed) {
    const std::size_t p = truth.beta_star.size();
    Rng rng(seed);
    std::normal_distribution<double> nd;
    DenseMatrix x(n, p);
    if (truth.example == Example::B) {
        std::vector<double> z(3);
        for (std::size_t i = 0; i < n; ++i) {
            for (double& v : z) v = nd(rng);
            for (std::size_t j = 0; j < p; ++j) {
                const double u = nd(rng);
                x(i, j) = j < 15 ? (z[j / 5] + kGroupNoise * u) /
                                       std::sqrt(1.0 + kGroupNoise * kGroupNoise)
                                 : u;
            }
        }
    } else {
        if (truth.psi_chol.rows() != p) throw std::invalid_argument("sample_design: Psi not PD");
        std::vector<double> z(p);
        for (std::size_t i = 0; i < n; ++i) {
            for (double& v : z) v = nd(rng);
            for (std::size_t j = 0; j < p; ++j) {
                const auto lrow = truth.psi_chol.row(j);
                double s = 0.0;
                for (std::size_t k = 0; k <= j; ++k) s += lrow[k] * z[k];
                x(i, j) = s;
            }
        }
    }
    standardize_columns(x);
    return x;
}

DenseVector piecewise_linear_truth(std::size_t n) {
    if (n < 8 || n % 4 != 0) throw std::invalid_argument("piecewise_linear_truth: n must be a multiple of 4, >= 8");
    std::vector<double> b;
    const double dn = static_cast<double>(n);
    for (std::size_t j = 1; j < n / 4; ++j) b.push_back(1.0);
    for (std::size_t j = n / 4; j < n / 2; ++j)
        b.push_back(1.0 - 4.0 / dn * (static_cast<double>(j) - dn / 4.0));
    return DenseVector(std::move(b));
}

DenseMatrix tridiagonal_gram(std::size_t p, double eps) {
    DenseMatrix m = DenseMatrix::identity(p);
    for (std::size_t j = 0; j + 1 < p; ++j) m(j, j + 1) = m(j + 1, j) = eps;
    return m;
}

std::string_view to_string(Method m) {
    switch (m) {
        case Method::Lasso: return "Lasso";
        case Method::SLasso: return "SLasso";
        case Method::ElasticNet: return "ElasticNet";
        case Method::FusedLasso: return "FusedLasso";
    }
    return "Lasso";
}

std::string_view to_string(TuningMode t) {
    switch (t) {
        case TuningMode::Th: return "Th";
        case TuningMode::Cv: return "Cv";
        case TuningMode::Est: return "Est";
    }
    return "Th";
}

std::optional<Method> parse_method(std::string_view name) {
    for (Method m : {Method::Lasso, Method::SLasso, Method::ElasticNet, Method::FusedLasso})
        if (name == to_string(m)) return m;
    return std::nullopt;
}

std::optional<TuningMode> parse_tuning_mode(std::string_view name) {
    for (TuningMode t : {TuningMode::Th, TuningMode::Cv, TuningMode::Est})
        if (name == to_string(t)) return t;
    return std::nullopt;
}

std::vector<double> truth_prediction_errors(const ExampleSpec& spec, std::size_t replications) {
    const TruthInstance truth = make_truth(spec);
    std::vector<double> out;
    for (std::size_t r = 0; r < replications; ++r) {
        const ReplicationData d = draw_replication(spec, truth, r);
        out.push_back(mean_squared_residual(d.x_test, d.y_test, truth.beta_star));
    }
    return out;
}

ReplicationReport run_replications(const ExampleSpec& spec, const ReplicationConfig& cfg) {
    if (cfg.replications == 0) throw std::invalid_argument("replications: must be >= 1");
    if (cfg.methods.empty()) throw std::invalid_argument("methods: must not be empty");
    if (cfg.tunings.empty()) throw std::invalid_argument("tunings: must not be empty");
    const TruthInstance truth = make_truth(spec);
    const StructureMatrix slasso = build_structure(StructureKind::smooth_lasso(), spec.p);
    std::vector<MethodProblem> problems;
    for (Method m : cfg.methods) {
        switch (m) {
            case Method::Lasso:
                problems.push_back({m, build_structure(StructureKind::lasso(), spec.p)});
                break;
            case Method::SLasso: problems.push_back({m, slasso}); break;
            case Method::ElasticNet:
                problems.push_back({m, build_structure(StructureKind::elastic_net(), spec.p)});
                break;
            case Method::FusedLasso:
                problems.push_back({m, build_structure(StructureKind::lasso(), spec.p)});
                break;
        }
    }
    // Fused-lasso Th values mirror the Smooth-Lasso ones.
    const MethodProblem slasso_problem{Method::SLasso, slasso};

    const std::size_t per_rep = problems.size() * cfg.tunings.size();
    std::vector<ReplicationRecord> records(cfg.replications * per_rep);

    auto run_one = [&](std::size_t r) {
        const ReplicationData d = draw_replication(spec, truth, r);
        const std::uint64_t fold_seed = derive_seed(derive_seed(spec.seed, r), 4);
        std::size_t slot = r * per_rep;
        for (const MethodProblem& mp : problems) {
            for (TuningMode t : cfg.tunings) {
                const auto start = std::chrono::steady_clock::now();
                Choice c;
                switch (t) {
                    case TuningMode::Th:
                        if (mp.method == Method::FusedLasso) {
                            const Choice sl = choose_th(slasso_problem, spec, truth, slasso, d, cfg);
                            c.lambda = sl.lambda;
                            c.mu = sl.mu;
                            c.fit = fit_method(mp, d.x, d.y, c.lambda, c.mu, cfg.settings);
                        } else {
                            c = choose_th(mp, spec, truth, slasso, d, cfg);
                        }
                        break;
                    case TuningMode::Cv: c = choose_cv(mp, d, cfg, fold_seed); break;
                    case TuningMode::Est: c = choose_est(mp, truth, d, cfg); break;
                }
                const double secs =
                    cfg.record_timing
                        ? std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                              .count()
                        : 0.0;
                records[slot++] = make_record(r, mp.method, t, c, truth, slasso, d, secs);
            }
        }
    };

    const std::size_t threads = std::max<std::size_t>(1, std::min(cfg.threads, cfg.replications));
    if (threads == 1) {
        for (std::size_t r = 0; r < cfg.replications; ++r) run_one(r);
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(threads);
        for (std::size_t w = 0; w < threads; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t r = w; r < cfg.replications; r += threads) run_one(r);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        for (auto& th : pool) th.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }
    return {spec, std::move(records)};
}

void write_report_csv(const ReplicationReport& report, std::ostream& out) {
    out << "replication,method,tuning,lambda,mu,pred_err,l2_err,l1_err,sup_err,seminorm_err,"
           "j_norm_fit,support_size,sign_match,seconds,converged\n";
    for (const ReplicationRecord& r : report.records) {
        out << r.replication << ',' << to_string(r.method) << ',' << to_string(r.tuning) << ','
            << format_double(r.lambda) << ',' << format_double(r.mu) << ','
            << format_double(r.pred_err) << ',' << format_double(r.l2_err) << ','
            << format_double(r.l1_err) << ',' << format_double(r.sup_err) << ','
            << format_double(r.seminorm_err) << ',' << format_double(r.j_norm_fit) << ','
            << r.support_size << ',' << (r.sign_match ? 1 : 0) << ','
            << format_double(r.seconds) << ',' << (r.converged ? 1 : 0) << '\n';
    }
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw std::invalid_argument("quantile: no values");
    if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile: q must be in [0, 1]");
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * q;
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

const std::vector<std::string>& metric_names() {
    static const std::vector<std::string> names{"lambda",       "mu",           "pred_err",
                                                "l2_err",       "l1_err",       "sup_err",
                                                "seminorm_err", "j_norm_fit",   "support_size",
                                                "seconds"};
    return names;
}

double metric_value(const ReplicationRecord& r, std::string_view name) {
    if (name == "lambda") return r.lambda;
    if (name == "mu") return r.mu;
    if (name == "pred_err") return r.pred_err;
    if (name == "l2_err") return r.l2_err;
    if (name == "l1_err") return r.l1_err;
    if (name == "sup_err") return r.sup_err;
    if (name == "seminorm_err") return r.seminorm_err;
    if (name == "j_norm_fit") return r.j_norm_fit;
    if (name == "support_size") return static_cast<double>(r.support_size);
    if (name == "seconds") return r.seconds;
    throw std::invalid_argument("metric_value: unknown metric " + std::string(name));
}

std::vector<GroupSummary> summarize(const ReplicationReport& report) {
    std::vector<GroupSummary> out;
    for (const ReplicationRecord& r : report.records) {
        auto it = std::find_if(out.begin(), out.end(), [&](const GroupSummary& g) {
            return g.method == r.method && g.tuning == r.tuning;
        });
        if (it == out.end()) {
            out.push_back({r.method, r.tuning, 0, 0, {}});
            it = out.end() - 1;
        }
        ++it->count;
        if (!r.converged) ++it->not_converged;
    }
    for (GroupSummary& g : out) {
        for (const std::string& name : metric_names()) {
            std::vector<double> v;
            for (const ReplicationRecord& r : report.records)
                if (r.method == g.method && r.tuning == g.tuning) v.push_back(metric_value(r, name));
            g.metrics.push_back({name, {quantile(v, 0.25), quantile(v, 0.5), quantile(v, 0.75)}});
        }
    }
    return out;
}

}  // namespace quadlasso
