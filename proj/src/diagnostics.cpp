#include "quadlasso/diagnostics.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "quadlasso/rng.hpp"

namespace quadlasso {

namespace {

void require_square(const DenseMatrix& a, std::size_t p, const char* who) {
    if (a.rows() != p || a.cols() != p)
        throw DimensionError(std::string(who) + ": expected " + std::to_string(p) + "x" +
                             std::to_string(p) + ", got " + shape_string(a));
}

void require_indices(const IndexSet& idx, std::size_t p, const char* who) {
    for (std::size_t j : idx)
        if (j >= p) throw std::out_of_range(std::string(who) + ": index " + std::to_string(j) +
                                            " out of range for p = " + std::to_string(p));
}

double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// Rayleigh-type quotient D'KD / sum_{ratio} D^2 restricted to a cone, minimized by
// projected gradient from a starting direction.
class ConeProblem {
public:
    ConeProblem(const DenseMatrix& k, const ConeSpec& cone)
        : k_(k), p_(k.rows()), cone_(cone), in_theta_(p_, false), in_ratio_(p_, false) {
        for (std::size_t j : cone.theta) in_theta_[j] = true;
        const IndexSet& ratio = cone.ratio_set.empty() ? cone.theta : cone.ratio_set;
        for (std::size_t j : ratio) in_ratio_[j] = true;
        for (std::size_t j = 0; j < p_; ++j)
            if (!in_theta_[j]) tail_.push_back(j);
    }

    const IndexSet& tail() const { return tail_; }

    double tail_budget(const DenseVector& d) const {
        double head = 0.0;
        if (cone_.cone_kind == ConeKind::Quadratic) {
            for (std::size_t j : cone_.theta) head += d[j] * d[j];
            head = std::sqrt(head);
        } else {
            for (std::size_t j : cone_.theta) head += std::abs(d[j]);
        }
        return cone_.rho_n * head;
    }

    void project(DenseVector& d) const {
        double tail_l1 = 0.0;
        for (std::size_t j : tail_) tail_l1 += std::abs(d[j]);
        const double budget = tail_budget(d);
        if (tail_l1 <= budget) return;
        const double f = tail_l1 > 0.0 ? budget / tail_l1 : 0.0;
        for (std::size_t j : tail_) d[j] *= f;
    }

    double denominator(const DenseVector& d) const {
        double s = 0.0;
        for (std::size_t j = 0; j < p_; ++j)
            if (in_ratio_[j]) s += d[j] * d[j];
        return s;
    }

    double quotient(const DenseVector& d, DenseVector* kd = nullptr) const {
        const double den = denominator(d);
        if (!(den > 0.0)) return std::numeric_limits<double>::infinity();
        DenseVector v = matvec(k_, d);
        const double q = dot(d.span(), v.span()) / den;
        if (kd) *kd = std::move(v);
        return q;
    }

    double refine(DenseVector d, double step0, std::size_t iters) const {
        DenseVector kd;
        double q = quotient(d, &kd);
        if (!std::isfinite(q)) return q;
        double step = step0;
        for (std::size_t it = 0; it < iters && step > 1e-14 * step0; ++it) {
            const double den = denominator(d);
            DenseVector trial(p_);
            for (std::size_t j = 0; j < p_; ++j) {
                const double gj = 2.0 * (kd[j] - (in_ratio_[j] ? q * d[j] : 0.0)) / den;
                trial[j] = d[j] - step * gj;
            }
            project(trial);
            DenseVector kt;
            const double qt = quotient(trial, &kt);
            if (qt < q) {
                const double gain = q - qt;
                d = std::move(trial);
                kd = std::move(kt);
                q = qt;
                step *= 1.5;
                if (gain <= 1e-13 * std::max(1.0, std::abs(q))) break;
            } else {
                step *= 0.5;
            }
        }
        return q;
    }

private:
    const DenseMatrix& k_;
    std::size_t p_;
    const ConeSpec& cone_;
    std::vector<bool> in_theta_;
    std::vector<bool> in_ratio_;
    IndexSet tail_;
};

}  // namespace

GramPair build_gram(const DenseMatrix& x, const StructureMatrix& s, double mu) {
    if (x.rows() == 0) throw DimensionError("build_gram: X has no rows");
    return gram_from_psi(gram(x, static_cast<double>(x.rows())), s, mu);
}

GramPair gram_from_psi(const DenseMatrix& psi, const StructureMatrix& s, double mu) {
    require_square(psi, s.p(), "gram_from_psi");
    if (!(mu >= 0.0) || !std::isfinite(mu))
        throw std::invalid_argument("gram_from_psi: mu must be finite and >= 0");
    return {psi, add(psi, s.jtilde, mu), mu};
}

PhiEstimate estimate_phi(const GramPair& g, const ConeSpec& cone, std::size_t samples,
                         std::uint64_t seed) {
    const std::size_t p = g.kn.rows();
    if (samples == 0) throw std::invalid_argument("estimate_phi: samples must be >= 1");
    if (cone.theta.empty()) throw std::invalid_argument("estimate_phi: Theta is empty");
    if (!(cone.rho_n >= 0.0)) throw std::invalid_argument("estimate_phi: rho_n must be >= 0");
    require_indices(cone.theta, p, "estimate_phi");
    require_indices(cone.ratio_set, p, "estimate_phi");

    const SymmetricEigen full = sym_eigen(g.kn);
    const double lam_min = full.values[0];
    const double lam_max = full.values[p - 1];
    PhiEstimate out;
    out.phi_lower_bound = std::max(lam_min, 0.0);

    const ConeProblem problem(g.kn, cone);
    const double step0 = lam_max > 0.0 ? 0.5 / lam_max : 1.0;
    constexpr std::size_t kRefineIters = 60;

    // Directions supported on Theta are always feasible; the lowest eigenvector of the
    // Theta block is the best of them.
    const std::size_t t = cone.theta.size();
    DenseMatrix block(t, t);
    for (std::size_t a = 0; a < t; ++a)
        for (std::size_t b = 0; b < t; ++b) block(a, b) = g.kn(cone.theta[a], cone.theta[b]);
    const SymmetricEigen be = sym_eigen(block);
    DenseVector d0(p);
    for (std::size_t a = 0; a < t; ++a) d0[cone.theta[a]] = be.vectors(a, 0);
    double best = problem.quotient(d0);
    assert(std::isfinite(best));
    best = std::min(best, problem.refine(d0, step0, kRefineIters));

    const IndexSet& tail = problem.tail();
    if (!tail.empty() && cone.rho_n > 0.0) {
        // Same head, with the whole budget on the tail coordinate most anti-aligned with K d0.
        DenseVector kd0 = matvec(g.kn, d0);
        std::size_t jstar = tail[0];
        for (std::size_t j : tail)
            if (std::abs(kd0[j]) > std::abs(kd0[jstar])) jstar = j;
        DenseVector d1 = d0;
        d1[jstar] = -sign_of(kd0[jstar] == 0.0 ? 1.0 : kd0[jstar]) * problem.tail_budget(d0);
        best = std::min(best, problem.refine(d1, step0, kRefineIters));

        const std::size_t max_k = std::min(tail.size(), 2 * t + 1);
        for (std::size_t smp = 1; smp < samples; ++smp) {
            Rng rng(derive_seed(seed, smp));
            std::normal_distribution<double> nd;
            std::exponential_distribution<double> ed(1.0);
            DenseVector d(p);
            for (std::size_t j : cone.theta) d[j] = nd(rng);
            const std::size_t k = 1 + static_cast<std::size_t>(rng() % max_k);
            IndexSet pos = tail;
            for (std::size_t i = 0; i < k; ++i) {
                const std::size_t r = i + static_cast<std::size_t>(rng() % (pos.size() - i));
                std::swap(pos[i], pos[r]);
            }
            double l1 = 0.0;
            for (std::size_t i = 0; i < k; ++i) {
                const double lap = (rng() & 1ULL) ? ed(rng) : -ed(rng);
                d[pos[i]] = lap;
                l1 += std::abs(lap);
            }
            const double f = l1 > 0.0 ? problem.tail_budget(d) / l1 : 0.0;
            for (std::size_t i = 0; i < k; ++i) d[pos[i]] *= f;
            best = std::min(best, problem.refine(d, step0, kRefineIters));
        }
    } else {
        for (std::size_t smp = 1; smp < samples; ++smp) {
            Rng rng(derive_seed(seed, smp));
            std::normal_distribution<double> nd;
            DenseVector d(p);
            for (std::size_t j : cone.theta) d[j] = nd(rng);
            best = std::min(best, problem.refine(d, step0, kRefineIters));
        }
    }

    out.phi_estimate = std::max(best, 0.0);
    // The eigenvalue bound is certified; the sampled value may only undercut it by round-off.
    out.phi_estimate = std::max(out.phi_estimate, out.phi_lower_bound);
    return out;
}

CoherenceCheck coherence_check(const GramPair& g, const IndexSet& astar) {
    const std::size_t p = g.kn.rows();
    require_indices(astar, p, "coherence_check");
    std::vector<bool> in(p, false);
    for (std::size_t j : astar) in[j] = true;
    const std::size_t s = static_cast<std::size_t>(std::count(in.begin(), in.end(), true));
    if (s == 0 || s == p)
        throw std::invalid_argument("coherence_check: A* must be a non-empty proper subset");

    double cross = 0.0, all = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
        if (!in[j]) continue;
        for (std::size_t k = 0; k < p; ++k) {
            if (k == j) continue;
            const double v = std::abs(g.kn(j, k));
            all = std::max(all, v);
            if (!in[k]) cross = std::max(cross, v);
        }
    }
    CoherenceCheck c;
    c.t = static_cast<double>(s) * cross;
    c.mutual_coherence_t = static_cast<double>(s) * all;
    c.phi_for_threshold = std::max(sym_eigvals(g.kn)[0], 0.0);
    c.passes = c.t <= c.phi_for_threshold / 64.0;
    return c;
}

double assumption_E_L(const DenseMatrix& x) {
    if (x.rows() == 0) return 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        double m = 0.0;
        for (double v : x.row(i)) m = std::max(m, v * v);
        total += m;
    }
    return total / static_cast<double>(x.rows());
}

IndexSet support_of(const DenseVector& beta) {
    IndexSet out;
    for (std::size_t j = 0; j < beta.size(); ++j)
        if (beta[j] != 0.0) out.push_back(j);
    return out;
}

IndexSet neighbor_set(const DenseVector& beta_star, const StructureMatrix& s) {
    const std::size_t p = s.p();
    if (beta_star.size() != p)
        throw DimensionError("neighbor_set: beta has " + std::to_string(beta_star.size()) +
                             " entries, structure has p = " + std::to_string(p));
    std::vector<bool> in(p, false);
    for (std::size_t k = 0; k < p; ++k) {
        if (beta_star[k] == 0.0) continue;
        in[k] = true;
        for (std::size_t j = 0; j < p; ++j)
            if (s.jtilde(j, k) != 0.0) in[j] = true;
    }
    IndexSet out;
    for (std::size_t j = 0; j < p; ++j)
        if (in[j]) out.push_back(j);
    return out;
}

IndexSet largest_outside(const DenseVector& delta, const IndexSet& b,
                         std::optional<std::size_t> m) {
    const std::size_t p = delta.size();
    require_indices(b, p, "largest_outside");
    const std::size_t count = m.value_or(b.size());
    if (count + b.size() >= p)
        throw std::invalid_argument("largest_outside: need m + |B| < p");
    std::vector<bool> in(p, false);
    for (std::size_t j : b) in[j] = true;
    IndexSet rest;
    for (std::size_t j = 0; j < p; ++j)
        if (!in[j]) rest.push_back(j);
    std::stable_sort(rest.begin(), rest.end(), [&](std::size_t a, std::size_t c) {
        return std::abs(delta[a]) > std::abs(delta[c]);
    });
    rest.resize(count);
    std::sort(rest.begin(), rest.end());
    return rest;
}

double cone_radius(double lambda, double mu, std::size_t sparsity, double structure_norm2) {
    const double base = 4.0 * std::sqrt(static_cast<double>(sparsity));
    const double extra = mu * structure_norm2;
    if (extra == 0.0) return base;
    if (!(lambda > 0.0)) return std::numeric_limits<double>::infinity();
    return base + 4.0 * extra / lambda;
}

double c_tilde(double phi, double rho_n, std::size_t m) {
    if (!(phi > 0.0)) throw AssumptionFailedError("c_tilde: phi must be > 0");
    if (m == 0) throw std::invalid_argument("c_tilde: m must be >= 1");
    return 2.0 / phi * (1.0 + rho_n / std::sqrt(static_cast<double>(m)));
}

BoundRecord evaluate_bounds(const DenseVector& beta_star, const StructureMatrix& s, double lambda,
                            double mu, double phi, TuningVariant variant,
                            const BoundOptions& opts) {
    if (!(phi > 0.0)) throw AssumptionFailedError("evaluate_bounds: phi <= 0, assumption fails");
    if (!(lambda >= 0.0) || !(mu >= 0.0))
        throw std::invalid_argument("evaluate_bounds: lambda and mu must be >= 0");
    if (beta_star.size() != s.p()) throw DimensionError("evaluate_bounds: beta* length != p");

    const std::size_t sp = support_of(beta_star).size();
    const double rs = std::sqrt(static_cast<double>(sp));
    const DenseVector jb = jtilde_times(s, beta_star);
    const double n2 = norm2(jb.span());
    const double ninf = norm_inf(jb.span());
    const double sd = static_cast<double>(sp);

    BoundRecord r;
    r.variant = variant;
    r.phi = phi;
    r.sparsity = sp;
    r.degenerate = lambda == 0.0;

    switch (variant) {
        case TuningVariant::Coherence: {
            r.rho_n = 4.0;
            r.prediction = 4.0 * lambda * lambda * sd / phi;
            r.seminorm = 4.0 * ninf * lambda * sd / phi;
            r.l1 = 8.0 * lambda * sd / phi;
            break;
        }
        case TuningVariant::SignRecovery:
        case TuningVariant::SupportInclusion: {
            r.rho_n = 4.0;
            r.l2 = 2.0 * lambda * rs / phi;
            r.sup = r.l2;
            break;
        }
        default: {
            r.rho_n = cone_radius(lambda, mu, sp, n2);
            const double a = 2.0 * lambda * rs + 2.0 * mu * n2;
            const double pred = a * a / phi;
            r.prediction = pred;
            if (mu > 0.0) r.seminorm = pred / mu;
            if (lambda > 0.0) r.l1 = 2.0 * pred / lambda;
            if (pred == 0.0) {
                r.seminorm = 0.0;
                r.l1 = 0.0;
            }
            if (opts.m) {
                const double ct = c_tilde(phi, r.rho_n, *opts.m);
                r.c_tilde = ct;
                const double level = lambda * rs + mu * n2;
                r.l2 = level == 0.0 ? 0.0 : ct * level;
                r.sup = r.l2;
            }
            break;
        }
    }
    return r;
}

ThresholdResult threshold_select(const DenseVector& beta, double threshold) {
    if (!(threshold >= 0.0)) throw std::invalid_argument("threshold_select: threshold must be >= 0");
    ThresholdResult out{beta, {}, threshold};
    for (std::size_t j = 0; j < beta.size(); ++j) {
        if (std::abs(beta[j]) >= threshold && beta[j] != 0.0)
            out.selected.push_back(j);
        else
            out.beta[j] = 0.0;
    }
    return out;
}

ThresholdResult threshold_select(const FitResult& fit, double c_tilde_value, double lambda,
                                 double mu, std::size_t sparsity, double structure_norm2) {
    const double level = lambda * std::sqrt(static_cast<double>(sparsity)) + mu * structure_norm2;
    return threshold_select(fit.beta, c_tilde_value * level);
}

SignReport sign_consistency(const DenseVector& beta_hat, const DenseVector& beta_star) {
    if (beta_hat.size() != beta_star.size())
        throw DimensionError("sign_consistency: lengths " + std::to_string(beta_hat.size()) +
                             " and " + std::to_string(beta_star.size()) + " differ");
    SignReport r;
    r.support_match = true;
    r.support_included = true;
    for (std::size_t j = 0; j < beta_hat.size(); ++j) {
        const double sh = sign_of(beta_hat[j]);
        const double ss = sign_of(beta_star[j]);
        if (sh != ss) r.mismatches.push_back(j);
        if (ss != 0.0 && sh != ss) r.support_match = false;
        if (ss == 0.0 && sh != 0.0) r.support_included = false;
    }
    r.all_match = r.mismatches.empty();
    return r;
}

double concentration_event_rate(const DenseMatrix& x, double sigma, double lambda, double tau,
                                NoiseKind noise, std::size_t replications, std::uint64_t seed) {
    if (!(tau > 0.0 && tau <= 1.0))
        throw std::invalid_argument("concentration_event_rate: tau must be in (0, 1]");
    if (replications == 0)
        throw std::invalid_argument("concentration_event_rate: replications must be >= 1");
    const double n = static_cast<double>(x.rows());
    std::size_t hits = 0;
    for (std::size_t r = 0; r < replications; ++r) {
        const DenseVector eps = sample_noise(x.rows(), sigma, noise, derive_seed(seed, r));
        const DenseVector v = matvec_transposed(x, eps);
        const double stat = 2.0 * norm_inf(v.span()) / n;
        if (stat <= tau * lambda) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(replications);
}

DiagnosticsReport diagnose(const DenseMatrix& x, const StructureMatrix& s, double mu,
                           const DiagnoseOptions& opts) {
    const std::size_t p = x.cols();
    const GramPair g = build_gram(x, s, mu);
    DiagnosticsReport rep;
    rep.n = x.rows();
    rep.p = p;
    rep.mu = mu;
    rep.L = assumption_E_L(x);
    rep.k_nem = k_nem(p);
    const DenseVector pe = sym_eigvals(g.psi);
    const DenseVector ke = sym_eigvals(g.kn);
    rep.psi_eig_min = pe[0];
    rep.psi_eig_max = pe[p - 1];
    rep.kn_eig_min = ke[0];
    rep.kn_eig_max = ke[p - 1];

    std::optional<IndexSet> astar = opts.astar;
    if (opts.beta_star) {
        if (opts.beta_star->size() != p)
            throw DimensionError("diagnose: beta* has " + std::to_string(opts.beta_star->size()) +
                                 " entries, X has " + std::to_string(p) + " columns");
        if (!astar) astar = support_of(*opts.beta_star);
        rep.alpha = smoothness(*opts.beta_star);
    }
    if (astar) require_indices(*astar, p, "diagnose");

    ConeSpec cone;
    const bool linear_cone = opts.variant == TuningVariant::Coherence ||
                             opts.variant == TuningVariant::SignRecovery ||
                             opts.variant == TuningVariant::SupportInclusion;
    if (opts.beta_star) {
        const std::size_t sp = astar->size();
        const double n2 = norm2(jtilde_times(s, *opts.beta_star).span());
        rep.lambda = opts.lambda
                         ? *opts.lambda
                         : theoretical_lambda(opts.sigma, static_cast<double>(rep.n), p, opts.eta,
                                              opts.variant, rep.L);
        if (linear_cone) {
            cone = {*astar, 4.0, ConeKind::Linear, {}};
        } else {
            cone = {neighbor_set(*opts.beta_star, s), cone_radius(*rep.lambda, mu, sp, n2),
                    ConeKind::Quadratic, {}};
        }
    } else if (astar && !astar->empty()) {
        cone = {*astar, 0.0, ConeKind::Quadratic, {}};
    } else {
        IndexSet all(p);
        std::iota(all.begin(), all.end(), std::size_t{0});
        cone = {all, 0.0, ConeKind::Quadratic, {}};
    }
    if (cone.theta.empty()) {
        // beta* = 0: nothing to audit on a cone, fall back to the whole space.
        cone.theta.resize(p);
        std::iota(cone.theta.begin(), cone.theta.end(), std::size_t{0});
    }
    rep.theta = cone.theta;
    rep.rho_n = std::isfinite(cone.rho_n) ? cone.rho_n : 0.0;
    const PhiEstimate phi = estimate_phi(g, {cone.theta, rep.rho_n, cone.cone_kind, {}},
                                         opts.samples, opts.seed);
    rep.phi_estimate = phi.phi_estimate;
    rep.phi_lower_bound = phi.phi_lower_bound;

    if (astar && !astar->empty() && astar->size() < p) rep.coherence = coherence_check(g, *astar);

    if (opts.beta_star && phi.phi_lower_bound > 0.0) {
        BoundOptions bo;
        const IndexSet b = neighbor_set(*opts.beta_star, s);
        if (!b.empty() && 2 * b.size() < p) bo.m = b.size();
        rep.bound_values = evaluate_bounds(*opts.beta_star, s, *rep.lambda, mu,
                                           phi.phi_lower_bound, opts.variant, bo);
    }
    return rep;
}

}  // namespace quadlasso
