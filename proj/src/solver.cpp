#include "quadlasso/solver.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace quadlasso {

namespace detail {

// Smooth part in Gram form: f(b) = b'Kb - 2c'b + yy, gradient 2(Kb - c).
struct GramForm {
    DenseMatrix k;
    std::vector<double> c;
    double yy = 0.0;
    double top_eigenvalue = 0.0;
};

}  // namespace detail

namespace {

using detail::GramForm;

void check_inputs(const DenseMatrix& x, const DenseVector& y, const char* who) {
    if (x.rows() == 0 || x.cols() == 0) {
        throw DimensionError(std::string(who) + ": empty design " + shape_string(x));
    }
    if (y.size() != x.rows()) {
        throw DimensionError(std::string(who) + ": y has length " + std::to_string(y.size()) +
                             " but X is " + shape_string(x));
    }
    if (!all_finite(x.values()) || !all_finite(y.values())) {
        throw NonFiniteError(std::string(who) + ": non-finite data");
    }
}

void check_penalty(double lambda, double mu, const char* who) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw std::invalid_argument(std::string(who) + ": lambda must be finite and >= 0");
    }
    if (!(mu >= 0.0) || !std::isfinite(mu)) {
        throw std::invalid_argument(std::string(who) + ": mu must be finite and >= 0");
    }
}

double largest_eigenvalue(const DenseMatrix& k);

GramForm make_form(const DenseMatrix& x, const DenseVector& y, const DenseMatrix* jtilde,
                   double mu) {
    const double n = static_cast<double>(x.rows());
    GramForm f{gram(x, n), {}, norm2_squared(y.span()) / n};
    if (jtilde != nullptr && mu > 0.0) f.k = add(f.k, *jtilde, mu);
    f.c = matvec_transposed(x, y).values();
    for (double& v : f.c) v /= n;
    f.top_eigenvalue = largest_eigenvalue(f.k);
    return f;
}

// out = K v, skipping zero entries of v (K is symmetric, so row j is column j).
void kmul(const DenseMatrix& k, const std::vector<double>& v, std::vector<double>& out) {
    std::fill(out.begin(), out.end(), 0.0);
    const std::size_t p = v.size();
    for (std::size_t j = 0; j < p; ++j) {
        const double vj = v[j];
        if (vj == 0.0) continue;
        const auto r = k.row(j);
        for (std::size_t i = 0; i < p; ++i) out[i] += vj * r[i];
    }
}

double largest_eigenvalue(const DenseMatrix& k) {
    const std::size_t p = k.rows();
    std::vector<double> v(p), w(p);
    for (std::size_t j = 0; j < p; ++j) v[j] = 1.0 + 0.1 * std::sin(static_cast<double>(j) + 1.0);
    double nv = norm2(v);
    for (double& e : v) e /= nv;
    double est = 0.0;
    for (int it = 0; it < 60; ++it) {
        kmul(k, v, w);
        const double rq = dot(v, w);
        const double nw = norm2(w);
        if (nw == 0.0) return 0.0;
        for (std::size_t j = 0; j < p; ++j) v[j] = w[j] / nw;
        if (it > 3 && std::abs(rq - est) <= 1e-4 * std::abs(rq)) return std::max(rq, nw);
        est = rq;
    }
    return est;
}

double smooth_value(const GramForm& f, const std::vector<double>& b, const std::vector<double>& kb) {
    return dot(b, kb) - 2.0 * dot(f.c, b) + f.yy;
}

struct DescentOutput {
    std::vector<double> x;
    std::size_t iterations = 0;
    bool converged = false;
    double lip = 1.0;
    std::vector<double> trace;
};

// Accelerated proximal gradient on f + h. `prox(v, step, out)` evaluates prox of step*h;
// `penalty(b)` is h(b); `residual(b, kb, L)` is the cheap Gram-form certificate and
// `confirm(b, L)` recomputes it from the raw data before convergence is declared.
template <class Prox, class Penalty, class Residual, class Confirm>
DescentOutput accelerated_descent(const GramForm& f, const SolverSettings& st,
                                  std::vector<double> x0, Prox prox, Penalty penalty,
                                  Residual residual, Confirm confirm) {
    if (st.max_iter < 1) throw std::invalid_argument("solver: max_iter must be >= 1");
    if (!(st.kkt_tol > 0.0)) throw std::invalid_argument("solver: kkt_tol must be > 0");

    const std::size_t p = x0.size();
    DescentOutput out;
    std::vector<double> x = std::move(x0), kx(p), y, ky, xn(p), kxn(p), v(p), g(p);
    kmul(f.k, x, kx);
    double fx = smooth_value(f, x, kx) + penalty(x);
    y = x;
    ky = kx;
    double t = 1.0;
    bool momentum = false;
    double lip = 2.0 * f.top_eigenvalue * 1.02;
    if (!(lip > 0.0)) lip = 1.0;

    for (std::size_t it = 1; it <= st.max_iter; ++it) {
        out.iterations = it;
        for (std::size_t j = 0; j < p; ++j) g[j] = 2.0 * (ky[j] - f.c[j]);
        for (;;) {
            for (std::size_t j = 0; j < p; ++j) v[j] = y[j] - g[j] / lip;
            prox(v, 1.0 / lip, xn);
            kmul(f.k, xn, kxn);
            double quad = 0.0;
            double dd = 0.0;
            for (std::size_t j = 0; j < p; ++j) {
                const double d = xn[j] - y[j];
                quad += d * (kxn[j] - ky[j]);
                dd += d * d;
            }
            if (quad <= 0.5 * lip * dd * (1.0 + 1e-10)) break;
            lip *= 2.0;
        }

        // exact objective change, free of the |y|^2 offset
        double delta = penalty(xn) - penalty(x);
        for (std::size_t j = 0; j < p; ++j) {
            const double d = xn[j] - x[j];
            delta += d * (kxn[j] + kx[j] - 2.0 * f.c[j]);
        }
        if (st.restart && momentum && delta > 0.0) {
            y = x;
            ky = kx;
            t = 1.0;
            momentum = false;
            continue;
        }

        const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        const double theta = (t - 1.0) / tn;
        for (std::size_t j = 0; j < p; ++j) {
            y[j] = xn[j] + theta * (xn[j] - x[j]);
            ky[j] = kxn[j] + theta * (kxn[j] - kx[j]);
        }
        momentum = theta > 0.0;
        std::swap(x, xn);
        std::swap(kx, kxn);
        t = tn;
        fx = smooth_value(f, x, kx) + penalty(x);
        if (st.record_trace) out.trace.push_back(fx);

        if (residual(x, kx, lip) <= st.kkt_tol && confirm(x, lip) <= st.kkt_tol) {
            out.converged = true;
            break;
        }
    }
    out.x = std::move(x);
    out.lip = lip;
    return out;
}

double kkt_from_gradient(const std::vector<double>& b, const std::vector<double>& g,
                         double lambda) {
    double r = 0.0;
    for (std::size_t j = 0; j < b.size(); ++j) {
        const double rj = b[j] != 0.0 ? std::abs(g[j] + (b[j] > 0.0 ? lambda : -lambda))
                                      : std::max(std::abs(g[j]) - lambda, 0.0);
        r = std::max(r, rj);
    }
    return r;
}

// (2/n) X'(X b - y), the gradient of the loss term alone.
std::vector<double> loss_gradient(const DenseVector& beta, const DenseMatrix& x,
                                  const DenseVector& y) {
    DenseVector r = subtract(matvec(x, beta), y);
    DenseVector g = matvec_transposed(x, r);
    const double s = 2.0 / static_cast<double>(x.rows());
    std::vector<double> out(g.values());
    for (double& e : out) e *= s;
    return out;
}

void soft_threshold_inplace(std::vector<double>& v, double t) {
    for (double& e : v) e = soft_threshold(e, t);
}

std::vector<std::size_t> support_of(const DenseVector& b) {
    std::vector<std::size_t> a;
    for (std::size_t j = 0; j < b.size(); ++j)
        if (b[j] != 0.0) a.push_back(j);
    return a;
}

std::vector<double> initial_point(std::size_t p, const DenseVector* warm) {
    if (warm == nullptr) return std::vector<double>(p, 0.0);
    if (warm->size() != p) {
        throw DimensionError("solver: warm start has length " + std::to_string(warm->size()) +
                             " but p = " + std::to_string(p));
    }
    return warm->values();
}

double tv_value(const DenseVector& b) {
    double s = 0.0;
    for (std::size_t j = 1; j < b.size(); ++j) s += std::abs(b[j] - b[j - 1]);
    return s;
}

}  // namespace

double soft_threshold(double z, double t) {
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

double objective(const DenseVector& beta, const DenseMatrix& x, const DenseVector& y,
                 const PenaltyConfig& cfg, const StructureMatrix& s) {
    if (beta.size() != x.cols() || y.size() != x.rows() || s.p() != x.cols()) {
        throw DimensionError("objective: beta " + std::to_string(beta.size()) + ", X " +
                             shape_string(x) + ", y " + std::to_string(y.size()) +
                             ", structure p " + std::to_string(s.p()));
    }
    const DenseVector r = subtract(y, matvec(x, beta));
    const double loss = norm2_squared(r.span()) / static_cast<double>(x.rows());
    const double quad = cfg.mu == 0.0 ? 0.0 : cfg.mu * quad_penalty(beta, s);
    return loss + cfg.lambda * norm1(beta.span()) + quad;
}

double kkt_residual(const DenseVector& beta, const DenseMatrix& x, const DenseVector& y,
                    const PenaltyConfig& cfg, const StructureMatrix& s) {
    if (beta.size() != x.cols() || s.p() != x.cols() || y.size() != x.rows()) {
        throw DimensionError("kkt_residual: inconsistent dimensions");
    }
    std::vector<double> g = loss_gradient(beta, x, y);
    if (cfg.mu != 0.0) {
        const DenseVector jb = jtilde_times(s, beta);
        for (std::size_t j = 0; j < g.size(); ++j) g[j] += 2.0 * cfg.mu * jb[j];
    }
    return kkt_from_gradient(beta.values(), g, cfg.lambda);
}

PreparedProblem::PreparedProblem(const DenseMatrix& x, const DenseVector& y,
                                 const StructureMatrix& s, double mu)
    : x_(&x), y_(&y), s_(&s), mu_(mu) {
    check_inputs(x, y, "fit");
    check_penalty(0.0, mu, "fit");
    if (s.p() != x.cols()) {
        throw DimensionError("fit: X is " + shape_string(x) + " but structure has p = " +
                             std::to_string(s.p()));
    }
    form_ = std::make_shared<const GramForm>(make_form(x, y, &s.jtilde, mu));
}

PreparedProblem::PreparedProblem(const DenseMatrix& x, const DenseVector& y) : x_(&x), y_(&y) {
    check_inputs(x, y, "fused_lasso_fit");
    form_ = std::make_shared<const GramForm>(make_form(x, y, nullptr, 0.0));
}

FitResult fit(const DenseMatrix& x, const DenseVector& y, const PenaltyConfig& cfg,
              const StructureMatrix& s, const SolverSettings& settings,
              const DenseVector* warm_start) {
    check_penalty(cfg.lambda, cfg.mu, "fit");
    return fit(PreparedProblem(x, y, s, cfg.mu), cfg.lambda, settings, warm_start);
}

FitResult fit(const PreparedProblem& prob, double lambda, const SolverSettings& settings,
              const DenseVector* warm_start) {
    if (prob.structure() == nullptr)
        throw std::invalid_argument("fit: problem was prepared without a structure");
    check_penalty(lambda, prob.mu(), "fit");
    const DenseMatrix& x = prob.x();
    const DenseVector& y = prob.y();
    const StructureMatrix& s = *prob.structure();
    const PenaltyConfig cfg{lambda, prob.mu(), StructureKind{s.kind.family, {}, {}, {}}};
    const GramForm& form = prob.form();
    const std::size_t p = x.cols();

    auto prox = [lambda](const std::vector<double>& v, double step, std::vector<double>& out) {
        for (std::size_t j = 0; j < v.size(); ++j) out[j] = soft_threshold(v[j], lambda * step);
    };
    auto penalty = [lambda](const std::vector<double>& b) { return lambda * norm1(b); };
    std::vector<double> g(p);
    auto residual = [&](const std::vector<double>& b, const std::vector<double>& kb, double) {
        for (std::size_t j = 0; j < p; ++j) g[j] = 2.0 * (kb[j] - form.c[j]);
        return kkt_from_gradient(b, g, lambda);
    };
    auto confirm = [&](const std::vector<double>& b, double) {
        return kkt_residual(DenseVector(b), x, y, cfg, s);
    };

    DescentOutput d = accelerated_descent(form, settings, initial_point(p, warm_start), prox,
                                          penalty, residual, confirm);
    FitResult res;
    res.beta = DenseVector(std::move(d.x));
    res.iterations = d.iterations;
    res.converged = d.converged;
    res.kkt_residual = kkt_residual(res.beta, x, y, cfg, s);
    res.objective = objective(res.beta, x, y, cfg, s);
    res.active_set = support_of(res.beta);
    res.objective_trace = std::move(d.trace);
    return res;
}

OracleResult kkt_oracle_fit(const DenseMatrix& x, const DenseVector& y, const PenaltyConfig& cfg,
                            const StructureMatrix& s) {
    check_inputs(x, y, "kkt_oracle_fit");
    check_penalty(cfg.lambda, cfg.mu, "kkt_oracle_fit");
    const std::size_t p = x.cols();
    if (p > 12) {
        throw std::invalid_argument("kkt_oracle_fit: p = " + std::to_string(p) +
                                    " exceeds the enumeration limit of 12");
    }
    if (s.p() != p) throw DimensionError("kkt_oracle_fit: structure does not match X");
    const GramForm form = make_form(x, y, &s.jtilde, cfg.mu);
    const double lambda = cfg.lambda;
    const double tol = 1e-9 * std::max({1.0, lambda, norm_inf(form.c)});

    std::vector<int> sign(p, -1);
    std::vector<DenseVector> verified;
    std::vector<double> kb(p);
    for (;;) {
        std::vector<std::size_t> supp;
        for (std::size_t j = 0; j < p; ++j)
            if (sign[j] != 0) supp.push_back(j);

        std::vector<double> b(p, 0.0);
        bool ok = true;
        if (!supp.empty()) {
            const std::size_t m = supp.size();
            DenseMatrix a(m, m);
            DenseVector rhs(m);
            for (std::size_t r = 0; r < m; ++r) {
                for (std::size_t c = 0; c < m; ++c) a(r, c) = form.k(supp[r], supp[c]);
                rhs[r] = form.c[supp[r]] - 0.5 * lambda * sign[supp[r]];
            }
            const auto sol = solve_linear(a, rhs);
            if (!sol) {
                ok = false;
            } else {
                for (std::size_t r = 0; r < m; ++r) {
                    const double v = (*sol)[r];
                    if (v * sign[supp[r]] <= 0.0) ok = false;
                    b[supp[r]] = v;
                }
            }
        }
        if (ok) {
            kmul(form.k, b, kb);
            for (std::size_t j = 0; j < p && ok; ++j) {
                const double gj = 2.0 * (kb[j] - form.c[j]);
                if (sign[j] == 0) {
                    ok = std::abs(gj) <= lambda + tol;
                } else {
                    ok = std::abs(gj + lambda * sign[j]) <= tol;
                }
            }
            if (ok) verified.emplace_back(std::move(b));
        }

        std::size_t j = 0;
        while (j < p && sign[j] == 1) sign[j++] = -1;
        if (j == p) break;
        ++sign[j];
    }
    if (verified.empty()) {
        throw DegenerateProblemError("kkt_oracle_fit: no sign pattern satisfies the optimality "
                                     "conditions (numerically degenerate instance)");
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < verified.size(); ++i)
        if (norm1(verified[i].span()) < norm1(verified[best].span())) best = i;
    OracleResult out{verified[best], true};
    for (const auto& v : verified) {
        if (norm_inf(subtract(v, out.beta).span()) > 1e-8 * std::max(1.0, norm_inf(v.span())))
            out.unique = false;
    }
    return out;
}

// Condat's direct algorithm for 1-D total-variation denoising. It follows the taut
// string through a tube of half-width gamma around the cumulative sum of v.
DenseVector tv_prox(const DenseVector& v, double gamma) {
    if (!(gamma >= 0.0)) throw std::invalid_argument("tv_prox: gamma must be >= 0");
    const std::size_t width = v.size();
    if (width == 0 || gamma == 0.0) return v;
    std::vector<double> out(width);

    // constant solution once the tube contains the straight string
    double mean = 0.0;
    for (double e : v) mean += e;
    mean /= static_cast<double>(width);
    double partial = 0.0, widest = 0.0;
    for (std::size_t i = 0; i + 1 < width; ++i) {
        partial += v[i] - mean;
        widest = std::max(widest, std::abs(partial));
    }
    if (widest <= gamma) {
        std::fill(out.begin(), out.end(), mean);
        return DenseVector(std::move(out));
    }

    const double* in = v.data();
    const double lambda = gamma;
    const double twolambda = 2.0 * lambda;
    const double minlambda = -lambda;

    std::size_t k = 0, k0 = 0, kplus = 0, kminus = 0;
    double umin = lambda, umax = minlambda;
    double vmin = in[0] - lambda, vmax = in[0] + lambda;
    for (;;) {
        while (k == width - 1) {
            if (umin < 0.0) {
                do out[k0++] = vmin;
                while (k0 <= kminus);
                k = kminus = k0;
                vmin = in[k];
                umin = lambda;
                umax = vmin + umin - vmax;
            } else if (umax > 0.0) {
                do out[k0++] = vmax;
                while (k0 <= kplus);
                k = kplus = k0;
                vmax = in[k];
                umax = minlambda;
                umin = vmax + umax - vmin;
            } else {
                vmin += umin / static_cast<double>(k - k0 + 1);
                do out[k0++] = vmin;
                while (k0 <= k);
                return DenseVector(std::move(out));
            }
        }
        if ((umin += in[k + 1] - vmin) < minlambda) {
            do out[k0++] = vmin;
            while (k0 <= kminus);
            k = kplus = kminus = k0;
            vmin = in[k];
            vmax = vmin + twolambda;
            umin = lambda;
            umax = minlambda;
        } else if ((umax += in[k + 1] - vmax) > lambda) {
            do out[k0++] = vmax;
            while (k0 <= kplus);
            k = kplus = kminus = k0;
            vmax = in[k];
            vmin = vmax - twolambda;
            umin = lambda;
            umax = minlambda;
        } else {
            ++k;
            if (umin >= lambda) {
                kminus = k;
                vmin += (umin - lambda) / static_cast<double>(kminus - k0 + 1);
                umin = lambda;
            }
            if (umax <= minlambda) {
                kplus = k;
                vmax += (umax + lambda) / static_cast<double>(kplus - k0 + 1);
                umax = minlambda;
            }
        }
    }
}

double fused_objective(const DenseVector& beta, const DenseMatrix& x, const DenseVector& y,
                       double lambda, double mu_fuse) {
    if (beta.size() != x.cols() || y.size() != x.rows()) {
        throw DimensionError("fused_objective: inconsistent dimensions");
    }
    const DenseVector r = subtract(y, matvec(x, beta));
    return norm2_squared(r.span()) / static_cast<double>(x.rows()) +
           lambda * norm1(beta.span()) + mu_fuse * tv_value(beta);
}

FitResult fused_lasso_fit(const DenseMatrix& x, const DenseVector& y, double lambda,
                          double mu_fuse, const SolverSettings& settings,
                          const DenseVector* warm_start) {
    check_penalty(lambda, mu_fuse, "fused_lasso_fit");
    return fused_lasso_fit(PreparedProblem(x, y), lambda, mu_fuse, settings, warm_start);
}

FitResult fused_lasso_fit(const PreparedProblem& prob, double lambda, double mu_fuse,
                          const SolverSettings& settings, const DenseVector* warm_start) {
    check_penalty(lambda, mu_fuse, "fused_lasso_fit");
    if (prob.mu() != 0.0)
        throw std::invalid_argument("fused_lasso_fit: problem carries a quadratic term");
    const DenseMatrix& x = prob.x();
    const DenseVector& y = prob.y();
    const GramForm& form = prob.form();
    const std::size_t p = x.cols();

    auto prox = [lambda, mu_fuse](const std::vector<double>& v, double step,
                                  std::vector<double>& out) {
        std::vector<double> u = tv_prox(DenseVector(v), mu_fuse * step).values();
        soft_threshold_inplace(u, lambda * step);
        out = std::move(u);
    };
    auto penalty = [lambda, mu_fuse](const std::vector<double>& b) {
        double tv = 0.0;
        for (std::size_t j = 1; j < b.size(); ++j) tv += std::abs(b[j] - b[j - 1]);
        return lambda * norm1(b) + mu_fuse * tv;
    };
    std::vector<double> v(p), xp(p);
    auto mapping_norm = [&](const std::vector<double>& b, const std::vector<double>& g, double lip) {
        for (std::size_t j = 0; j < p; ++j) v[j] = b[j] - g[j] / lip;
        prox(v, 1.0 / lip, xp);
        double r = 0.0;
        for (std::size_t j = 0; j < p; ++j) r = std::max(r, lip * std::abs(b[j] - xp[j]));
        return r;
    };
    std::vector<double> g(p);
    auto residual = [&](const std::vector<double>& b, const std::vector<double>& kb, double lip) {
        for (std::size_t j = 0; j < p; ++j) g[j] = 2.0 * (kb[j] - form.c[j]);
        return mapping_norm(b, g, lip);
    };
    auto confirm = [&](const std::vector<double>& b, double lip) {
        return mapping_norm(b, loss_gradient(DenseVector(b), x, y), lip);
    };

    DescentOutput d = accelerated_descent(form, settings, initial_point(p, warm_start), prox,
                                          penalty, residual, confirm);
    FitResult res;
    res.beta = DenseVector(std::move(d.x));
    res.iterations = d.iterations;
    res.converged = d.converged;
    res.kkt_residual = mapping_norm(res.beta.values(), loss_gradient(res.beta, x, y), d.lip);
    res.objective = fused_objective(res.beta, x, y, lambda, mu_fuse);
    res.active_set = support_of(res.beta);
    res.objective_trace = std::move(d.trace);
    return res;
}

}  // namespace quadlasso
