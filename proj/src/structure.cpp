#include "quadlasso/structure.hpp"

#include <cmath>
#include <string>

namespace quadlasso {

std::string_view to_string(StructureFamily f) {
    switch (f) {
        case StructureFamily::Lasso: return "lasso";
        case StructureFamily::ElasticNet: return "en";
        case StructureFamily::SmoothLasso: return "slasso";
        case StructureFamily::WeightedFusion: return "wfusion";
        case StructureFamily::Custom: return "custom";
    }
    return "unknown";
}

StructureKind StructureKind::weighted_fusion(DenseMatrix weights, DenseMatrix signs) {
    if (!weights.square() || weights.rows() != signs.rows() || !signs.square()) {
        throw DimensionError("weighted fusion: weights " + shape_string(weights) + " and signs " +
                             shape_string(signs) + " must be equal square matrices");
    }
    const std::size_t p = weights.rows();
    for (std::size_t j = 0; j < p; ++j) {
        for (std::size_t k = 0; k < p; ++k) {
            if (weights(j, k) < 0.0) throw std::invalid_argument("weighted fusion: negative weight");
            if (weights(j, k) != weights(k, j))
                throw std::invalid_argument("weighted fusion: weights must be symmetric");
            const double s = signs(j, k);
            if (s != -1.0 && s != 0.0 && s != 1.0)
                throw std::invalid_argument("weighted fusion: signs must be -1, 0 or 1");
        }
    }
    return {StructureFamily::WeightedFusion, std::move(weights), std::move(signs), {}};
}

StructureKind StructureKind::weighted_fusion_from_design(const DenseMatrix& x,
                                                         std::optional<DenseMatrix> weights) {
    const DenseMatrix corr = gram(x, static_cast<double>(x.rows()));
    const std::size_t p = corr.rows();
    DenseMatrix signs(p, p);
    DenseMatrix w(p, p);
    for (std::size_t j = 0; j < p; ++j) {
        for (std::size_t k = 0; k < p; ++k) {
            const double c = corr(j, k);
            signs(j, k) = c > 0.0 ? 1.0 : (c < 0.0 ? -1.0 : 0.0);
            w(j, k) = std::abs(c);
        }
    }
    return weighted_fusion(weights ? std::move(*weights) : std::move(w), std::move(signs));
}

StructureKind StructureKind::custom_matrix(DenseMatrix j) {
    if (j.rows() == 0 || j.cols() == 0) throw DimensionError("custom structure: empty matrix");
    return {StructureFamily::Custom, {}, {}, std::move(j)};
}

StructureMatrix build_structure(const StructureKind& kind, std::size_t p) {
    const bool needs_two = kind.family == StructureFamily::SmoothLasso ||
                           kind.family == StructureFamily::WeightedFusion;
    if (p < (needs_two ? 2u : 1u)) {
        throw std::invalid_argument("build_structure: p = " + std::to_string(p) +
                                    " is below the minimum for " +
                                    std::string(to_string(kind.family)));
    }
    DenseMatrix j;
    switch (kind.family) {
        case StructureFamily::Lasso:
            j = DenseMatrix(p, p);
            break;
        case StructureFamily::ElasticNet:
            j = DenseMatrix::identity(p);
            break;
        case StructureFamily::SmoothLasso:
            // first row stays zero; row r has +1 at r-1 and -1 at r
            j = DenseMatrix(p, p);
            for (std::size_t r = 1; r < p; ++r) {
                j(r, r - 1) = 1.0;
                j(r, r) = -1.0;
            }
            break;
        case StructureFamily::WeightedFusion:
            if (kind.weights.rows() != p) {
                throw DimensionError("build_structure: weighted fusion data is " +
                                     shape_string(kind.weights) + " but p = " + std::to_string(p));
            }
            j = DenseMatrix(p, p);
            for (std::size_t r = 0; r < p; ++r) {
                for (std::size_t c = 0; c < p; ++c) {
                    j(r, c) = r == c ? kind.weights(r, r) : -kind.signs(r, c) * kind.weights(r, c);
                }
            }
            break;
        case StructureFamily::Custom:
            if (kind.custom.cols() != p) {
                throw DimensionError("build_structure: custom J is " + shape_string(kind.custom) +
                                     " but p = " + std::to_string(p));
            }
            j = kind.custom;
            break;
    }
    DenseMatrix jt = gram(j);
    return StructureMatrix{kind, std::move(j), std::move(jt)};
}

double quad_penalty(const DenseVector& beta, const StructureMatrix& s) {
    if (beta.size() != s.p()) {
        throw DimensionError("quad_penalty: beta has length " + std::to_string(beta.size()) +
                             " but structure has p = " + std::to_string(s.p()));
    }
    return norm2_squared(matvec(s.j, beta).span());
}

DenseVector jtilde_times(const StructureMatrix& s, const DenseVector& beta) {
    return matvec(s.jtilde, beta);
}

double smoothness(const DenseVector& beta) {
    if (beta.size() < 2) throw std::invalid_argument("smoothness: need at least two entries");
    double acc = 0.0;
    for (std::size_t j = 1; j < beta.size(); ++j) {
        const double d = beta[j] - beta[j - 1];
        acc += d * d;
    }
    return acc;
}

AugmentedProblem augment(const DenseMatrix& x, const DenseVector& y, const StructureMatrix& s,
                         double mu) {
    if (!(mu >= 0.0)) throw std::invalid_argument("augment: mu must be nonnegative");
    if (x.cols() != s.p()) {
        throw DimensionError("augment: X is " + shape_string(x) + " but structure has p = " +
                             std::to_string(s.p()));
    }
    if (y.size() != x.rows()) {
        throw DimensionError("augment: y has length " + std::to_string(y.size()) + " but X is " +
                             shape_string(x));
    }
    const std::size_t n = x.rows();
    const std::size_t p = x.cols();
    const std::size_t m = s.m();
    const double factor = std::sqrt(static_cast<double>(n) * mu);

    std::vector<double> xa(x.values());
    xa.reserve((n + m) * p);
    for (double v : s.j.values()) xa.push_back(factor * v);
    std::vector<double> ya(y.values());
    ya.resize(n + m, 0.0);
    return AugmentedProblem{DenseMatrix(n + m, p, std::move(xa)), DenseVector(std::move(ya)), n,
                            mu};
}

}  // namespace quadlasso
