#pragma once

#include <optional>
#include <string_view>

#include "quadlasso/numkernel.hpp"

namespace quadlasso {

enum class StructureFamily { Lasso, ElasticNet, SmoothLasso, WeightedFusion, Custom };

std::string_view to_string(StructureFamily f);

/// Which quadratic penalty beta' J'J beta to use, plus the data some families need.
///
/// WeightedFusion carries symmetric nonnegative weights w and correlation signs s;
/// its J has w_kk on the diagonal and -s_jk * w_jk off it. Custom carries J itself.
struct StructureKind {
    StructureFamily family = StructureFamily::Lasso;
    DenseMatrix weights;  // WeightedFusion only
    DenseMatrix signs;    // WeightedFusion only
    DenseMatrix custom;   // Custom only

    static StructureKind lasso() { return {StructureFamily::Lasso, {}, {}, {}}; }
    static StructureKind elastic_net() { return {StructureFamily::ElasticNet, {}, {}, {}}; }
    static StructureKind smooth_lasso() { return {StructureFamily::SmoothLasso, {}, {}, {}}; }
    static StructureKind weighted_fusion(DenseMatrix weights, DenseMatrix signs);
    /// Signs are sign(X_j'X_k / n). Without explicit weights, w_jk = |X_j'X_k / n|.
    static StructureKind weighted_fusion_from_design(const DenseMatrix& x,
                                                     std::optional<DenseMatrix> weights = {});
    static StructureKind custom_matrix(DenseMatrix j);
};

struct StructureMatrix {
    StructureKind kind;
    DenseMatrix j;       // m x p
    DenseMatrix jtilde;  // p x p, J'J

    std::size_t m() const noexcept { return j.rows(); }
    std::size_t p() const noexcept { return j.cols(); }
};

/// Data augmentation that turns the quadratic-penalized criterion into a plain
/// Lasso criterion: Xaug = [X; sqrt(n mu) J], yaug = [y; 0].
struct AugmentedProblem {
    DenseMatrix xaug;
    DenseVector yaug;
    std::size_t n_original = 0;
    double mu = 0.0;
};

StructureMatrix build_structure(const StructureKind& kind, std::size_t p);

/// beta' J~ beta = |J beta|_2^2 (no mu factor).
double quad_penalty(const DenseVector& beta, const StructureMatrix& s);

/// J~ beta.
DenseVector jtilde_times(const StructureMatrix& s, const DenseVector& beta);

/// Sum of squared successive differences.
double smoothness(const DenseVector& beta);

AugmentedProblem augment(const DenseMatrix& x, const DenseVector& y, const StructureMatrix& s,
                         double mu);

}  // namespace quadlasso
