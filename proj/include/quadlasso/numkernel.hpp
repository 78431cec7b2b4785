#pragma once

#include <cstddef>
#include <initializer_list>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace quadlasso {

/// Raised when operand shapes do not agree. The message carries both shapes.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when NaN or Inf enters a container or a solver input.
class NonFiniteError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised by symmetric-only routines when |A - A'| exceeds the tolerance.
class NotSymmetricError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Cholesky hit a non-positive pivot.
class NotPositiveDefiniteError : public std::runtime_error {
public:
    NotPositiveDefiniteError(std::size_t pivot, double value);
    std::size_t pivot() const noexcept { return pivot_; }

private:
    std::size_t pivot_;
};

class DenseVector {
public:
    DenseVector() = default;
    explicit DenseVector(std::size_t n, double fill = 0.0);
    explicit DenseVector(std::vector<double> entries);
    DenseVector(std::initializer_list<double> entries);

    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }
    std::span<double> span() noexcept { return data_; }
    std::span<const double> span() const noexcept { return data_; }
    const std::vector<double>& values() const noexcept { return data_; }

    auto begin() noexcept { return data_.begin(); }
    auto end() noexcept { return data_.end(); }
    auto begin() const noexcept { return data_.begin(); }
    auto end() const noexcept { return data_.end(); }

    bool operator==(const DenseVector&) const = default;

private:
    std::vector<double> data_;
};

/// Row-major dense matrix of doubles.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    /// Takes ownership of `entries` (row-major); rejects a size mismatch or any non-finite entry.
    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> entries);
    DenseMatrix(std::initializer_list<std::initializer_list<double>> rows);

    static DenseMatrix identity(std::size_t n);
    static DenseMatrix diagonal(std::span<const double> d);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool square() const noexcept { return rows_ == cols_; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

    const double* data() const noexcept { return data_.data(); }
    double* data() noexcept { return data_.data(); }
    const std::vector<double>& values() const noexcept { return data_; }

    bool operator==(const DenseMatrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

std::string shape_string(const DenseMatrix& a);

// Products.
DenseVector matvec(const DenseMatrix& a, const DenseVector& v);
/// A' v without materializing the transpose.
DenseVector matvec_transposed(const DenseMatrix& a, const DenseVector& v);
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix transpose(const DenseMatrix& a);
/// A'A / scale.
DenseMatrix gram(const DenseMatrix& a, double scale = 1.0);

// Elementwise / BLAS-1 helpers.
double dot(std::span<const double> a, std::span<const double> b);
double norm1(std::span<const double> v);
double norm2(std::span<const double> v);
double norm2_squared(std::span<const double> v);
double norm_inf(std::span<const double> v);
DenseVector add(const DenseVector& a, const DenseVector& b);
DenseVector subtract(const DenseVector& a, const DenseVector& b);
DenseVector scale(const DenseVector& a, double s);
DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b, double b_scale = 1.0);
double frobenius_norm(const DenseMatrix& a);
double max_abs_asymmetry(const DenseMatrix& a);
bool all_finite(std::span<const double> v);

/// Lower-triangular L with L L' = A. A must be square and symmetric within 1e-12.
DenseMatrix cholesky(const DenseMatrix& a);

/// Solves A x = b by Gaussian elimination with partial pivoting. Returns nothing when a
/// pivot falls below `rel_pivot_tol` times the largest entry of A.
std::optional<DenseVector> solve_linear(const DenseMatrix& a, const DenseVector& b,
                                        double rel_pivot_tol = 1e-12);

/// Eigenvalues of a symmetric matrix, ascending. Cyclic Jacobi rotations.
DenseVector sym_eigvals(const DenseMatrix& a);

struct SymmetricEigen {
    DenseVector values;   // ascending
    DenseMatrix vectors;  // column k is the unit eigenvector of values[k]
};
SymmetricEigen sym_eigen(const DenseMatrix& a);

}  // namespace quadlasso
