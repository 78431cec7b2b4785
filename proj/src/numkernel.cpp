#include "quadlasso/numkernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace quadlasso {

namespace {

constexpr double kSymmetryTol = 1e-12;

void require_finite(std::span<const double> v, const char* what) {
    if (!all_finite(v)) {
        throw NonFiniteError(std::string(what) + ": non-finite entry");
    }
}

double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

void require_symmetric(const DenseMatrix& a, const char* what) {
    if (!a.square()) {
        throw DimensionError(std::string(what) + ": expected a square matrix, got " + shape_string(a));
    }
    const double tol = kSymmetryTol * std::max(1.0, max_abs(a.values()));
    if (max_abs_asymmetry(a) > tol) {
        throw NotSymmetricError(std::string(what) + ": matrix is not symmetric");
    }
}

}  // namespace

NotPositiveDefiniteError::NotPositiveDefiniteError(std::size_t pivot, double value)
    : std::runtime_error("matrix is not positive definite (pivot " + std::to_string(pivot) +
                         " = " + std::to_string(value) + ")"),
      pivot_(pivot) {}

DenseVector::DenseVector(std::size_t n, double fill) : data_(n, fill) {
    require_finite(data_, "DenseVector");
}

DenseVector::DenseVector(std::vector<double> entries) : data_(std::move(entries)) {
    require_finite(data_, "DenseVector");
}

DenseVector::DenseVector(std::initializer_list<double> entries) : data_(entries) {
    require_finite(data_, "DenseVector");
}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
    require_finite(data_, "DenseMatrix");
}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> entries)
    : rows_(rows), cols_(cols), data_(std::move(entries)) {
    if (data_.size() != rows * cols) {
        throw DimensionError("DenseMatrix: " + std::to_string(data_.size()) +
                             " entries cannot fill " + std::to_string(rows) + "x" +
                             std::to_string(cols));
    }
    require_finite(data_, "DenseMatrix");
}

DenseMatrix::DenseMatrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) throw DimensionError("DenseMatrix: ragged initializer");
        data_.insert(data_.end(), r.begin(), r.end());
    }
    require_finite(data_, "DenseMatrix");
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

DenseMatrix DenseMatrix::diagonal(std::span<const double> d) {
    DenseMatrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    require_finite(m.values(), "DenseMatrix::diagonal");
    return m;
}

std::string shape_string(const DenseMatrix& a) {
    std::ostringstream os;
    os << a.rows() << "x" << a.cols();
    return os.str();
}

DenseVector matvec(const DenseMatrix& a, const DenseVector& v) {
    if (a.cols() != v.size()) {
        throw DimensionError("matvec: matrix is " + shape_string(a) + " but vector has length " +
                             std::to_string(v.size()));
    }
    DenseVector out(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) out[i] = dot(a.row(i), v.span());
    return out;
}

DenseVector matvec_transposed(const DenseMatrix& a, const DenseVector& v) {
    if (a.rows() != v.size()) {
        throw DimensionError("matvec_transposed: matrix is " + shape_string(a) +
                             " but vector has length " + std::to_string(v.size()));
    }
    DenseVector out(a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double vi = v[i];
        if (vi == 0.0) continue;
        const auto r = a.row(i);
        for (std::size_t j = 0; j < a.cols(); ++j) out[j] += r[j] * vi;
    }
    return out;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul: " + shape_string(a) + " times " + shape_string(b));
    }
    DenseMatrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto orow = out.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            const auto brow = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
        }
    }
    return out;
}

DenseMatrix transpose(const DenseMatrix& a) {
    DenseMatrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

DenseMatrix gram(const DenseMatrix& a, double scale) {
    const std::size_t p = a.cols();
    DenseMatrix g(p, p);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto r = a.row(i);
        for (std::size_t j = 0; j < p; ++j) {
            const double rj = r[j];
            if (rj == 0.0) continue;
            auto grow = g.row(j);
            for (std::size_t k = j; k < p; ++k) grow[k] += rj * r[k];
        }
    }
    // mirror the upper triangle so the result is exactly symmetric
    for (std::size_t j = 0; j < p; ++j) {
        for (std::size_t k = j; k < p; ++k) {
            g(j, k) /= scale;
            g(k, j) = g(j, k);
        }
    }
    return g;
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw DimensionError("dot: lengths " + std::to_string(a.size()) + " and " +
                             std::to_string(b.size()));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm1(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += std::abs(x);
    return s;
}

double norm2_squared(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

double norm2(std::span<const double> v) { return std::sqrt(norm2_squared(v)); }

double norm_inf(std::span<const double> v) { return max_abs(v); }

DenseVector add(const DenseVector& a, const DenseVector& b) {
    if (a.size() != b.size()) throw DimensionError("add: vector lengths differ");
    DenseVector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return out;
}

DenseVector subtract(const DenseVector& a, const DenseVector& b) {
    if (a.size() != b.size()) throw DimensionError("subtract: vector lengths differ");
    DenseVector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

DenseVector scale(const DenseVector& a, double s) {
    DenseVector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * s;
    return out;
}

DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b, double b_scale) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw DimensionError("add: " + shape_string(a) + " and " + shape_string(b));
    }
    std::vector<double> out(a.values());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b_scale * b.values()[i];
    return DenseMatrix(a.rows(), a.cols(), std::move(out));
}

double frobenius_norm(const DenseMatrix& a) { return norm2(a.values()); }

double max_abs_asymmetry(const DenseMatrix& a) {
    if (!a.square()) return std::numeric_limits<double>::infinity();
    double m = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = i + 1; j < a.cols(); ++j) m = std::max(m, std::abs(a(i, j) - a(j, i)));
    return m;
}

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

DenseMatrix cholesky(const DenseMatrix& a) {
    require_symmetric(a, "cholesky");
    const std::size_t n = a.rows();
    DenseMatrix l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double d = a(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
        if (!(d > 0.0)) throw NotPositiveDefiniteError(j, d);
        const double ljj = std::sqrt(d);
        l(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / ljj;
        }
    }
    return l;
}

std::optional<DenseVector> solve_linear(const DenseMatrix& a, const DenseVector& b,
                                        double rel_pivot_tol) {
    if (!a.square() || a.rows() != b.size()) {
        throw DimensionError("solve_linear: matrix is " + shape_string(a) + " but rhs has length " +
                             std::to_string(b.size()));
    }
    const std::size_t n = a.rows();
    DenseMatrix m = a;
    std::vector<double> x(b.values());
    const double floor = rel_pivot_tol * std::max(max_abs(a.values()), 1e-300);
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(m(r, col)) > std::abs(m(piv, col))) piv = r;
        if (!(std::abs(m(piv, col)) > floor)) return std::nullopt;
        if (piv != col) {
            for (std::size_t k = 0; k < n; ++k) std::swap(m(piv, k), m(col, k));
            std::swap(x[piv], x[col]);
        }
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = m(r, col) / m(col, col);
            if (f == 0.0) continue;
            for (std::size_t k = col; k < n; ++k) m(r, k) -= f * m(col, k);
            x[r] -= f * x[col];
        }
    }
    for (std::size_t i = n; i-- > 0;) {
        double s = x[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= m(i, k) * x[k];
        x[i] = s / m(i, i);
    }
    if (!all_finite(x)) return std::nullopt;
    return DenseVector(std::move(x));
}

namespace {

// Cyclic Jacobi. Rotations are applied until the off-diagonal mass is
// negligible relative to the diagonal; `v`, when given, accumulates them.
void jacobi_diagonalize(DenseMatrix& a, DenseMatrix* v) {
    const std::size_t n = a.rows();
    constexpr int kMaxSweeps = 100;
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        double off = 0.0;
        double diag = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            diag += a(i, i) * a(i, i);
            for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
        }
        if (off == 0.0 || off <= 1e-30 * diag) return;

        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double app = a(p, p);
                const double aqq = a(q, q);
                // skip rotations that would not change the diagonal in floating point
                if (sweep > 3 && std::abs(apq) < 1e-18 * (std::abs(app) + std::abs(aqq))) {
                    a(p, q) = a(q, p) = 0.0;
                    continue;
                }
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                a(p, q) = a(q, p) = 0.0;
                if (v != nullptr) {
                    for (std::size_t k = 0; k < n; ++k) {
                        const double vkp = (*v)(k, p);
                        const double vkq = (*v)(k, q);
                        (*v)(k, p) = c * vkp - s * vkq;
                        (*v)(k, q) = s * vkp + c * vkq;
                    }
                }
            }
        }
    }
}

}  // namespace

DenseVector sym_eigvals(const DenseMatrix& a) {
    require_symmetric(a, "sym_eigvals");
    DenseMatrix work = a;
    jacobi_diagonalize(work, nullptr);
    std::vector<double> ev(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) ev[i] = work(i, i);
    std::sort(ev.begin(), ev.end());
    return DenseVector(std::move(ev));
}

SymmetricEigen sym_eigen(const DenseMatrix& a) {
    require_symmetric(a, "sym_eigen");
    const std::size_t n = a.rows();
    DenseMatrix work = a;
    DenseMatrix v = DenseMatrix::identity(n);
    jacobi_diagonalize(work, &v);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return work(x, x) < work(y, y); });
    SymmetricEigen out{DenseVector(n), DenseMatrix(n, n)};
    for (std::size_t k = 0; k < n; ++k) {
        out.values[k] = work(order[k], order[k]);
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
    }
    return out;
}

}  // namespace quadlasso
