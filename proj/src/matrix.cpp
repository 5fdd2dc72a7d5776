#include "fedelm/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace fedelm {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw DimensionError("matrix data length " + std::to_string(data_.size()) +
                             " does not match " + std::to_string(rows_) + "x" +
                             std::to_string(cols_));
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::from(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    Matrix m(r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
        if (row.size() != c) throw DimensionError("ragged matrix literal");
        std::size_t j = 0;
        for (double v : row) m(i, j++) = v;
        ++i;
    }
    return m;
}

Matrix Matrix::row(std::size_t i) const {
    Matrix r(1, cols_);
    std::copy(data_.begin() + static_cast<std::ptrdiff_t>(i * cols_),
              data_.begin() + static_cast<std::ptrdiff_t>((i + 1) * cols_), r.data());
    return r;
}

bool Matrix::all_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](double v) { return std::isfinite(v); });
}

std::string shape_str(const Matrix& m) {
    std::ostringstream os;
    os << m.rows() << "x" << m.cols();
    return os.str();
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul shape mismatch: " + shape_str(a) + " * " + shape_str(b));
    }
    const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
    Matrix out(n, m);
    const double* ap = a.data();
    const double* bp = b.data();
    double* op = out.data();
#pragma omp parallel for schedule(static) if (n * k * m > 32768)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        double* orow = op + i * static_cast<std::ptrdiff_t>(m);
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = ap[i * static_cast<std::ptrdiff_t>(k) + static_cast<std::ptrdiff_t>(p)];
            const double* brow = bp + p * m;
            for (std::size_t j = 0; j < m; ++j) orow[j] += aip * brow[j];
        }
    }
    return out;
}

Matrix transpose(const Matrix& m) {
    Matrix out(m.cols(), m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) out(j, i) = m(i, j);
    return out;
}

static void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(op) + " shape mismatch: " + shape_str(a) +
                             " vs " + shape_str(b));
    }
}

Matrix add(const Matrix& a, const Matrix& b) {
    check_same_shape(a, b, "add");
    Matrix out(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] + b.data()[i];
    return out;
}

Matrix sub(const Matrix& a, const Matrix& b) {
    check_same_shape(a, b, "sub");
    Matrix out(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] - b.data()[i];
    return out;
}

Matrix scale(const Matrix& a, double s) {
    Matrix out(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] * s;
    return out;
}

Matrix symmetrize(const Matrix& m) {
    if (m.rows() != m.cols()) throw DimensionError("symmetrize needs a square matrix");
    Matrix out(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = 0.5 * (m(i, j) + m(j, i));
    return out;
}

double frobenius_norm(const Matrix& m) {
    double s = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) s += m.data()[i] * m.data()[i];
    return std::sqrt(s);
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    check_same_shape(a, b, "max_abs_diff");
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        d = std::max(d, std::fabs(a.data()[i] - b.data()[i]));
    return d;
}

double relative_frobenius_diff(const Matrix& a, const Matrix& b) {
    check_same_shape(a, b, "relative_frobenius_diff");
    const double denom = std::max(frobenius_norm(a), 1e-300);
    return frobenius_norm(sub(a, b)) / denom;
}

bool is_symmetric(const Matrix& m, double rel_tol) {
    if (m.rows() != m.cols()) return false;
    const double scale = std::max(frobenius_norm(m), 1e-300);
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = i + 1; j < m.cols(); ++j)
            if (std::fabs(m(i, j) - m(j, i)) > rel_tol * scale) return false;
    return true;
}

static double pivot_floor(const Matrix& a) {
    double trace = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) trace += std::fabs(a(i, i));
    const double mean_diag = a.rows() ? trace / static_cast<double>(a.rows()) : 1.0;
    return 1e-13 * std::max(1.0, mean_diag);
}

static void check_spd_input(const Matrix& a, const char* op) {
    if (a.rows() != a.cols()) {
        throw DimensionError(std::string(op) + " needs a square matrix, got " + shape_str(a));
    }
    if (!is_symmetric(a, 1e-9)) {
        throw DimensionError(std::string(op) + " needs a symmetric matrix");
    }
}

Matrix cholesky(const Matrix& a, double ridge) {
    check_spd_input(a, "cholesky");
    const std::size_t n = a.rows();
    const double floor = pivot_floor(a);
    Matrix l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double d = a(j, j) + ridge;
        for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
        if (d <= floor) {
            throw SingularityError(j, d,
                "matrix is not positive definite: pivot " + std::to_string(d) +
                " at index " + std::to_string(j) +
                " (consider a ridge term or more samples)");
        }
        const double ljj = std::sqrt(d);
        l(j, j) = ljj;
#pragma omp parallel for schedule(static) if (n >= 128)
        for (std::ptrdiff_t i = static_cast<std::ptrdiff_t>(j) + 1;
             i < static_cast<std::ptrdiff_t>(n); ++i) {
            double s = a(static_cast<std::size_t>(i), j);
            for (std::size_t k = 0; k < j; ++k)
                s -= l(static_cast<std::size_t>(i), k) * l(j, k);
            l(static_cast<std::size_t>(i), j) = s / ljj;
        }
    }
    return l;
}

// Solves L L^T X = rhs column by column.
static Matrix cholesky_solve(const Matrix& l, const Matrix& rhs) {
    const std::size_t n = l.rows();
    const std::size_t m = rhs.cols();
    Matrix x(n, m);
#pragma omp parallel for schedule(static) if (m >= 8 && n >= 64)
    for (std::ptrdiff_t cj = 0; cj < static_cast<std::ptrdiff_t>(m); ++cj) {
        const std::size_t c = static_cast<std::size_t>(cj);
        std::vector<double> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            double s = rhs(i, c);
            for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * y[k];
            y[i] = s / l(i, i);
        }
        for (std::size_t ii = n; ii-- > 0;) {
            double s = y[ii];
            for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * x(k, c);
            x(ii, c) = s / l(ii, ii);
        }
    }
    return x;
}

Matrix spd_solve(const Matrix& u, const Matrix& rhs, double ridge) {
    if (rhs.rows() != u.rows()) {
        throw DimensionError("spd_solve rhs mismatch: " + shape_str(u) + " vs " + shape_str(rhs));
    }
    return cholesky_solve(cholesky(u, ridge), rhs);
}

Matrix inverse_spd(const Matrix& u, double ridge) {
    return symmetrize(spd_solve(u, Matrix::identity(u.rows()), ridge));
}

namespace serial {

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul shape mismatch: " + shape_str(a) + " * " + shape_str(b));
    }
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
            out(i, j) = s;
        }
    return out;
}

Matrix cholesky(const Matrix& a, double ridge) {
    check_spd_input(a, "cholesky");
    const std::size_t n = a.rows();
    const double floor = pivot_floor(a);
    Matrix l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double d = a(j, j) + ridge;
        for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
        if (d <= floor) {
            throw SingularityError(j, d, "matrix is not positive definite: pivot " +
                                   std::to_string(d) + " at index " + std::to_string(j));
        }
        l(j, j) = std::sqrt(d);
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / l(j, j);
        }
    }
    return l;
}

Matrix spd_solve(const Matrix& u, const Matrix& rhs, double ridge) {
    if (rhs.rows() != u.rows()) {
        throw DimensionError("spd_solve rhs mismatch: " + shape_str(u) + " vs " + shape_str(rhs));
    }
    return cholesky_solve(serial::cholesky(u, ridge), rhs);
}

}  // namespace serial

}  // namespace fedelm
