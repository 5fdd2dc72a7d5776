#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace fedelm {

// Thrown when operand shapes do not line up.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Thrown when an SPD factorization hits a non-positive pivot.
class SingularityError : public std::runtime_error {
public:
    SingularityError(std::size_t pivot_index, double pivot_value, const std::string& what)
        : std::runtime_error(what), pivot_index(pivot_index), pivot_value(pivot_value) {}

    std::size_t pivot_index;
    double pivot_value;
};

// Dense row-major matrix of 64-bit reals. Values are immutable by
// convention once handed to another module; all free functions below
// return fresh matrices.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix identity(std::size_t n);
    // Row-major literal, e.g. Matrix::from({{1,2},{3,4}}).
    static Matrix from(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    const std::vector<double>& storage() const { return data_; }

    Matrix row(std::size_t i) const;

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    bool all_finite() const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

std::string shape_str(const Matrix& m);

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);

// (m + m^T) / 2, for killing floating-point symmetry drift.
Matrix symmetrize(const Matrix& m);

double frobenius_norm(const Matrix& m);
double max_abs_diff(const Matrix& a, const Matrix& b);
double relative_frobenius_diff(const Matrix& a, const Matrix& b);
bool is_symmetric(const Matrix& m, double rel_tol);

// Lower Cholesky factor of (a + ridge*I). Throws SingularityError when a
// pivot falls at or below the floor.
Matrix cholesky(const Matrix& a, double ridge = 0.0);

// Solves u * X = rhs for SPD u via Cholesky, never forming u^-1.
Matrix spd_solve(const Matrix& u, const Matrix& rhs, double ridge = 0.0);

// Explicit SPD inverse (needed for the U = P^-1 bridge); result is
// symmetrized before return.
Matrix inverse_spd(const Matrix& u, double ridge = 0.0);

// Serial reference kernels. These are the oracles the OpenMP kernels are
// tested and benchmarked against; keep them naive and obviously correct.
namespace serial {
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix cholesky(const Matrix& a, double ridge = 0.0);
Matrix spd_solve(const Matrix& u, const Matrix& rhs, double ridge = 0.0);
}  // namespace serial

}  // namespace fedelm
