#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace radm {

/// Dense row-major matrix of 64-bit floats; the universal data carrier.
/// Entries are finite by contract: constructors taking data validate, and
/// operations that could overflow re-validate their output.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    std::string shape_str() const;

    /// Throws numeric_error naming `context` if any entry is NaN/Inf.
    void require_finite(const char* context) const;

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Standard product; throws std::invalid_argument naming both shapes on mismatch.
Matrix matmul(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& m);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& m, double factor);
Matrix hadamard(const Matrix& a, const Matrix& b);

/// Extract the listed rows, in order.
Matrix take_rows(const Matrix& m, const std::vector<std::size_t>& indices);

double max_abs(const Matrix& m);
double dot(std::span<const double> a, std::span<const double> b);

}  // namespace radm
