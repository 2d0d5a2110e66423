#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace braingnn {

/// Dense row-major matrix of doubles.
///
/// Values are immutable by convention once constructed: every library
/// operation returns a fresh Matrix, so instances can be shared read-only
/// across threads. Public operations reject non-finite results.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(std::size_t n);
    static Matrix row_vector(const std::vector<double>& v);
    static Matrix column_vector(const std::vector<double>& v);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double* row(std::size_t i) { return data_.data() + i * cols_; }
    const double* row(std::size_t i) const { return data_.data() + i * cols_; }

    const std::vector<double>& values() const { return data_; }

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }
    std::string shape_str() const;

    bool all_finite() const;
    /// Throws std::runtime_error naming `what` if any entry is NaN/Inf.
    void require_finite(const std::string& what) const;

    bool operator==(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_ && data_ == other.data_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// Shape-checked arithmetic. Dimension mismatches throw std::invalid_argument
// naming both shapes.

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double c);

/// Entrywise 1/(1+exp(-x)); saturates without overflow for any finite input.
Matrix sigmoid(const Matrix& a);
double sigmoid(double x);

/// Row-wise softmax; each output row is a distribution (sums to 1).
Matrix softmax_rows(const Matrix& a);

/// Frobenius norm.
double frobenius_norm(const Matrix& a);

double sum_all(const Matrix& a);
double max_abs_diff(const Matrix& a, const Matrix& b);

}  // namespace braingnn
