#include "braingnn/matrix.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace braingnn {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) {
            throw std::invalid_argument("Matrix init: ragged rows");
        }
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::row_vector(const std::vector<double>& v) {
    Matrix m(1, v.size());
    for (std::size_t j = 0; j < v.size(); ++j) m(0, j) = v[j];
    return m;
}

Matrix Matrix::column_vector(const std::vector<double>& v) {
    Matrix m(v.size(), 1);
    for (std::size_t i = 0; i < v.size(); ++i) m(i, 0) = v[i];
    return m;
}

std::string Matrix::shape_str() const {
    std::ostringstream os;
    os << rows_ << "x" << cols_;
    return os.str();
}

bool Matrix::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

void Matrix::require_finite(const std::string& what) const {
    if (!all_finite()) {
        throw std::runtime_error("non-finite values in " + what);
    }
}

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                    a.shape_str() + " vs " + b.shape_str());
    }
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw std::invalid_argument("matmul: inner dimensions disagree, " +
                                    a.shape_str() + " times " + b.shape_str());
    }
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    Matrix c(m, n);
    // i-k-j order keeps the inner loop contiguous over both b and c.
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c.row(i);
        const double* arow = a.row(i);
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double av = arow[kk];
            if (av == 0.0) continue;
            const double* brow = b.row(kk);
            for (std::size_t j = 0; j < n; ++j) {
                crow[j] += av * brow[j];
            }
        }
    }
    c.require_finite("matmul result");
    return c;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            t(j, i) = a(i, j);
        }
    }
    return t;
}

Matrix add(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "add");
    Matrix c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] += b.data()[i];
    return c;
}

Matrix sub(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "sub");
    Matrix c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] -= b.data()[i];
    return c;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "hadamard");
    Matrix c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] *= b.data()[i];
    return c;
}

Matrix scale(const Matrix& a, double c) {
    Matrix r = a;
    for (std::size_t i = 0; i < r.size(); ++i) r.data()[i] *= c;
    r.require_finite("scale result");
    return r;
}

double sigmoid(double x) {
    // Split on sign so exp never sees a large positive argument.
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Matrix sigmoid(const Matrix& a) {
    Matrix r = a;
    for (std::size_t i = 0; i < r.size(); ++i) r.data()[i] = sigmoid(r.data()[i]);
    return r;
}

Matrix softmax_rows(const Matrix& a) {
    a.require_finite("softmax input");
    Matrix r(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* in = a.row(i);
        double* out = r.row(i);
        double mx = in[0];
        for (std::size_t j = 1; j < a.cols(); ++j) mx = std::max(mx, in[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) {
            out[j] = std::exp(in[j] - mx);
            sum += out[j];
        }
        for (std::size_t j = 0; j < a.cols(); ++j) out[j] /= sum;
    }
    return r;
}

double frobenius_norm(const Matrix& a) {
    double s = 0.0;
    for (double v : a.values()) s += v * v;
    return std::sqrt(s);
}

double sum_all(const Matrix& a) {
    double s = 0.0;
    for (double v : a.values()) s += v;
    return s;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    }
    return m;
}

}  // namespace braingnn
