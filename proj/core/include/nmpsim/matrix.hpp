#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace nmpsim {

/// Dense row-major matrix of doubles. Used by the functional reference
/// kernels and their test oracles; not a performance container.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);

    static Matrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    double* row_ptr(std::size_t r) { return data_.data() + r * cols_; }
    const double* row_ptr(std::size_t r) const { return data_.data() + r * cols_; }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    Matrix transposed() const;
    bool all_finite() const;

    /// Max absolute elementwise difference; matrices must have equal shape.
    static double max_abs_diff(const Matrix& a, const Matrix& b);

    /// Plain text interchange: first line "rows cols", then one row per line.
    static Matrix load_text(std::istream& in);
    static Matrix load_text_file(const std::string& path);
    void save_text(std::ostream& out) const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// C = A * B, shapes (m x k) * (k x n).
Matrix matmul(const Matrix& a, const Matrix& b);

/// Adds a 1 x cols bias row to every row of m.
Matrix add_bias_row(const Matrix& m, const Matrix& bias);

}  // namespace nmpsim
