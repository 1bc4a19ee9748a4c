#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace aal {

/// Dense row-major matrix of doubles. Rank-1 data is stored as a 1×n or n×1 matrix.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
    Matrix(std::size_t r, std::size_t c, std::vector<double> values);

    /// Builds from nested rows; all rows must have equal length.
    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
    static Matrix row_vector(std::span<const double> values);
    static Matrix column_vector(std::span<const double> values);

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

    std::size_t size() const noexcept { return data.size(); }
    bool empty() const noexcept { return data.empty(); }
    bool same_shape(const Matrix& other) const noexcept {
        return rows == other.rows && cols == other.cols;
    }

    std::string shape_string() const;

    friend bool operator==(const Matrix&, const Matrix&) = default;
};

std::string shape_string(std::size_t rows, std::size_t cols);

/// Rows [begin, end) of m.
Matrix take_rows(const Matrix& m, std::size_t begin, std::size_t end);
/// Rows of m listed in indices, in that order.
Matrix gather_rows(const Matrix& m, std::span<const std::size_t> indices);

/// Index of the largest entry in each row; ties resolve to the lowest index.
std::vector<int> argmax_rows(const Matrix& m);

} // namespace aal
