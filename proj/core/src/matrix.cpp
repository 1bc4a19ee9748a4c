#include "aal/matrix.hpp"

#include "aal/errors.hpp"

namespace aal {

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<double> values)
    : rows(r), cols(c), data(std::move(values)) {
    if (data.size() != rows * cols) {
        throw DimensionError("matrix payload of length " + std::to_string(data.size()) +
                             " does not fit shape " + aal::shape_string(rows, cols));
    }
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    Matrix m;
    m.rows = rows.size();
    m.cols = rows.size() == 0 ? 0 : rows.begin()->size();
    m.data.reserve(m.rows * m.cols);
    for (const auto& r : rows) {
        if (r.size() != m.cols) {
            throw DimensionError("ragged rows in Matrix::from_rows");
        }
        m.data.insert(m.data.end(), r.begin(), r.end());
    }
    return m;
}

Matrix Matrix::row_vector(std::span<const double> values) {
    return Matrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

Matrix Matrix::column_vector(std::span<const double> values) {
    return Matrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

std::string Matrix::shape_string() const { return aal::shape_string(rows, cols); }

std::string shape_string(std::size_t rows, std::size_t cols) {
    return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
}

Matrix take_rows(const Matrix& m, std::size_t begin, std::size_t end) {
    if (begin > end || end > m.rows) {
        throw DimensionError("row range [" + std::to_string(begin) + "," + std::to_string(end) +
                             ") out of bounds for " + m.shape_string());
    }
    Matrix out(end - begin, m.cols);
    std::copy(m.data.begin() + static_cast<std::ptrdiff_t>(begin * m.cols),
              m.data.begin() + static_cast<std::ptrdiff_t>(end * m.cols), out.data.begin());
    return out;
}

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> indices) {
    Matrix out(indices.size(), m.cols);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= m.rows) {
            throw DimensionError("row index " + std::to_string(indices[i]) + " out of bounds for " +
                                 m.shape_string());
        }
        auto src = m.row(indices[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

std::vector<int> argmax_rows(const Matrix& m) {
    std::vector<int> out(m.rows, 0);
    for (std::size_t r = 0; r < m.rows; ++r) {
        auto row = m.row(r);
        std::size_t best = 0;
        for (std::size_t c = 1; c < row.size(); ++c) {
            if (row[c] > row[best]) best = c;
        }
        out[r] = static_cast<int>(best);
    }
    return out;
}

} // namespace aal
