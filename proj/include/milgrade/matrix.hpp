#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace milgrade {

// Dense row-major matrix of doubles. All training math runs in f64; only the
// on-disk embedding payloads are f32.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    double* row(std::size_t i) { return data.data() + i * cols; }
    const double* row(std::size_t i) const { return data.data() + i * cols; }

    std::size_t size() const { return data.size(); }
    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

std::string shape_string(const Matrix& m);

// C = A * B. Throws DimensionError naming both shapes on mismatch.
Matrix matmul(const Matrix& a, const Matrix& b);

// C = A * B^T (rows of both operands are dotted; avoids an explicit transpose).
Matrix matmul_nt(const Matrix& a, const Matrix& b);

// C = A^T * B.
Matrix matmul_tn(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& m);

// Elementwise product, shapes must agree.
Matrix hadamard(const Matrix& a, const Matrix& b);

// a += scale * b, in place.
void add_scaled(Matrix& a, const Matrix& b, double scale = 1.0);

bool all_finite(const Matrix& m);

} // namespace milgrade
