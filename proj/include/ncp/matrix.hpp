#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace ncp {

// Dense row-major matrix of doubles. Instances are treated as immutable
// values once built; all operations below return fresh matrices.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;  // rows * cols, row-major

    Matrix() = default;
    Matrix(int r, int c);  // zero-filled
    // Validates shape and finiteness (no NaN/Inf).
    Matrix(int r, int c, std::vector<double> values);

    double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

    double* row(int r) { return data.data() + static_cast<std::size_t>(r) * cols; }
    const double* row(int r) const { return data.data() + static_cast<std::size_t>(r) * cols; }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

    static Matrix identity(int n);
    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> r);
};

bool all_finite(const Matrix& a);

// c = a * b
Matrix matmul(const Matrix& a, const Matrix& b);
// c = a^T * b, without materializing the transpose
Matrix matmul_tn(const Matrix& a, const Matrix& b);
// c = a * b^T
Matrix matmul_nt(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& a);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double c);

double trace_of(const Matrix& a);
double frobenius_sq(const Matrix& a);
double frobenius(const Matrix& a);

// 1 x cols vector of column means / sums.
Matrix col_means(const Matrix& a);
Matrix col_sums(const Matrix& a);
// a with the 1 x cols vector m subtracted from / multiplied into every row.
Matrix sub_rowvec(const Matrix& a, const Matrix& m);
Matrix mul_rowvec(const Matrix& a, const Matrix& m);

Matrix gather_rows(const Matrix& a, const std::vector<int>& idx);
Matrix vconcat(const Matrix& a, const Matrix& b);

struct SvdResult {
    Matrix u;               // m x r
    std::vector<double> s;  // r, nonnegative, descending
    Matrix vt;              // r x n
};

// Thin SVD (r = min(rows, cols)) via one-sided Jacobi; deterministic.
// Throws std::runtime_error if the sweep cap (10 * max(rows, cols)) is hit.
SvdResult svd_full(const Matrix& m);

struct EigResult {
    std::vector<double> values;  // descending
    Matrix vectors;              // columns are eigenvectors
};

// Symmetric (cyclic Jacobi) eigendecomposition; input is symmetrized first.
EigResult eigh(const Matrix& sym);

// (m + eps*I)^{-1/2} for symmetric PSD m. Eigenvalues below -1e-8 raise
// std::domain_error; small negatives are clamped to zero before the shift.
Matrix inv_sqrt_psd(const Matrix& m, double eps);

}  // namespace ncp
