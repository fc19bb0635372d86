#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <utility>
#include <vector>

#include "evgrid/errors.hpp"

namespace evgrid {

using Complex = std::complex<double>;

// Dense row-major real matrix, just enough for the Newton and LP kernels.
class DenseMatrix {
  public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), a_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t i, std::size_t j) { return a_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a_[i * cols_ + j]; }

  private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<double> a_;
};

// Solves A x = b in place by LU with partial pivoting. A is overwritten.
// Throws NumericalError on a (numerically) singular matrix.
inline std::vector<double> lu_solve(DenseMatrix A, std::vector<double> b) {
    const std::size_t n = A.rows();
    if (A.cols() != n || b.size() != n) throw NumericalError("lu_solve: dimension mismatch");
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;

    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        double best = std::fabs(A(k, k));
        for (std::size_t i = k + 1; i < n; ++i) {
            const double v = std::fabs(A(i, k));
            if (v > best) {
                best = v;
                piv = i;
            }
        }
        if (best < 1e-13) throw NumericalError("lu_solve: singular matrix at pivot " + std::to_string(k));
        if (piv != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(A(k, j), A(piv, j));
            std::swap(b[k], b[piv]);
        }
        const double inv = 1.0 / A(k, k);
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = A(i, k) * inv;
            if (f == 0.0) continue;
            A(i, k) = f;
            for (std::size_t j = k + 1; j < n; ++j) A(i, j) -= f * A(k, j);
            b[i] -= f * b[k];
        }
    }
    // back substitution
    std::vector<double> x(n);
    for (std::size_t ii = n; ii-- > 0;) {
        double s = b[ii];
        for (std::size_t j = ii + 1; j < n; ++j) s -= A(ii, j) * x[j];
        x[ii] = s / A(ii, ii);
    }
    return x;
}

// Sparse complex matrix in compressed-row form. Built once from triplets;
// immutable afterwards.
class SparseComplex {
  public:
    SparseComplex() = default;

    static SparseComplex from_triplets(std::size_t n,
                                       const std::map<std::pair<std::size_t, std::size_t>, Complex>& entries) {
        SparseComplex m;
        m.n_ = n;
        m.row_ptr_.assign(n + 1, 0);
        for (const auto& [ij, v] : entries) {
            (void)v;
            m.row_ptr_[ij.first + 1]++;
        }
        for (std::size_t i = 0; i < n; ++i) m.row_ptr_[i + 1] += m.row_ptr_[i];
        m.col_.resize(entries.size());
        m.val_.resize(entries.size());
        std::vector<std::size_t> cursor(m.row_ptr_.begin(), m.row_ptr_.end() - 1);
        for (const auto& [ij, v] : entries) {
            const std::size_t k = cursor[ij.first]++;
            m.col_[k] = ij.second;
            m.val_[k] = v;
        }
        return m;
    }

    std::size_t size() const { return n_; }

    Complex at(std::size_t i, std::size_t j) const {
        for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
            if (col_[k] == j) return val_[k];
        return Complex(0.0, 0.0);
    }

    template <class F>
    void for_row(std::size_t i, F&& f) const {
        for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) f(col_[k], val_[k]);
    }

    bool operator==(const SparseComplex& o) const {
        return n_ == o.n_ && row_ptr_ == o.row_ptr_ && col_ == o.col_ && val_ == o.val_;
    }

  private:
    std::size_t n_ = 0;
    std::vector<std::size_t> row_ptr_;
    std::vector<std::size_t> col_;
    std::vector<Complex> val_;
};

}  // namespace evgrid
