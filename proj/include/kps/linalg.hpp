#pragma once

#include <cstddef>
#include <vector>

namespace kps {

/// Dense row-major double matrix; small sizes only (a few hundred square).
struct Mat {
  size_t rows = 0, cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(size_t r, size_t c, double fill = 0.0) : rows(r), cols(c), a(r * c, fill) {}

  double& operator()(size_t r, size_t c) { return a[r * cols + c]; }
  double operator()(size_t r, size_t c) const { return a[r * cols + c]; }

  static Mat identity(size_t n) {
    Mat m(n, n);
    for (size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
};

Mat matmul(const Mat& a, const Mat& b);
Mat transpose(const Mat& m);
double frobenius_norm(const Mat& m);

/// Eigenvalues are sorted descending; eigenvectors(:,i) pairs with
/// eigenvalues[i]. Columns are orthonormal and sign-fixed so the
/// largest-magnitude coordinate of each is positive.
struct EighResult {
  std::vector<double> eigenvalues; // descending
  Mat eigenvectors;                // n x n, column i <-> eigenvalues[i]
};

/// Cyclic Jacobi rotations on a copy of `a`. Requires max|a - a^T| within
/// 1e-10 * max(1, max|a|), else throws NonSymmetric; throws NoConvergence
/// after `max_sweeps` full sweeps (never seen in practice below ~1e3 dims).
EighResult eigh_symmetric(const Mat& a, int max_sweeps = 50);

/// Flip columns so each one's largest-magnitude entry (first on ties) is
/// positive. Shared by the eigensolver and the PCA back-transform.
void fix_column_signs(Mat& m);

} // namespace kps
