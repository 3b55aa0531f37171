#include "kps/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kps/error.hpp"

namespace kps {

Mat matmul(const Mat& a, const Mat& b) {
  if (a.cols != b.rows) raise(Errc::ShapeMismatch, "matmul dims");
  Mat out(a.rows, b.cols);
  for (size_t i = 0; i < a.rows; ++i) {
    for (size_t k = 0; k < a.cols; ++k) {
      double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* brow = &b.a[k * b.cols];
      double* orow = &out.a[i * out.cols];
      for (size_t j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

Mat transpose(const Mat& m) {
  Mat out(m.cols, m.rows);
  for (size_t i = 0; i < m.rows; ++i)
    for (size_t j = 0; j < m.cols; ++j) out(j, i) = m(i, j);
  return out;
}

double frobenius_norm(const Mat& m) {
  double s = 0.0;
  for (double v : m.a) s += v * v;
  return std::sqrt(s);
}

void fix_column_signs(Mat& m) {
  for (size_t j = 0; j < m.cols; ++j) {
    size_t arg = 0;
    double best = -1.0;
    for (size_t i = 0; i < m.rows; ++i) {
      double mag = std::fabs(m(i, j));
      if (mag > best) {
        best = mag;
        arg = i;
      }
    }
    if (m(arg, j) < 0.0)
      for (size_t i = 0; i < m.rows; ++i) m(i, j) = -m(i, j);
  }
}

static double offdiag_norm(const Mat& a) {
  double s = 0.0;
  for (size_t i = 0; i < a.rows; ++i)
    for (size_t j = i + 1; j < a.cols; ++j) s += a(i, j) * a(i, j);
  return std::sqrt(2.0 * s);
}

EighResult eigh_symmetric(const Mat& input, int max_sweeps) {
  if (input.rows != input.cols) raise(Errc::NonSymmetric, "matrix not square");
  const size_t n = input.rows;

  double max_abs = 0.0, max_asym = 0.0;
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j) {
      max_abs = std::max(max_abs, std::fabs(input(i, j)));
      max_asym = std::max(max_asym, std::fabs(input(i, j) - input(j, i)));
    }
  if (max_asym > 1e-10 * std::max(1.0, max_abs))
    raise(Errc::NonSymmetric, "asymmetry " + std::to_string(max_asym));

  // Work on the symmetrized copy; rotations keep it symmetric thereafter.
  Mat a(n, n);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j) a(i, j) = 0.5 * (input(i, j) + input(j, i));
  Mat v = Mat::identity(n);

  const double norm = std::max(frobenius_norm(a), 1e-300);
  const double tol = 1e-14 * norm;

  bool converged = n < 2;
  for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    if (offdiag_norm(a) <= tol) {
      converged = true;
      break;
    }
    for (size_t p = 0; p < n; ++p) {
      for (size_t q = p + 1; q < n; ++q) {
        double apq = a(p, q);
        if (std::fabs(apq) <= 1e-300) continue;
        double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        double t;
        if (std::fabs(theta) > 1e10) {
          t = 1.0 / (2.0 * theta); // asymptotic form, avoids theta^2 overflow
        } else {
          t = (theta >= 0.0 ? 1.0 : -1.0) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        }
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        double tau = s / (1.0 + c);

        double app = a(p, p), aqq = a(q, q);
        a(p, p) = app - t * apq;
        a(q, q) = aqq + t * apq;
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (size_t r = 0; r < n; ++r) {
          if (r != p && r != q) {
            double arp = a(r, p), arq = a(r, q);
            a(r, p) = a(p, r) = arp - s * (arq + tau * arp);
            a(r, q) = a(q, r) = arq + s * (arp - tau * arq);
          }
          double vrp = v(r, p), vrq = v(r, q);
          v(r, p) = vrp - s * (vrq + tau * vrp);
          v(r, q) = vrq + s * (vrp - tau * vrq);
        }
      }
    }
    if (offdiag_norm(a) <= tol) converged = true;
  }
  if (!converged) raise(Errc::NoConvergence, "jacobi did not converge in " + std::to_string(max_sweeps) + " sweeps");

  // Sort descending; equal eigenvalues keep jacobi output order.
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t(0));
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t x, size_t y) { return a(x, x) > a(y, y); });

  EighResult res;
  res.eigenvalues.resize(n);
  res.eigenvectors = Mat(n, n);
  for (size_t j = 0; j < n; ++j) {
    res.eigenvalues[j] = a(order[j], order[j]);
    for (size_t i = 0; i < n; ++i) res.eigenvectors(i, j) = v(i, order[j]);
  }
  fix_column_signs(res.eigenvectors);
  return res;
}

} // namespace kps
