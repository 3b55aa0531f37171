#include "kps/pca.hpp"

#include <cmath>

#include "kps/error.hpp"

namespace kps {

RowMatrix row_matrix(const Image& image) {
  RowMatrix rm;
  rm.n = image.w;
  rm.d = size_t(image.h) * image.c;
  rm.m.resize(rm.n * rm.d);
  // Row i is image row i flattened channel-fastest, which is exactly the
  // storage order, so this is a widening copy.
  for (size_t i = 0; i < rm.m.size(); ++i) rm.m[i] = double(image.data[i]);
  return rm;
}

// Deterministic orthonormal completion for rank-deficient Gram spectra:
// orthogonalize standard basis vectors against what we have and keep the
// first that survives with enough mass.
static void fill_orthonormal(std::vector<double>& components, size_t have, size_t want, size_t d) {
  size_t next_axis = 0;
  std::vector<double> cand(d);
  while (have < want) {
    bool placed = false;
    for (; next_axis < d && !placed; ++next_axis) {
      std::fill(cand.begin(), cand.end(), 0.0);
      cand[next_axis] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (size_t j = 0; j < have; ++j) {
          const double* v = &components[j * d];
          double dot = 0.0;
          for (size_t k = 0; k < d; ++k) dot += cand[k] * v[k];
          for (size_t k = 0; k < d; ++k) cand[k] -= dot * v[k];
        }
      }
      double norm = 0.0;
      for (double x : cand) norm += x * x;
      norm = std::sqrt(norm);
      if (norm > 0.5) {
        for (size_t k = 0; k < d; ++k) components[have * d + k] = cand[k] / norm;
        ++have;
        placed = true;
      }
    }
    if (!placed) raise(Errc::NoConvergence, "orthonormal completion exhausted axes");
  }
}

PcaBasis row_pca(const Image& image) {
  if (image.w < 2) raise(Errc::DegenerateImage, "rowPCA needs w >= 2, got w = " + std::to_string(image.w));

  RowMatrix rm = row_matrix(image);
  const size_t n = rm.n, d = rm.d;
  const size_t r = std::min(n, d);

  PcaBasis basis;
  basis.w = image.w;
  basis.h = image.h;
  basis.c = image.c;
  basis.n = n;
  basis.d = d;
  basis.r = r;

  basis.mean_row.assign(d, 0.0);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < d; ++j) basis.mean_row[j] += rm.at(i, j);
  for (size_t j = 0; j < d; ++j) basis.mean_row[j] /= double(n);

  std::vector<double> centered(n * d);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < d; ++j) centered[i * d + j] = rm.at(i, j) - basis.mean_row[j];

  const double denom = double(n - 1);
  basis.components.assign(r * d, 0.0);
  basis.eigenvalues.assign(r, 0.0);

  if (d <= n) {
    // Covariance route: full orthonormal set of d eigenvectors directly.
    Mat cov(d, d);
    for (size_t i = 0; i < n; ++i) {
      const double* row = &centered[i * d];
      for (size_t a = 0; a < d; ++a)
        for (size_t b = a; b < d; ++b) cov(a, b) += row[a] * row[b];
    }
    for (size_t a = 0; a < d; ++a)
      for (size_t b = a; b < d; ++b) {
        cov(a, b) /= denom;
        cov(b, a) = cov(a, b);
      }
    EighResult eig = eigh_symmetric(cov);
    for (size_t j = 0; j < r; ++j) {
      basis.eigenvalues[j] = std::max(eig.eigenvalues[j], 0.0);
      for (size_t k = 0; k < d; ++k) basis.components[j * d + k] = eig.eigenvectors(k, j);
    }
  } else {
    // Gram route: same nonzero spectrum, back-transform the eigenvectors.
    Mat gram(n, n);
    for (size_t i = 0; i < n; ++i)
      for (size_t j = i; j < n; ++j) {
        double s = 0.0;
        const double* ri = &centered[i * d];
        const double* rj = &centered[j * d];
        for (size_t k = 0; k < d; ++k) s += ri[k] * rj[k];
        gram(i, j) = gram(j, i) = s / denom;
      }
    EighResult eig = eigh_symmetric(gram);
    const double rank_tol = std::max(eig.eigenvalues.empty() ? 0.0 : eig.eigenvalues[0], 0.0) * 1e-10 + 1e-30;
    size_t have = 0;
    for (size_t j = 0; j < r; ++j) basis.eigenvalues[j] = std::max(eig.eigenvalues[j], 0.0);
    for (size_t j = 0; j < r; ++j) {
      if (basis.eigenvalues[j] <= rank_tol) break; // descending: the rest are fill-ins
      double* out = &basis.components[j * d];
      for (size_t i = 0; i < n; ++i) {
        double u = eig.eigenvectors(i, j);
        const double* row = &centered[i * d];
        for (size_t k = 0; k < d; ++k) out[k] += u * row[k];
      }
      double norm = 0.0;
      for (size_t k = 0; k < d; ++k) norm += out[k] * out[k];
      norm = std::sqrt(norm);
      for (size_t k = 0; k < d; ++k) out[k] /= norm;
      ++have;
    }
    fill_orthonormal(basis.components, have, r, d);
    Mat comp(r, d);
    comp.a = basis.components;
    Mat compT = transpose(comp);
    fix_column_signs(compT);
    basis.components = transpose(compT).a;
  }

  basis.scores.assign(n * r, 0.0);
  for (size_t i = 0; i < n; ++i) {
    const double* row = &centered[i * d];
    for (size_t j = 0; j < r; ++j) {
      const double* v = &basis.components[j * d];
      double s = 0.0;
      for (size_t k = 0; k < d; ++k) s += row[k] * v[k];
      basis.scores[i * r + j] = s;
    }
  }
  return basis;
}

RowMatrix reconstruct_rows(const PcaBasis& basis, size_t k) {
  if (k > basis.r)
    raise(Errc::IndexOutOfRange, "k = " + std::to_string(k) + " exceeds r = " + std::to_string(basis.r));
  RowMatrix rm;
  rm.n = basis.n;
  rm.d = basis.d;
  rm.m.resize(rm.n * rm.d);
  for (size_t i = 0; i < rm.n; ++i) {
    double* row = &rm.m[i * rm.d];
    for (size_t j = 0; j < rm.d; ++j) row[j] = basis.mean_row[j];
    for (size_t j = 0; j < k; ++j) {
      double s = basis.score(i, j);
      const double* v = &basis.components[j * basis.d];
      for (size_t t = 0; t < rm.d; ++t) row[t] += s * v[t];
    }
  }
  return rm;
}

static Image rows_to_image(const std::vector<double>& rows, uint32_t w, uint32_t h, uint32_t c, bool clip) {
  Image img(w, h, c);
  for (size_t i = 0; i < rows.size(); ++i) {
    float v = float(rows[i]);
    img.data[i] = clip ? clip01(v) : v;
  }
  return img;
}

Image reconstruct(const PcaBasis& basis, size_t k, bool clip) {
  RowMatrix rm = reconstruct_rows(basis, k);
  return rows_to_image(rm.m, basis.w, basis.h, basis.c, clip);
}

PrefixSweeper::PrefixSweeper(const PcaBasis& basis) : basis_(basis), k_(basis.r) {
  RowMatrix full = reconstruct_rows(basis, basis.r);
  rows_ = std::move(full.m);
}

void PrefixSweeper::step() {
  if (k_ == 0) raise(Errc::IndexOutOfRange, "prefix sweep past k = 0");
  --k_;
  const double* v = &basis_.components[k_ * basis_.d];
  for (size_t i = 0; i < basis_.n; ++i) {
    double s = basis_.score(i, k_);
    if (s == 0.0) continue;
    double* row = &rows_[i * basis_.d];
    for (size_t t = 0; t < basis_.d; ++t) row[t] -= s * v[t];
  }
}

Image PrefixSweeper::image(bool clip) const {
  return rows_to_image(rows_, basis_.w, basis_.h, basis_.c, clip);
}

std::vector<Image> reconstruct_prefix_sweep(const PcaBasis& basis) {
  std::vector<Image> out;
  out.reserve(basis.r + 1);
  PrefixSweeper sweep(basis);
  out.push_back(sweep.image());
  while (!sweep.done()) {
    sweep.step();
    out.push_back(sweep.image());
  }
  return out;
}

} // namespace kps
