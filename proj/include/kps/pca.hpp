#pragma once

#include <vector>

#include "kps/linalg.hpp"
#include "kps/tensor.hpp"

namespace kps {

/// The w rows of an image flattened channel-fastest: n = w samples of
/// dimension d = h*c.
struct RowMatrix {
  size_t n = 0, d = 0;
  std::vector<double> m; // row-major n x d

  double& at(size_t i, size_t j) { return m[i * d + j]; }
  double at(size_t i, size_t j) const { return m[i * d + j]; }
};

/// Per-image row principal components. components[i] has dimension d and
/// pairs with eigenvalues[i] (descending); scores is n x r with
/// scores(i,j) = (row_i - mean_row) . components[j]; r = min(w, d).
struct PcaBasis {
  uint32_t w = 0, h = 0, c = 0;
  size_t n = 0, d = 0, r = 0;
  std::vector<double> components;  // r x d row-major, component j at row j
  std::vector<double> eigenvalues; // descending, clamped at 0
  std::vector<double> mean_row;    // d
  std::vector<double> scores;      // n x r row-major

  double component(size_t j, size_t k) const { return components[j * d + k]; }
  double score(size_t i, size_t j) const { return scores[i * r + j]; }
};

RowMatrix row_matrix(const Image& image);

/// Covariance route when d <= n, Gram route with back-transformation
/// otherwise. Throws DegenerateImage when w < 2.
PcaBasis row_pca(const Image& image);

/// Rows of the k-component reconstruction, before casting or clipping.
RowMatrix reconstruct_rows(const PcaBasis& basis, size_t k);

/// mean_row + first k components, reshaped and clipped to [0,1]
/// (clip=false keeps raw casts for diagnostics). Throws IndexOutOfRange
/// when k > r.
Image reconstruct(const PcaBasis& basis, size_t k, bool clip = true);

/// Images for k = r down to 0 (length r+1), computed by rank-1 downdates
/// of the full reconstruction.
std::vector<Image> reconstruct_prefix_sweep(const PcaBasis& basis);

/// Lazy form of the sweep: starts at k = r, step() removes one component.
/// Backs both reconstruct_prefix_sweep and the (k,p) scan.
class PrefixSweeper {
public:
  explicit PrefixSweeper(const PcaBasis& basis);
  size_t k() const { return k_; }
  bool done() const { return k_ == 0; }
  void step(); // k -> k-1
  Image image(bool clip = true) const;

private:
  const PcaBasis& basis_;
  size_t k_;
  std::vector<double> rows_; // n x d accumulator
};

} // namespace kps
