#pragma once

#include <string>
#include <vector>

#include "kps/nnet.hpp"
#include "kps/pca.hpp"

namespace kps {

/// The rank-loss point of an image under a model: scanning truncated
/// reconstructions from k = n components downward, the k where the
/// dominant (full-image) class first loses the top spot, and the softmax
/// probability p of the class that is on top there. p_dominant_at_k keeps
/// the dominant class's probability at the same reconstruction.
struct KpPoint {
  int k = 0;
  double p = 0.0;
  int n = 0; // retained components, = w whenever h*c >= w
  double p_dominant_at_k = 0.0;
  bool never_flipped = false;
  ClassId dominant_class = 0;
};

struct KpStats {
  int forward_passes = 0;       // total, including the full-image pass
  int recon_forward_passes = 0; // reconstruction passes only
};

/// Downward scan with early exit, amortized by rank-1 downdates.
KpPoint kp_point(const Model& model, const Image& image, KpStats* stats = nullptr);

/// Verification oracle: reconstructs every k = n-1 .. 0 independently
/// (exactly n reconstruction passes) and picks the first failure scanning
/// downward. Identical output contract to kp_point.
KpPoint kp_point_bruteforce(const Model& model, const Image& image, KpStats* stats = nullptr);

/// Order-preserving batch; elementwise equal to sequential kp_point.
/// Per-item failures are aggregated into one BatchFailure error listing
/// the offending indices.
std::vector<KpPoint> kp_batch(const Model& model, const std::vector<Image>& images, size_t parallelism);

/// One row of the kp CSV schema.
struct KpRecord {
  std::string sample_id;
  std::string source; // benign | deepfool | jsma | cw
  std::string model_id;
  KpPoint point;
};

extern const char* kKpCsvHeader; // sample_id,source,model_id,k,p,p_dominant_at_k,never_flipped,n

std::string kp_csv_format(const std::vector<KpRecord>& records);
void kp_csv_write(const std::vector<KpRecord>& records, const std::string& path);
std::vector<KpRecord> kp_csv_parse(const std::string& text, const std::string& context);
std::vector<KpRecord> kp_csv_read(const std::string& path);

} // namespace kps
