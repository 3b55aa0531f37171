#pragma once

#include <vector>

#include "kps/nnet.hpp"
#include "kps/tensor.hpp"

namespace kps {

struct AttackResult {
  Image adversarial;              // x', elementwise in [0,1]
  std::vector<float> perturbation; // x' - x
  double distance_l2 = 0.0;
  double distance_l0 = 0.0;
  double distance_linf = 0.0;
  bool success = false; // re-checked: classify(adversarial) != original_class
  ClassId original_class = 0;
  ClassId adversarial_class = 0;
  int iterations = 0;
};

struct DeepfoolParams {
  int max_iter = 50;
  double overshoot = 0.02;
};

struct JsmaParams {
  double theta = 1.0; // positive per-pixel increment
  double gamma = 0.1; // fraction of pixels that may be modified
};

struct CwParams {
  int steps = 500;
  double c_init = 1e-2;
  int binary_search_steps = 6;
  double kappa = 0.0;
  double lr = 1e-2;
  double init_jitter = 0.0; // magnitude of seeded tanh-space jitter
  uint64_t seed = 0;
};

/// Untargeted L2 attack: iterative closest-hyperplane steps from the logit
/// Jacobian, final perturbation scaled by (1+overshoot) and clipped.
/// Unsuccessful attacks come back with success=false, never as errors.
AttackResult deepfool(const Model& model, const Image& x, const DeepfoolParams& params = {});

/// Targeted L0 attack: per iteration picks the highest-saliency unsaturated
/// pixel and raises it by theta; stops on success, when the saliency map has
/// no positive entry, or after ceil(gamma*w*h*c) modifications.
AttackResult jsma(const Model& model, const Image& x, ClassId target, const JsmaParams& params = {});

/// Targeted L2 attack on the tanh-reparameterized box, Adam steps, binary
/// search over the trade-off constant c (doubling on failure, bisecting on
/// success); returns the successful adversarial with smallest L2 seen.
AttackResult cw_l2(const Model& model, const Image& x, ClassId target, const CwParams& params = {});

} // namespace kps
