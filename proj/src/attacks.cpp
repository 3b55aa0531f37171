#include "kps/attacks.hpp"

#include <algorithm>
#include <cmath>

#include "kps/error.hpp"
#include "kps/rng.hpp"

namespace kps {

namespace {

Image to_image(const std::vector<double>& vals, const Image& like, bool clip) {
  Image img(like.w, like.h, like.c);
  for (size_t i = 0; i < vals.size(); ++i) {
    float v = float(vals[i]);
    img.data[i] = clip ? clip01(v) : v;
  }
  return img;
}

AttackResult finish(const Model& model, const Image& original, Image adversarial,
                    ClassId original_class, int iterations) {
  AttackResult res;
  res.adversarial = std::move(adversarial);
  res.original_class = original_class;
  res.iterations = iterations;
  res.adversarial_class = classify(model, res.adversarial);
  res.success = res.adversarial_class != original_class;
  res.perturbation.resize(original.size());
  double l2 = 0.0, linf = 0.0;
  size_t l0 = 0;
  for (size_t i = 0; i < original.size(); ++i) {
    float d = res.adversarial.data[i] - original.data[i];
    res.perturbation[i] = d;
    double dd = double(d);
    l2 += dd * dd;
    linf = std::max(linf, std::fabs(dd));
    if (d != 0.0f) ++l0;
  }
  res.distance_l2 = std::sqrt(l2);
  res.distance_l0 = double(l0);
  res.distance_linf = linf;
  return res;
}

void check_target(const Model& model, const Image& x, ClassId target, ClassId original) {
  if (target < 0 || uint32_t(target) >= model.num_classes)
    raise(Errc::InvalidTarget, "target " + std::to_string(target) + " outside class count");
  if (target == original)
    raise(Errc::InvalidTarget, "target equals the current prediction");
  (void)x;
}

} // namespace

AttackResult deepfool(const Model& model, const Image& x, const DeepfoolParams& params) {
  if (model.num_classes < 2) raise(Errc::InvalidArgument, "deepfool needs >= 2 classes");
  const size_t n = x.size();
  const ClassId orig = classify(model, x);

  std::vector<double> cur(x.data.begin(), x.data.end()); // unclipped iterate
  std::vector<double> total(n, 0.0);

  // Competitors: all classes at desk scale, top-10 by initial logits above that.
  std::vector<ClassId> competitors;
  {
    std::vector<double> logits0 = forward(model, x);
    std::vector<ClassId> all;
    for (ClassId k = 0; k < ClassId(model.num_classes); ++k)
      if (k != orig) all.push_back(k);
    if (model.num_classes > 10) {
      std::stable_sort(all.begin(), all.end(),
                       [&](ClassId a, ClassId b) { return logits0[a] > logits0[b]; });
      all.resize(10);
    }
    competitors = std::move(all);
  }

  int iter = 0;
  Image candidate = x;
  while (iter < params.max_iter) {
    ++iter;
    std::vector<double> logits = forward(model, std::span<const double>(cur));
    std::vector<std::vector<double>> jac = logit_jacobian(model, std::span<const double>(cur));

    // Closest linearized hyperplane among the competitors.
    double best_ratio = 1e300;
    ClassId best_k = -1;
    double best_fk = 0.0, best_wnorm2 = 0.0;
    for (ClassId k : competitors) {
      double fk = logits[k] - logits[orig];
      double wnorm2 = 0.0;
      for (size_t i = 0; i < n; ++i) {
        double w = jac[k][i] - jac[orig][i];
        wnorm2 += w * w;
      }
      if (wnorm2 <= 1e-30) continue; // vanishing gradient difference
      double ratio = std::fabs(fk) / std::sqrt(wnorm2);
      if (ratio < best_ratio) {
        best_ratio = ratio;
        best_k = k;
        best_fk = fk;
        best_wnorm2 = wnorm2;
      }
    }
    if (best_k >= 0) {
      double scale = (std::fabs(best_fk) + 1e-8) / best_wnorm2;
      for (size_t i = 0; i < n; ++i) {
        double w = jac[best_k][i] - jac[orig][i];
        cur[i] += scale * w;
        total[i] += scale * w;
      }
    }

    std::vector<double> overshot(n);
    for (size_t i = 0; i < n; ++i)
      overshot[i] = clip01(double(x.data[i]) + (1.0 + params.overshoot) * total[i]);
    candidate = to_image(overshot, x, true);
    if (classify(model, candidate) != orig) break;
  }
  return finish(model, x, std::move(candidate), orig, iter);
}

AttackResult jsma(const Model& model, const Image& x, ClassId target, const JsmaParams& params) {
  const ClassId orig = classify(model, x);
  check_target(model, x, target, orig);
  if (!(params.gamma > 0.0 && params.gamma <= 1.0))
    raise(Errc::InvalidArgument, "gamma must be in (0,1]");
  if (params.theta < 0.0) raise(Errc::InvalidArgument, "theta must be >= 0");

  const size_t n = x.size();
  const int budget = int(std::ceil(params.gamma * double(n)));

  Image cur = x;
  int iter = 0;
  while (iter < budget) {
    if (classify(model, cur) == target) break;
    std::vector<std::vector<double>> jac = logit_jacobian(model, cur);

    double best = 0.0;
    ptrdiff_t best_i = -1;
    for (size_t i = 0; i < n; ++i) {
      if (cur.data[i] >= 1.0f) continue; // saturated for a positive theta
      double alpha = jac[target][i];
      double beta = 0.0;
      for (ClassId j = 0; j < ClassId(model.num_classes); ++j)
        if (j != target) beta += jac[j][i];
      if (alpha < 0.0 || beta > 0.0) continue;
      double s = alpha * std::fabs(beta);
      if (s > best) {
        best = s;
        best_i = ptrdiff_t(i);
      }
    }
    if (best_i < 0) break; // saliency map has no positive entry
    ++iter;
    cur.data[best_i] = clip01(cur.data[best_i] + float(params.theta));
  }
  return finish(model, x, std::move(cur), orig, iter);
}

namespace {

double atanh_stable(double y) {
  // y in (-1,1); inputs are pre-clamped away from the ends.
  return 0.5 * std::log((1.0 + y) / (1.0 - y));
}

struct CwRun {
  bool success = false;
  double best_l2 = 1e300;
  std::vector<double> best_adv;
};

CwRun cw_optimize(const Model& model, const std::vector<double>& x0, const std::vector<double>& v_init,
                  ClassId target, double c, const CwParams& params) {
  const size_t n = x0.size();
  std::vector<double> v = v_init;
  std::vector<double> m1(n, 0.0), m2(n, 0.0);
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  CwRun run;
  std::vector<double> adv(n), tanh_v(n);
  for (int step = 1; step <= params.steps; ++step) {
    for (size_t i = 0; i < n; ++i) {
      tanh_v[i] = std::tanh(v[i]);
      adv[i] = 0.5 * (tanh_v[i] + 1.0);
    }
    std::vector<double> logits = forward(model, std::span<const double>(adv));

    if (argmax_class(logits) == target) {
      double l2 = 0.0;
      for (size_t i = 0; i < n; ++i) {
        double d = adv[i] - x0[i];
        l2 += d * d;
      }
      l2 = std::sqrt(l2);
      if (l2 < run.best_l2) {
        run.best_l2 = l2;
        run.best_adv = adv;
        run.success = true;
      }
    }

    // d/d_adv of ||adv-x0||^2 + c * max(max_{i!=t} Z_i - Z_t, -kappa)
    std::vector<double> g_adv(n);
    for (size_t i = 0; i < n; ++i) g_adv[i] = 2.0 * (adv[i] - x0[i]);
    ClassId runner = -1;
    for (ClassId i = 0; i < ClassId(model.num_classes); ++i) {
      if (i == target) continue;
      if (runner < 0 || logits[i] > logits[runner]) runner = i;
    }
    if (runner >= 0 && logits[runner] - logits[target] > -params.kappa) {
      std::vector<double> diff =
          input_gradient(model, std::span<const double>(adv), Objective::cw_loss(target, params.kappa));
      for (size_t i = 0; i < n; ++i) g_adv[i] += c * diff[i];
    }

    double bc1 = 1.0 - std::pow(beta1, step);
    double bc2 = 1.0 - std::pow(beta2, step);
    for (size_t i = 0; i < n; ++i) {
      double g = g_adv[i] * 0.5 * (1.0 - tanh_v[i] * tanh_v[i]); // chain through tanh
      m1[i] = beta1 * m1[i] + (1.0 - beta1) * g;
      m2[i] = beta2 * m2[i] + (1.0 - beta2) * g * g;
      v[i] -= params.lr * (m1[i] / bc1) / (std::sqrt(m2[i] / bc2) + eps);
    }
  }
  if (run.best_adv.empty()) run.best_adv = adv; // best effort, success=false
  return run;
}

} // namespace

AttackResult cw_l2(const Model& model, const Image& x, ClassId target, const CwParams& params) {
  const ClassId orig = classify(model, x);
  check_target(model, x, target, orig);

  const size_t n = x.size();
  std::vector<double> x0(x.data.begin(), x.data.end());
  std::vector<double> v_init(n);
  SplitMix64 rng(params.seed);
  for (size_t i = 0; i < n; ++i) {
    double xi = std::min(std::max(x0[i], 1e-6), 1.0 - 1e-6);
    v_init[i] = atanh_stable(2.0 * xi - 1.0);
    if (params.init_jitter > 0.0) v_init[i] += params.init_jitter * rng.normal();
  }

  double c = params.c_init;
  double lo = 0.0, hi = -1.0; // hi < 0 means no successful c yet
  double best_l2 = 1e300;
  std::vector<double> best_adv;
  std::vector<double> last_adv;
  int total_steps = 0;

  for (int bs = 0; bs < params.binary_search_steps; ++bs) {
    CwRun run = cw_optimize(model, x0, v_init, target, c, params);
    total_steps += params.steps;
    last_adv = run.best_adv;
    if (run.success) {
      if (run.best_l2 < best_l2) {
        best_l2 = run.best_l2;
        best_adv = run.best_adv;
      }
      hi = c;
      c = 0.5 * (lo + hi);
    } else {
      lo = c;
      c = hi < 0.0 ? c * 2.0 : 0.5 * (lo + hi);
    }
  }

  const std::vector<double>& adv = best_adv.empty() ? last_adv : best_adv;
  // tanh keeps every coordinate strictly inside (0,1); the f32 cast may
  // round onto the bounds, which still satisfies the box.
  return finish(model, x, to_image(adv, x, true), orig, total_steps);
}

} // namespace kps
