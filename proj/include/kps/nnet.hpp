#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kps/tensor.hpp"

namespace kps {

using ClassId = int;

enum class LayerKind : uint8_t {
  Dense = 0,
  Conv3x3 = 1, // stride 1, zero padding 1
  Relu = 2,
  MaxPool2 = 3, // 2x2, stride 2, floor on odd dims
  Flatten = 4,
};

struct Layer {
  LayerKind kind;
  // Dense: weights [out][in] row-major, bias [out].
  // Conv3x3: weights [out_c][in_c][3][3], bias [out_c].
  std::vector<float> weights, bias;
  uint32_t in_size = 0, out_size = 0; // dense
  uint32_t in_ch = 0, out_ch = 0;     // conv
};

struct Shape3 {
  uint32_t w = 0, h = 0, c = 0;
  size_t count() const { return size_t(w) * h * c; }
  bool operator==(const Shape3&) const = default;
};

/// Layered feedforward classifier. Weights are stored f32 (the on-disk
/// format); evaluation runs in f64 end to end so finite-difference
/// gradient checks stay meaningful.
struct Model {
  Shape3 input_dims;
  uint32_t num_classes = 0;
  std::vector<Layer> layers;
};

/// Shape of every layer boundary; throws ShapeMismatch if layers do not
/// compose or the final output is not (1,1,num_classes).
std::vector<Shape3> layer_shapes(const Model& model);

Model make_mlp(Shape3 input, uint32_t num_classes, uint32_t hidden, uint64_t seed);
Model make_smallconv(Shape3 input, uint32_t num_classes, uint32_t channels, uint64_t seed);

std::vector<double> forward(const Model& model, const Image& image);
std::vector<double> forward(const Model& model, std::span<const double> input);

std::vector<double> softmax(std::span<const double> logits);

/// argmax of forward; lowest index wins exact ties.
ClassId classify(const Model& model, const Image& image);
ClassId argmax_class(std::span<const double> values);

struct Objective {
  enum Kind { CrossEntropy, Logit, CwLoss } kind;
  ClassId target = 0;
  double kappa = 0.0; // CwLoss only

  static Objective cross_entropy(ClassId target) { return {CrossEntropy, target, 0.0}; }
  static Objective logit(ClassId i) { return {Logit, i, 0.0}; }
  static Objective cw_loss(ClassId target, double kappa) { return {CwLoss, target, kappa}; }
};

/// Exact reverse-mode d objective / d input, flattened image order.
std::vector<double> input_gradient(const Model& model, const Image& image, const Objective& objective);
std::vector<double> input_gradient(const Model& model, std::span<const double> input, const Objective& objective);

/// num_classes x (w*h*c); row i is the input gradient of logit i.
std::vector<std::vector<double>> logit_jacobian(const Model& model, const Image& image);
std::vector<std::vector<double>> logit_jacobian(const Model& model, std::span<const double> input);

/// Scalar objective value from logits, matching input_gradient.
double objective_value(std::span<const double> logits, const Objective& objective);

struct DatasetView {
  const std::vector<Image>* images;
  const std::vector<ClassId>* labels;
};

struct SgdConfig {
  double lr = 0.05;
  uint32_t epochs = 10;
  uint32_t batch = 32;
  uint64_t seed = 0;
};

/// Minibatch SGD on softmax cross-entropy; deterministic given the seed.
/// Returns the trained model; final_accuracy, when non-null, receives the
/// post-training train accuracy.
Model train_sgd(const Model& model, const DatasetView& data, const SgdConfig& cfg,
                double* final_accuracy = nullptr);

// KPM1: magic, input dims, class count, u32 layer count, then per layer a
// kind tag plus KPT1-embedded weight payloads.
void save_model(const Model& model, const std::string& path);
Model load_model(const std::string& path);

} // namespace kps
