#include "kps/nnet.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "kps/error.hpp"
#include "kps/log.hpp"
#include "kps/rng.hpp"

namespace kps {

std::vector<Shape3> layer_shapes(const Model& model) {
  std::vector<Shape3> shapes;
  shapes.push_back(model.input_dims);
  for (size_t li = 0; li < model.layers.size(); ++li) {
    const Layer& layer = model.layers[li];
    Shape3 in = shapes.back();
    Shape3 out;
    switch (layer.kind) {
      case LayerKind::Dense:
        if (in.count() != layer.in_size)
          raise(Errc::ShapeMismatch, "layer " + std::to_string(li) + ": dense expects " +
                                         std::to_string(layer.in_size) + " inputs, got " +
                                         std::to_string(in.count()));
        if (layer.weights.size() != size_t(layer.in_size) * layer.out_size ||
            layer.bias.size() != layer.out_size)
          raise(Errc::ShapeMismatch, "layer " + std::to_string(li) + ": dense weight sizes");
        out = {1, 1, layer.out_size};
        break;
      case LayerKind::Conv3x3:
        if (in.c != layer.in_ch)
          raise(Errc::ShapeMismatch, "layer " + std::to_string(li) + ": conv expects " +
                                         std::to_string(layer.in_ch) + " channels, got " +
                                         std::to_string(in.c));
        if (layer.weights.size() != size_t(layer.out_ch) * layer.in_ch * 9 ||
            layer.bias.size() != layer.out_ch)
          raise(Errc::ShapeMismatch, "layer " + std::to_string(li) + ": conv weight sizes");
        out = {in.w, in.h, layer.out_ch};
        break;
      case LayerKind::Relu:
        out = in;
        break;
      case LayerKind::MaxPool2:
        if (in.w < 2 || in.h < 2)
          raise(Errc::ShapeMismatch, "layer " + std::to_string(li) + ": maxpool2 on " +
                                         std::to_string(in.w) + "x" + std::to_string(in.h));
        out = {in.w / 2, in.h / 2, in.c};
        break;
      case LayerKind::Flatten:
        out = {1, 1, uint32_t(in.count())};
        break;
      default:
        raise(Errc::ShapeMismatch, "layer " + std::to_string(li) + ": unknown kind");
    }
    shapes.push_back(out);
  }
  Shape3 last = shapes.back();
  if (last.count() != model.num_classes)
    raise(Errc::ShapeMismatch, "final layer emits " + std::to_string(last.count()) +
                                   " values for " + std::to_string(model.num_classes) + " classes");
  return shapes;
}

namespace {

void dense_forward(const Layer& l, const std::vector<double>& x, std::vector<double>& y) {
  y.assign(l.out_size, 0.0);
  for (uint32_t o = 0; o < l.out_size; ++o) {
    const float* wrow = &l.weights[size_t(o) * l.in_size];
    double acc = double(l.bias[o]);
    for (uint32_t i = 0; i < l.in_size; ++i) acc += double(wrow[i]) * x[i];
    y[o] = acc;
  }
}

void conv_forward(const Layer& l, Shape3 in, const std::vector<double>& x, std::vector<double>& y) {
  const uint32_t w = in.w, h = in.h, cin = l.in_ch, cout = l.out_ch;
  y.assign(size_t(w) * h * cout, 0.0);
  for (uint32_t r = 0; r < w; ++r) {
    for (uint32_t col = 0; col < h; ++col) {
      for (uint32_t oc = 0; oc < cout; ++oc) {
        double acc = double(l.bias[oc]);
        for (int dr = -1; dr <= 1; ++dr) {
          int rr = int(r) + dr;
          if (rr < 0 || rr >= int(w)) continue;
          for (int dc = -1; dc <= 1; ++dc) {
            int cc = int(col) + dc;
            if (cc < 0 || cc >= int(h)) continue;
            const double* px = &x[(size_t(rr) * h + cc) * cin];
            const float* wk = &l.weights[((size_t(oc) * cin) * 3 + (dr + 1)) * 3 + (dc + 1)];
            for (uint32_t ic = 0; ic < cin; ++ic) acc += double(wk[ic * 9]) * px[ic];
          }
        }
        y[(size_t(r) * h + col) * cout + oc] = acc;
      }
    }
  }
}

void maxpool_forward(Shape3 in, const std::vector<double>& x, std::vector<double>& y, std::vector<uint32_t>* argmax) {
  const uint32_t ow = in.w / 2, oh = in.h / 2, c = in.c;
  y.assign(size_t(ow) * oh * c, 0.0);
  if (argmax) argmax->assign(y.size(), 0);
  for (uint32_t r = 0; r < ow; ++r)
    for (uint32_t col = 0; col < oh; ++col)
      for (uint32_t ch = 0; ch < c; ++ch) {
        double best = -1e300;
        uint32_t best_idx = 0;
        for (uint32_t dr = 0; dr < 2; ++dr)
          for (uint32_t dc = 0; dc < 2; ++dc) {
            uint32_t idx = ((2 * r + dr) * in.h + (2 * col + dc)) * c + ch;
            if (x[idx] > best) { // first max wins ties
              best = x[idx];
              best_idx = idx;
            }
          }
        size_t out_idx = (size_t(r) * oh + col) * c + ch;
        y[out_idx] = best;
        if (argmax) (*argmax)[out_idx] = best_idx;
      }
}

struct ForwardTrace {
  std::vector<Shape3> shapes;
  std::vector<std::vector<double>> acts;          // acts[0] = input, acts[L] = logits
  std::vector<std::vector<uint32_t>> pool_argmax; // per layer, empty unless maxpool
};

ForwardTrace run_forward(const Model& model, std::span<const double> input, bool keep_argmax) {
  ForwardTrace tr;
  tr.shapes = layer_shapes(model);
  if (input.size() != tr.shapes[0].count())
    raise(Errc::ShapeMismatch, "input has " + std::to_string(input.size()) + " values, model expects " +
                                   std::to_string(tr.shapes[0].count()));
  tr.acts.resize(model.layers.size() + 1);
  tr.pool_argmax.resize(model.layers.size());
  tr.acts[0].assign(input.begin(), input.end());
  for (size_t li = 0; li < model.layers.size(); ++li) {
    const Layer& l = model.layers[li];
    const std::vector<double>& x = tr.acts[li];
    std::vector<double>& y = tr.acts[li + 1];
    switch (l.kind) {
      case LayerKind::Dense:
        dense_forward(l, x, y);
        break;
      case LayerKind::Conv3x3:
        conv_forward(l, tr.shapes[li], x, y);
        break;
      case LayerKind::Relu:
        y = x;
        for (double& v : y) v = v > 0.0 ? v : 0.0;
        break;
      case LayerKind::MaxPool2:
        maxpool_forward(tr.shapes[li], x, y, keep_argmax ? &tr.pool_argmax[li] : nullptr);
        break;
      case LayerKind::Flatten:
        y = x;
        break;
    }
  }
  return tr;
}

std::vector<double> image_input(const Model& model, const Image& image) {
  if (Shape3{image.w, image.h, image.c} != model.input_dims)
    raise(Errc::ShapeMismatch, "image " + std::to_string(image.w) + "x" + std::to_string(image.h) + "x" +
                                   std::to_string(image.c) + " does not match model input");
  return std::vector<double>(image.data.begin(), image.data.end());
}

struct LayerGrads {
  std::vector<double> weights, bias;
};

/// Backprop from d objective / d logits; fills input gradient and, when
/// `wgrads` is non-null, accumulates weight gradients.
std::vector<double> run_backward(const Model& model, const ForwardTrace& tr,
                                 std::vector<double> dy, std::vector<LayerGrads>* wgrads) {
  for (size_t li = model.layers.size(); li-- > 0;) {
    const Layer& l = model.layers[li];
    const std::vector<double>& x = tr.acts[li];
    Shape3 in = tr.shapes[li];
    std::vector<double> dx;
    switch (l.kind) {
      case LayerKind::Dense: {
        dx.assign(x.size(), 0.0);
        for (uint32_t o = 0; o < l.out_size; ++o) {
          double g = dy[o];
          if (g == 0.0) {
            continue;
          }
          const float* wrow = &l.weights[size_t(o) * l.in_size];
          for (uint32_t i = 0; i < l.in_size; ++i) dx[i] += g * double(wrow[i]);
        }
        if (wgrads) {
          LayerGrads& lg = (*wgrads)[li];
          for (uint32_t o = 0; o < l.out_size; ++o) {
            double g = dy[o];
            lg.bias[o] += g;
            if (g == 0.0) continue;
            double* grow = &lg.weights[size_t(o) * l.in_size];
            for (uint32_t i = 0; i < l.in_size; ++i) grow[i] += g * x[i];
          }
        }
        break;
      }
      case LayerKind::Conv3x3: {
        dx.assign(x.size(), 0.0);
        const uint32_t w = in.w, h = in.h, cin = l.in_ch, cout = l.out_ch;
        LayerGrads* lg = wgrads ? &(*wgrads)[li] : nullptr;
        for (uint32_t r = 0; r < w; ++r)
          for (uint32_t col = 0; col < h; ++col)
            for (uint32_t oc = 0; oc < cout; ++oc) {
              double g = dy[(size_t(r) * h + col) * cout + oc];
              if (g == 0.0) continue;
              if (lg) lg->bias[oc] += g;
              for (int dr = -1; dr <= 1; ++dr) {
                int rr = int(r) + dr;
                if (rr < 0 || rr >= int(w)) continue;
                for (int dc = -1; dc <= 1; ++dc) {
                  int cc = int(col) + dc;
                  if (cc < 0 || cc >= int(h)) continue;
                  size_t px = (size_t(rr) * h + cc) * cin;
                  size_t wk = ((size_t(oc) * cin) * 3 + (dr + 1)) * 3 + (dc + 1);
                  for (uint32_t ic = 0; ic < cin; ++ic) {
                    dx[px + ic] += g * double(l.weights[wk + ic * 9]);
                    if (lg) lg->weights[wk + ic * 9] += g * x[px + ic];
                  }
                }
              }
            }
        break;
      }
      case LayerKind::Relu:
        dx = dy;
        for (size_t i = 0; i < dx.size(); ++i)
          if (x[i] <= 0.0) dx[i] = 0.0;
        break;
      case LayerKind::MaxPool2: {
        dx.assign(x.size(), 0.0);
        const std::vector<uint32_t>& argmax = tr.pool_argmax[li];
        for (size_t i = 0; i < dy.size(); ++i) dx[argmax[i]] += dy[i];
        break;
      }
      case LayerKind::Flatten:
        dx = dy;
        break;
    }
    dy = std::move(dx);
  }
  return dy;
}

std::vector<double> logits_gradient(std::span<const double> logits, const Objective& objective,
                                    uint32_t num_classes) {
  if (objective.target < 0 || uint32_t(objective.target) >= num_classes)
    raise(Errc::InvalidTarget, "objective class " + std::to_string(objective.target) + " out of range");
  std::vector<double> dy(logits.size(), 0.0);
  switch (objective.kind) {
    case Objective::CrossEntropy: {
      std::vector<double> p = softmax(logits);
      for (size_t i = 0; i < dy.size(); ++i) dy[i] = p[i];
      dy[objective.target] -= 1.0;
      break;
    }
    case Objective::Logit:
      dy[objective.target] = 1.0;
      break;
    case Objective::CwLoss: {
      ClassId runner = -1;
      for (size_t i = 0; i < logits.size(); ++i) {
        if (ClassId(i) == objective.target) continue;
        if (runner < 0 || logits[i] > logits[runner]) runner = ClassId(i);
      }
      if (runner >= 0 && logits[runner] - logits[objective.target] > -objective.kappa) {
        dy[runner] = 1.0;
        dy[objective.target] = -1.0;
      }
      break;
    }
  }
  return dy;
}

} // namespace

std::vector<double> forward(const Model& model, std::span<const double> input) {
  return run_forward(model, input, false).acts.back();
}

std::vector<double> forward(const Model& model, const Image& image) {
  std::vector<double> in = image_input(model, image);
  return forward(model, std::span<const double>(in));
}

std::vector<double> softmax(std::span<const double> logits) {
  double m = -1e300;
  for (double v : logits) m = std::max(m, v);
  double sum = 0.0;
  std::vector<double> p(logits.size());
  for (size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

ClassId argmax_class(std::span<const double> values) {
  size_t best = 0;
  for (size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return ClassId(best);
}

ClassId classify(const Model& model, const Image& image) {
  std::vector<double> logits = forward(model, image);
  return argmax_class(logits);
}

double objective_value(std::span<const double> logits, const Objective& objective) {
  switch (objective.kind) {
    case Objective::CrossEntropy: {
      double m = -1e300;
      for (double v : logits) m = std::max(m, v);
      double sum = 0.0;
      for (double v : logits) sum += std::exp(v - m);
      return std::log(sum) - (logits[objective.target] - m);
    }
    case Objective::Logit:
      return logits[objective.target];
    case Objective::CwLoss: {
      double runner = -1e300;
      for (size_t i = 0; i < logits.size(); ++i)
        if (ClassId(i) != objective.target) runner = std::max(runner, logits[i]);
      return std::max(runner - logits[objective.target], -objective.kappa);
    }
  }
  return 0.0;
}

std::vector<double> input_gradient(const Model& model, std::span<const double> input,
                                   const Objective& objective) {
  ForwardTrace tr = run_forward(model, input, true);
  std::vector<double> dy = logits_gradient(tr.acts.back(), objective, model.num_classes);
  return run_backward(model, tr, std::move(dy), nullptr);
}

std::vector<double> input_gradient(const Model& model, const Image& image, const Objective& objective) {
  std::vector<double> in = image_input(model, image);
  return input_gradient(model, std::span<const double>(in), objective);
}

std::vector<std::vector<double>> logit_jacobian(const Model& model, std::span<const double> input) {
  ForwardTrace tr = run_forward(model, input, true);
  std::vector<std::vector<double>> rows(model.num_classes);
  for (uint32_t i = 0; i < model.num_classes; ++i) {
    std::vector<double> dy(model.num_classes, 0.0);
    dy[i] = 1.0;
    rows[i] = run_backward(model, tr, std::move(dy), nullptr);
  }
  return rows;
}

std::vector<std::vector<double>> logit_jacobian(const Model& model, const Image& image) {
  std::vector<double> in = image_input(model, image);
  return logit_jacobian(model, std::span<const double>(in));
}

namespace {

void he_uniform(std::vector<float>& w, uint32_t fan_in, SplitMix64& rng) {
  double limit = std::sqrt(6.0 / double(fan_in));
  for (float& v : w) v = float(rng.uniform(-limit, limit));
}

} // namespace

Model make_mlp(Shape3 input, uint32_t num_classes, uint32_t hidden, uint64_t seed) {
  SplitMix64 rng(seed);
  Model m;
  m.input_dims = input;
  m.num_classes = num_classes;
  m.layers.push_back({LayerKind::Flatten, {}, {}, 0, 0, 0, 0});

  Layer d1{LayerKind::Dense, {}, {}, uint32_t(input.count()), hidden, 0, 0};
  d1.weights.resize(size_t(d1.in_size) * d1.out_size);
  d1.bias.assign(d1.out_size, 0.0f);
  he_uniform(d1.weights, d1.in_size, rng);
  m.layers.push_back(std::move(d1));

  m.layers.push_back({LayerKind::Relu, {}, {}, 0, 0, 0, 0});

  Layer d2{LayerKind::Dense, {}, {}, hidden, num_classes, 0, 0};
  d2.weights.resize(size_t(d2.in_size) * d2.out_size);
  d2.bias.assign(d2.out_size, 0.0f);
  he_uniform(d2.weights, d2.in_size, rng);
  m.layers.push_back(std::move(d2));

  layer_shapes(m);
  return m;
}

Model make_smallconv(Shape3 input, uint32_t num_classes, uint32_t channels, uint64_t seed) {
  SplitMix64 rng(seed);
  Model m;
  m.input_dims = input;
  m.num_classes = num_classes;

  Layer conv{LayerKind::Conv3x3, {}, {}, 0, 0, input.c, channels};
  conv.weights.resize(size_t(channels) * input.c * 9);
  conv.bias.assign(channels, 0.0f);
  he_uniform(conv.weights, input.c * 9, rng);
  m.layers.push_back(std::move(conv));

  m.layers.push_back({LayerKind::Relu, {}, {}, 0, 0, 0, 0});
  m.layers.push_back({LayerKind::MaxPool2, {}, {}, 0, 0, 0, 0});
  m.layers.push_back({LayerKind::Flatten, {}, {}, 0, 0, 0, 0});

  uint32_t flat = (input.w / 2) * (input.h / 2) * channels;
  Layer dense{LayerKind::Dense, {}, {}, flat, num_classes, 0, 0};
  dense.weights.resize(size_t(dense.in_size) * dense.out_size);
  dense.bias.assign(dense.out_size, 0.0f);
  he_uniform(dense.weights, dense.in_size, rng);
  m.layers.push_back(std::move(dense));

  layer_shapes(m);
  return m;
}

Model train_sgd(const Model& model, const DatasetView& data, const SgdConfig& cfg, double* final_accuracy) {
  const std::vector<Image>& images = *data.images;
  const std::vector<ClassId>& labels = *data.labels;
  if (images.empty()) raise(Errc::EmptyDataset, "no training samples");
  if (images.size() != labels.size()) raise(Errc::CountMismatch, "images vs labels");
  for (ClassId y : labels)
    if (y < 0 || uint32_t(y) >= model.num_classes)
      raise(Errc::InvalidTarget, "label " + std::to_string(y) + " outside class count");

  Model m = model;
  layer_shapes(m);
  SplitMix64 rng(cfg.seed);

  std::vector<LayerGrads> grads(m.layers.size());
  auto reset_grads = [&] {
    for (size_t li = 0; li < m.layers.size(); ++li) {
      grads[li].weights.assign(m.layers[li].weights.size(), 0.0);
      grads[li].bias.assign(m.layers[li].bias.size(), 0.0);
    }
  };

  std::vector<size_t> order(images.size());
  std::iota(order.begin(), order.end(), size_t(0));

  for (uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (size_t start = 0; start < order.size(); start += cfg.batch) {
      size_t end = std::min(order.size(), start + cfg.batch);
      reset_grads();
      for (size_t bi = start; bi < end; ++bi) {
        const Image& img = images[order[bi]];
        std::vector<double> in = image_input(m, img);
        ForwardTrace tr = run_forward(m, in, true);
        std::vector<double> dy =
            logits_gradient(tr.acts.back(), Objective::cross_entropy(labels[order[bi]]), m.num_classes);
        run_backward(m, tr, std::move(dy), &grads);
      }
      double scale = cfg.lr / double(end - start);
      for (size_t li = 0; li < m.layers.size(); ++li) {
        Layer& l = m.layers[li];
        for (size_t i = 0; i < l.weights.size(); ++i)
          l.weights[i] = float(double(l.weights[i]) - scale * grads[li].weights[i]);
        for (size_t i = 0; i < l.bias.size(); ++i)
          l.bias[i] = float(double(l.bias[i]) - scale * grads[li].bias[i]);
      }
    }
  }

  size_t correct = 0;
  for (size_t i = 0; i < images.size(); ++i)
    if (classify(m, images[i]) == labels[i]) ++correct;
  double acc = double(correct) / double(images.size());
  if (final_accuracy) *final_accuracy = acc;
  KPS_LOG_INFO("train_sgd: %zu samples, %u epochs, train accuracy %.4f", images.size(), cfg.epochs, acc);
  return m;
}

static const uint8_t kModelMagic[4] = {'K', 'P', 'M', '1'};

void save_model(const Model& model, const std::string& path) {
  std::vector<uint8_t> out;
  out.insert(out.end(), kModelMagic, kModelMagic + 4);
  put_u32le(out, model.input_dims.w);
  put_u32le(out, model.input_dims.h);
  put_u32le(out, model.input_dims.c);
  put_u32le(out, model.num_classes);
  put_u32le(out, uint32_t(model.layers.size()));
  for (const Layer& l : model.layers) {
    out.push_back(uint8_t(l.kind));
    if (l.kind == LayerKind::Dense) {
      put_u32le(out, l.in_size);
      put_u32le(out, l.out_size);
      Tensor w{{l.out_size, l.in_size}, l.weights};
      Tensor b{{l.out_size}, l.bias};
      write_tensor(out, w);
      write_tensor(out, b);
    } else if (l.kind == LayerKind::Conv3x3) {
      put_u32le(out, l.in_ch);
      put_u32le(out, l.out_ch);
      Tensor w{{l.out_ch, l.in_ch, 3, 3}, l.weights};
      Tensor b{{l.out_ch}, l.bias};
      write_tensor(out, w);
      write_tensor(out, b);
    }
  }
  write_file(path, out);
}

Model load_model(const std::string& path) {
  std::vector<uint8_t> bytes = read_file(path);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kModelMagic, 4) != 0)
    raise(Errc::BadMagic, path + " is not a KPM1 model file");
  size_t off = 4;
  auto need = [&](size_t n) {
    if (bytes.size() - off < n)
      raise(Errc::TruncatedFile, path + " at byte " + std::to_string(off));
  };
  need(20);
  Model m;
  m.input_dims.w = get_u32le(&bytes[off]);
  m.input_dims.h = get_u32le(&bytes[off + 4]);
  m.input_dims.c = get_u32le(&bytes[off + 8]);
  m.num_classes = get_u32le(&bytes[off + 12]);
  uint32_t layer_count = get_u32le(&bytes[off + 16]);
  off += 20;
  for (uint32_t li = 0; li < layer_count; ++li) {
    need(1);
    uint8_t kind = bytes[off++];
    if (kind > uint8_t(LayerKind::Flatten))
      raise(Errc::BadMagic, path + ": unknown layer kind " + std::to_string(kind));
    Layer l;
    l.kind = LayerKind(kind);
    if (l.kind == LayerKind::Dense || l.kind == LayerKind::Conv3x3) {
      need(8);
      uint32_t a = get_u32le(&bytes[off]);
      uint32_t b = get_u32le(&bytes[off + 4]);
      off += 8;
      Tensor w = read_tensor(bytes.data(), bytes.size(), off, path);
      Tensor bias = read_tensor(bytes.data(), bytes.size(), off, path);
      if (l.kind == LayerKind::Dense) {
        l.in_size = a;
        l.out_size = b;
        if (w.dims != std::vector<uint32_t>{b, a} || bias.dims != std::vector<uint32_t>{b})
          raise(Errc::ShapeMismatch, path + ": dense tensor dims");
      } else {
        l.in_ch = a;
        l.out_ch = b;
        if (w.dims != std::vector<uint32_t>{b, a, 3, 3} || bias.dims != std::vector<uint32_t>{b})
          raise(Errc::ShapeMismatch, path + ": conv tensor dims");
      }
      l.weights = std::move(w.data);
      l.bias = std::move(bias.data);
    }
    m.layers.push_back(std::move(l));
  }
  if (off != bytes.size()) raise(Errc::TruncatedFile, path + " (trailing bytes)");
  layer_shapes(m); // composition check
  return m;
}

} // namespace kps
