#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace kps {

/// Image tensor in [0,1]: w rows, h columns, c channels. Layout is
/// row-major with the channel fastest: index = (row*h + col)*c + chan.
/// Raw intermediates may leave [0,1]; clip before feeding a model.
struct Image {
  uint32_t w = 0; // rows
  uint32_t h = 0; // columns
  uint32_t c = 0; // channels
  std::vector<float> data;

  Image() = default;
  Image(uint32_t w_, uint32_t h_, uint32_t c_, float fill = 0.0f)
      : w(w_), h(h_), c(c_), data(size_t(w_) * h_ * c_, fill) {}

  size_t size() const { return size_t(w) * h * c; }
  size_t index(uint32_t row, uint32_t col, uint32_t chan) const {
    return (size_t(row) * h + col) * c + chan;
  }
  float& at(uint32_t row, uint32_t col, uint32_t chan) { return data[index(row, col, chan)]; }
  float at(uint32_t row, uint32_t col, uint32_t chan) const { return data[index(row, col, chan)]; }

  bool same_shape(const Image& o) const { return w == o.w && h == o.h && c == o.c; }
};

inline float clip01(float v) { return v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v); }
inline double clip01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

void clip_image(Image& img);

/// Generic dense f32 tensor; the unit of the KPT1 file format.
struct Tensor {
  std::vector<uint32_t> dims;
  std::vector<float> data;

  size_t size() const {
    size_t n = 1;
    for (uint32_t d : dims) n *= d;
    return n;
  }
};

// KPT1: magic "KPT1", u8 dtype (0 = f32), u8 ndim, ndim x u32 LE dims,
// payload f32 LE row-major.
void save_tensor(const Tensor& t, const std::string& path);
Tensor load_tensor(const std::string& path);

// In-memory variants, used to embed tensors inside other formats.
void write_tensor(std::vector<uint8_t>& out, const Tensor& t);
Tensor read_tensor(const uint8_t* data, size_t size, size_t& offset, const std::string& context);

Tensor image_to_tensor(const Image& img);
Image tensor_to_image(const Tensor& t);

/// Stack of same-shape images as one 4-D tensor (count, w, h, c).
Tensor stack_images(const std::vector<Image>& images);
std::vector<Image> unstack_images(const Tensor& t);

// Little-endian scalar helpers shared by the binary formats.
void put_u32le(std::vector<uint8_t>& out, uint32_t v);
void put_f32le(std::vector<uint8_t>& out, float v);
void put_f64le(std::vector<uint8_t>& out, double v);
uint32_t get_u32le(const uint8_t* p);
float get_f32le(const uint8_t* p);
double get_f64le(const uint8_t* p);

void write_file(const std::string& path, const std::vector<uint8_t>& bytes);
std::vector<uint8_t> read_file(const std::string& path);

} // namespace kps
