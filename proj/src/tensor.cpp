#include "kps/tensor.hpp"

#include <cstdio>
#include <cstring>

#include "kps/error.hpp"

namespace kps {

void clip_image(Image& img) {
  for (float& v : img.data) v = clip01(v);
}

void put_u32le(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(uint8_t(v & 0xff));
  out.push_back(uint8_t((v >> 8) & 0xff));
  out.push_back(uint8_t((v >> 16) & 0xff));
  out.push_back(uint8_t((v >> 24) & 0xff));
}

void put_f32le(std::vector<uint8_t>& out, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32le(out, bits);
}

void put_f64le(std::vector<uint8_t>& out, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u32le(out, uint32_t(bits & 0xffffffffULL));
  put_u32le(out, uint32_t(bits >> 32));
}

uint32_t get_u32le(const uint8_t* p) {
  return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 | uint32_t(p[3]) << 24;
}

float get_f32le(const uint8_t* p) {
  uint32_t bits = get_u32le(p);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

double get_f64le(const uint8_t* p) {
  uint64_t bits = uint64_t(get_u32le(p)) | (uint64_t(get_u32le(p + 4)) << 32);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

void write_file(const std::string& path, const std::vector<uint8_t>& bytes) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) raise(Errc::IoFailure, "cannot open for writing: " + path);
  size_t n = bytes.empty() ? 0 : std::fwrite(bytes.data(), 1, bytes.size(), f);
  bool ok = (n == bytes.size()) && std::fclose(f) == 0;
  if (!ok) raise(Errc::IoFailure, "short write: " + path);
}

std::vector<uint8_t> read_file(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) raise(Errc::IoFailure, "cannot open: " + path);
  std::fseek(f, 0, SEEK_END);
  long len = std::ftell(f);
  std::fseek(f, 0, SEEK_SET);
  std::vector<uint8_t> bytes(size_t(len < 0 ? 0 : len));
  size_t n = bytes.empty() ? 0 : std::fread(bytes.data(), 1, bytes.size(), f);
  std::fclose(f);
  if (n != bytes.size()) raise(Errc::IoFailure, "short read: " + path);
  return bytes;
}

static const uint8_t kTensorMagic[4] = {0x4b, 0x50, 0x54, 0x31}; // "KPT1"

void write_tensor(std::vector<uint8_t>& out, const Tensor& t) {
  out.insert(out.end(), kTensorMagic, kTensorMagic + 4);
  out.push_back(0); // dtype f32
  out.push_back(uint8_t(t.dims.size()));
  for (uint32_t d : t.dims) put_u32le(out, d);
  for (float v : t.data) put_f32le(out, v);
}

Tensor read_tensor(const uint8_t* data, size_t size, size_t& offset, const std::string& context) {
  if (size - offset < 6) raise(Errc::TruncatedFile, context + " (tensor header at byte " + std::to_string(offset) + ")");
  if (std::memcmp(data + offset, kTensorMagic, 4) != 0)
    raise(Errc::BadMagic, context + " (expected KPT1 at byte " + std::to_string(offset) + ")");
  uint8_t dtype = data[offset + 4];
  if (dtype != 0) raise(Errc::BadMagic, context + " (unknown dtype " + std::to_string(dtype) + ")");
  uint8_t ndim = data[offset + 5];
  offset += 6;
  if (size - offset < size_t(ndim) * 4) raise(Errc::TruncatedFile, context + " (dims)");
  Tensor t;
  t.dims.resize(ndim);
  for (uint8_t i = 0; i < ndim; ++i) {
    t.dims[i] = get_u32le(data + offset);
    offset += 4;
  }
  size_t count = t.size();
  if ((size - offset) / 4 < count) raise(Errc::TruncatedFile, context + " (payload)");
  t.data.resize(count);
  for (size_t i = 0; i < count; ++i) {
    t.data[i] = get_f32le(data + offset);
    offset += 4;
  }
  return t;
}

void save_tensor(const Tensor& t, const std::string& path) {
  std::vector<uint8_t> bytes;
  write_tensor(bytes, t);
  write_file(path, bytes);
}

Tensor load_tensor(const std::string& path) {
  std::vector<uint8_t> bytes = read_file(path);
  size_t offset = 0;
  Tensor t = read_tensor(bytes.data(), bytes.size(), offset, path);
  if (offset != bytes.size()) raise(Errc::TruncatedFile, path + " (trailing bytes)");
  return t;
}

Tensor image_to_tensor(const Image& img) {
  Tensor t;
  t.dims = {img.w, img.h, img.c};
  t.data = img.data;
  return t;
}

Image tensor_to_image(const Tensor& t) {
  if (t.dims.size() != 3) raise(Errc::ShapeMismatch, "image tensor must be 3-D, got " + std::to_string(t.dims.size()) + "-D");
  Image img(t.dims[0], t.dims[1], t.dims[2]);
  img.data = t.data;
  return img;
}

Tensor stack_images(const std::vector<Image>& images) {
  if (images.empty()) raise(Errc::InvalidArgument, "cannot stack zero images");
  const Image& first = images[0];
  Tensor t;
  t.dims = {uint32_t(images.size()), first.w, first.h, first.c};
  t.data.reserve(images.size() * first.size());
  for (const Image& img : images) {
    if (!img.same_shape(first)) raise(Errc::ShapeMismatch, "stacked images must share one shape");
    t.data.insert(t.data.end(), img.data.begin(), img.data.end());
  }
  return t;
}

std::vector<Image> unstack_images(const Tensor& t) {
  if (t.dims.size() != 4) raise(Errc::ShapeMismatch, "image stack tensor must be 4-D");
  std::vector<Image> images(t.dims[0]);
  size_t per = size_t(t.dims[1]) * t.dims[2] * t.dims[3];
  for (uint32_t i = 0; i < t.dims[0]; ++i) {
    Image& img = images[i];
    img.w = t.dims[1];
    img.h = t.dims[2];
    img.c = t.dims[3];
    img.data.assign(t.data.begin() + i * per, t.data.begin() + (i + 1) * per);
  }
  return images;
}

} // namespace kps
