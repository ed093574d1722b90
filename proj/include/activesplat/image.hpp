#pragma once

#include "activesplat/errors.hpp"
#include "activesplat/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace activesplat {

/// Row-major RGB float image, channel values in [0,1].
struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> data;  // (y * width + x) * 3 + c

  Image() = default;
  Image(int w, int h, const Vec3& fill = Vec3::Zero()) : width(w), height(h), data(3 * w * h) {
    for (int i = 0; i < w * h; ++i)
      for (int c = 0; c < 3; ++c) data[3 * i + c] = fill[c];
  }

  double& at(int x, int y, int c) { return data[3 * (y * width + x) + c]; }
  double at(int x, int y, int c) const { return data[3 * (y * width + x) + c]; }
  Vec3 pixel(int x, int y) const {
    const double* p = &data[3 * (y * width + x)];
    return Vec3(p[0], p[1], p[2]);
  }
  void set_pixel(int x, int y, const Vec3& v) {
    double* p = &data[3 * (y * width + x)];
    p[0] = v[0];
    p[1] = v[1];
    p[2] = v[2];
  }
};

inline void write_ppm(const Image& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoFailure("cannot open " + path + " for writing");
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> bytes(img.data.size());
  for (std::size_t i = 0; i < img.data.size(); ++i)
    bytes[i] = static_cast<unsigned char>(std::lround(std::clamp(img.data[i], 0.0, 1.0) * 255.0));
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoFailure("write failed: " + path);
}

inline Image read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open " + path);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P6" || w <= 0 || h <= 0 || maxval != 255) throw IoFailure("unsupported PPM: " + path);
  in.get();
  std::vector<unsigned char> bytes(static_cast<std::size_t>(3) * w * h);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!in) throw IoFailure("truncated PPM: " + path);
  Image img(w, h);
  for (std::size_t i = 0; i < bytes.size(); ++i) img.data[i] = bytes[i] / 255.0;
  return img;
}

/// Raw little-endian float32 dump with a tiny "w h\n" text header.
inline void write_raw_float(const Image& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoFailure("cannot open " + path + " for writing");
  out << img.width << " " << img.height << "\n";
  for (double v : img.data) {
    const float f = static_cast<float>(v);
    out.write(reinterpret_cast<const char*>(&f), sizeof f);
  }
  if (!out) throw IoFailure("write failed: " + path);
}

inline constexpr double kPsnrCap = 99.0;

inline void require_same_shape(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height)
    throw DimensionMismatch("image sizes differ: " + std::to_string(a.width) + "x" +
                            std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                            std::to_string(b.height));
}

/// 10 log10(1/MSE) over all channels, capped at 99 dB (identical images).
inline double psnr(const Image& a, const Image& b) {
  require_same_shape(a, b);
  double sse = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    sse += d * d;
  }
  const double mse = sse / static_cast<double>(a.data.size());
  if (mse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

namespace detail {

inline std::vector<double> gaussian_window_1d(int size = 11, double sigma = 1.5) {
  std::vector<double> w(size);
  double sum = 0.0;
  const int half = size / 2;
  for (int i = 0; i < size; ++i) {
    w[i] = std::exp(-0.5 * (i - half) * (i - half) / (sigma * sigma));
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

// Separable "valid" filtering of one channel: output is (w-10) x (h-10).
inline std::vector<double> filter_valid(const std::vector<double>& src, int w, int h,
                                        const std::vector<double>& k) {
  const int n = static_cast<int>(k.size());
  const int ow = w - n + 1, oh = h - n + 1;
  std::vector<double> tmp(static_cast<std::size_t>(ow) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += k[i] * src[y * w + x + i];
      tmp[y * ow + x] = s;
    }
  std::vector<double> out(static_cast<std::size_t>(ow) * oh);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += k[i] * tmp[(y + i) * ow + x];
      out[y * ow + x] = s;
    }
  return out;
}

}  // namespace detail

/// Mean SSIM with an 11x11 Gaussian window (sigma 1.5), valid region only, averaged over
/// channels. Throws DimensionMismatch for images smaller than the window.
inline double ssim(const Image& a, const Image& b) {
  require_same_shape(a, b);
  constexpr double c1 = 0.01 * 0.01;
  constexpr double c2 = 0.03 * 0.03;
  const int w = a.width, h = a.height;
  const auto k = detail::gaussian_window_1d();
  if (w < static_cast<int>(k.size()) || h < static_cast<int>(k.size()))
    throw DimensionMismatch("ssim needs images of at least 11x11");

  double total = 0.0;
  for (int c = 0; c < 3; ++c) {
    std::vector<double> x(static_cast<std::size_t>(w) * h), y(x.size()), xx(x.size()), yy(x.size()),
        xy(x.size());
    for (int i = 0; i < w * h; ++i) {
      x[i] = a.data[3 * i + c];
      y[i] = b.data[3 * i + c];
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = detail::filter_valid(x, w, h, k);
    const auto my = detail::filter_valid(y, w, h, k);
    const auto sxx = detail::filter_valid(xx, w, h, k);
    const auto syy = detail::filter_valid(yy, w, h, k);
    const auto sxy = detail::filter_valid(xy, w, h, k);
    double acc = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = sxx[i] - mx[i] * mx[i];
      const double vy = syy[i] - my[i] * my[i];
      const double cov = sxy[i] - mx[i] * my[i];
      acc += ((2 * mx[i] * my[i] + c1) * (2 * cov + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    total += acc / static_cast<double>(mx.size());
  }
  return total / 3.0;
}

}  // namespace activesplat
