#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "aiaudit/errors.hpp"

namespace aiaudit {

/// Dense height x width x channels array stored channel-last (HWC).
struct Tensor3 {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> data;

  Tensor3() = default;
  Tensor3(int h, int w, int c, float fill = 0.0f)
      : height(h), width(w), channels(c), data(static_cast<std::size_t>(h) * w * c, fill) {}

  std::size_t size() const noexcept { return data.size(); }
  std::size_t index(int y, int x, int c) const noexcept {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
  float& at(int y, int x, int c) noexcept { return data[index(y, x, c)]; }
  float at(int y, int x, int c) const noexcept { return data[index(y, x, c)]; }

  bool same_shape(const Tensor3& other) const noexcept {
    return height == other.height && width == other.width && channels == other.channels;
  }
  std::span<float> span() noexcept { return data; }
  std::span<const float> span() const noexcept { return data; }

  friend bool operator==(const Tensor3&, const Tensor3&) = default;
};

/// Images are H x W x 3 tensors with values in [0, 1].
using Image = Tensor3;

struct ImageShape {
  int height = 0;
  int width = 0;
  int channels = 3;
  friend bool operator==(const ImageShape&, const ImageShape&) = default;
};

inline ImageShape shape_of(const Tensor3& t) { return {t.height, t.width, t.channels}; }

inline std::string shape_string(const ImageShape& s) {
  return std::to_string(s.height) + "x" + std::to_string(s.width) + "x" + std::to_string(s.channels);
}

inline bool in_unit_range(std::span<const float> values) {
  return std::all_of(values.begin(), values.end(), [](float v) { return v >= 0.0f && v <= 1.0f; });
}

inline void clamp_unit(Tensor3& t) {
  for (auto& v : t.data) v = std::clamp(v, 0.0f, 1.0f);
}

inline float max_abs_diff(const Tensor3& a, const Tensor3& b) {
  require(a.same_shape(b), ErrorKind::Contract, "max_abs_diff: shape mismatch");
  float m = 0.0f;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

/// Area-weighted resampling: every output pixel is the mean of the input
/// region it covers (fractional coverage at the edges). Used for downscaling.
inline Tensor3 resize_area(const Tensor3& src, int out_h, int out_w) {
  require(out_h > 0 && out_w > 0, ErrorKind::Contract, "resize_area: empty target");
  Tensor3 dst(out_h, out_w, src.channels);
  const double sy = static_cast<double>(src.height) / out_h;
  const double sx = static_cast<double>(src.width) / out_w;
  std::vector<double> acc(static_cast<std::size_t>(src.channels));
  for (int oy = 0; oy < out_h; ++oy) {
    const double y0 = oy * sy, y1 = (oy + 1) * sy;
    for (int ox = 0; ox < out_w; ++ox) {
      const double x0 = ox * sx, x1 = (ox + 1) * sx;
      std::fill(acc.begin(), acc.end(), 0.0);
      double total = 0.0;
      for (int iy = static_cast<int>(y0); iy < src.height && iy < y1; ++iy) {
        const double wy = std::min<double>(iy + 1, y1) - std::max<double>(iy, y0);
        if (wy <= 0) continue;
        for (int ix = static_cast<int>(x0); ix < src.width && ix < x1; ++ix) {
          const double wx = std::min<double>(ix + 1, x1) - std::max<double>(ix, x0);
          if (wx <= 0) continue;
          const double w = wy * wx;
          total += w;
          for (int c = 0; c < src.channels; ++c) acc[c] += w * src.at(iy, ix, c);
        }
      }
      for (int c = 0; c < src.channels; ++c) dst.at(oy, ox, c) = static_cast<float>(acc[c] / total);
    }
  }
  return dst;
}

/// Bilinear resampling with half-pixel centres and edge clamping.
inline Tensor3 resize_bilinear(const Tensor3& src, int out_h, int out_w) {
  require(out_h > 0 && out_w > 0, ErrorKind::Contract, "resize_bilinear: empty target");
  Tensor3 dst(out_h, out_w, src.channels);
  const double sy = static_cast<double>(src.height) / out_h;
  const double sx = static_cast<double>(src.width) / out_w;
  for (int oy = 0; oy < out_h; ++oy) {
    const double fy = std::clamp((oy + 0.5) * sy - 0.5, 0.0, static_cast<double>(src.height - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, src.height - 1);
    const double wy = fy - y0;
    for (int ox = 0; ox < out_w; ++ox) {
      const double fx = std::clamp((ox + 0.5) * sx - 0.5, 0.0, static_cast<double>(src.width - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, src.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < src.channels; ++c) {
        const double top = (1 - wx) * src.at(y0, x0, c) + wx * src.at(y0, x1, c);
        const double bottom = (1 - wx) * src.at(y1, x0, c) + wx * src.at(y1, x1, c);
        dst.at(oy, ox, c) = static_cast<float>((1 - wy) * top + wy * bottom);
      }
    }
  }
  return dst;
}

/// Resizes to the audit resolution: area averaging when shrinking, bilinear otherwise.
inline Tensor3 resize_to(const Tensor3& src, int out_h, int out_w) {
  if (src.height == out_h && src.width == out_w) return src;
  if (src.height >= out_h && src.width >= out_w) return resize_area(src, out_h, out_w);
  return resize_bilinear(src, out_h, out_w);
}

/// Rec. 601 luma, single channel.
inline Tensor3 to_luma(const Tensor3& rgb) {
  require(rgb.channels == 3, ErrorKind::Contract, "to_luma: expected 3 channels");
  Tensor3 out(rgb.height, rgb.width, 1);
  for (int y = 0; y < rgb.height; ++y)
    for (int x = 0; x < rgb.width; ++x)
      out.at(y, x, 0) = 0.299f * rgb.at(y, x, 0) + 0.587f * rgb.at(y, x, 1) + 0.114f * rgb.at(y, x, 2);
  return out;
}

}  // namespace aiaudit
