#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "aiaudit/errors.hpp"
#include "aiaudit/io.hpp"
#include "aiaudit/model.hpp"
#include "aiaudit/rng.hpp"
#include "aiaudit/tensor.hpp"

namespace aiaudit {

/// Heavy-rain corruption parameters. Defaults are the heavy-rain preset for
/// 32x32 inputs.
struct RainParams {
  double drop_density = 8.0;  // drops per 1000 pixels
  int slant = -10;            // degrees from vertical, [-20, 20]
  int drop_length = 6;        // pixels
  int drop_thickness = 1;     // pixels
  int blur_radius = 1;        // box blur radius, pixels
  double brightness_factor = 0.7;
  double drop_color = 0.8;    // gray level
  std::uint64_t seed = 0;

  void validate() const {
    require(drop_density >= 0 && std::isfinite(drop_density), ErrorKind::Validation, "rain drop_density must be >= 0");
    require(slant >= -20 && slant <= 20, ErrorKind::Validation, "rain slant must be in [-20, 20] degrees");
    require(drop_length > 0, ErrorKind::Validation, "rain drop_length must be positive");
    require(drop_thickness > 0, ErrorKind::Validation, "rain drop_thickness must be positive");
    require(blur_radius >= 0, ErrorKind::Validation, "rain blur_radius must be >= 0");
    require(brightness_factor > 0 && brightness_factor <= 1, ErrorKind::Validation,
            "rain brightness_factor must be in (0, 1]");
    require(drop_color >= 0 && drop_color <= 1, ErrorKind::Validation, "rain drop_color must be in [0, 1]");
  }

  friend bool operator==(const RainParams&, const RainParams&) = default;
};

inline Json to_json(const RainParams& p) {
  return {{"drop_density", p.drop_density},     {"slant", p.slant},
          {"drop_length", p.drop_length},       {"drop_thickness", p.drop_thickness},
          {"blur_radius", p.blur_radius},       {"brightness_factor", p.brightness_factor},
          {"drop_color", p.drop_color},         {"seed", p.seed}};
}

/// Overlays the fields present in `j` onto `base`.
inline RainParams rain_params_from_json(const Json& j, RainParams base = {}) {
  require(j.is_object(), ErrorKind::Validation, "rain parameters must be an object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "drop_density") base.drop_density = v.get<double>();
      else if (key == "slant") base.slant = v.get<int>();
      else if (key == "drop_length") base.drop_length = v.get<int>();
      else if (key == "drop_thickness") base.drop_thickness = v.get<int>();
      else if (key == "blur_radius") base.blur_radius = v.get<int>();
      else if (key == "brightness_factor") base.brightness_factor = v.get<double>();
      else if (key == "drop_color") base.drop_color = v.get<double>();
      else if (key == "seed") base.seed = v.get<std::uint64_t>();
      else fail(ErrorKind::Validation, "unknown rain parameter '" + key + "'");
    }
  } catch (const Json::exception& e) {
    fail(ErrorKind::Validation, std::string("rain parameters: ") + e.what());
  }
  base.validate();
  return base;
}

struct RainStreak {
  int x = 0;  // start column
  int y = 0;  // start row
  friend bool operator==(const RainStreak&, const RainStreak&) = default;
};

inline std::size_t rain_streak_count(int height, int width, const RainParams& p) {
  return static_cast<std::size_t>(std::llround(p.drop_density * height * width / 1000.0));
}

/// Streak start positions drawn from a generator seeded by `p.seed`.
inline std::vector<RainStreak> rain_streaks(int height, int width, const RainParams& p) {
  Rng rng(p.seed);
  std::vector<RainStreak> out(rain_streak_count(height, width, p));
  for (auto& s : out) {
    s.x = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(width)));
    s.y = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(height)));
  }
  return out;
}

/// Mean over the (2r+1)^2 window with replicated borders, applied separably.
inline Image box_blur(const Image& img, int radius) {
  if (radius <= 0) return img;
  const double norm = 1.0 / (2 * radius + 1);
  auto pass = [&](const Image& src, bool horizontal) {
    Image dst(src.height, src.width, src.channels);
    for (int y = 0; y < src.height; ++y)
      for (int x = 0; x < src.width; ++x)
        for (int c = 0; c < src.channels; ++c) {
          double sum = 0.0;
          for (int d = -radius; d <= radius; ++d) {
            const int yy = horizontal ? y : std::clamp(y + d, 0, src.height - 1);
            const int xx = horizontal ? std::clamp(x + d, 0, src.width - 1) : x;
            sum += src.at(yy, xx, c);
          }
          dst.at(y, x, c) = static_cast<float>(sum * norm);
        }
    return dst;
  };
  return pass(pass(img, true), false);
}

/// Darken, draw slanted streaks, box blur, clamp.
inline Image heavy_rain(const Image& image, const RainParams& p) {
  p.validate();
  Image out = image;
  const auto factor = static_cast<float>(p.brightness_factor);
  if (p.brightness_factor != 1.0)
    for (auto& v : out.data) v *= factor;

  const double angle = p.slant * 3.14159265358979323846 / 180.0;
  const double dx = std::sin(angle), dy = std::cos(angle);
  const int offset = (p.drop_thickness - 1) / 2;
  const auto color = static_cast<float>(p.drop_color);
  for (const auto& s : rain_streaks(image.height, image.width, p)) {
    for (int step = 0; step < p.drop_length; ++step) {
      const int cx = s.x + static_cast<int>(std::lround(step * dx));
      const int cy = s.y + static_cast<int>(std::lround(step * dy));
      for (int ty = 0; ty < p.drop_thickness; ++ty)
        for (int tx = 0; tx < p.drop_thickness; ++tx) {
          const int px = cx + tx - offset, py = cy + ty - offset;
          if (px < 0 || py < 0 || px >= image.width || py >= image.height) continue;
          for (int c = 0; c < image.channels; ++c) out.at(py, px, c) = color;
        }
    }
  }
  out = box_blur(out, p.blur_radius);
  clamp_unit(out);
  return out;
}

// ---------------------------------------------------------------------------
// Transforms

inline ImageTransform identity_transform() {
  return [](const Image& img, std::uint64_t) { return img; };
}

inline ImageTransform brightness_transform(double factor) {
  return [factor](const Image& img, std::uint64_t) {
    Image out = img;
    for (auto& v : out.data) v = static_cast<float>(v * factor);
    clamp_unit(out);
    return out;
  };
}

/// Heavy rain with a fixed seed, or with a per-sample seed derived from
/// (params.seed, sample index) so streak patterns differ across a dataset.
inline ImageTransform rain_transform(const RainParams& params, bool per_sample_seed) {
  params.validate();
  return [params, per_sample_seed](const Image& img, std::uint64_t index) {
    if (!per_sample_seed) return heavy_rain(img, params);
    RainParams p = params;
    p.seed = derive_seed(params.seed, index);
    return heavy_rain(img, p);
  };
}

/// Left-to-right composition; the empty chain is the identity.
inline ImageTransform transform_chain(std::vector<ImageTransform> transforms) {
  return [transforms = std::move(transforms)](const Image& img, std::uint64_t index) {
    Image out = img;
    for (const auto& t : transforms) out = t(out, index);
    return out;
  };
}

}  // namespace aiaudit
