#pragma once

// Procedural 43-class traffic-sign corpus in the GTSRB style: every physical
// sign instance is a track of several frames taken while approaching it, so
// frames of one track are near-duplicates and must never straddle splits.

#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <string>
#include <string_view>
#include <vector>

#include "aiaudit/dataset.hpp"
#include "aiaudit/image_io.hpp"
#include "aiaudit/io.hpp"
#include "aiaudit/parallel.hpp"
#include "aiaudit/rng.hpp"
#include "aiaudit/tensor.hpp"

namespace aiaudit::synth {

inline constexpr int kNumClasses = 43;

struct Rgb {
  float r = 0, g = 0, b = 0;
};

inline constexpr Rgb kRed{0.80f, 0.08f, 0.10f};
inline constexpr Rgb kWhite{0.95f, 0.95f, 0.93f};
inline constexpr Rgb kBlack{0.06f, 0.06f, 0.07f};
inline constexpr Rgb kBlue{0.10f, 0.25f, 0.70f};
inline constexpr Rgb kYellow{0.98f, 0.78f, 0.08f};
inline constexpr Rgb kGray{0.55f, 0.55f, 0.55f};
inline constexpr Rgb kGreen{0.10f, 0.65f, 0.25f};

enum class Shape { Circle, TriangleUp, TriangleDown, Octagon, Diamond };

/// Glyph bitmaps: '#' glyph colour, 'r' red, 'y' yellow, 'g' green, 'w' white,
/// anything else transparent.
struct SignClass {
  std::string_view name;
  Shape shape;
  Rgb rim;
  Rgb fill;
  Rgb glyph_color;
  std::vector<std::string_view> glyph;
  double glyph_scale = 0.9;  // glyph box side relative to the sign radius
  double glyph_dy = 0.0;     // vertical glyph offset relative to the radius
  bool slash = false;        // diagonal "end of" bars
};

namespace detail {

// 3x5 digits.
inline constexpr std::array<std::array<std::string_view, 5>, 10> kDigits{{
    {"###", "#.#", "#.#", "#.#", "###"},
    {".#.", "##.", ".#.", ".#.", "###"},
    {"###", "..#", "###", "#..", "###"},
    {"###", "..#", "###", "..#", "###"},
    {"#.#", "#.#", "###", "..#", "..#"},
    {"###", "#..", "###", "..#", "###"},
    {"###", "#..", "###", "#.#", "###"},
    {"###", "..#", ".#.", ".#.", ".#."},
    {"###", "#.#", "###", "#.#", "###"},
    {"###", "#.#", "###", "..#", "###"},
}};

/// Renders a number as a padded bitmap (one blank column between digits).
inline std::vector<std::string_view> number_glyph(std::string_view digits) {
  static std::deque<std::string> storage;  // stable addresses; glyphs live for the program
  std::vector<std::string> rows(7, std::string());
  const std::size_t width = digits.size() * 4 + 1;
  rows[0] = std::string(width, '.');
  rows[6] = std::string(width, '.');
  for (int r = 0; r < 5; ++r) {
    std::string line = ".";
    for (char d : digits) line += std::string(kDigits[static_cast<std::size_t>(d - '0')][static_cast<std::size_t>(r)]) + ".";
    rows[static_cast<std::size_t>(r + 1)] = line;
  }
  std::vector<std::string_view> out;
  for (auto& r : rows) {
    storage.push_back(std::move(r));
  }
  for (std::size_t i = storage.size() - 7; i < storage.size(); ++i) out.emplace_back(storage[i]);
  return out;
}

}  // namespace detail

/// The class table, indexed by class id.
inline const std::vector<SignClass>& sign_classes() {
  static const std::vector<SignClass> classes = [] {
    using S = Shape;
    std::vector<SignClass> c;
    auto speed = [&](std::string_view name, std::string_view digits) {
      c.push_back({name, S::Circle, kRed, kWhite, kBlack, detail::number_glyph(digits), digits.size() > 2 ? 1.05 : 0.95});
    };
    speed("speed_20", "20");
    speed("speed_30", "30");
    speed("speed_50", "50");
    speed("speed_60", "60");
    speed("speed_70", "70");
    speed("speed_80", "80");
    c.push_back({"end_speed_80", S::Circle, kGray, kWhite, kGray, detail::number_glyph("80"), 0.95, 0.0, true});
    speed("speed_100", "100");
    speed("speed_120", "120");
    c.push_back({"no_passing", S::Circle, kRed, kWhite, kBlack,
                 {".......", "##...rr", "##...rr", "##...rr", "##...rr", "##...rr", "......."}, 0.9});
    c.push_back({"no_passing_trucks", S::Circle, kRed, kWhite, kBlack,
                 {".......", "###..rr", "###..rr", "###..rr", "###..rr", "#.#..rr", "......."}, 0.9});
    c.push_back({"right_of_way", S::TriangleUp, kRed, kWhite, kBlack,
                 {"...#...", "...#...", "#######", "...#...", "...#...", "...#..."}, 0.75, 0.2});
    c.push_back({"priority_road", S::Diamond, kWhite, kYellow, kYellow, {}, 0.0});
    c.push_back({"yield", S::TriangleDown, kRed, kWhite, kWhite, {}, 0.0});
    c.push_back({"stop", S::Octagon, kWhite, kRed, kWhite,
                 {".........", ".........", "#########", "#########", ".........", "........."}, 1.1});
    c.push_back({"no_vehicles", S::Circle, kRed, kWhite, kWhite, {}, 0.0});
    c.push_back({"no_trucks", S::Circle, kRed, kWhite, kBlack,
                 {".......", ".......", "#####..", "#######", "#.#..#.", "......."}, 0.9});
    c.push_back({"no_entry", S::Circle, kRed, kRed, kWhite,
                 {".......", ".......", "#######", "#######", ".......", "......."}, 1.3});
    auto danger = [&](std::string_view name, std::vector<std::string_view> glyph) {
      c.push_back({name, S::TriangleUp, kRed, kWhite, kBlack, std::move(glyph), 0.75, 0.2});
    };
    danger("general_caution", {"...#...", "...#...", "...#...", "...#...", ".......", "...#..."});
    danger("curve_left", {"....#..", "...#...", "..#....", "..#....", "..#....", "..#...."});
    danger("curve_right", {"..#....", "...#...", "....#..", "....#..", "....#..", "....#.."});
    danger("double_curve", {"...##..", "..#....", "...#...", "....#..", "...#...", "..#...."});
    danger("bumpy_road", {".......", ".......", ".......", "..#.#..", ".#.#.#.", "#######"});
    danger("slippery_road", {"..##...", "..##...", ".......", "#..#..#", ".#..#..", "#..#..#"});
    danger("road_narrows_right", {"..#.#..", "..#.#..", "..#..#.", "..#..#.", "..#.#..", "..#.#.."});
    danger("road_work", {"...#...", "..###..", ".#.#...", "...#...", "..#.#..", "######."});
    danger("traffic_signals", {"...r...", ".......", "...y...", ".......", "...g...", "......."});
    danger("pedestrians", {"...#...", "..###..", ".#.#.#.", "...#...", "..#.#..", ".#...#."});
    danger("children_crossing", {".#...#.", "###.###", ".#...#.", ".#...#.", "#.#.#.#", "......."});
    danger("bicycles", {"...#...", "..##...", ".......", "##...##", "#.#.#.#", "##...##"});
    danger("ice_snow", {"#..#..#", ".#.#.#.", "..###..", "#######", "..###..", ".#.#.#."});
    danger("wild_animals", {"#......", "##.....", ".######", ".######", ".#...#.", ".#...#."});
    c.push_back({"end_all_limits", S::Circle, kGray, kWhite, kGray, {}, 0.0, 0.0, true});
    auto blue = [&](std::string_view name, std::vector<std::string_view> glyph) {
      c.push_back({name, S::Circle, kBlue, kBlue, kWhite, std::move(glyph), 1.0});
    };
    blue("turn_right_ahead", {".......", "....#..", "#######", "#...#..", "#......", "#......"});
    blue("turn_left_ahead", {".......", "..#....", "#######", "..#...#", "......#", "......#"});
    blue("ahead_only", {"...#...", "..###..", ".#.#.#.", "...#...", "...#...", "...#..."});
    blue("straight_or_right", {"...#...", "..###..", "...#.#.", "...####", "...#.#.", "...#..."});
    blue("straight_or_left", {"...#...", "..###..", ".#.#...", "####...", ".#.#...", "...#..."});
    blue("keep_right", {".......", "#......", ".#.....", "..#..#.", "...#.#.", "....##."});
    blue("keep_left", {".......", "......#", ".....#.", ".#..#..", ".#.#...", ".##...."});
    blue("roundabout", {"..###..", ".#...#.", "#.....#", "#.....#", ".#...#.", "..#.#.."});
    c.push_back({"end_no_passing", S::Circle, kGray, kWhite, kGray,
                 {".......", "##...##", "##...##", "##...##", "##...##", "##...##", "......."}, 0.9, 0.0, true});
    c.push_back({"end_no_passing_trucks", S::Circle, kGray, kWhite, kGray,
                 {".......", "###..##", "###..##", "###..##", "###..##", "#.#..##", "......."}, 0.9, 0.0, true});
    return c;
  }();
  return classes;
}

// ---------------------------------------------------------------------------

/// Geometry and photometry shared by every frame of one sign instance.
struct TrackStyle {
  double radius = 0.40;  // relative to image side
  double cx = 0.5, cy = 0.5;
  double rotation = 0.0;  // radians
  double squeeze = 1.0;   // horizontal perspective squeeze
  double gain = 1.0;
  double blur_sigma = 0.0;  // camera defocus, output pixels
  double source_scale = 1.0;  // capture resolution relative to the output; < 1 is upscaled
  std::array<double, 3> cast{0, 0, 0};
  std::array<double, 3> bg_top{}, bg_bottom{};
  struct Blob {
    double x0, y0, x1, y1;
    std::array<double, 3> color;
  };
  std::vector<Blob> clutter;
  struct Line {
    double x0, y0, x1, y1, width;
    std::array<double, 3> color;
    bool front;  // drawn over the sign
  };
  std::vector<Line> lines;
};

struct SynthOptions {
  int resolution = kDefaultAuditResolution;
  int supersample = 4;
  int tracks_per_class = 40;
  int frames_per_track = 5;
  double noise_sigma = 0.03;
  std::uint64_t seed = 0;
};

namespace detail {

inline bool inside_shape(Shape shape, double u, double v, double scale) {
  u /= scale;
  v /= scale;
  switch (shape) {
    case Shape::Circle: return u * u + v * v <= 1.0;
    case Shape::Diamond: return std::abs(u) + std::abs(v) <= 1.0;
    case Shape::Octagon: {
      const double a = std::abs(u), b = std::abs(v);
      return a <= 0.92 && b <= 0.92 && a + b <= 1.30;
    }
    case Shape::TriangleUp:
    case Shape::TriangleDown: {
      const double vv = shape == Shape::TriangleUp ? v : -v;
      // Equilateral triangle, apex at vv = -1, base at vv = 0.6.
      if (vv > 0.6 || vv < -1.0) return false;
      const double half = (vv + 1.0) / 1.6 * 0.92;
      return std::abs(u) <= half;
    }
  }
  return false;
}

inline Rgb glyph_pixel(const SignClass& cls, double u, double v, bool& hit) {
  hit = false;
  if (cls.glyph.empty()) return {};
  const int rows = static_cast<int>(cls.glyph.size());
  int cols = 0;
  for (auto r : cls.glyph) cols = std::max(cols, static_cast<int>(r.size()));
  const double side = cls.glyph_scale;
  const double cell = side / std::max(rows, cols);
  const double gx = (u + cols * cell / 2) / cell;
  const double gy = (v - cls.glyph_dy + rows * cell / 2) / cell;
  if (gx < 0 || gy < 0 || gx >= cols || gy >= rows) return {};
  const auto row = cls.glyph[static_cast<std::size_t>(gy)];
  const auto col = static_cast<std::size_t>(gx);
  if (col >= row.size()) return {};
  hit = true;
  switch (row[col]) {
    case '#': return cls.glyph_color;
    case 'r': return kRed;
    case 'y': return kYellow;
    case 'g': return kGreen;
    case 'w': return kWhite;
    default: hit = false; return {};
  }
}

/// Colour of the sign at sign-local coordinates (unit radius), or false when outside.
inline bool sign_pixel(const SignClass& cls, double u, double v, Rgb& out) {
  if (!inside_shape(cls.shape, u, v, 1.0)) return false;
  const bool tri = cls.shape == Shape::TriangleUp || cls.shape == Shape::TriangleDown;
  const double inner = tri ? 0.62 : 0.78;
  if (!inside_shape(cls.shape, u, v, inner)) {
    out = cls.rim;
    return true;
  }
  out = cls.fill;
  if (cls.slash) {
    const double d = (u + v) / std::sqrt(2.0);
    for (double off : {-0.18, 0.0, 0.18})
      if (std::abs(d - off) < 0.045) out = cls.glyph_color;
  }
  bool hit = false;
  Rgb g = glyph_pixel(cls, u, v, hit);
  if (hit) out = g;
  return true;
}

inline bool near_segment(double x, double y, const TrackStyle::Line& l) {
  const double vx = l.x1 - l.x0, vy = l.y1 - l.y0;
  const double t = std::clamp(((x - l.x0) * vx + (y - l.y0) * vy) / (vx * vx + vy * vy), 0.0, 1.0);
  const double ex = l.x0 + t * vx - x, ey = l.y0 + t * vy - y;
  return ex * ex + ey * ey <= 0.25 * l.width * l.width;
}

/// Separable Gaussian with replicated borders; sigma <= 0 is the identity.
inline Image gaussian_blur(const Image& img, double sigma) {
  if (sigma <= 0.0) return img;
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
  double sum = 0.0;
  for (int d = -r; d <= r; ++d) sum += k[d + r] = std::exp(-0.5 * d * d / (sigma * sigma));
  for (auto& w : k) w /= sum;
  auto pass = [&](const Image& src, bool horizontal) {
    Image dst(src.height, src.width, src.channels);
    for (int y = 0; y < src.height; ++y)
      for (int x = 0; x < src.width; ++x)
        for (int c = 0; c < src.channels; ++c) {
          double acc = 0.0;
          for (int d = -r; d <= r; ++d) {
            const int yy = horizontal ? y : std::clamp(y + d, 0, src.height - 1);
            const int xx = horizontal ? std::clamp(x + d, 0, src.width - 1) : x;
            acc += k[d + r] * src.at(yy, xx, c);
          }
          dst.at(y, x, c) = static_cast<float>(acc);
        }
    return dst;
  };
  return pass(pass(img, true), false);
}

}  // namespace detail

inline TrackStyle random_track_style(Rng& rng) {
  TrackStyle s;
  s.radius = uniform(rng, 0.36, 0.44);
  s.cx = 0.5 + uniform(rng, -0.04, 0.04);
  s.cy = 0.5 + uniform(rng, -0.04, 0.04);
  s.rotation = uniform(rng, -0.12, 0.12);
  s.squeeze = uniform(rng, 0.88, 1.0);
  s.gain = uniform(rng, 0.55, 1.2);
  s.blur_sigma = uniform(rng, 0.0, 0.8);
  s.source_scale = uniform(rng, 0.45, 1.0);
  for (auto& c : s.cast) c = uniform(rng, -0.06, 0.06);
  for (int c = 0; c < 3; ++c) {
    s.bg_top[c] = uniform(rng, 0.1, 0.9);
    s.bg_bottom[c] = std::clamp(s.bg_top[c] + uniform(rng, -0.4, 0.2), 0.0, 1.0);
  }
  const auto blobs = 12 + static_cast<int>(uniform_index(rng, 14));
  for (int b = 0; b < blobs; ++b) {
    TrackStyle::Blob blob{};
    blob.x0 = uniform(rng, -0.1, 0.95);
    blob.y0 = uniform(rng, -0.1, 0.95);
    blob.x1 = blob.x0 + uniform(rng, 0.06, 0.35);
    blob.y1 = blob.y0 + uniform(rng, 0.06, 0.35);
    for (auto& c : blob.color) c = uniform(rng, 0.05, 0.95);
    s.clutter.push_back(blob);
  }
  const auto nlines = static_cast<int>(uniform_index(rng, 4));
  for (int l = 0; l < nlines; ++l) {
    TrackStyle::Line line{};
    line.x0 = uniform(rng, 0.0, 1.0);
    line.y0 = uniform(rng, 0.0, 1.0);
    const double a = uniform(rng, 0.0, 3.14159265358979323846), len = uniform(rng, 0.1, 0.4);
    line.x1 = line.x0 + len * std::cos(a);
    line.y1 = line.y0 + len * std::sin(a);
    line.width = uniform(rng, 0.01, 0.03);
    const double g = uniform(rng, 0.0, 1.0);
    line.color = {g, g, g};
    line.front = uniform01(rng) < 0.5;
    s.lines.push_back(line);
  }
  return s;
}

/// Renders frame `frame` of a track: the sign grows as the camera approaches.
inline Image render_sign(int class_id, const TrackStyle& style, int frame, Rng& frame_rng, const SynthOptions& opt) {
  const SignClass& cls = sign_classes().at(static_cast<std::size_t>(class_id));
  const int big = opt.resolution * opt.supersample;
  const double radius = style.radius * (1.0 + 0.03 * frame);
  const double jx = uniform(frame_rng, -0.01, 0.01), jy = uniform(frame_rng, -0.01, 0.01);
  const double gain = style.gain * uniform(frame_rng, 0.97, 1.03);
  const double cr = std::cos(style.rotation), sr = std::sin(style.rotation);

  Image hi(big, big, 3);
  for (int py = 0; py < big; ++py) {
    const double y = (py + 0.5) / big;
    for (int px = 0; px < big; ++px) {
      const double x = (px + 0.5) / big;
      std::array<double, 3> col{};
      for (int c = 0; c < 3; ++c) col[c] = style.bg_top[c] + (style.bg_bottom[c] - style.bg_top[c]) * y;
      for (const auto& b : style.clutter)
        if (x >= b.x0 && x < b.x1 && y >= b.y0 && y < b.y1) col = b.color;
      const double dx = (x - style.cx - jx) / radius, dy = (y - style.cy - jy) / radius;
      const double u = (cr * dx + sr * dy) / style.squeeze, v = -sr * dx + cr * dy;
      for (const auto& l : style.lines)
        if (!l.front && detail::near_segment(x, y, l)) col = l.color;
      Rgb sp;
      if (detail::sign_pixel(cls, u, v, sp)) col = {sp.r, sp.g, sp.b};
      for (const auto& l : style.lines)
        if (l.front && detail::near_segment(x, y, l)) col = l.color;
      for (int c = 0; c < 3; ++c) hi.at(py, px, c) = static_cast<float>(col[c] * gain + style.cast[c]);
    }
  }
  const double scale = std::min(1.0, style.source_scale * (1.0 + 0.1 * frame));
  const int captured = std::max(8, static_cast<int>(std::lround(opt.resolution * scale)));
  Image img = resize_area(hi, captured, captured);
  if (captured != opt.resolution) img = resize_bilinear(img, opt.resolution, opt.resolution);
  img = detail::gaussian_blur(img, style.blur_sigma);
  for (auto& v : img.data) v += static_cast<float>(opt.noise_sigma * normal(frame_rng));
  clamp_unit(img);
  // 8-bit quantisation, as if read back from an image file.
  for (auto& v : img.data) v = static_cast<float>(std::lround(v * 255.0f)) / 255.0f;
  return img;
}

inline std::string track_name(int class_id, int track) {
  return "c" + std::to_string(class_id) + "_t" + std::to_string(track);
}

/// Generates tracks_per_class tracks per class (in `classes`), each with
/// frames_per_track frames. Class c, track t uses its own derived stream, so
/// changing the corpus size never perturbs existing tracks.
inline std::vector<LabeledImage> generate(const SynthOptions& opt, int classes = kNumClasses) {
  require(classes > 0 && classes <= kNumClasses, ErrorKind::Validation, "class count must be in [1, 43]");
  require(opt.tracks_per_class > 0 && opt.frames_per_track > 0, ErrorKind::Validation,
          "tracks and frames per class must be positive");
  const std::size_t total = static_cast<std::size_t>(classes) * opt.tracks_per_class * opt.frames_per_track;
  std::vector<LabeledImage> items(total);
  const std::size_t tracks = static_cast<std::size_t>(classes) * opt.tracks_per_class;
  parallel_for(
      tracks, [] { return 0; },
      [&](std::size_t t, int&) {
        const int cls = static_cast<int>(t / opt.tracks_per_class);
        const int track = static_cast<int>(t % opt.tracks_per_class);
        Rng style_rng(derive_seed(opt.seed, t * 2));
        const TrackStyle style = random_track_style(style_rng);
        Rng frame_rng(derive_seed(opt.seed, t * 2 + 1));
        for (int f = 0; f < opt.frames_per_track; ++f) {
          const std::string name = std::to_string(cls) + "/" + track_name(cls, track) + "_f" + std::to_string(f) + ".png";
          items[t * opt.frames_per_track + f] =
              make_labeled(render_sign(cls, style, f, frame_rng, opt), cls, track_name(cls, track), name);
        }
      });
  return items;
}

/// Writes generated items as `<root>/<class>/<track>_f<frame>.png` plus manifest.csv.
inline void write_dataset(const fs::path& root, const std::vector<LabeledImage>& items) {
  std::vector<ManifestEntry> rows;
  for (const auto& item : items) {
    fs::create_directories((root / item.source_name).parent_path());
    rows.push_back({item.source_name, item.label, item.track_id});
  }
  parallel_for(
      items.size(), [] { return 0; },
      [&](std::size_t i, int&) { write_image(root / items[i].source_name, items[i].pixels); });
  write_file_atomic(root / "manifest.csv", format_manifest(rows));
}

}  // namespace aiaudit::synth
