#pragma once

#include <cmath>
#include <string>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "aiaudit/errors.hpp"
#include "aiaudit/io.hpp"
#include "aiaudit/tensor.hpp"

namespace aiaudit {

/// Decodes a PNG/PPM/JPEG file into an RGB image scaled to [0, 1].
inline Image read_image(const fs::path& path) {
  cv::Mat raw;
  try {
    raw = cv::imread(path.string(), cv::IMREAD_COLOR | cv::IMREAD_ANYDEPTH);
  } catch (const cv::Exception& e) {
    fail(ErrorKind::Load, "cannot decode image " + path.string() + ": " + e.what());
  }
  require(!raw.empty(), ErrorKind::Load, "cannot decode image " + path.string());
  const double scale = raw.depth() == CV_16U ? 1.0 / 65535.0 : 1.0 / 255.0;
  cv::Mat bgr;
  raw.convertTo(bgr, CV_32FC3, scale);
  Image img(bgr.rows, bgr.cols, 3);
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* row = bgr.ptr<cv::Vec3f>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      img.at(y, x, 0) = row[x][2];
      img.at(y, x, 1) = row[x][1];
      img.at(y, x, 2) = row[x][0];
    }
  }
  clamp_unit(img);
  return img;
}

inline std::uint8_t to_byte(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

/// Encodes an RGB (3 channel) or grayscale (1 channel) tensor; format from the extension.
inline void write_image(const fs::path& path, const Tensor3& img) {
  require(img.channels == 1 || img.channels == 3, ErrorKind::Contract, "write_image: 1 or 3 channels");
  cv::Mat mat(img.height, img.width, img.channels == 3 ? CV_8UC3 : CV_8UC1);
  for (int y = 0; y < img.height; ++y) {
    auto* row = mat.ptr<std::uint8_t>(y);
    for (int x = 0; x < img.width; ++x) {
      if (img.channels == 3) {
        row[3 * x + 0] = to_byte(img.at(y, x, 2));
        row[3 * x + 1] = to_byte(img.at(y, x, 1));
        row[3 * x + 2] = to_byte(img.at(y, x, 0));
      } else {
        row[x] = to_byte(img.at(y, x, 0));
      }
    }
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::vector<std::uint8_t> buffer;
  require(cv::imencode(path.extension().string(), mat, buffer), ErrorKind::Io,
          "cannot encode image " + path.string());
  write_file_atomic(path, std::string_view(reinterpret_cast<const char*>(buffer.data()), buffer.size()));
}

}  // namespace aiaudit
