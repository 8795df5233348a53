#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "aiaudit/dataset.hpp"
#include "aiaudit/errors.hpp"
#include "aiaudit/image_io.hpp"
#include "aiaudit/io.hpp"
#include "aiaudit/model.hpp"
#include "aiaudit/parallel.hpp"
#include "aiaudit/rng.hpp"
#include "aiaudit/tensor.hpp"

namespace aiaudit {

/// Nonnegative relevance map at input resolution, normalised to max 1 unless degenerate.
struct SaliencyMap {
  Tensor3 values;  // H x W x 1
  std::string source_layer;
  int class_id = 0;
  bool degenerate = false;

  int height() const { return values.height; }
  int width() const { return values.width; }
  float at(int y, int x) const { return values.at(y, x, 0); }
};

/// Gradient-weighted class activation map for `class_id` at `layer`.
inline SaliencyMap grad_cam(ClassifierAdapter& model, const Image& x, int class_id, const std::string& layer) {
  const LayerProbe probe = layer_activations_and_grads(model, x, class_id, layer);
  const Tensor3& a = probe.activation;
  const Tensor3& g = probe.gradient;
  require(a.same_shape(g), ErrorKind::Contract, "activation and gradient shapes differ at " + layer);

  const int cells = a.height * a.width;
  std::vector<double> alpha(static_cast<std::size_t>(a.channels), 0.0);
  for (int y = 0; y < a.height; ++y)
    for (int xx = 0; xx < a.width; ++xx)
      for (int k = 0; k < a.channels; ++k) alpha[k] += g.at(y, xx, k);
  for (auto& v : alpha) v /= cells;

  Tensor3 raw(a.height, a.width, 1);
  for (int y = 0; y < a.height; ++y)
    for (int xx = 0; xx < a.width; ++xx) {
      double s = 0.0;
      for (int k = 0; k < a.channels; ++k) s += alpha[k] * a.at(y, xx, k);
      raw.at(y, xx, 0) = static_cast<float>(std::max(s, 0.0));
    }

  SaliencyMap map;
  map.source_layer = layer;
  map.class_id = class_id;
  map.values = resize_bilinear(raw, x.height, x.width);
  const float peak = *std::max_element(map.values.data.begin(), map.values.data.end());
  if (peak <= 0.0f) {
    std::fill(map.values.data.begin(), map.values.data.end(), 0.0f);
    map.degenerate = true;
  } else {
    for (auto& v : map.values.data) v /= peak;
  }
  return map;
}

struct CenterBox {
  int top = 0, left = 0, height = 0, width = 0;
};

/// Centered box with sides ceil(fraction * side), offset floor((side - box) / 2).
inline CenterBox center_box(int height, int width, double region_fraction) {
  require(region_fraction > 0 && region_fraction <= 1, ErrorKind::Validation, "region_fraction must be in (0, 1]");
  const int bh = std::min(height, static_cast<int>(std::ceil(region_fraction * height - 1e-12)));
  const int bw = std::min(width, static_cast<int>(std::ceil(region_fraction * width - 1e-12)));
  return {(height - bh) / 2, (width - bw) / 2, bh, bw};
}

/// Share of the saliency mass inside the centered box.
inline double center_mass_fraction(const SaliencyMap& map, double region_fraction) {
  const CenterBox box = center_box(map.height(), map.width(), region_fraction);
  double total = 0.0, inside = 0.0;
  for (int y = 0; y < map.height(); ++y)
    for (int x = 0; x < map.width(); ++x) {
      const double v = map.at(y, x);
      total += v;
      if (y >= box.top && y < box.top + box.height && x >= box.left && x < box.left + box.width) inside += v;
    }
  require(!map.degenerate && total > 0.0, ErrorKind::DegenerateEvidence, "saliency map carries no mass");
  return inside / total;
}

struct CenterCheckParams {
  double region_fraction = 0.5;
  double mass_threshold = 0.5;
  double per_class_pass_rate = 0.8;
  int samples_per_class = 60;
  std::uint64_t seed = 0;

  void validate() const {
    auto unit = [](double v) { return v > 0 && v <= 1; };
    require(unit(region_fraction), ErrorKind::Validation, "region_fraction must be in (0, 1]");
    require(unit(mass_threshold), ErrorKind::Validation, "mass_threshold must be in (0, 1]");
    require(unit(per_class_pass_rate), ErrorKind::Validation, "per_class_pass_rate must be in (0, 1]");
    require(samples_per_class > 0, ErrorKind::Validation, "samples_per_class must be positive");
  }
};

inline Json to_json(const CenterCheckParams& p) {
  return {{"region_fraction", p.region_fraction},
          {"mass_threshold", p.mass_threshold},
          {"per_class_pass_rate", p.per_class_pass_rate},
          {"samples_per_class", p.samples_per_class},
          {"seed", p.seed}};
}

inline CenterCheckParams center_check_params_from_json(const Json& j, CenterCheckParams base = {}) {
  require(j.is_object(), ErrorKind::Validation, "center-check parameters must be an object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "region_fraction") base.region_fraction = v.get<double>();
      else if (key == "mass_threshold") base.mass_threshold = v.get<double>();
      else if (key == "per_class_pass_rate") base.per_class_pass_rate = v.get<double>();
      else if (key == "samples_per_class") base.samples_per_class = v.get<int>();
      else if (key == "seed") base.seed = v.get<std::uint64_t>();
      else fail(ErrorKind::Validation, "unknown center-check parameter '" + key + "'");
    }
  } catch (const Json::exception& e) {
    fail(ErrorKind::Validation, std::string("center-check parameters: ") + e.what());
  }
  base.validate();
  return base;
}

struct SampleOutcome {
  std::size_t item_index = 0;
  std::string source_name;
  int predicted = 0;
  double center_mass = 0.0;  // 0 for degenerate maps
  bool degenerate = false;
  bool passed = false;
};

struct ClassOutcome {
  int class_id = 0;
  std::size_t available = 0;
  bool resampled = false;  // fewer than samples_per_class items: drawn with replacement
  std::vector<SampleOutcome> samples;
  std::size_t passed = 0;
  double pass_rate = 0.0;
  bool pass = false;
};

struct ExplanationAudit {
  std::string layer;
  std::vector<ClassOutcome> classes;
  bool pass = false;
};

/// Seeded per-class sample: without replacement when enough items exist.
inline std::vector<std::size_t> sample_indices(const std::vector<std::size_t>& pool, int count, std::uint64_t seed,
                                               int class_id, bool& resampled) {
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(class_id)));
  std::vector<std::size_t> out;
  resampled = pool.size() < static_cast<std::size_t>(count);
  if (pool.empty()) return out;
  if (!resampled) {
    std::vector<std::size_t> shuffled = pool;
    shuffle(shuffled, rng);
    out.assign(shuffled.begin(), shuffled.begin() + count);
  } else {
    for (int i = 0; i < count; ++i) out.push_back(pool[uniform_index(rng, pool.size())]);
  }
  return out;
}

/// Center-focus check over every model class: explain the predicted class for
/// each sampled image; a class passes when enough of its samples concentrate
/// their saliency in the centered box.
inline ExplanationAudit explanation_audit(ClassifierAdapter& model, const DatasetSplit& split,
                                          const CenterCheckParams& params, const std::string& layer) {
  params.validate();
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < split.size(); ++i) by_class[split.items[i].label].push_back(i);

  ExplanationAudit audit;
  audit.layer = layer;
  std::vector<std::pair<std::size_t, std::size_t>> jobs;  // (class slot, sample slot)
  for (int c = 0; c < model.num_classes(); ++c) {
    ClassOutcome co;
    co.class_id = c;
    const auto& pool = by_class[c];
    co.available = pool.size();
    for (auto idx : sample_indices(pool, params.samples_per_class, params.seed, c, co.resampled)) {
      co.samples.push_back({idx, split.items[idx].source_name, 0, 0.0, false, false});
      jobs.emplace_back(audit.classes.size(), co.samples.size() - 1);
    }
    audit.classes.push_back(std::move(co));
  }

  parallel_for(
      jobs.size(), [&] { return model.clone(); },
      [&](std::size_t j, std::unique_ptr<ClassifierAdapter>& replica) {
        auto& s = audit.classes[jobs[j].first].samples[jobs[j].second];
        const Image& x = split.items[s.item_index].pixels;
        const auto probs = predict_probs(*replica, std::span(&x, 1));
        s.predicted = argmax(probs.row(0));
        const SaliencyMap map = grad_cam(*replica, x, s.predicted, layer);
        s.degenerate = map.degenerate;
        if (!map.degenerate) {
          s.center_mass = center_mass_fraction(map, params.region_fraction);
          s.passed = s.center_mass >= params.mass_threshold;
        }
      });

  audit.pass = true;
  for (auto& co : audit.classes) {
    for (const auto& s : co.samples) co.passed += s.passed ? 1 : 0;
    co.pass_rate = co.samples.empty() ? 0.0 : static_cast<double>(co.passed) / co.samples.size();
    co.pass = !co.samples.empty() && co.pass_rate >= params.per_class_pass_rate;
    audit.pass = audit.pass && co.pass;
  }
  return audit;
}

/// 8-bit grayscale export of a saliency map.
inline void export_saliency(const fs::path& path, const SaliencyMap& map) { write_image(path, map.values); }

}  // namespace aiaudit
