#pragma once

#include <cstdlib>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "aiaudit/aiaudit.hpp"

namespace testing {

using namespace aiaudit;

inline Image random_image(Rng& rng, int h, int w, int c = 3, double lo = 0.0, double hi = 1.0) {
  Image img(h, w, c);
  for (auto& v : img.data) v = static_cast<float>(uniform(rng, lo, hi));
  return img;
}

inline Image constant_image(int h, int w, float value, int c = 3) { return Image(h, w, c, value); }

/// Temporary directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    Rng rng(std::random_device{}());
    path_ = fs::temp_directory_path() / ("aiaudit_" + tag + "_" + std::to_string(uniform_index(rng, 1u << 30)));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& s) const { return path_ / s; }

 private:
  fs::path path_;
};

/// Two-class linear model: logits = W^T flatten(x) + b.
inline NetworkClassifier linear_two_class(ImageShape shape, const std::vector<float>& w0, const std::vector<float>& w1,
                                          float b0 = 0.0f, float b1 = 0.0f) {
  const int d = shape.height * shape.width * shape.channels;
  auto dense = std::make_unique<nn::Dense>("fc", d, 2, false);
  auto w = dense->weight();
  for (int i = 0; i < d; ++i) {
    w[static_cast<std::size_t>(i) * 2] = w0[i];
    w[static_cast<std::size_t>(i) * 2 + 1] = w1[i];
  }
  dense->bias()[0] = b0;
  dense->bias()[1] = b1;
  std::vector<std::unique_ptr<nn::Layer>> layers;
  layers.push_back(std::move(dense));
  return NetworkClassifier(nn::Network({shape.height, shape.width, shape.channels}, std::move(layers)));
}

/// Small randomly initialised reference-style CNN.
inline NetworkClassifier small_cnn(ImageShape shape, int classes, std::uint64_t seed,
                                   const std::string& kind = "small_cnn") {
  ArchitectureConfig arch{kind, 4, 6, 12};
  nn::Network net = reference_network(shape, classes, arch);
  Rng rng(seed);
  net.init(rng);
  return NetworkClassifier(std::move(net));
}

/// Adapter whose layer probe returns fixed tensors; predicts uniformly.
class FixedProbeClassifier final : public ClassifierAdapter {
 public:
  FixedProbeClassifier(int classes, ImageShape shape, Tensor3 activation, Tensor3 gradient)
      : classes_(classes), shape_(shape), activation_(std::move(activation)), gradient_(std::move(gradient)) {}
  int num_classes() const override { return classes_; }
  ImageShape input_shape() const override { return shape_; }
  std::vector<std::string> layer_names() const override { return {"conv"}; }
  Capabilities capabilities() const override { return {false, true}; }
  std::unique_ptr<ClassifierAdapter> clone() const override { return std::make_unique<FixedProbeClassifier>(*this); }
  ProbMatrix probs(std::span<const Image> batch) override {
    ProbMatrix p(static_cast<int>(batch.size()), classes_);
    std::fill(p.data.begin(), p.data.end(), 1.0 / classes_);
    return p;
  }
  LayerProbe probe(const Image&, int, std::string_view) override { return {activation_, gradient_}; }

 private:
  int classes_;
  ImageShape shape_;
  Tensor3 activation_, gradient_;
};

/// Items with one track per `frames` consecutive images, random content.
inline std::vector<LabeledImage> random_items(Rng& rng, int classes, int tracks_per_class, int frames, int res = 8) {
  std::vector<LabeledImage> items;
  for (int c = 0; c < classes; ++c)
    for (int t = 0; t < tracks_per_class; ++t)
      for (int f = 0; f < frames; ++f) {
        const std::string track = "c" + std::to_string(c) + "t" + std::to_string(t);
        items.push_back(make_labeled(random_image(rng, res, res), c, track, track + "f" + std::to_string(f) + ".png"));
      }
  return items;
}

}  // namespace testing

namespace testing {

/// A tiny on-disk world: synthetic 4-class dataset, a briefly trained checkpoint
/// and an audit configuration referencing both by relative path.
struct MiniWorld {
  TempDir dir{"world"};
  Json config;
  static constexpr int kClasses = 4;
  static constexpr int kResolution = 16;

  MiniWorld() {
    synth::SynthOptions opt;
    opt.resolution = kResolution;
    opt.tracks_per_class = 8;
    opt.frames_per_track = 3;
    opt.seed = 1;
    synth::write_dataset(dir / "data", synth::generate(opt, kClasses));

    const auto splits = split_dataset(load_image_folder(dir / "data", kClasses, {kResolution}), {0.6, 0.2, 0.2}, 0);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 16;
    cfg.architecture = {"small_cnn", 6, 8, 16};
    auto trained = train_reference(splits.train, splits.validation, kClasses, cfg);
    save_checkpoint(dir / "model.bin", trained.model,
                    Json{{"split_digests",
                          {{"train", split_digest(splits.train)},
                           {"validation", split_digest(splits.validation)},
                           {"test", split_digest(splits.test)}}}});

    config = {{"catalogue", "builtin:exemplar"},
              {"risk_level", "A"},
              {"min_grade", "++"},
              {"model_checkpoint", "model.bin"},
              {"dataset_root", "data"},
              {"split", {{"fractions", {0.6, 0.2, 0.2}}, {"seed", 0}}},
              {"requirements",
               {{{"id", 7},
                 {"specification", "rain"},
                 {"parameters", {{"accuracy_threshold", 0.9}}},
                 {"rationale", "worst-case accuracy under heavy rain"}},
                {{"id", 7},
                 {"specification", "pgd"},
                 {"parameters", {{"accuracy_threshold", 0.9}, {"iterations", 3}, {"max_samples", 10}}},
                 {"rationale", "worst-case accuracy under attack"}},
                {{"id", 30}, {"parameters", Json::object()}, {"rationale", "split independence"}},
                {{"id", 33},
                 {"parameters", {{"samples_per_class", 3}}},
                 {"rationale", "saliency concentrates on the sign"}}}}};
    write_config("audit.json", config);
  }

  fs::path write_config(const std::string& name, const Json& j) const {
    write_file_atomic(dir / name, dump_json(j));
    return dir / name;
  }
};

}  // namespace testing
