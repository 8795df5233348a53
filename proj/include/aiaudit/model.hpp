#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <functional>
#include <memory>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aiaudit/dataset.hpp"
#include "aiaudit/digest.hpp"
#include "aiaudit/errors.hpp"
#include "aiaudit/io.hpp"
#include "aiaudit/nn.hpp"
#include "aiaudit/parallel.hpp"
#include "aiaudit/rng.hpp"
#include "aiaudit/tensor.hpp"

namespace aiaudit {

/// Row-major N x num_classes matrix of class probabilities.
struct ProbMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  ProbMatrix() = default;
  ProbMatrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}
  std::span<double> row(int i) { return {data.data() + static_cast<std::size_t>(i) * cols, static_cast<std::size_t>(cols)}; }
  std::span<const double> row(int i) const {
    return {data.data() + static_cast<std::size_t>(i) * cols, static_cast<std::size_t>(cols)};
  }
};

/// Argmax with ties broken towards the lowest class id.
inline int argmax(std::span<const double> row) {
  int best = 0;
  for (int j = 1; j < static_cast<int>(row.size()); ++j)
    if (row[j] > row[best]) best = j;
  return best;
}

struct Capabilities {
  bool gradients = false;
  bool activations = false;
};

struct LossGradients {
  std::vector<double> losses;  // cross-entropy per sample
  std::vector<Image> grads;    // d loss / d input, per sample
};

struct LayerProbe {
  Tensor3 activation;  // h x w x K
  Tensor3 gradient;    // d(class score) / d activation, same shape
};

/// Contract for the audited classifier. An instance is not thread-safe; use
/// clone() to obtain replicas for parallel evaluation.
class ClassifierAdapter {
 public:
  virtual ~ClassifierAdapter() = default;

  virtual int num_classes() const = 0;
  virtual ImageShape input_shape() const = 0;
  /// Probeable convolutional layers, shallow to deep.
  virtual std::vector<std::string> layer_names() const { return {}; }
  virtual Capabilities capabilities() const = 0;
  virtual std::unique_ptr<ClassifierAdapter> clone() const = 0;

  /// Implementations may assume validated input (see the free functions).
  virtual ProbMatrix probs(std::span<const Image> batch) = 0;

  virtual LossGradients loss_gradients(std::span<const Image>, std::span<const int>) {
    fail(ErrorKind::Capability, "model exposes no input gradients");
  }
  virtual LayerProbe probe(const Image&, int, std::string_view) {
    fail(ErrorKind::Capability, "model exposes no layer activations");
  }
};

namespace detail {

inline void check_batch(const ClassifierAdapter& model, std::span<const Image> batch) {
  const ImageShape expected = model.input_shape();
  for (const auto& img : batch) {
    require(shape_of(img) == expected, ErrorKind::Contract,
            "input shape " + shape_string(shape_of(img)) + " does not match model input " + shape_string(expected));
    require(in_unit_range(img.span()), ErrorKind::Contract, "input pixels outside [0,1]");
  }
}

inline void check_label(const ClassifierAdapter& model, int y) {
  require(y >= 0 && y < model.num_classes(), ErrorKind::Contract,
          "class id " + std::to_string(y) + " outside [0," + std::to_string(model.num_classes()) + ")");
}

}  // namespace detail

inline ProbMatrix predict_probs(ClassifierAdapter& model, std::span<const Image> batch) {
  detail::check_batch(model, batch);
  if (batch.empty()) return ProbMatrix(0, model.num_classes());
  return model.probs(batch);
}

inline LossGradients loss_and_input_gradients(ClassifierAdapter& model, std::span<const Image> batch,
                                              std::span<const int> labels) {
  require(model.capabilities().gradients, ErrorKind::Capability, "model exposes no input gradients");
  require(batch.size() == labels.size(), ErrorKind::Contract, "batch and label counts differ");
  detail::check_batch(model, batch);
  for (int y : labels) detail::check_label(model, y);
  if (batch.empty()) return {};
  return model.loss_gradients(batch, labels);
}

/// Gradient of the cross-entropy loss w.r.t. the input pixels.
inline Image input_gradient(ClassifierAdapter& model, const Image& x, int y) {
  const int label = y;
  auto lg = loss_and_input_gradients(model, std::span(&x, 1), std::span(&label, 1));
  return std::move(lg.grads.front());
}

inline LayerProbe layer_activations_and_grads(ClassifierAdapter& model, const Image& x, int y,
                                              std::string_view layer) {
  require(model.capabilities().activations, ErrorKind::Capability, "model exposes no layer activations");
  const auto names = model.layer_names();
  require(std::find(names.begin(), names.end(), layer) != names.end(), ErrorKind::Contract,
          "unknown layer '" + std::string(layer) + "'");
  detail::check_batch(model, std::span(&x, 1));
  detail::check_label(model, y);
  return model.probe(x, y, layer);
}

// ---------------------------------------------------------------------------

/// Gradient-free stub predicting the uniform distribution.
class UniformClassifier final : public ClassifierAdapter {
 public:
  UniformClassifier(int num_classes, ImageShape shape) : classes_(num_classes), shape_(shape) {}
  int num_classes() const override { return classes_; }
  ImageShape input_shape() const override { return shape_; }
  Capabilities capabilities() const override { return {}; }
  std::unique_ptr<ClassifierAdapter> clone() const override { return std::make_unique<UniformClassifier>(*this); }
  ProbMatrix probs(std::span<const Image> batch) override {
    ProbMatrix p(static_cast<int>(batch.size()), classes_);
    std::fill(p.data.begin(), p.data.end(), 1.0 / classes_);
    return p;
  }

 private:
  int classes_;
  ImageShape shape_;
};

/// Adapter over an nn::Network; exposes gradients and every probeable layer.
class NetworkClassifier final : public ClassifierAdapter {
 public:
  explicit NetworkClassifier(nn::Network net) : net_(std::move(net)) {}

  int num_classes() const override { return net_.num_classes(); }
  ImageShape input_shape() const override {
    auto s = net_.input_shape();
    return {s.h, s.w, s.c};
  }
  std::vector<std::string> layer_names() const override { return net_.probe_layers(); }
  Capabilities capabilities() const override { return {true, !net_.probe_layers().empty()}; }
  std::unique_ptr<ClassifierAdapter> clone() const override { return std::make_unique<NetworkClassifier>(*this); }

  nn::Network& network() { return net_; }
  const nn::Network& network() const { return net_; }

  ProbMatrix probs(std::span<const Image> batch) override {
    auto logits = net_.forward(net_.normalize(batch));
    ProbMatrix p(logits.n, logits.c);
    for (int i = 0; i < logits.n; ++i) {
      const float* z = logits.data.data() + static_cast<std::size_t>(i) * logits.c;
      double m = z[0];
      for (int j = 1; j < logits.c; ++j) m = std::max<double>(m, z[j]);
      double sum = 0.0;
      auto row = p.row(i);
      for (int j = 0; j < logits.c; ++j) sum += row[j] = std::exp(z[j] - m);
      for (auto& v : row) v /= sum;
    }
    return p;
  }

  LossGradients loss_gradients(std::span<const Image> batch, std::span<const int> labels) override {
    auto logits = net_.forward(net_.normalize(batch));
    auto sl = nn::softmax_cross_entropy(logits, labels);
    net_.zero_grad();
    auto g = net_.backward(sl.grad);
    LossGradients out;
    out.losses = std::move(sl.losses);
    const auto shape = input_shape();
    for (int i = 0; i < g.n; ++i) {
      Image gi(shape.height, shape.width, shape.channels);
      auto src = g.item(i);
      for (std::size_t j = 0; j < src.size(); ++j) gi.data[j] = src[j] * net_.input_scale();
      out.grads.push_back(std::move(gi));
    }
    return out;
  }

  LayerProbe probe(const Image& x, int y, std::string_view layer) override {
    auto idx = net_.find_layer(layer);
    require(idx.has_value(), ErrorKind::Contract, "unknown layer '" + std::string(layer) + "'");
    std::vector<nn::Tensor4> outputs;
    auto logits = net_.forward(net_.normalize(std::span(&x, 1)), &outputs);
    nn::Tensor4 g(1, 1, 1, logits.c);
    g.data[static_cast<std::size_t>(y)] = 1.0f;  // d(score_y)/d logits
    net_.zero_grad();
    auto ga = net_.backward(std::move(g), net_.layer_count(), *idx + 1);
    const auto& a = outputs[*idx];
    LayerProbe p;
    p.activation = Tensor3(a.h, a.w, a.c);
    p.activation.data = a.data;
    p.gradient = Tensor3(ga.h, ga.w, ga.c);
    p.gradient.data = std::move(ga.data);
    return p;
  }

 private:
  nn::Network net_;
};

// ---------------------------------------------------------------------------
// Reference architecture and training

struct ArchitectureConfig {
  std::string kind = "small_cnn";  // or "residual_cnn"
  int conv1_channels = 16;
  int conv2_channels = 32;
  int hidden_units = 128;
};

/// conv1 -> pool -> conv2 -> [residual block] -> pool -> fc1 -> fc2 (logits).
inline nn::Network reference_network(ImageShape input, int num_classes, const ArchitectureConfig& arch = {}) {
  require(arch.kind == "small_cnn" || arch.kind == "residual_cnn", ErrorKind::Validation,
          "unknown architecture '" + arch.kind + "'");
  require(input.height % 4 == 0 && input.width % 4 == 0, ErrorKind::Validation,
          "reference network needs input sides divisible by 4");
  std::vector<std::unique_ptr<nn::Layer>> layers;
  layers.push_back(std::make_unique<nn::Conv2d>("conv1", input.channels, arch.conv1_channels, 3, true));
  layers.push_back(std::make_unique<nn::MaxPool2>());
  layers.push_back(std::make_unique<nn::Conv2d>("conv2", arch.conv1_channels, arch.conv2_channels, 3, true));
  if (arch.kind == "residual_cnn") {
    std::vector<std::unique_ptr<nn::Layer>> body;
    body.push_back(std::make_unique<nn::Conv2d>("res3a", arch.conv2_channels, arch.conv2_channels, 3, true));
    body.push_back(std::make_unique<nn::Conv2d>("", arch.conv2_channels, arch.conv2_channels, 3, false));
    layers.push_back(std::make_unique<nn::Residual>("res3", std::move(body), true));
  }
  layers.push_back(std::make_unique<nn::MaxPool2>());
  const int flat = (input.height / 4) * (input.width / 4) * arch.conv2_channels;
  layers.push_back(std::make_unique<nn::Dense>("fc1", flat, arch.hidden_units, true));
  layers.push_back(std::make_unique<nn::Dense>("fc2", arch.hidden_units, num_classes, false));
  return nn::Network({input.height, input.width, input.channels}, std::move(layers), 0.5f, 2.0f);
}

struct TrainConfig {
  int epochs = 12;
  std::uint64_t seed = 0;
  double learning_rate = 1e-3;
  int batch_size = 32;
  ArchitectureConfig architecture;

  void validate() const {
    require(epochs > 0, ErrorKind::Validation, "epochs must be positive");
    require(learning_rate > 0, ErrorKind::Validation, "learning_rate must be positive");
    require(batch_size > 0, ErrorKind::Validation, "batch_size must be positive");
  }
};

inline Json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"seed", c.seed},
          {"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},
          {"architecture",
           {{"kind", c.architecture.kind},
            {"conv1_channels", c.architecture.conv1_channels},
            {"conv2_channels", c.architecture.conv2_channels},
            {"hidden_units", c.architecture.hidden_units}}}};
}

/// Reads the fields present in `j` over `base`; unknown keys are a validation error.
inline TrainConfig train_config_from_json(const Json& j, TrainConfig base = {}) {
  require(j.is_object(), ErrorKind::Validation, "train config must be an object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "epochs") base.epochs = value.get<int>();
      else if (key == "seed") base.seed = value.get<std::uint64_t>();
      else if (key == "learning_rate") base.learning_rate = value.get<double>();
      else if (key == "batch_size") base.batch_size = value.get<int>();
      else if (key == "architecture") {
        auto& a = base.architecture;
        a.kind = value.value("kind", a.kind);
        a.conv1_channels = value.value("conv1_channels", a.conv1_channels);
        a.conv2_channels = value.value("conv2_channels", a.conv2_channels);
        a.hidden_units = value.value("hidden_units", a.hidden_units);
      } else {
        fail(ErrorKind::Validation, "unknown train config field '" + key + "'");
      }
    }
  } catch (const Json::exception& e) {
    fail(ErrorKind::Validation, std::string("train config: ") + e.what());
  }
  base.validate();
  return base;
}

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double validation_accuracy = 0.0;
};

struct TrainResult {
  NetworkClassifier model;
  std::vector<EpochLog> history;
};

/// Sample-index-aware image transform (the index seeds per-sample randomness).
using ImageTransform = std::function<Image(const Image&, std::uint64_t sample_index)>;

inline double evaluate_accuracy(ClassifierAdapter& model, const DatasetSplit& split,
                                const ImageTransform& transform = {});

inline TrainResult train_reference(const DatasetSplit& train, const DatasetSplit& val, int num_classes,
                                   const TrainConfig& cfg, std::ostream* log = nullptr) {
  cfg.validate();
  require(!train.empty(), ErrorKind::Contract, "training split is empty");
  require(num_classes > 0, ErrorKind::Contract, "num_classes must be positive");
  validate_labels(train, num_classes);
  validate_labels(val, num_classes);
  const ImageShape shape = shape_of(train.items.front().pixels);

  Rng rng(cfg.seed);
  nn::Network net = reference_network(shape, num_classes, cfg.architecture);
  net.init(rng);
  nn::Adam opt(net, cfg.learning_rate);

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  TrainResult result{NetworkClassifier(nn::Network()), {}};
  std::vector<Image> batch;
  std::vector<int> labels;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // cosine decay over epochs
    opt.set_learning_rate(cfg.learning_rate * 0.5 * (1.0 + std::cos(3.14159265358979323846 * epoch / cfg.epochs)));
    shuffle(order, rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      batch.clear();
      labels.clear();
      for (std::size_t k = start; k < end; ++k) {
        batch.push_back(train.items[order[k]].pixels);
        labels.push_back(train.items[order[k]].label);
      }
      net.zero_grad();
      auto logits = net.forward(net.normalize(batch));
      auto sl = nn::softmax_cross_entropy(logits, labels);
      for (std::size_t i = 0; i < labels.size(); ++i) {
        loss_sum += sl.losses[i];
        std::span<const double> row(sl.probs.data() + i * num_classes, static_cast<std::size_t>(num_classes));
        if (argmax(row) == labels[i]) ++correct;
      }
      net.backward(sl.grad);
      opt.step(net, 1.0 / static_cast<double>(labels.size()));
    }
    EpochLog entry{epoch, loss_sum / train.size(), static_cast<double>(correct) / train.size(), 0.0};
    if (!val.empty()) {
      NetworkClassifier snapshot(net);
      entry.validation_accuracy = evaluate_accuracy(snapshot, val);
    }
    result.history.push_back(entry);
    if (log) {
      *log << "epoch " << epoch << " loss " << entry.train_loss << " train_acc " << entry.train_accuracy
           << " val_acc " << entry.validation_accuracy << "\n";
      log->flush();
    }
  }
  result.model = NetworkClassifier(std::move(net));
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation

inline constexpr std::size_t kEvalBatch = 128;

/// Fraction of items whose argmax prediction (lowest id on ties) equals the label.
inline double evaluate_accuracy(ClassifierAdapter& model, const DatasetSplit& split, const ImageTransform& transform) {
  require(!split.empty(), ErrorKind::Contract, "cannot evaluate accuracy on an empty split");
  const std::size_t chunks = (split.size() + kEvalBatch - 1) / kEvalBatch;
  std::vector<std::size_t> correct(chunks, 0);
  parallel_for(
      chunks, [&] { return model.clone(); },
      [&](std::size_t c, std::unique_ptr<ClassifierAdapter>& replica) {
        const std::size_t begin = c * kEvalBatch, end = std::min(split.size(), begin + kEvalBatch);
        std::vector<Image> batch;
        batch.reserve(end - begin);
        for (std::size_t i = begin; i < end; ++i)
          batch.push_back(transform ? transform(split.items[i].pixels, i) : split.items[i].pixels);
        auto p = predict_probs(*replica, batch);
        for (std::size_t i = begin; i < end; ++i)
          if (argmax(p.row(static_cast<int>(i - begin))) == split.items[i].label) ++correct[c];
      });
  std::size_t total = 0;
  for (auto n : correct) total += n;
  return static_cast<double>(total) / static_cast<double>(split.size());
}

// ---------------------------------------------------------------------------
// Checkpoints: `<path>` holds raw weights, `<path>.json` the metadata.

inline constexpr std::string_view kWeightsMagic = "AIAUDITW";
inline constexpr std::uint32_t kWeightsVersion = 1;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

struct Reader {
  std::string_view bytes;
  std::size_t pos = 0;
  std::string origin;

  void need(std::size_t n) const {
    require(pos + n <= bytes.size(), ErrorKind::Format, origin + ": truncated weights file");
  }
  std::uint64_t uint(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
    pos += static_cast<std::size_t>(width);
    return v;
  }
  std::string_view take(std::size_t n) {
    need(n);
    auto s = bytes.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace detail

inline std::string serialize_weights(nn::Network& net) {
  std::string out(kWeightsMagic);
  detail::put_u32(out, kWeightsVersion);
  auto params = net.params();
  detail::put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    detail::put_u32(out, static_cast<std::uint32_t>(p.name.size()));
    out += p.name;
    detail::put_u64(out, p.values.size());
    out.append(reinterpret_cast<const char*>(p.values.data()), p.values.size_bytes());
  }
  return out;
}

inline void deserialize_weights(nn::Network& net, std::string_view bytes, const std::string& origin) {
  detail::Reader r{bytes, 0, origin};
  require(r.take(kWeightsMagic.size()) == kWeightsMagic, ErrorKind::Format, origin + ": bad magic");
  require(r.uint(4) == kWeightsVersion, ErrorKind::Format, origin + ": unsupported weights version");
  auto params = net.params();
  require(r.uint(4) == params.size(), ErrorKind::Format, origin + ": parameter count mismatch");
  for (auto& p : params) {
    const auto name_len = static_cast<std::size_t>(r.uint(4));
    require(r.take(name_len) == p.name, ErrorKind::Format, origin + ": expected parameter " + p.name);
    require(r.uint(8) == p.values.size(), ErrorKind::Format, origin + ": size mismatch for " + p.name);
    auto raw = r.take(p.values.size_bytes());
    std::memcpy(p.values.data(), raw.data(), raw.size());
  }
  require(r.pos == bytes.size(), ErrorKind::Format, origin + ": trailing bytes");
}

struct Checkpoint {
  NetworkClassifier model{nn::Network()};
  Json metadata;
};

inline fs::path metadata_path(const fs::path& weights) {
  fs::path p = weights;
  p += ".json";
  return p;
}

/// Writes weights and metadata; the metadata gains `network`, `num_classes`,
/// `input_shape`, `layers` and `weights_sha256`.
inline void save_checkpoint(const fs::path& path, NetworkClassifier& model, Json metadata = Json::object()) {
  const std::string weights = serialize_weights(model.network());
  auto shape = model.input_shape();
  metadata["network"] = model.network().spec();
  metadata["num_classes"] = model.num_classes();
  metadata["input_shape"] = {shape.height, shape.width, shape.channels};
  metadata["layers"] = model.layer_names();
  metadata["weights_sha256"] = sha256_hex(weights);
  write_file_atomic(path, weights);
  write_file_atomic(metadata_path(path), dump_json(metadata));
}

inline Checkpoint load_checkpoint(const fs::path& path) {
  Checkpoint ck;
  ck.metadata = read_json_file(metadata_path(path));
  require(ck.metadata.contains("network"), ErrorKind::Format, metadata_path(path).string() + ": missing 'network'");
  auto net = nn::Network::from_spec(ck.metadata.at("network"));
  const std::string bytes = read_file(path);
  if (ck.metadata.contains("weights_sha256")) {
    require(ck.metadata.at("weights_sha256").get<std::string>() == sha256_hex(bytes), ErrorKind::Validation,
            path.string() + ": weights digest does not match metadata");
  }
  deserialize_weights(net, bytes, path.string());
  ck.model = NetworkClassifier(std::move(net));
  return ck;
}

/// SHA-256 over the weights bytes followed by the metadata bytes.
inline std::string checkpoint_digest(const fs::path& path) {
  return to_hex(Sha256().update(read_file(path)).update(read_file(metadata_path(path))).finish());
}

}  // namespace aiaudit
