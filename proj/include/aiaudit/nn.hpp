#pragma once

// Minimal CPU convolutional network with exact backpropagation, used as the
// reference classifier and for the small analytic models in the test suites.
// Tensors are NHWC; convolutions are lowered to GEMM through im2col.

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "aiaudit/errors.hpp"
#include "aiaudit/io.hpp"
#include "aiaudit/rng.hpp"
#include "aiaudit/tensor.hpp"

namespace aiaudit::nn {

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

struct Tensor4 {
  int n = 0, h = 0, w = 0, c = 0;
  std::vector<float> data;

  Tensor4() = default;
  Tensor4(int n_, int h_, int w_, int c_) : n(n_), h(h_), w(w_), c(c_), data(static_cast<std::size_t>(n_) * h_ * w_ * c_) {}

  std::size_t per_item() const noexcept { return static_cast<std::size_t>(h) * w * c; }
  std::span<float> item(int i) { return {data.data() + i * per_item(), per_item()}; }
  std::span<const float> item(int i) const { return {data.data() + i * per_item(), per_item()}; }
  /// (n*h*w) x c view.
  MatrixMap rows() { return {data.data(), static_cast<Eigen::Index>(n) * h * w, c}; }
  ConstMatrixMap rows() const { return {data.data(), static_cast<Eigen::Index>(n) * h * w, c}; }
};

struct Shape3 {
  int h = 0, w = 0, c = 0;
  friend bool operator==(const Shape3&, const Shape3&) = default;
};

/// A named parameter tensor with its gradient accumulator.
struct ParamRef {
  std::string name;
  std::span<float> values;
  std::span<float> grads;
};

class Layer {
 public:
  virtual ~Layer() = default;
  virtual std::unique_ptr<Layer> clone() const = 0;
  virtual std::string_view type() const = 0;
  virtual const std::string& name() const { return name_; }
  /// Layers whose output can be probed for activations and gradients.
  virtual bool probeable() const { return false; }
  virtual Shape3 output_shape(Shape3 in) const = 0;
  /// Caches what backward() needs.
  virtual Tensor4 forward(const Tensor4& in) = 0;
  /// Returns the gradient w.r.t. the last forward input; accumulates parameter gradients.
  virtual Tensor4 backward(const Tensor4& grad_out) = 0;
  virtual std::vector<ParamRef> params() { return {}; }
  virtual void init(Rng&) {}
  virtual Json spec() const = 0;

 protected:
  std::string name_;
};

// ---------------------------------------------------------------------------

class Conv2d final : public Layer {
 public:
  Conv2d(std::string name, int in_channels, int out_channels, int kernel, bool relu)
      : in_(in_channels), out_(out_channels), k_(kernel), relu_(relu),
        weight_(static_cast<std::size_t>(kernel) * kernel * in_channels * out_channels, 0.0f),
        bias_(static_cast<std::size_t>(out_channels), 0.0f),
        weight_grad_(weight_.size(), 0.0f), bias_grad_(bias_.size(), 0.0f) {
    require(kernel % 2 == 1, ErrorKind::Contract, "conv kernel must be odd");
    name_ = std::move(name);
  }

  std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv2d>(*this); }
  std::string_view type() const override { return "conv"; }
  bool probeable() const override { return !name_.empty(); }
  Shape3 output_shape(Shape3 in) const override {
    require(in.c == in_, ErrorKind::Contract, "conv " + name_ + ": channel mismatch");
    return {in.h, in.w, out_};
  }

  /// Weight layout: row (ky * k + kx) * in + ci, column co.
  std::span<float> weight() { return weight_; }
  std::span<float> bias() { return bias_; }

  Tensor4 forward(const Tensor4& in) override {
    require(in.c == in_, ErrorKind::Contract, "conv " + name_ + ": channel mismatch");
    in_shape_ = {in.h, in.w, in.c};
    batch_ = in.n;
    im2col(in);
    Tensor4 out(in.n, in.h, in.w, out_);
    auto y = out.rows();
    y.noalias() = ConstMatrixMap(cols_.data(), cols_rows(), cols_cols()) *
                  ConstMatrixMap(weight_.data(), cols_cols(), out_);
    y.rowwise() += Eigen::Map<const Eigen::RowVectorXf>(bias_.data(), out_);
    if (relu_) {
      for (auto& v : out.data) v = std::max(v, 0.0f);
      output_ = out.data;
    }
    return out;
  }

  Tensor4 backward(const Tensor4& grad_out) override {
    Tensor4 g = grad_out;
    if (relu_) {
      for (std::size_t i = 0; i < g.data.size(); ++i)
        if (output_[i] <= 0.0f) g.data[i] = 0.0f;
    }
    ConstMatrixMap dy(g.data.data(), cols_rows(), out_);
    ConstMatrixMap cols(cols_.data(), cols_rows(), cols_cols());
    MatrixMap(weight_grad_.data(), cols_cols(), out_).noalias() += cols.transpose() * dy;
    Eigen::Map<Eigen::RowVectorXf>(bias_grad_.data(), out_) += dy.colwise().sum();
    RowMatrix dcols = dy * ConstMatrixMap(weight_.data(), cols_cols(), out_).transpose();
    return col2im(dcols);
  }

  std::vector<ParamRef> params() override {
    return {{name_ + ".weight", weight_, weight_grad_}, {name_ + ".bias", bias_, bias_grad_}};
  }

  void init(Rng& rng) override {
    const double bound = std::sqrt(6.0 / (k_ * k_ * in_));
    for (auto& w : weight_) w = static_cast<float>(uniform(rng, -bound, bound));
    std::fill(bias_.begin(), bias_.end(), 0.0f);
  }

  Json spec() const override {
    return {{"type", "conv"}, {"name", name_}, {"in", in_}, {"out", out_}, {"kernel", k_}, {"relu", relu_}};
  }

 private:
  Eigen::Index cols_rows() const { return static_cast<Eigen::Index>(batch_) * in_shape_.h * in_shape_.w; }
  Eigen::Index cols_cols() const { return static_cast<Eigen::Index>(k_) * k_ * in_; }

  void im2col(const Tensor4& in) {
    const int pad = k_ / 2;
    cols_.assign(static_cast<std::size_t>(cols_rows() * cols_cols()), 0.0f);
    std::size_t row = 0;
    for (int b = 0; b < in.n; ++b) {
      const float* src = in.data.data() + b * in.per_item();
      for (int y = 0; y < in.h; ++y) {
        for (int x = 0; x < in.w; ++x, ++row) {
          float* dst = cols_.data() + row * cols_cols();
          for (int ky = 0; ky < k_; ++ky) {
            const int sy = y + ky - pad;
            if (sy < 0 || sy >= in.h) continue;
            for (int kx = 0; kx < k_; ++kx) {
              const int sx = x + kx - pad;
              if (sx < 0 || sx >= in.w) continue;
              std::copy_n(src + (static_cast<std::size_t>(sy) * in.w + sx) * in_, in_,
                          dst + (ky * k_ + kx) * in_);
            }
          }
        }
      }
    }
  }

  Tensor4 col2im(const RowMatrix& dcols) const {
    const int pad = k_ / 2;
    Tensor4 dx(batch_, in_shape_.h, in_shape_.w, in_);
    std::size_t row = 0;
    for (int b = 0; b < batch_; ++b) {
      float* dst = dx.data.data() + b * dx.per_item();
      for (int y = 0; y < in_shape_.h; ++y) {
        for (int x = 0; x < in_shape_.w; ++x, ++row) {
          const float* src = dcols.data() + row * cols_cols();
          for (int ky = 0; ky < k_; ++ky) {
            const int sy = y + ky - pad;
            if (sy < 0 || sy >= in_shape_.h) continue;
            for (int kx = 0; kx < k_; ++kx) {
              const int sx = x + kx - pad;
              if (sx < 0 || sx >= in_shape_.w) continue;
              float* d = dst + (static_cast<std::size_t>(sy) * in_shape_.w + sx) * in_;
              const float* s = src + (ky * k_ + kx) * in_;
              for (int ci = 0; ci < in_; ++ci) d[ci] += s[ci];
            }
          }
        }
      }
    }
    return dx;
  }

  int in_, out_, k_;
  bool relu_;
  std::vector<float> weight_, bias_, weight_grad_, bias_grad_;
  Shape3 in_shape_{};
  int batch_ = 0;
  std::vector<float> cols_, output_;
};

// ---------------------------------------------------------------------------

class Relu final : public Layer {
 public:
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Relu>(*this); }
  std::string_view type() const override { return "relu"; }
  Shape3 output_shape(Shape3 in) const override { return in; }
  Tensor4 forward(const Tensor4& in) override {
    Tensor4 out = in;
    for (auto& v : out.data) v = std::max(v, 0.0f);
    output_ = out.data;
    return out;
  }
  Tensor4 backward(const Tensor4& grad_out) override {
    Tensor4 g = grad_out;
    for (std::size_t i = 0; i < g.data.size(); ++i)
      if (output_[i] <= 0.0f) g.data[i] = 0.0f;
    return g;
  }
  Json spec() const override { return {{"type", "relu"}}; }

 private:
  std::vector<float> output_;
};

/// 2x2 max pooling, stride 2 (odd trailing row/column dropped).
class MaxPool2 final : public Layer {
 public:
  std::unique_ptr<Layer> clone() const override { return std::make_unique<MaxPool2>(*this); }
  std::string_view type() const override { return "maxpool2"; }
  Shape3 output_shape(Shape3 in) const override { return {in.h / 2, in.w / 2, in.c}; }
  Tensor4 forward(const Tensor4& in) override {
    in_dims_ = {in.h, in.w, in.c};
    Tensor4 out(in.n, in.h / 2, in.w / 2, in.c);
    argmax_.assign(out.data.size(), 0);
    std::size_t o = 0;
    for (int b = 0; b < in.n; ++b)
      for (int y = 0; y < out.h; ++y)
        for (int x = 0; x < out.w; ++x)
          for (int c = 0; c < in.c; ++c, ++o) {
            std::size_t best = 0;
            float best_v = -std::numeric_limits<float>::infinity();
            for (int dy = 0; dy < 2; ++dy)
              for (int dx = 0; dx < 2; ++dx) {
                const std::size_t idx = b * in.per_item() + ((2 * y + dy) * static_cast<std::size_t>(in.w) + 2 * x + dx) * in.c + c;
                if (in.data[idx] > best_v) {
                  best_v = in.data[idx];
                  best = idx;
                }
              }
            out.data[o] = best_v;
            argmax_[o] = best;
          }
    return out;
  }
  Tensor4 backward(const Tensor4& grad_out) override {
    Tensor4 g(grad_out.n, in_dims_.h, in_dims_.w, in_dims_.c);
    for (std::size_t o = 0; o < grad_out.data.size(); ++o) g.data[argmax_[o]] += grad_out.data[o];
    return g;
  }
  Json spec() const override { return {{"type", "maxpool2"}}; }

 private:
  Shape3 in_dims_{};
  std::vector<std::size_t> argmax_;
};

/// Fully connected layer over the flattened (HWC) input; output is n x 1 x 1 x out.
class Dense final : public Layer {
 public:
  Dense(std::string name, int in_features, int out_features, bool relu)
      : in_(in_features), out_(out_features), relu_(relu),
        weight_(static_cast<std::size_t>(in_features) * out_features, 0.0f), bias_(static_cast<std::size_t>(out_features), 0.0f),
        weight_grad_(weight_.size(), 0.0f), bias_grad_(bias_.size(), 0.0f) {
    name_ = std::move(name);
  }

  std::unique_ptr<Layer> clone() const override { return std::make_unique<Dense>(*this); }
  std::string_view type() const override { return "dense"; }
  Shape3 output_shape(Shape3 in) const override {
    require(in.h * in.w * in.c == in_, ErrorKind::Contract, "dense " + name_ + ": input size mismatch");
    return {1, 1, out_};
  }

  /// Weight layout: row = input feature, column = output unit.
  std::span<float> weight() { return weight_; }
  std::span<float> bias() { return bias_; }

  Tensor4 forward(const Tensor4& in) override {
    require(static_cast<int>(in.per_item()) == in_, ErrorKind::Contract, "dense " + name_ + ": input size mismatch");
    input_ = in;
    Tensor4 out(in.n, 1, 1, out_);
    auto y = out.rows();
    y.noalias() = ConstMatrixMap(in.data.data(), in.n, in_) * ConstMatrixMap(weight_.data(), in_, out_);
    y.rowwise() += Eigen::Map<const Eigen::RowVectorXf>(bias_.data(), out_);
    if (relu_) {
      for (auto& v : out.data) v = std::max(v, 0.0f);
      output_ = out.data;
    }
    return out;
  }

  Tensor4 backward(const Tensor4& grad_out) override {
    Tensor4 g = grad_out;
    if (relu_) {
      for (std::size_t i = 0; i < g.data.size(); ++i)
        if (output_[i] <= 0.0f) g.data[i] = 0.0f;
    }
    ConstMatrixMap dy(g.data.data(), g.n, out_);
    ConstMatrixMap x(input_.data.data(), input_.n, in_);
    MatrixMap(weight_grad_.data(), in_, out_).noalias() += x.transpose() * dy;
    Eigen::Map<Eigen::RowVectorXf>(bias_grad_.data(), out_) += dy.colwise().sum();
    Tensor4 dx(input_.n, input_.h, input_.w, input_.c);
    MatrixMap(dx.data.data(), input_.n, in_).noalias() = dy * ConstMatrixMap(weight_.data(), in_, out_).transpose();
    return dx;
  }

  std::vector<ParamRef> params() override {
    return {{name_ + ".weight", weight_, weight_grad_}, {name_ + ".bias", bias_, bias_grad_}};
  }

  void init(Rng& rng) override {
    const double bound = std::sqrt(6.0 / in_);
    for (auto& w : weight_) w = static_cast<float>(uniform(rng, -bound, bound));
    std::fill(bias_.begin(), bias_.end(), 0.0f);
  }

  Json spec() const override {
    return {{"type", "dense"}, {"name", name_}, {"in", in_}, {"out", out_}, {"relu", relu_}};
  }

 private:
  int in_, out_;
  bool relu_;
  std::vector<float> weight_, bias_, weight_grad_, bias_grad_;
  Tensor4 input_;
  std::vector<float> output_;
};

// ---------------------------------------------------------------------------

/// out = relu?(x + body(x)); body must preserve the shape.
class Residual final : public Layer {
 public:
  Residual(std::string name, std::vector<std::unique_ptr<Layer>> body, bool relu) : body_(std::move(body)), relu_(relu) {
    name_ = std::move(name);
  }
  Residual(const Residual& other) : Layer(other), relu_(other.relu_), output_(other.output_) {
    for (const auto& l : other.body_) body_.push_back(l->clone());
  }

  std::unique_ptr<Layer> clone() const override { return std::make_unique<Residual>(*this); }
  std::string_view type() const override { return "residual"; }
  bool probeable() const override { return !name_.empty(); }
  Shape3 output_shape(Shape3 in) const override {
    Shape3 s = in;
    for (const auto& l : body_) s = l->output_shape(s);
    require(s == in, ErrorKind::Contract, "residual " + name_ + ": body must preserve shape");
    return in;
  }
  Tensor4 forward(const Tensor4& in) override {
    Tensor4 y = in;
    for (auto& l : body_) y = l->forward(y);
    for (std::size_t i = 0; i < y.data.size(); ++i) {
      y.data[i] += in.data[i];
      if (relu_) y.data[i] = std::max(y.data[i], 0.0f);
    }
    if (relu_) output_ = y.data;
    return y;
  }
  Tensor4 backward(const Tensor4& grad_out) override {
    Tensor4 g = grad_out;
    if (relu_) {
      for (std::size_t i = 0; i < g.data.size(); ++i)
        if (output_[i] <= 0.0f) g.data[i] = 0.0f;
    }
    Tensor4 skip = g;
    for (auto it = body_.rbegin(); it != body_.rend(); ++it) g = (*it)->backward(g);
    for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += skip.data[i];
    return g;
  }
  std::vector<ParamRef> params() override {
    std::vector<ParamRef> out;
    for (auto& l : body_)
      for (auto& p : l->params()) out.push_back(std::move(p));
    return out;
  }
  void init(Rng& rng) override {
    for (auto& l : body_) l->init(rng);
  }
  Json spec() const override {
    Json body = Json::array();
    for (const auto& l : body_) body.push_back(l->spec());
    return {{"type", "residual"}, {"name", name_}, {"relu", relu_}, {"body", body}};
  }

 private:
  std::vector<std::unique_ptr<Layer>> body_;
  bool relu_;
  std::vector<float> output_;
};

inline std::unique_ptr<Layer> layer_from_spec(const Json& j) {
  require(j.is_object() && j.contains("type"), ErrorKind::Format, "layer spec needs a 'type'");
  const auto type = j.at("type").get<std::string>();
  auto name = j.value("name", std::string{});
  if (type == "conv")
    return std::make_unique<Conv2d>(name, j.at("in").get<int>(), j.at("out").get<int>(), j.at("kernel").get<int>(),
                                    j.value("relu", true));
  if (type == "dense")
    return std::make_unique<Dense>(name, j.at("in").get<int>(), j.at("out").get<int>(), j.value("relu", false));
  if (type == "relu") return std::make_unique<Relu>();
  if (type == "maxpool2") return std::make_unique<MaxPool2>();
  if (type == "residual") {
    std::vector<std::unique_ptr<Layer>> body;
    for (const auto& b : j.at("body")) body.push_back(layer_from_spec(b));
    return std::make_unique<Residual>(name, std::move(body), j.value("relu", true));
  }
  fail(ErrorKind::Format, "unknown layer type '" + type + "'");
}

// ---------------------------------------------------------------------------

/// Softmax cross-entropy per row of an n x classes logit matrix.
struct SoftmaxLoss {
  std::vector<double> losses;   // per sample
  std::vector<double> probs;    // n x classes, row-major
  Tensor4 grad;                 // d(loss_i)/d(logits_i), n x 1 x 1 x classes
};

inline SoftmaxLoss softmax_cross_entropy(const Tensor4& logits, std::span<const int> labels) {
  const int n = logits.n, k = logits.c;
  SoftmaxLoss out;
  out.losses.resize(static_cast<std::size_t>(n));
  out.probs.resize(static_cast<std::size_t>(n) * k);
  out.grad = Tensor4(n, 1, 1, k);
  for (int i = 0; i < n; ++i) {
    const float* z = logits.data.data() + static_cast<std::size_t>(i) * k;
    double m = z[0];
    for (int j = 1; j < k; ++j) m = std::max<double>(m, z[j]);
    double sum = 0.0;
    for (int j = 0; j < k; ++j) sum += std::exp(z[j] - m);
    const double log_sum = m + std::log(sum);
    for (int j = 0; j < k; ++j) {
      const double p = std::exp(z[j] - log_sum);
      out.probs[static_cast<std::size_t>(i) * k + j] = p;
      out.grad.data[static_cast<std::size_t>(i) * k + j] = static_cast<float>(p - (j == labels[i] ? 1.0 : 0.0));
    }
    out.losses[static_cast<std::size_t>(i)] = log_sum - z[labels[i]];
  }
  return out;
}

/// Sequential network with a fixed input shape and affine input normalisation
/// (x - input_shift) * input_scale applied before the first layer.
class Network {
 public:
  Network() = default;
  Network(Shape3 input, std::vector<std::unique_ptr<Layer>> layers, float input_shift = 0.0f, float input_scale = 1.0f)
      : input_(input), layers_(std::move(layers)), shift_(input_shift), scale_(input_scale) {
    Shape3 s = input_;
    for (const auto& l : layers_) s = l->output_shape(s);
    require(s.h == 1 && s.w == 1 && s.c > 0, ErrorKind::Contract, "network must end in a vector of logits");
    classes_ = s.c;
  }
  Network(const Network& other)
      : input_(other.input_), shift_(other.shift_), scale_(other.scale_), classes_(other.classes_) {
    for (const auto& l : other.layers_) layers_.push_back(l->clone());
  }
  Network& operator=(const Network& other) {
    if (this != &other) {
      Network copy(other);
      *this = std::move(copy);
    }
    return *this;
  }
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  Shape3 input_shape() const { return input_; }
  int num_classes() const { return classes_; }
  float input_shift() const { return shift_; }
  float input_scale() const { return scale_; }
  std::size_t layer_count() const { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_[i]; }

  std::vector<std::string> probe_layers() const {
    std::vector<std::string> out;
    for (const auto& l : layers_)
      if (l->probeable()) out.push_back(l->name());
    return out;
  }

  std::optional<std::size_t> find_layer(std::string_view name) const {
    for (std::size_t i = 0; i < layers_.size(); ++i)
      if (layers_[i]->probeable() && layers_[i]->name() == name) return i;
    return std::nullopt;
  }

  Tensor4 normalize(std::span<const Image> batch) const {
    Tensor4 x(static_cast<int>(batch.size()), input_.h, input_.w, input_.c);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto& img = batch[i];
      require(img.height == input_.h && img.width == input_.w && img.channels == input_.c, ErrorKind::Contract,
              "input shape " + shape_string(shape_of(img)) + " does not match network input " +
                  shape_string({input_.h, input_.w, input_.c}));
      auto dst = x.item(static_cast<int>(i));
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = (img.data[j] - shift_) * scale_;
    }
    return x;
  }

  /// Forward pass; when `outputs` is given every layer's output is kept.
  Tensor4 forward(Tensor4 x, std::vector<Tensor4>* outputs = nullptr) {
    for (auto& l : layers_) {
      x = l->forward(x);
      if (outputs) outputs->push_back(x);
    }
    return x;
  }

  /// Backward from layer index `from` (exclusive end) down to `to` (inclusive start).
  Tensor4 backward(Tensor4 g, std::size_t from, std::size_t to) {
    for (std::size_t i = from; i-- > to;) g = layers_[i]->backward(g);
    return g;
  }
  Tensor4 backward(Tensor4 g) { return backward(std::move(g), layers_.size(), 0); }

  std::vector<ParamRef> params() {
    std::vector<ParamRef> out;
    for (auto& l : layers_)
      for (auto& p : l->params()) out.push_back(std::move(p));
    return out;
  }

  void zero_grad() {
    for (auto& p : params()) std::fill(p.grads.begin(), p.grads.end(), 0.0f);
  }

  void init(Rng& rng) {
    for (auto& l : layers_) l->init(rng);
  }

  Json spec() const {
    Json layers = Json::array();
    for (const auto& l : layers_) layers.push_back(l->spec());
    return {{"input", {input_.h, input_.w, input_.c}}, {"input_shift", shift_}, {"input_scale", scale_}, {"layers", layers}};
  }

  static Network from_spec(const Json& j) {
    try {
      const auto in = j.at("input");
      std::vector<std::unique_ptr<Layer>> layers;
      for (const auto& l : j.at("layers")) layers.push_back(layer_from_spec(l));
      return Network({in.at(0).get<int>(), in.at(1).get<int>(), in.at(2).get<int>()}, std::move(layers),
                     j.value("input_shift", 0.0f), j.value("input_scale", 1.0f));
    } catch (const Json::exception& e) {
      fail(ErrorKind::Format, std::string("network spec: ") + e.what());
    }
  }

 private:
  Shape3 input_{};
  std::vector<std::unique_ptr<Layer>> layers_;
  float shift_ = 0.0f;
  float scale_ = 1.0f;
  int classes_ = 0;
};

/// Adam over all network parameters.
class Adam {
 public:
  Adam(Network& net, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
    for (auto& p : net.params()) {
      m_.emplace_back(p.values.size(), 0.0f);
      v_.emplace_back(p.values.size(), 0.0f);
    }
  }

  void set_learning_rate(double lr) { lr_ = lr; }
  double learning_rate() const { return lr_; }

  void step(Network& net, double grad_scale) {
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, t_), c2 = 1.0 - std::pow(b2_, t_);
    auto ps = net.params();
    for (std::size_t k = 0; k < ps.size(); ++k) {
      auto& p = ps[k];
      for (std::size_t i = 0; i < p.values.size(); ++i) {
        const double g = p.grads[i] * grad_scale;
        m_[k][i] = static_cast<float>(b1_ * m_[k][i] + (1 - b1_) * g);
        v_[k][i] = static_cast<float>(b2_ * v_[k][i] + (1 - b2_) * g * g);
        p.values[i] -= static_cast<float>(lr_ * (m_[k][i] / c1) / (std::sqrt(v_[k][i] / c2) + eps_));
      }
    }
  }

 private:
  double lr_, b1_, b2_, eps_;
  long t_ = 0;
  std::vector<std::vector<float>> m_, v_;
};

}  // namespace aiaudit::nn
