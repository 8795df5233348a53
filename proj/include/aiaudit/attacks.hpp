#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "aiaudit/dataset.hpp"
#include "aiaudit/errors.hpp"
#include "aiaudit/io.hpp"
#include "aiaudit/model.hpp"
#include "aiaudit/parallel.hpp"
#include "aiaudit/rng.hpp"

namespace aiaudit {

/// L-infinity PGD settings; epsilon is on the [0, 1] pixel scale.
struct PgdParams {
  double epsilon = 0.3;
  double step_size = 2.5 * 0.3 / 40;
  int iterations = 40;
  bool random_start = true;
  std::uint64_t seed = 0;
  bool keep_best = true;

  void validate() const {
    require(epsilon >= 0 && std::isfinite(epsilon), ErrorKind::Validation, "pgd epsilon must be >= 0");
    require(step_size > 0 && std::isfinite(step_size), ErrorKind::Validation, "pgd step_size must be positive");
    require(iterations > 0, ErrorKind::Validation, "pgd iterations must be positive");
  }

  friend bool operator==(const PgdParams&, const PgdParams&) = default;
};

/// Default step size for a budget and iteration count.
inline double default_step_size(double epsilon, int iterations) { return 2.5 * epsilon / iterations; }

inline Json to_json(const PgdParams& p) {
  return {{"epsilon", p.epsilon},           {"step_size", p.step_size}, {"iterations", p.iterations},
          {"random_start", p.random_start}, {"seed", p.seed},           {"keep_best", p.keep_best},
          {"norm", "linf"},                 {"restarts", 1}};
}

/// Overlays the fields in `j`; when step_size is absent it follows the defaults
/// rule for the resulting epsilon and iteration count.
inline PgdParams pgd_params_from_json(const Json& j, PgdParams base = {}) {
  require(j.is_object(), ErrorKind::Validation, "pgd parameters must be an object");
  bool step_given = false;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "epsilon") base.epsilon = v.get<double>();
      else if (key == "step_size") {
        base.step_size = v.get<double>();
        step_given = true;
      } else if (key == "iterations") base.iterations = v.get<int>();
      else if (key == "random_start") base.random_start = v.get<bool>();
      else if (key == "seed") base.seed = v.get<std::uint64_t>();
      else if (key == "keep_best") base.keep_best = v.get<bool>();
      else if (key == "norm") require(v == "linf", ErrorKind::Validation, "only the linf norm is supported");
      else if (key == "restarts") require(v == 1, ErrorKind::Validation, "only a single restart is supported");
      else fail(ErrorKind::Validation, "unknown pgd parameter '" + key + "'");
    }
  } catch (const Json::exception& e) {
    fail(ErrorKind::Validation, std::string("pgd parameters: ") + e.what());
  }
  if (!step_given && base.iterations > 0) base.step_size = default_step_size(base.epsilon, base.iterations);
  if (base.epsilon == 0 && !step_given) base.step_size = 1.0 / 255.0;
  base.validate();
  return base;
}

struct PgdResult {
  Image adversarial;
  double clean_loss = 0.0;
  double final_loss = 0.0;
  /// Best loss seen after evaluating iterate t (t = 0 is the start point).
  std::vector<double> best_loss_trace;
};

namespace detail {

inline float sign(float g) { return static_cast<float>((g > 0.0f) - (g < 0.0f)); }

/// x_next = clamp01(clamp_ball(current + step * sign(g))).
inline void signed_step(Image& current, const Image& origin, const Image& grad, float step, float eps) {
  for (std::size_t i = 0; i < current.size(); ++i) {
    const float o = origin.data[i];
    float v = current.data[i] + step * sign(grad.data[i]);
    v = std::clamp(v, o - eps, o + eps);
    current.data[i] = std::clamp(v, 0.0f, 1.0f);
  }
}

}  // namespace detail

/// Attacks a batch jointly (per-sample losses are independent). Sample i draws
/// its random start from derive_seed(params.seed, first_index + i).
inline std::vector<PgdResult> pgd_batch(ClassifierAdapter& model, std::span<const Image> xs, std::span<const int> ys,
                                        const PgdParams& params, std::uint64_t first_index = 0) {
  params.validate();
  require(model.capabilities().gradients, ErrorKind::Capability, "PGD needs a model with input gradients");
  require(xs.size() == ys.size(), ErrorKind::Contract, "image and label counts differ");
  const auto eps = static_cast<float>(params.epsilon);
  const auto step = static_cast<float>(params.step_size);
  const std::size_t n = xs.size();

  std::vector<Image> current(xs.begin(), xs.end());
  if (params.random_start && eps > 0.0f) {
    for (std::size_t i = 0; i < n; ++i) {
      Rng rng(derive_seed(params.seed, first_index + i));
      for (auto& v : current[i].data) v = std::clamp(v + static_cast<float>(uniform(rng, -eps, eps)), 0.0f, 1.0f);
    }
  }

  std::vector<PgdResult> results(n);
  std::vector<double> best_loss(n, -std::numeric_limits<double>::infinity());
  std::vector<Image> best = current;
  auto record = [&](const std::vector<double>& losses) {
    for (std::size_t i = 0; i < n; ++i) {
      if (losses[i] > best_loss[i]) {
        best_loss[i] = losses[i];
        if (params.keep_best) best[i] = current[i];
      }
      results[i].best_loss_trace.push_back(best_loss[i]);
    }
  };

  for (int t = 0; t < params.iterations; ++t) {
    auto lg = loss_and_input_gradients(model, current, ys);
    if (t == 0 && !(params.random_start && eps > 0.0f))
      for (std::size_t i = 0; i < n; ++i) results[i].clean_loss = lg.losses[i];
    record(lg.losses);
    for (std::size_t i = 0; i < n; ++i) detail::signed_step(current[i], xs[i], lg.grads[i], step, eps);
  }
  const auto final_losses = loss_and_input_gradients(model, current, ys).losses;
  record(final_losses);

  if (params.random_start && eps > 0.0f) {
    const auto clean = loss_and_input_gradients(model, xs, ys).losses;
    for (std::size_t i = 0; i < n; ++i) results[i].clean_loss = clean[i];
  }
  for (std::size_t i = 0; i < n; ++i) {
    results[i].final_loss = final_losses[i];
    results[i].adversarial = params.keep_best ? std::move(best[i]) : std::move(current[i]);
  }
  return results;
}

inline PgdResult pgd_traced(ClassifierAdapter& model, const Image& x, int y, const PgdParams& params) {
  return std::move(pgd_batch(model, std::span(&x, 1), std::span(&y, 1), params).front());
}

/// Projected gradient ascent on the cross-entropy loss inside the L-inf ball.
inline Image pgd(ClassifierAdapter& model, const Image& x, int y, const PgdParams& params) {
  return pgd_traced(model, x, y, params).adversarial;
}

/// Single signed-gradient step of size epsilon.
inline Image fgsm(ClassifierAdapter& model, const Image& x, int y, double epsilon) {
  require(epsilon >= 0, ErrorKind::Validation, "fgsm epsilon must be >= 0");
  const Image grad = input_gradient(model, x, y);
  Image out = x;
  detail::signed_step(out, x, grad, static_cast<float>(epsilon), static_cast<float>(epsilon));
  return out;
}

inline constexpr std::size_t kAttackBatch = 64;

/// Accuracy after replacing every input by its PGD adversarial example.
/// Sample i of the split is attacked with stream index i.
inline double robust_accuracy(ClassifierAdapter& model, const DatasetSplit& split, const PgdParams& params) {
  require(!split.empty(), ErrorKind::Contract, "cannot evaluate robust accuracy on an empty split");
  require(model.capabilities().gradients, ErrorKind::Capability, "PGD needs a model with input gradients");
  params.validate();
  const std::size_t chunks = (split.size() + kAttackBatch - 1) / kAttackBatch;
  std::vector<std::size_t> correct(chunks, 0);
  parallel_for(
      chunks, [&] { return model.clone(); },
      [&](std::size_t c, std::unique_ptr<ClassifierAdapter>& replica) {
        const std::size_t begin = c * kAttackBatch, end = std::min(split.size(), begin + kAttackBatch);
        std::vector<Image> xs;
        std::vector<int> ys;
        for (std::size_t i = begin; i < end; ++i) {
          xs.push_back(split.items[i].pixels);
          ys.push_back(split.items[i].label);
        }
        auto results = pgd_batch(*replica, xs, ys, params, begin);
        std::vector<Image> adv;
        for (auto& r : results) adv.push_back(std::move(r.adversarial));
        auto p = predict_probs(*replica, adv);
        for (std::size_t i = 0; i < adv.size(); ++i)
          if (argmax(p.row(static_cast<int>(i))) == ys[i]) ++correct[c];
      });
  std::size_t total = 0;
  for (auto v : correct) total += v;
  return static_cast<double>(total) / static_cast<double>(split.size());
}

}  // namespace aiaudit
