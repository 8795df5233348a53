#include <catch_amalgamated.hpp>

#include "support.hpp"

using namespace aiaudit;
using testing::FixedProbeClassifier;
using testing::random_image;

namespace {

Tensor3 one_hot_grid(int h, int w, int i, int j, float value) {
  Tensor3 t(h, w, 1);
  t.at(i, j, 0) = value;
  return t;
}

/// Input 4x4x1 -> 1x1 conv (weight `conv_weight`) -> dense 16 -> 2, class 1 reading every cell with weight 1,
/// class 0 with weight `class0_weight`.
NetworkClassifier single_conv_toy(float conv_weight, float class0_weight) {
  auto conv = std::make_unique<nn::Conv2d>("conv", 1, 1, 1, false);
  conv->weight()[0] = conv_weight;
  auto fc = std::make_unique<nn::Dense>("fc", 16, 2, false);
  for (int i = 0; i < 16; ++i) {
    fc->weight()[static_cast<std::size_t>(i) * 2] = class0_weight;
    fc->weight()[static_cast<std::size_t>(i) * 2 + 1] = 1.0f;
  }
  std::vector<std::unique_ptr<nn::Layer>> layers;
  layers.push_back(std::move(conv));
  layers.push_back(std::move(fc));
  return NetworkClassifier(nn::Network({4, 4, 1}, std::move(layers)));
}

SaliencyMap map_from(Tensor3 values) {
  SaliencyMap m;
  m.values = std::move(values);
  return m;
}

DatasetSplit labeled_split(int classes, int per_class, int side) {
  Rng rng(1);
  DatasetSplit s;
  for (int c = 0; c < classes; ++c)
    for (int k = 0; k < per_class; ++k) {
      const std::string name = std::to_string(c) + "_" + std::to_string(k);
      s.items.push_back(make_labeled(random_image(rng, side, side), c, name, name));
    }
  return s;
}

}  // namespace

TEST_CASE("one-hot 2x2 activation upsamples to the hand-derived 4x4 footprint") {
  // Half-pixel bilinear from 2 to 4 samples gives weights [1, .75, .25, 0] for cell 0 and the reverse for cell 1.
  const std::array<std::array<float, 4>, 2> profile{{{1.0f, 0.75f, 0.25f, 0.0f}, {0.0f, 0.25f, 0.75f, 1.0f}}};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      FixedProbeClassifier m(2, {4, 4, 3}, one_hot_grid(2, 2, i, j, 3.0f), one_hot_grid(2, 2, i, j, 2.0f));
      const SaliencyMap map = grad_cam(m, Image(4, 4, 3, 0.5f), 1, "conv");
      REQUIRE_FALSE(map.degenerate);
      REQUIRE(map.height() == 4);
      REQUIRE(map.width() == 4);
      for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) {
          INFO("cell " << i << "," << j << " pixel " << y << "," << x);
          CHECK(map.at(y, x) == profile[i][y] * profile[j][x]);
        }
    }
}

TEST_CASE("single-conv toy network reproduces its one-hot input as the map") {
  auto m = single_conv_toy(2.0f, 0.0f);
  for (int p = 0; p < 16; ++p) {
    Image x(4, 4, 1);
    x.data[static_cast<std::size_t>(p)] = 0.8f;
    const SaliencyMap map = grad_cam(m, x, 1, "conv");
    REQUIRE_FALSE(map.degenerate);
    for (int k = 0; k < 16; ++k) REQUIRE(map.values.data[static_cast<std::size_t>(k)] == (k == p ? 1.0f : 0.0f));
  }
}

TEST_CASE("zero gradient or zero activation gives a flagged all-zero map") {
  auto m = single_conv_toy(2.0f, 0.0f);
  Image x(4, 4, 1);
  x.data[5] = 0.8f;
  const SaliencyMap zero_grad = grad_cam(m, x, 0, "conv");
  CHECK(zero_grad.degenerate);
  for (float v : zero_grad.values.data) CHECK(v == 0.0f);
  CHECK(grad_cam(m, Image(4, 4, 1), 1, "conv").degenerate);
  CHECK_THROWS_AS(center_mass_fraction(zero_grad, 0.5), AuditError);
  try {
    center_mass_fraction(zero_grad, 0.5);
  } catch (const AuditError& e) {
    CHECK(e.kind() == ErrorKind::DegenerateEvidence);
  }
}

TEST_CASE("negative evidence is removed by the ReLU") {
  auto m = single_conv_toy(2.0f, -1.0f);
  Image x(4, 4, 1);
  x.data[3] = 1.0f;
  CHECK(grad_cam(m, x, 0, "conv").degenerate);
}

TEST_CASE("constant positive activation and gradient give a uniform map of ones") {
  FixedProbeClassifier m(2, {8, 8, 3}, Tensor3(2, 2, 3, 0.4f), Tensor3(2, 2, 3, 0.1f));
  const SaliencyMap map = grad_cam(m, Image(8, 8, 3, 0.5f), 0, "conv");
  CHECK_FALSE(map.degenerate);
  for (float v : map.values.data) CHECK(v == Catch::Approx(1.0f).margin(1e-6));
}

TEST_CASE("saliency of a random CNN is normalised and at input resolution") {
  Rng rng(2);
  auto m = testing::small_cnn({8, 8, 3}, 4, 5, "residual_cnn");
  for (int i = 0; i < 20; ++i) {
    const Image x = random_image(rng, 8, 8);
    for (const auto& layer : m.layer_names()) {
      const SaliencyMap map = grad_cam(m, x, i % 4, layer);
      REQUIRE(map.height() == 8);
      REQUIRE(map.width() == 8);
      const float peak = *std::max_element(map.values.data.begin(), map.values.data.end());
      REQUIRE(peak == (map.degenerate ? 0.0f : 1.0f));
      REQUIRE(*std::min_element(map.values.data.begin(), map.values.data.end()) >= 0.0f);
    }
  }
}

TEST_CASE("center box rounding") {
  const CenterBox a = center_box(32, 32, 0.5);
  CHECK((a.top == 8 && a.left == 8 && a.height == 16 && a.width == 16));
  const CenterBox b = center_box(7, 7, 0.5);
  CHECK((b.top == 1 && b.height == 4));
  const CenterBox c = center_box(32, 32, 0.7);
  CHECK((c.top == 4 && c.height == 23));
  CHECK_THROWS_AS(center_box(8, 8, 0.0), AuditError);
  CHECK_THROWS_AS(center_box(8, 8, 1.5), AuditError);
}

TEST_CASE("center mass of uniform and central maps") {
  CHECK(center_mass_fraction(map_from(Tensor3(32, 32, 1, 1.0f)), 0.5) == Catch::Approx(0.25));
  CHECK(center_mass_fraction(map_from(Tensor3(32, 32, 1, 1.0f)), 0.7) == Catch::Approx(529.0 / 1024.0));
  CHECK(center_mass_fraction(map_from(Tensor3(32, 32, 1, 1.0f)), 1.0) == Catch::Approx(1.0));
  Tensor3 central(4, 4, 1);
  for (int y = 1; y < 3; ++y)
    for (int x = 1; x < 3; ++x) central.at(y, x, 0) = 1.0f;
  CHECK(center_mass_fraction(map_from(central), 0.5) == 1.0);
  Tensor3 corner(4, 4, 1);
  corner.at(0, 0, 0) = 1.0f;
  corner.at(1, 1, 0) = 1.0f;
  CHECK(center_mass_fraction(map_from(corner), 0.5) == 0.5);
}

TEST_CASE("center mass grows with the region and ignores scale") {
  Rng rng(3);
  for (int i = 0; i < 300; ++i) {
    const int h = 4 + static_cast<int>(uniform_index(rng, 30));
    const int w = 4 + static_cast<int>(uniform_index(rng, 30));
    Tensor3 values(h, w, 1);
    for (auto& v : values.data) v = static_cast<float>(uniform_index(rng, 3) == 0 ? 0.0 : uniform01(rng));
    values.data[0] = 1.0f;
    const SaliencyMap map = map_from(values);
    double previous = 0.0;
    for (double rf = 0.1; rf <= 1.0 + 1e-9; rf += 0.05) {
      const double f = center_mass_fraction(map, std::min(rf, 1.0));
      REQUIRE(f >= previous - 1e-12);
      REQUIRE(f <= 1.0 + 1e-12);
      previous = f;
    }
    Tensor3 scaled = values;
    for (auto& v : scaled.data) v *= 0.25f;
    REQUIRE(center_mass_fraction(map_from(scaled), 0.5) == Catch::Approx(center_mass_fraction(map, 0.5)));
  }
}

TEST_CASE("uniform-saliency stub fails every class") {
  FixedProbeClassifier m(3, {8, 8, 3}, Tensor3(2, 2, 4, 1.0f), Tensor3(2, 2, 4, 1.0f));
  CenterCheckParams p;
  p.samples_per_class = 5;
  const auto audit = explanation_audit(m, labeled_split(3, 6, 8), p, "conv");
  CHECK_FALSE(audit.pass);
  REQUIRE(audit.classes.size() == 3);
  for (const auto& c : audit.classes) {
    CHECK(c.pass_rate == 0.0);
    for (const auto& s : c.samples) CHECK(s.center_mass == Catch::Approx(0.25));
  }
}

TEST_CASE("centrally concentrated stub passes every class") {
  FixedProbeClassifier m(3, {8, 8, 3}, one_hot_grid(4, 4, 1, 2, 1.0f), one_hot_grid(4, 4, 1, 2, 1.0f));
  CenterCheckParams p;
  p.samples_per_class = 5;
  const auto audit = explanation_audit(m, labeled_split(3, 6, 8), p, "conv");
  CHECK(audit.pass);
  for (const auto& c : audit.classes) CHECK(c.pass_rate == 1.0);
}

TEST_CASE("sparse classes are resampled with replacement and missing classes fail") {
  FixedProbeClassifier m(3, {8, 8, 3}, one_hot_grid(4, 4, 1, 2, 1.0f), one_hot_grid(4, 4, 1, 2, 1.0f));
  CenterCheckParams p;
  p.samples_per_class = 10;
  auto split = labeled_split(2, 4, 8);
  const auto audit = explanation_audit(m, split, p, "conv");
  REQUIRE(audit.classes.size() == 3);
  CHECK(audit.classes[0].resampled);
  CHECK(audit.classes[0].samples.size() == 10);
  CHECK(audit.classes[0].pass);
  CHECK(audit.classes[2].available == 0);
  CHECK(audit.classes[2].samples.empty());
  CHECK_FALSE(audit.classes[2].pass);
  CHECK_FALSE(audit.pass);
}

TEST_CASE("sample selection is seed-deterministic") {
  std::vector<std::size_t> pool(50);
  std::iota(pool.begin(), pool.end(), 0);
  bool r1 = false, r2 = false;
  const auto a = sample_indices(pool, 10, 7, 3, r1);
  const auto b = sample_indices(pool, 10, 7, 3, r2);
  CHECK(a == b);
  CHECK_FALSE(r1);
  CHECK(std::set<std::size_t>(a.begin(), a.end()).size() == 10);
  CHECK(sample_indices(pool, 10, 8, 3, r1) != a);
  CHECK(sample_indices(pool, 10, 7, 4, r1) != a);

  auto m = testing::small_cnn({8, 8, 3}, 3, 4);
  CenterCheckParams p;
  p.samples_per_class = 4;
  const auto split = labeled_split(3, 6, 8);
  const auto x = explanation_audit(m, split, p, "conv2");
  const auto y = explanation_audit(m, split, p, "conv2");
  for (std::size_t c = 0; c < x.classes.size(); ++c) {
    REQUIRE(x.classes[c].samples.size() == y.classes[c].samples.size());
    for (std::size_t k = 0; k < x.classes[c].samples.size(); ++k) {
      CHECK(x.classes[c].samples[k].item_index == y.classes[c].samples[k].item_index);
      CHECK(x.classes[c].samples[k].center_mass == y.classes[c].samples[k].center_mass);
    }
  }
  CHECK(x.pass == y.pass);
}

TEST_CASE("center check parameters are validated") {
  CHECK(center_check_params_from_json(Json{{"region_fraction", 0.7}}).region_fraction == 0.7);
  CHECK_THROWS_AS(center_check_params_from_json(Json{{"region_fraction", 0.0}}), AuditError);
  CHECK_THROWS_AS(center_check_params_from_json(Json{{"samples_per_class", 0}}), AuditError);
  CHECK_THROWS_AS(center_check_params_from_json(Json{{"colormap", "jet"}}), AuditError);
}

TEST_CASE("saliency export writes a grayscale image") {
  testing::TempDir dir("explain");
  Tensor3 values(4, 4, 1);
  values.at(1, 2, 0) = 1.0f;
  export_saliency(dir / "map.png", map_from(values));
  const Image back = read_image(dir / "map.png");
  CHECK(back.height == 4);
  CHECK(back.at(1, 2, 0) == 1.0f);
  CHECK(back.at(0, 0, 0) == 0.0f);
}
