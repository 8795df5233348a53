#include <catch_amalgamated.hpp>

#include "support.hpp"

using namespace aiaudit;
using testing::random_image;

namespace {

RainParams random_rain(Rng& rng) {
  RainParams p;
  p.drop_density = uniform(rng, 0, 60);
  p.slant = static_cast<int>(uniform_index(rng, 41)) - 20;
  p.drop_length = 1 + static_cast<int>(uniform_index(rng, 12));
  p.drop_thickness = 1 + static_cast<int>(uniform_index(rng, 3));
  p.blur_radius = static_cast<int>(uniform_index(rng, 3));
  p.brightness_factor = uniform(rng, 0.05, 1.0);
  p.drop_color = uniform01(rng);
  p.seed = rng();
  return p;
}

}  // namespace

TEST_CASE("neutral rain parameters leave the image unchanged") {
  Rng rng(1);
  const Image img = random_image(rng, 16, 16);
  RainParams p;
  p.drop_density = 0;
  p.blur_radius = 0;
  p.brightness_factor = 1.0;
  CHECK(heavy_rain(img, p) == img);
}

TEST_CASE("darkening without streaks or blur multiplies every pixel") {
  Rng rng(2);
  const Image img = random_image(rng, 16, 16, 3, 0.0, 0.9);
  RainParams p;
  p.drop_density = 0;
  p.blur_radius = 0;
  p.brightness_factor = 0.7;
  const Image out = heavy_rain(img, p);
  for (std::size_t i = 0; i < img.size(); ++i) CHECK(out.data[i] == Catch::Approx(0.7 * img.data[i]).margin(1e-6));
}

TEST_CASE("transform chains compose left to right") {
  const Image px(1, 1, 3, 0.8f);
  const Image out = transform_chain({brightness_transform(0.5), brightness_transform(0.5)})(px, 0);
  for (float v : out.data) CHECK(v == Catch::Approx(0.2).margin(1e-7));
  Rng rng(3);
  const Image img = random_image(rng, 5, 5);
  CHECK(transform_chain({})(img, 7) == img);
  CHECK(identity_transform()(img, 7) == img);
}

TEST_CASE("brightness transform clamps to the unit range") {
  const Image out = brightness_transform(2.0)(Image(2, 2, 3, 0.8f), 0);
  for (float v : out.data) CHECK(v == 1.0f);
}

TEST_CASE("streak count follows the density") {
  RainParams p;
  p.drop_density = 8.0;
  CHECK(rain_streak_count(32, 32, p) == 8);
  CHECK(rain_streaks(32, 32, p).size() == 8);
  p.drop_density = 0;
  CHECK(rain_streaks(32, 32, p).empty());
}

TEST_CASE("rain output stays in range and keeps its shape for random parameters") {
  Rng rng(4);
  for (int i = 0; i < 300; ++i) {
    const int h = 4 + static_cast<int>(uniform_index(rng, 40));
    const int w = 4 + static_cast<int>(uniform_index(rng, 40));
    const Image img = random_image(rng, h, w);
    const RainParams p = random_rain(rng);
    const Image out = heavy_rain(img, p);
    REQUIRE(out.same_shape(img));
    REQUIRE(in_unit_range(out.span()));
    REQUIRE(heavy_rain(img, p) == out);
  }
}

TEST_CASE("rain seeds control streak placement") {
  Rng rng(5);
  const Image img = random_image(rng, 32, 32);
  RainParams a, b;
  a.seed = 1;
  b.seed = 2;
  CHECK(heavy_rain(img, a) != heavy_rain(img, b));
  const auto fixed = rain_transform(a, false);
  CHECK(fixed(img, 0) == fixed(img, 1));
  const auto per_sample = rain_transform(a, true);
  CHECK(per_sample(img, 0) != per_sample(img, 1));
  CHECK(per_sample(img, 3) == per_sample(img, 3));
}

TEST_CASE("rain darkens a constant image away from streaks") {
  RainParams p;
  p.drop_density = 0;
  p.blur_radius = 1;
  const Image out = heavy_rain(Image(8, 8, 3, 0.5f), p);
  for (float v : out.data) CHECK(v == Catch::Approx(0.35).margin(1e-6));
}

TEST_CASE("rain parameter validation") {
  CHECK(rain_params_from_json(Json{{"slant", 15}}).slant == 15);
  CHECK(rain_params_from_json(Json::object()) == RainParams{});
  CHECK_THROWS_AS(rain_params_from_json(Json{{"slant", 25}}), AuditError);
  CHECK_THROWS_AS(rain_params_from_json(Json{{"brightness_factor", 0.0}}), AuditError);
  CHECK_THROWS_AS(rain_params_from_json(Json{{"drop_length", 0}}), AuditError);
  CHECK_THROWS_AS(rain_params_from_json(Json{{"fog", 1}}), AuditError);
  CHECK_THROWS_AS(rain_params_from_json(Json{{"slant", "left"}}), AuditError);
  const RainParams p = rain_params_from_json(to_json(RainParams{}));
  CHECK(p == RainParams{});
}

TEST_CASE("box blur of a constant image is the identity") {
  const Image img(6, 6, 3, 0.25f);
  const Image out = box_blur(img, 2);
  for (float v : out.data) CHECK(v == Catch::Approx(0.25f).margin(1e-7));
}
