#include "sonoguide/preprocess.hpp"

#include "support.hpp"

#include <doctest.h>

using namespace sonoguide;
using namespace testing_support;

TEST_CASE("crop_resize of a 288x224 constant frame") {
  const SliceImage frame(288, 224, 0.7f);
  const SliceImage out = crop_resize(frame);
  REQUIRE(out.width == 160);
  REQUIRE(out.height == 160);
  // 224 * 160 / 288 = 124.4 -> 124 content rows, (160 - 124) / 2 = 18 pad rows
  for (int v = 0; v < 160; ++v) {
    const bool content = v >= 18 && v < 142;
    for (int u = 0; u < 160; ++u) {
      if (content) {
        CHECK(out.at(u, v) == doctest::Approx(0.7f));
      } else {
        CHECK(out.at(u, v) == 0.0f);
      }
    }
  }
}

TEST_CASE("crop_resize identity spec and zero input") {
  std::mt19937_64 rng(60);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  SliceImage img(160, 160);
  for (auto& p : img.pixels) p = u(rng);
  const SliceImage same = crop_resize(img, CropSpec{160, 160, 160, 0.0f});
  CHECK(same.pixels == img.pixels);

  const SliceImage zero = crop_resize(SliceImage(300, 260, 0.0f));
  for (float p : zero.pixels) CHECK(p == 0.0f);
}

TEST_CASE("crop_resize is exact on a linear ramp (bilinear oracle)") {
  const int w = 301, h = 250;
  SliceImage frame(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) frame.at(x, y) = static_cast<float>(0.001 * x + 0.002 * y + 0.1);
  const SliceImage out = crop_resize(frame);
  const int x_off = (w - 288) / 2, y_off = (h - 224) / 2;
  const double sx = 288.0 / 160.0, sy = 224.0 / 124.0;
  for (int v = 0; v < 124; ++v)
    for (int u = 0; u < 160; ++u) {
      const double fx = std::clamp((u + 0.5) * sx - 0.5, 0.0, 287.0);
      const double fy = std::clamp((v + 0.5) * sy - 0.5, 0.0, 223.0);
      const double expect = 0.001 * (x_off + fx) + 0.002 * (y_off + fy) + 0.1;
      CHECK(std::abs(out.at(u, 18 + v) - expect) < 1e-5);
    }
}

TEST_CASE("crop_resize output shape and errors") {
  for (int w : {288, 320, 641})
    for (int h : {224, 231, 480}) {
      const SliceImage out = crop_resize(SliceImage(w, h, 0.5f));
      CHECK(out.width == 160);
      CHECK(out.height == 160);
    }
  CHECK_THROWS_AS(crop_resize(SliceImage(287, 300)), std::invalid_argument);
  CHECK_THROWS_AS(crop_resize(SliceImage(300, 223)), std::invalid_argument);
  CHECK_THROWS_AS(crop_resize(SliceImage(300, 300), CropSpec{1, 2, 160, 0.0f}), std::invalid_argument);
  // a pad value fills the bands
  const SliceImage padded = crop_resize(SliceImage(288, 224, 0.5f), CropSpec{288, 224, 160, 0.25f});
  CHECK(padded.at(0, 0) == 0.25f);
}

TEST_CASE("smooth keeps constants and stays within the input range") {
  const SliceImage flat(30, 20, 0.37f);
  const SliceImage s = smooth(flat);
  for (float p : s.pixels) CHECK(p == doctest::Approx(0.37f).epsilon(1e-6));

  std::mt19937_64 rng(61);
  std::uniform_real_distribution<float> u(0.2f, 0.6f);
  SliceImage noisy(40, 40);
  for (auto& p : noisy.pixels) p = u(rng);
  const SliceImage sn = smooth(noisy, 3, 0.2);
  const auto [lo, hi] = std::minmax_element(noisy.pixels.begin(), noisy.pixels.end());
  for (float p : sn.pixels) {
    CHECK(p >= *lo - 1e-6f);
    CHECK(p <= *hi + 1e-6f);
  }
  CHECK_THROWS_AS(smooth(flat, 0), std::invalid_argument);
  CHECK_THROWS_AS(smooth(flat, 2, 0.0), std::invalid_argument);
}

TEST_CASE("smooth diffuses a small impulse with bounded total brightness") {
  SliceImage img(21, 21, 0.0f);
  img.at(10, 10) = 0.1f;
  const SliceImage s = smooth(img);
  CHECK(s.at(10, 10) < 0.1f);
  double total = 0.0;
  for (float p : s.pixels) total += p;
  CHECK(total >= 0.5 * 0.1);
  CHECK(total <= 1.0 * 0.1 + 1e-7);
}

TEST_CASE("smooth preserves a step edge position") {
  SliceImage img(40, 5);
  for (int v = 0; v < 5; ++v)
    for (int u = 0; u < 40; ++u) img.at(u, v) = u < 20 ? 0.2f : 0.8f;
  const SliceImage s = smooth(img);
  // sub-pixel location of the 0.5 crossing along the middle row
  auto crossing = [](const SliceImage& im) {
    for (int u = 0; u + 1 < im.width; ++u) {
      const double a = im.at(u, 2), b = im.at(u + 1, 2);
      if (a < 0.5 && b >= 0.5) return u + (0.5 - a) / (b - a);
    }
    return -1.0;
  };
  CHECK(std::abs(crossing(s) - crossing(img)) < 1.0);
}

TEST_CASE("smooth stabilises on phantom slices") {
  const Phantom& ph = phantom64();
  for (const auto& sp : ph.standard_planes) {
    const SliceImage once = smooth(sample_slice(ph.volume, sp.pose()));
    const SliceImage twice = smooth(once);
    double mae = 0.0;
    for (std::size_t i = 0; i < once.pixels.size(); ++i) mae += std::abs(once.pixels[i] - twice.pixels[i]);
    CHECK(mae / once.pixels.size() < 0.02);
  }
}
