#include "sonoguide/similarity.hpp"

#include "support.hpp"

#include <doctest.h>

using namespace sonoguide;
using namespace testing_support;

namespace {

SliceImage noise_image(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  SliceImage img(w, h);
  for (auto& p : img.pixels) p = u(rng);
  return img;
}

SliceImage blob_image(int w, int h) {
  SliceImage img(w, h);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      const double x = (u - w / 2.0) / w, y = (v - h / 3.0) / h;
      img.at(u, v) = static_cast<float>(0.2 + 0.6 * std::exp(-20 * (x * x + y * y)) +
                                        0.1 * std::sin(0.7 * u) * std::cos(0.3 * v));
    }
  return img;
}

// Straightforward MS-SSIM: 2D truncated Gaussian window renormalised at the
// border, 2x2 mean pooling, standard weights renormalised over the scales.
double ms_ssim_oracle(const SliceImage& a, const SliceImage& b, int scales) {
  const double weights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
  double wsum = 0;
  for (int s = 0; s < scales; ++s) wsum += weights[s];
  const double c1 = 1e-4, c2 = 9e-4;
  int w = a.width, h = a.height;
  std::vector<double> x(a.pixels.begin(), a.pixels.end()), y(b.pixels.begin(), b.pixels.end());
  double out = 1.0;
  for (int s = 0; s < scales; ++s) {
    double sum_ssim = 0, sum_cs = 0;
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        double W = 0, mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
        for (int dr = -5; dr <= 5; ++dr)
          for (int dc = -5; dc <= 5; ++dc) {
            const int rr = r + dr, cc = c + dc;
            if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
            const double k = std::exp(-(dr * dr + dc * dc) / (2 * 1.5 * 1.5));
            const double px = x[rr * w + cc], py = y[rr * w + cc];
            W += k;
            mx += k * px;
            my += k * py;
            xx += k * px * px;
            yy += k * py * py;
            xy += k * px * py;
          }
        mx /= W, my /= W, xx /= W, yy /= W, xy /= W;
        const double cs = (2 * (xy - mx * my) + c2) / ((xx - mx * mx) + (yy - my * my) + c2);
        sum_cs += cs;
        sum_ssim += cs * (2 * mx * my + c1) / (mx * mx + my * my + c1);
      }
    const double term = (s + 1 == scales ? sum_ssim : sum_cs) / (w * h);
    out *= std::pow(std::max(term, 0.0), weights[s] / wsum);
    if (s + 1 < scales) {
      std::vector<double> nx, ny;
      for (int r = 0; r + 1 < h; r += 2)
        for (int c = 0; c + 1 < w; c += 2) {
          nx.push_back(0.25 * (x[r * w + c] + x[r * w + c + 1] + x[(r + 1) * w + c] + x[(r + 1) * w + c + 1]));
          ny.push_back(0.25 * (y[r * w + c] + y[r * w + c + 1] + y[(r + 1) * w + c] + y[(r + 1) * w + c + 1]));
        }
      x = nx, y = ny, w /= 2, h /= 2;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("dice_loss examples") {
  SliceImage img(10, 10);
  for (int v = 0; v < 10; ++v)
    for (int u = 0; u < 5; ++u) img.at(u, v) = 1.0f;
  const Mask own = binarize(img, 0.5);
  CHECK(dice_loss(img, own) == doctest::Approx(0.0).epsilon(1e-12));

  Mask right(100, 0);
  for (int v = 0; v < 10; ++v)
    for (int u = 5; u < 10; ++u) right[v * 10 + u] = 1;
  CHECK(dice_loss(img, right) == doctest::Approx(1.0).epsilon(1e-9));

  // equal-area squares overlapping in half their area
  SliceImage sq(8, 8);
  Mask other(64, 0);
  for (int v = 0; v < 4; ++v)
    for (int u = 0; u < 4; ++u) {
      sq.at(u, v) = 1.0f;
      other[v * 8 + u + 2] = 1;
    }
  CHECK(dice_loss(sq, other) == doctest::Approx(0.5).epsilon(1e-9));

  // symmetric for binary inputs
  SliceImage other_img(8, 8);
  for (int i = 0; i < 64; ++i) other_img.pixels[i] = other[i];
  CHECK(dice_loss(other_img, binarize(sq, 0.5)) == doctest::Approx(dice_loss(sq, other)));

  CHECK_THROWS_AS(dice_loss(img, Mask(99, 0)), std::invalid_argument);
  // empty inputs are defined through eps
  CHECK(dice_loss(SliceImage(4, 4), Mask(16, 0)) == doctest::Approx(0.0));
}

TEST_CASE("pose_regression_loss examples") {
  std::mt19937_64 rng(40);
  const Pose p{random_unit_quaternion(rng), Vec3(0.1, 0.2, 0.3)};
  CHECK(pose_regression_loss(p, p) == 0.0);
  CHECK(pose_regression_loss(p, Pose{-p.q, p.delta}) == doctest::Approx(0.0));
  CHECK(pose_regression_loss(p, Pose{p.q, p.delta + Vec3(0.3, 0, 0)}) ==
        doctest::Approx(0.3).epsilon(1e-12));
  const Pose r{random_unit_quaternion(rng), Vec3::Zero()};
  CHECK(pose_regression_loss(p, r) == doctest::Approx(pose_regression_loss(r, p)));
}

TEST_CASE("atlas_loss at the truth, far away and under sign flips") {
  const Phantom& ph = phantom64();
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(-0.15, 0.15);
  for (int t = 0; t < 10; ++t) {
    const Pose theta{random_unit_quaternion(rng), Vec3(u(rng), u(rng), u(rng))};
    const Mask mask = binarize(sample_slice(ph.volume, theta));
    const AtlasLoss at = atlas_loss(ph.volume, mask, theta, theta);
    CHECK(at.dice < 0.05);
    CHECK(at.regression == 0.0);
    const AtlasLoss flipped = atlas_loss(ph.volume, mask, theta, Pose{-theta.q, theta.delta});
    CHECK(flipped.total() == doctest::Approx(at.total()));
    const AtlasLoss far = atlas_loss(ph.volume, mask, theta, Pose{theta.q, Vec3(3, 3, 3)});
    CHECK(far.dice == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("atlas_loss is minimal at the truth against 10+ degree perturbations") {
  const Phantom& ph = phantom64();
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> ang(10.0, 40.0), u(-0.1, 0.1);
  for (int t = 0; t < 50; ++t) {
    const Pose theta{random_unit_quaternion(rng), Vec3(u(rng), u(rng), u(rng))};
    const Mask mask = binarize(sample_slice(ph.volume, theta, 64, 64));
    const Pose hat{theta.q * quat_exp(random_unit_vector(rng) * ang(rng) * kDeg), theta.delta};
    CHECK(atlas_loss(ph.volume, mask, theta, theta, 64, 64).total() <=
          atlas_loss(ph.volume, mask, theta, hat, 64, 64).total());
  }
}

TEST_CASE("ncc examples and invariances") {
  const SliceImage a = noise_image(20, 20, 43);
  CHECK(ncc(a, a).value == doctest::Approx(1.0).epsilon(1e-12));
  SliceImage inv = a;
  for (auto& p : inv.pixels) p = 1.0f - p;
  CHECK(ncc(a, inv).value == doctest::Approx(-1.0).epsilon(1e-9));
  const NccResult flat = ncc(a, SliceImage(20, 20, 0.3f));
  CHECK(flat.value == 0.0);
  CHECK(flat.degenerate);

  const SliceImage b = noise_image(20, 20, 44);
  SliceImage affine = b;
  for (auto& p : affine.pixels) p = 0.25f * p + 0.5f;
  CHECK(std::abs(ncc(a, b).value - ncc(a, affine).value) < 1e-6);
  CHECK(ncc(a, b).value == doctest::Approx(ncc(b, a).value).epsilon(1e-15));
  CHECK_THROWS_AS(ncc(a, SliceImage(10, 10)), std::invalid_argument);
}

TEST_CASE("ms_ssim examples") {
  const SliceImage blob = blob_image(160, 160);
  CHECK(ms_ssim(blob, blob) == doctest::Approx(1.0).epsilon(1e-12));

  const SliceImage n1 = noise_image(160, 160, 45), n2 = noise_image(160, 160, 46);
  const double noise = ms_ssim(n1, n2);
  CHECK(noise < 0.3);
  CHECK(noise >= 0.0);

  SliceImage faded = blob;
  for (auto& p : faded.pixels) p *= 0.5f;
  const double contrast = ms_ssim(blob, faded);
  CHECK(contrast < 1.0);
  CHECK(contrast > ms_ssim(blob, noise_image(160, 160, 47)));
  CHECK(ms_ssim(blob, faded) == doctest::Approx(ms_ssim(faded, blob)));

  CHECK_THROWS_AS(ms_ssim(blob_image(31, 40), blob_image(31, 40)), std::invalid_argument);
  CHECK_NOTHROW(ms_ssim(blob_image(32, 32), blob_image(32, 32)));
  CHECK_THROWS_AS(ms_ssim(blob, blob_image(160, 150)), std::invalid_argument);
}

TEST_CASE("ms_ssim matches a direct 2D-window implementation") {
  const SliceImage a = blob_image(48, 40);
  SliceImage b = noise_image(48, 40, 48);
  for (std::size_t i = 0; i < b.pixels.size(); ++i) b.pixels[i] = 0.7f * a.pixels[i] + 0.3f * b.pixels[i];
  CHECK(ms_ssim(a, b) == doctest::Approx(ms_ssim_oracle(a, b, 3)).epsilon(1e-9));
  MsSsimOptions two;
  two.scales = 2;
  CHECK(ms_ssim(a, b, two) == doctest::Approx(ms_ssim_oracle(a, b, 2)).epsilon(1e-9));
}

TEST_CASE("rotation_histogram examples") {
  const std::vector<double> zeros(50, 0.0);
  const RotationHistogram z = rotation_histogram(zeros);
  CHECK(z.bins() == 32);
  CHECK(z.probabilities.front() == doctest::Approx(1.0).epsilon(1e-4));
  const std::vector<double> pi{kPi};
  CHECK(rotation_histogram(pi).probabilities.back() == doctest::Approx(1.0).epsilon(1e-4));

  std::mt19937_64 rng(49);
  std::uniform_real_distribution<double> u(0.0, kPi);
  std::vector<double> uniform(100000);
  for (auto& a : uniform) a = u(rng);
  const RotationHistogram h = rotation_histogram(uniform);
  double total = 0.0;
  for (double p : h.probabilities) {
    CHECK(std::abs(p - 1.0 / 32) < 0.01);
    CHECK(p >= 1e-6 / (1 + 32e-6));
    total += p;
  }
  CHECK(std::abs(total - 1.0) < 1e-9);
  CHECK(h.edges.front() == 0.0);
  CHECK(h.edges.back() == doctest::Approx(kPi));

  CHECK_THROWS_AS(rotation_histogram(std::vector<double>{}), std::invalid_argument);
  CHECK_THROWS_AS(rotation_histogram(zeros, 1), std::invalid_argument);
  CHECK_THROWS_AS(rotation_histogram(std::vector<double>{4.0}), std::invalid_argument);
}

TEST_CASE("kl_divergence examples") {
  const std::vector<double> first{0.1};
  const std::vector<double> both{0.1, 3.0};
  const RotationHistogram p = rotation_histogram(first, 2, 1e-9);
  const RotationHistogram q = rotation_histogram(both, 2, 1e-9);
  CHECK(std::abs(kl_divergence(p, q) - std::log(2.0)) < 1e-6);
  CHECK(kl_divergence(q, p) > kl_divergence(p, q) + 1.0);
  CHECK(kl_divergence(p, p) == 0.0);
  CHECK_THROWS_AS(kl_divergence(p, rotation_histogram(first, 3)), std::invalid_argument);
}

TEST_CASE("kl_divergence is non-negative (Gibbs)") {
  std::mt19937_64 rng(50);
  std::uniform_real_distribution<double> u(0.0, kPi);
  std::uniform_int_distribution<int> len(1, 80);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> a(len(rng)), b(len(rng));
    for (auto& x : a) x = u(rng) * u(rng) / kPi;
    for (auto& x : b) x = u(rng);
    const double kl = kl_divergence(rotation_histogram(a), rotation_histogram(b));
    CHECK(kl >= 0.0);
    // oracle: direct sum over the smoothed probabilities
    const auto pa = rotation_histogram(a), pb = rotation_histogram(b);
    double direct = 0.0;
    for (int i = 0; i < 32; ++i)
      direct += pa.probabilities[i] * std::log(pa.probabilities[i] / pb.probabilities[i]);
    CHECK(kl == doctest::Approx(direct).epsilon(1e-12));
  }
}

TEST_CASE("semantic descriptor and similarity") {
  const Phantom& ph = phantom64();
  const SliceImage tvp = sample_slice(ph.volume, ph.standard_planes[0].pose());
  const SliceImage tcp = sample_slice(ph.volume, ph.standard_planes[1].pose());
  const SemanticDescriptor dv = semantic_descriptor(tvp), dc = semantic_descriptor(tcp);
  for (const auto* d : {&dv, &dc}) {
    REQUIRE(d->values.size() == 128);
    double n = 0.0;
    for (double x : d->values) {
      CHECK(x >= 0.0);
      n += x * x;
    }
    CHECK(std::abs(std::sqrt(n) - 1.0) < 1e-9);
  }
  CHECK(semantic_similarity(dv, dv) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(semantic_similarity(dv, dc) < 0.999);
  CHECK(semantic_similarity(dv, dc) == semantic_similarity(dc, dv));

  // determinism and the uniform fallback for an empty image
  CHECK(semantic_descriptor(tvp).values == dv.values);
  const SemanticDescriptor empty = semantic_descriptor(SliceImage(40, 40));
  CHECK(empty.values[0] == doctest::Approx(1.0 / std::sqrt(128.0)));

  SemanticDescriptor e1{std::vector<double>(128, 0.0)}, e2{std::vector<double>(128, 0.0)};
  e1.values[0] = 1.0;
  e2.values[1] = 1.0;
  CHECK(semantic_similarity(e1, e2) == kSemanticFloor);
  CHECK_THROWS_AS(semantic_descriptor(SliceImage(31, 64)), std::invalid_argument);
  CHECK_THROWS_AS(semantic_similarity(e1, SemanticDescriptor{{1.0}}), std::invalid_argument);
}

TEST_CASE("dice_coefficient on masks") {
  Mask a{1, 1, 0, 0}, b{1, 0, 1, 0};
  CHECK(dice_coefficient(a, b) == doctest::Approx(0.5));
  CHECK(dice_coefficient(a, a) == doctest::Approx(1.0));
  CHECK_THROWS_AS(dice_coefficient(a, Mask{1}), std::invalid_argument);
}
