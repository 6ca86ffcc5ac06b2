#include <doctest.h>

#include "support.hpp"
#include "ungan/distortions.hpp"

using namespace ungan;

namespace {

const Shape kShape{32, 32, 3};

std::vector<Image<float>> fixtures(int n) {
  std::vector<Image<float>> out;
  for (int i = 0; i < n; ++i) out.push_back(testing::pattern_image(kShape, 0.4 * i));
  return out;
}

}  // namespace

TEST_CASE("identity magnitudes are bit-exact") {
  const auto x = testing::pattern_image(kShape, 0.9);
  for (DistortionKind k : all_distortions()) {
    if (k == DistortionKind::JpegCompression) continue;
    CAPTURE(to_string(k));
    const auto r = magnitude_range(k);
    CHECK(apply_distortion(x, {k, r.identity, 3}).data == x.data);
  }
  CHECK(apply_distortion(x, {DistortionKind::Brightness, 1.0, 0}).data == x.data);
  CHECK(apply_distortion(x, {DistortionKind::Rotate, 0.0, 0}).data == x.data);
  CHECK(mse(apply_distortion(x, {DistortionKind::Rotate, 0.0, 0}), x) == 0.0);
}

TEST_CASE("names round trip") {
  CHECK(all_distortions().size() == 13);
  for (DistortionKind k : all_distortions()) CHECK(distortion_from_string(to_string(k)) == k);
  CHECK_THROWS(distortion_from_string("sepia"));
}

TEST_CASE("gaussian noise matches its variance") {
  const auto x = testing::pattern_image(kShape, 0.2);
  double total = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) total += mse(apply_distortion(x, {DistortionKind::GaussianNoise, 0.05, seed}), x);
  const double mean = total / 20;
  CHECK(mean > 0.8 * 0.0025);
  CHECK(mean < 1.2 * 0.0025);
}

TEST_CASE("outputs stay in range and are deterministic") {
  const auto images = fixtures(3);
  for (DistortionKind k : all_distortions()) {
    CAPTURE(to_string(k));
    const auto r = magnitude_range(k);
    for (double m : {r.lo, 0.5 * (r.lo + r.hi), r.hi}) {
      if (k == DistortionKind::GaussianBlur) m = 2 * std::floor(m / 2) + 1;
      if (k == DistortionKind::JpegCompression) m = std::round(m);
      for (const auto& x : images) {
        const auto a = apply_distortion(x, {k, m, 1});
        CHECK(a.shape == x.shape);
        CHECK(a.data.minCoeff() >= 0.0f);
        CHECK(a.data.maxCoeff() <= 1.0f);
        CHECK(apply_distortion(x, {k, m, 1}).data == a.data);
        if (k != DistortionKind::GaussianNoise) CHECK(apply_distortion(x, {k, m, 99}).data == a.data);
      }
    }
  }
  const auto x = images.front();
  CHECK_FALSE(apply_distortion(x, {DistortionKind::GaussianNoise, 0.05, 1}).data ==
              apply_distortion(x, {DistortionKind::GaussianNoise, 0.05, 2}).data);
}

TEST_CASE("sweeps are monotone") {
  const auto images = fixtures(8);
  const auto blur = sweep_distortion(images, DistortionKind::GaussianBlur, {1, 3, 5, 7, 9});
  REQUIRE(blur.size() == 5);
  CHECK(blur.front().utility.mse == 0.0);
  for (std::size_t i = 1; i < blur.size(); ++i) CHECK(blur[i].utility.ssim <= blur[i - 1].utility.ssim);

  // Quality 90 down to 10: the sweep runs ascending, so MSE must not increase with quality.
  const auto jpeg = sweep_distortion(images, DistortionKind::JpegCompression, {10, 30, 50, 70, 90});
  for (std::size_t i = 1; i < jpeg.size(); ++i) CHECK(jpeg[i].utility.mse <= jpeg[i - 1].utility.mse);

  CHECK_THROWS(sweep_distortion(images, DistortionKind::Rotate, {10, 5}));
}

TEST_CASE("magnitude validation") {
  CHECK_THROWS_AS(validate(DistortionSpec{DistortionKind::Rotate, 45, 0}), RangeError);
  CHECK_THROWS_AS(validate(DistortionSpec{DistortionKind::GaussianBlur, 4, 0}), RangeError);
  CHECK_THROWS_AS(validate(DistortionSpec{DistortionKind::JpegCompression, 50.5, 0}), RangeError);
  CHECK_THROWS_AS(validate(DistortionSpec{DistortionKind::CenterCrop, 0.3, 0}), RangeError);
  CHECK_NOTHROW(validate(DistortionSpec{DistortionKind::GaussianNoise, 0.1, 0}));
}

TEST_CASE("solarize inverts pixels above the threshold") {
  const auto x = testing::pattern_image(kShape, 1.1);
  const auto s = apply_distortion(x, {DistortionKind::Solarize, 0.5, 0});
  for (Eigen::Index i = 0; i < x.data.size(); ++i) {
    const float v = x.data[i];
    CHECK(s.data[i] == doctest::Approx(v > 0.5f ? 1.0f - v : v));
  }
}
