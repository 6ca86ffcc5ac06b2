#include <doctest.h>

#include "support.hpp"
#include "../oracles/metric_oracle_values.hpp"
#include "ungan/metrics.hpp"

#include <algorithm>
#include <numeric>

using namespace ungan;

namespace {

IdentityEmbedder<float> random_embedder(Shape s, std::uint64_t seed) {
  return IdentityEmbedder<float>(make_feature_trunk(s, seed));
}

}  // namespace

TEST_CASE("metrics match the independent oracle on 20 fixture pairs") {
  for (int k = 0; k < 20; ++k) {
    CAPTURE(k);
    const auto [a, b] = testing::metric_fixture(k);
    CHECK(std::abs(mse(a, b) - testing::kMetricOracle[k][0]) < 1e-6);
    CHECK(std::abs(ssim(a, b) - testing::kMetricOracle[k][1]) < 1e-6);
    CHECK(std::abs(psnr(a, b) - testing::kMetricOracle[k][2]) < 1e-6);
  }
}

TEST_CASE("metric closed forms") {
  const Shape s{16, 16, 3};
  const Image<float> x = Image<float>::constant(s, 0.25f);
  const Image<float> y = Image<float>::constant(s, 0.35f);
  CHECK(mse(x, x) == 0.0);
  CHECK(ssim(x, x) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(psnr(x, x) == kPsnrCap);
  CHECK(mse(x, y) == doctest::Approx(0.01).epsilon(1e-6));
  CHECK(psnr(x, y) == doctest::Approx(20.0).epsilon(1e-5));

  const Image<float> p = testing::pattern_image(s, 0.3);
  CHECK(ssim(p, p) == doctest::Approx(1.0).epsilon(1e-12));
  Image<float> neg(s, Vector<float>::Ones(s.size()) - p.data);
  CHECK(ssim(p, neg) < 0.5);
}

TEST_CASE("psnr is 10 log10(1/mse) whenever mse > 0") {
  for (int k = 0; k < 20; ++k) {
    const auto [a, b] = testing::metric_fixture(k);
    CHECK(psnr(a, b) == doctest::Approx(10 * std::log10(1 / mse(a, b))).epsilon(1e-14));
  }
}

TEST_CASE("metric errors") {
  CHECK_THROWS_AS(mse(Image<float>({4, 4, 1}), Image<float>({4, 5, 1})), ShapeError);
  CHECK_THROWS_AS(ssim(Image<float>({5, 5, 1}), Image<float>({5, 5, 1})), ShapeError);
}

TEST_CASE("face distance is zero on itself and symmetric") {
  const Shape s{32, 32, 3};
  const auto emb = random_embedder(s, 3);
  const auto a = testing::pattern_image(s, 0.1), b = testing::pattern_image(s, 2.0);
  CHECK(face_distance(emb, a, a) == 0.0);
  CHECK(face_distance(emb, a, b) == face_distance(emb, b, a));
  CHECK(face_distance(emb, a, b) > 0.0);
}

TEST_CASE("threshold calibration") {
  SUBCASE("separable distances") {
    const std::vector<LabeledDistance> pairs{{0.1, true}, {0.2, true}, {0.8, false}, {0.9, false}};
    const auto c = calibrate_threshold(pairs);
    CHECK(c.threshold > 0.2);
    CHECK(c.threshold < 0.8);
    CHECK(c.equal_error_rate == 0.0);
    CHECK(c.reliable);
    CHECK(c.pairs_used == 4);
  }
  SUBCASE("random labels are flagged") {
    Rng rng(5);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<LabeledDistance> pairs;
    for (int i = 0; i < 2000; ++i) pairs.push_back({u(rng), i % 2 == 0});
    std::shuffle(pairs.begin(), pairs.end(), rng);
    const auto c = calibrate_threshold(pairs);
    CHECK(c.equal_error_rate == doctest::Approx(0.5).epsilon(0.1));
    CHECK_FALSE(c.reliable);
  }
  SUBCASE("deterministic and optimal over the candidate midpoints") {
    Rng rng(9);
    std::normal_distribution<double> same(0.4, 0.15), diff(0.9, 0.15);
    std::vector<LabeledDistance> pairs;
    for (int i = 0; i < 300; ++i) pairs.push_back({i % 2 ? same(rng) : diff(rng), i % 2 == 1});
    const auto a = calibrate_threshold(pairs), b = calibrate_threshold(pairs);
    CHECK(a.threshold == b.threshold);
    std::vector<double> d;
    for (const auto& p : pairs) d.push_back(p.distance);
    std::sort(d.begin(), d.end());
    for (std::size_t i = 0; i + 1 < d.size(); ++i) {
      if (d[i] == d[i + 1]) continue;
      const double t = 0.5 * (d[i] + d[i + 1]);
      const double eer = std::max(false_accept_rate(pairs, t), false_reject_rate(pairs, t));
      CHECK(a.equal_error_rate <= eer + 1e-15);
    }
  }
  CHECK_THROWS(calibrate_threshold({}));
}

TEST_CASE("matching rate") {
  const Shape s{32, 32, 3};
  const auto emb = random_embedder(s, 4);
  std::vector<Image<float>> targets;
  for (int i = 0; i < 6; ++i) targets.push_back(testing::pattern_image(s, 0.9 * i));
  const ThresholdCalibration cal = calibrate_threshold({{0.01, true}, {0.5, false}});
  CHECK(matching_rate(emb, targets, targets, cal) == 1.0);

  SUBCASE("permutation invariance") {
    std::vector<double> d{0.1, 0.7, 0.2, 0.05, 0.9, 0.3};
    const ThresholdCalibration c = calibrate_threshold({{0.25, true}, {0.26, false}});
    const double base = matching_rate(d, c);
    std::reverse(d.begin(), d.end());
    CHECK(matching_rate(d, c) == base);
    std::rotate(d.begin(), d.begin() + 2, d.end());
    CHECK(matching_rate(d, c) == base);
    CHECK(base == doctest::Approx(3.0 / 6));
  }
  CHECK_THROWS_AS(matching_rate(emb, targets, {targets.front()}, cal), ShapeError);
}
