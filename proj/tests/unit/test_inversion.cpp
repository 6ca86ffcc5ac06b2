#include <doctest.h>

#include "support.hpp"
#include "toy_models.hpp"
#include "ungan/inversion.hpp"

#include <limits>

using namespace ungan;

namespace {

// Brute-force minimizer of the pixel objective over z in [-5, 5], step 1e-3.
double grid_argmin(const Generator<double>& g, const Image<double>& x) {
  double best_z = 0, best = std::numeric_limits<double>::infinity();
  for (int i = -5000; i <= 5000; ++i) {
    const double z = i * 1e-3;
    const Image<double> y = generate(g, Latent<double>(Latent<double>::Constant(1, z)));
    const double loss = (y.data - x.data).squaredNorm() / double(x.data.size());
    if (loss < best) best = loss, best_z = z;
  }
  return best_z;
}

void check_non_divergence(const std::vector<LossRecord>& trace) {
  REQUIRE_FALSE(trace.empty());
  CHECK(trace.back().total <= 1.05 * trace.front().total + 1e-12);
}

InversionConfig pixel_only(int iterations, std::uint64_t seed) {
  InversionConfig c;
  c.iterations = iterations;
  c.weights = {0.0, 1.0};
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("reconstruction objective") {
  const auto f = testing::toy_extractor(1);
  const auto x = testing::toy_image(2);
  CHECK(reconstruction_objective(x, x, &f, {}).total == 0.0);

  Image<double> shifted = x;
  shifted.data.array() += 0.1;
  const auto pixel = reconstruction_objective(x, shifted, static_cast<const FeatureExtractor<double>*>(nullptr), {0, 1});
  CHECK(pixel.total == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(pixel.pixel == doctest::Approx(0.01).epsilon(1e-12));

  // Feature-space MSE recomputed from raw feature vectors with an explicit loop.
  const auto y = testing::toy_image(3);
  const Vector<double> fa = extract_features(f, x), fb = extract_features(f, y);
  double acc = 0;
  for (Eigen::Index i = 0; i < fa.size(); ++i) acc += (fa[i] - fb[i]) * (fa[i] - fb[i]);
  const auto perceptual = reconstruction_objective(x, y, &f, {1, 0});
  CHECK(perceptual.total == doctest::Approx(acc / double(fa.size())).epsilon(1e-12));
}

TEST_CASE("init_latent") {
  const LatentSpec spec{100};
  const auto zeros = init_latent<float>(InitMode::Zeros, spec, nullptr, nullptr, 0);
  CHECK(zeros.size() == 100);
  CHECK(zeros.isZero());
  CHECK(init_latent<float>(InitMode::Gaussian, spec, nullptr, nullptr, 5) ==
        init_latent<float>(InitMode::Gaussian, spec, nullptr, nullptr, 5));
  const auto e = testing::toy_encoder(4);
  const auto x = testing::toy_image(5);
  CHECK(init_latent(InitMode::Encoder, e.latent, &e, &x, 0) == encode(e, x));
  CHECK_THROWS(init_latent<double>(InitMode::Encoder, e.latent, nullptr, nullptr, 0));
}

TEST_CASE("invert_optimize") {
  const auto g = make_toy_affine_generator<double>(Shape{4, 4, 1});
  SUBCASE("already inverted") {
    const Latent<double> z0 = Latent<double>::Constant(1, 1.3);
    const auto r = invert_from(g, generate(g, z0), static_cast<const FeatureExtractor<double>*>(nullptr), z0, pixel_only(0, 0));
    REQUIRE(r.loss_trace.size() == 1);
    CHECK(r.loss_trace[0].total < 1e-6);
    CHECK(r.z_star == z0);
  }
  SUBCASE("toy target z=+3 agrees with the grid oracle") {
    const auto x = generate(g, Latent<double>(Latent<double>::Constant(1, 3.0)));
    const auto r = invert_optimize(g, x, static_cast<const FeatureExtractor<double>*>(nullptr), pixel_only(1000, 1));
    CHECK(std::abs(r.z_star[0] - grid_argmin(g, x)) < 1e-2);
    CHECK(r.loss_trace.size() == 1001);
    check_non_divergence(r.loss_trace);
  }
  SUBCASE("seed determinism") {
    const auto x = generate(g, Latent<double>(Latent<double>::Constant(1, -2.0)));
    const auto a = invert_optimize(g, x, static_cast<const FeatureExtractor<double>*>(nullptr), pixel_only(50, 9));
    const auto b = invert_optimize(g, x, static_cast<const FeatureExtractor<double>*>(nullptr), pixel_only(50, 9));
    CHECK(a.z_star == b.z_star);
    check_non_divergence(a.loss_trace);
  }
  SUBCASE("config errors") {
    const auto x = generate(g, Latent<double>(Latent<double>::Zero(1)));
    CHECK_THROWS_AS(invert_optimize(g, x, static_cast<const FeatureExtractor<double>*>(nullptr), pixel_only(-1, 0)), RangeError);
    InversionConfig enc = pixel_only(1, 0);
    enc.init_mode = InitMode::Encoder;
    CHECK_THROWS(invert_optimize(g, x, static_cast<const FeatureExtractor<double>*>(nullptr), enc));
    CHECK_THROWS_AS(invert_optimize(g, Image<double>(Shape{5, 4, 1}), static_cast<const FeatureExtractor<double>*>(nullptr),
                                    pixel_only(1, 0)),
                    ShapeError);
  }
}

TEST_CASE("invert_hybrid starts at the encoder's code") {
  CHECK(InversionConfig::hybrid().iterations == 100);
  CHECK(InversionConfig::hybrid().init_mode == InitMode::Encoder);
  CHECK(InversionConfig::optimization().iterations == 500);

  // A linear generator on the 4x4 toy image so encoder and generator share z.
  Generator<double> g{LatentSpec{3}, Family::Toy,
                      nn::Network<double>(Shape{1, 1, 3}, {nn::LayerSpec::linear(testing::kToyImage),
                                                           nn::LayerSpec::unit_tanh()})};
  g.net.initialize(6);
  const auto e = testing::toy_encoder(7);
  const auto f = testing::toy_extractor(8);
  const auto x = testing::toy_image(9);
  InversionConfig cfg = InversionConfig::hybrid();
  cfg.iterations = 20;
  const auto r = invert_hybrid(g, e, x, &f, cfg);
  const auto expected = reconstruction_objective(x, generate(g, encode(e, x)), &f, cfg.weights);
  CHECK(r.loss_trace[0].total == doctest::Approx(expected.total).epsilon(1e-12));
  check_non_divergence(r.loss_trace);
}
