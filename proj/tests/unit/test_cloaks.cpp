#include <doctest.h>

#include "support.hpp"
#include "toy_models.hpp"
#include "ungan/cloaks.hpp"

#include <numeric>

using namespace ungan;

namespace {

template <typename S>
void check_budget(const Image<S>& x, const CloakResult<S>& r) {
  const double eps = r.config_used.epsilon;
  CHECK(r.cloaked.shape == x.shape);
  CHECK(double((r.cloaked.data - x.data).cwiseAbs().maxCoeff()) <= eps + 1e-6);
  CHECK(double(r.delta.data.cwiseAbs().maxCoeff()) <= eps + 1e-6);
  CHECK(r.cloaked.data.minCoeff() >= S(0));
  CHECK(r.cloaked.data.maxCoeff() <= S(1));
  CHECK(r.cloaked.data == clip_unit(Vector<S>(x.data + r.delta.data)));
}

CloakConfig toy_config(Scenario s, double kappa, int iterations, std::uint64_t seed, double eps = 0.05) {
  CloakConfig c;
  c.scenario = s;
  c.kappa = kappa;
  c.iterations = iterations;
  c.seed = seed;
  c.epsilon = eps;
  return c;
}

}  // namespace

TEST_CASE("latent similarity loss") {
  Vector<double> u(2), v(2);
  u << 1, 0;
  v << 0, 1;
  CHECK(latent_similarity_loss(u, u) == doctest::Approx(-1.0));
  CHECK(latent_similarity_loss(u, v) == doctest::Approx(1.0));

  // Against zero only the squared term remains.
  Vector<double> a(3);
  a << 0.5, -1, 2;
  CHECK(latent_similarity_loss(a, Vector<double>(Vector<double>::Zero(3))) == doctest::Approx(a.squaredNorm() / 3));

  // Frozen from tests/oracles/latent_loss_oracle.py.
  Vector<double> p(100), q(100);
  for (int i = 0; i < 100; ++i) p[i] = std::sin(0.3 * i + 0.1), q[i] = std::cos(0.17 * i) - 0.2;
  CHECK(std::abs(latent_similarity_loss(p, q) - 0.9991515119597784) < 1e-12);
}

TEST_CASE("projection and clipping") {
  Vector<double> d(2);
  d << 0.2, -0.3;
  const Vector<double> p = project_linf(d, 0.1);
  CHECK(p[0] == doctest::Approx(0.1));
  CHECK(p[1] == doctest::Approx(-0.1));
  CHECK(project_linf(p, 0.1) == p);
  Vector<double> inside(2);
  inside << 0.05, -0.02;
  CHECK(project_linf(inside, 0.1) == inside);

  Vector<double> c(2);
  c << 1.4, -0.2;
  const Vector<double> clipped = clip_unit(c);
  CHECK(clipped[0] == 1.0);
  CHECK(clipped[1] == 0.0);
  CHECK(Vector<double>(clip_unit(clipped)) == clipped);
}

TEST_CASE("budget schedule") {
  CHECK(budget_for(Family::StyleganLike, 1) == doctest::Approx(0.02));
  CHECK(budget_for(Family::DcganLike, 0) == doctest::Approx(0.01));
  CHECK(budget_for(Family::DcganLike, 9) == doctest::Approx(0.07));
  CHECK(budget_for(Family::StyleganLike, 4) == doctest::Approx(0.05));
  for (Family f : {Family::DcganLike, Family::WganLike, Family::StyleganLike}) {
    const auto s = budget_schedule(f);
    REQUIRE(s.size() == 10);
    for (std::size_t i = 1; i < s.size(); ++i) {
      CHECK(s[i] > s[i - 1]);
      CHECK(s[i] - s[i - 1] == doctest::Approx(s[1] - s[0]));
    }
  }
  CHECK_THROWS_AS(budget_for(Family::DcganLike, 10), RangeError);
  CHECK_THROWS(budget_schedule(Family::Toy));
}

TEST_CASE("kappa table cells") {
  CHECK(*kappa_table(Family::DcganLike, Scenario::V0, 0) == 0.7);
  CHECK(*kappa_table(Family::DcganLike, Scenario::V2, 9) == 0.2);
  CHECK(*kappa_table(Family::WganLike, Scenario::V3, 1) == 0.9);
  CHECK(*kappa_table(Family::StyleganLike, Scenario::V3, 3) == 0.3);
  CHECK_FALSE(kappa_table(Family::DcganLike, Scenario::V1, 0));
  CHECK_FALSE(kappa_table(Family::Toy, Scenario::V0, 0));
}

TEST_CASE("kappa grid search") {
  CHECK(grid_search_kappa({0.4}, [](double) { return 1.0; }) == 0.4);
  const auto grid = default_kappa_grid();
  REQUIRE(grid.size() == 11);
  CHECK(grid.front() == 0.0);
  CHECK(grid.back() == 1.0);
  CHECK(grid_search_kappa(grid, [](double k) { return (k - 0.3) * (k - 0.3); }) == doctest::Approx(0.3));
  CHECK(grid_search_kappa(grid, [](double) { return 0.5; }) == 0.0);
  CHECK_THROWS(grid_search_kappa(std::vector<double>{}, [](double) { return 0.0; }));

  // Full form: the cloak fills the image with kappa; the score is the distance of its mean from 0.3.
  const std::vector<Image<float>> xs(3, Image<float>::constant({4, 4, 1}, 0.5f));
  const double k = grid_search_kappa(
      [](const Image<float>& x, double kappa) { return Image<float>::constant(x.shape, float(kappa)); }, xs, grid,
      [](const std::vector<Image<float>>&, const std::vector<Image<float>>& cloaked) {
        double m = 0;
        for (const auto& c : cloaked) m += c.data.mean();
        return std::abs(m / double(cloaked.size()) - 0.3);
      });
  CHECK(k == doctest::Approx(0.3));
}

TEST_CASE("cloak config validation") {
  const auto f = testing::toy_extractor(1);
  const auto x = testing::toy_image(2);
  CHECK_THROWS_AS(cloak_feature_only(x, f, toy_config(Scenario::V1, 0, 1, 0, 0.0)), RangeError);
  CHECK_THROWS_AS(cloak_feature_only(x, f, toy_config(Scenario::V1, 0, 1, 0, 0.25)), RangeError);
  CHECK_THROWS_AS(cloak_feature_only(x, f, toy_config(Scenario::V1, 1.5, 1, 0)), RangeError);
  CHECK_THROWS_AS(cloak_feature_only(Image<double>({5, 4, 3}), f, toy_config(Scenario::V1, 0, 1, 0)), ShapeError);
}

TEST_CASE("objective gradients match central differences") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    CAPTURE(seed);
    const auto f = testing::toy_extractor(100 + seed);
    const auto e = testing::toy_encoder(200 + seed);
    const auto x = testing::toy_image(300 + seed);
    Vector<double> x_hat = x.data;
    Rng rng(seed);
    std::uniform_real_distribution<double> u(-0.05, 0.05);
    for (Eigen::Index i = 0; i < x_hat.size(); ++i) x_hat[i] += u(rng);
    const Latent<double> anchor = Latent<double>::Constant(3, 0.4) + Latent<double>::LinSpaced(3, -1, 1);

    CloakObjective<double> feature(x, f, 0.0);
    CloakObjective<double> away(x, f, 0.6);
    away.away_from(e, anchor);
    CloakObjective<double> zero(x, f, 0.3);
    zero.toward_zero(e);
    for (const CloakObjective<double>* obj : {&feature, &away, &zero}) {
      Vector<double> grad;
      obj->evaluate(x_hat, &grad);
      const Vector<double> fd =
          testing::central_difference([&](const Vector<double>& v) { return obj->evaluate(v, nullptr); }, x_hat);
      CHECK(testing::relative_error(grad, fd) < 1e-3);
    }
  }
}

TEST_CASE("degenerate budget leaves the image unchanged") {
  const auto f = testing::toy_extractor(3);
  const auto e = testing::toy_encoder(4);
  const auto x = testing::toy_image(5);
  const auto r = cloak_v2(x, e, f, toy_config(Scenario::V2, 0.5, 30, 1, 1e-9));
  check_budget(x, r);
  CHECK((r.cloaked.data - x.data).cwiseAbs().maxCoeff() <= 1e-9 + 1e-15);
  const auto [lo, hi] = std::minmax_element(r.objective_trace.begin(), r.objective_trace.end());
  CHECK(*hi - *lo < 1e-6);
}

TEST_CASE("zero iterations keep the projected initialization") {
  const auto f = testing::toy_extractor(6);
  const auto x = testing::toy_image(7);
  const auto r = cloak_feature_only(x, f, toy_config(Scenario::V1, 0, 0, 3));
  CHECK(r.objective_trace.size() == 1);
  check_budget(x, r);
  CHECK(r.delta.data.cwiseAbs().maxCoeff() > 0);
  const auto again = cloak_feature_only(x, f, toy_config(Scenario::V1, 0, 0, 3));
  CHECK(again.delta.data == r.delta.data);
}

TEST_CASE("kappa = 0 reduces every latent cloak to the feature-only search") {
  const auto f = testing::toy_extractor(8);
  const auto e = testing::toy_encoder(9);
  const auto x = testing::toy_image(10);
  const auto base = cloak_feature_only(x, f, toy_config(Scenario::V1, 0, 40, 11));
  const auto v0 = cloak_v0(x, e, f, Latent<double>(Latent<double>::Ones(3)), toy_config(Scenario::V0, 0, 40, 11));
  const auto v2 = cloak_v2(x, e, f, toy_config(Scenario::V2, 0, 40, 11));
  const auto v3 = cloak_v3(x, e, f, toy_config(Scenario::V3, 0, 40, 11));
  CHECK(v0.objective_trace == base.objective_trace);
  CHECK(v2.objective_trace == base.objective_trace);
  CHECK(v3.objective_trace == base.objective_trace);
  CHECK(v2.cloaked.data == base.cloaked.data);
}

TEST_CASE("v3 with the target encoder reproduces v2") {
  const auto f = testing::toy_extractor(12);
  const auto e = testing::toy_encoder(13);
  const auto x = testing::toy_image(14);
  const auto v2 = cloak_v2(x, e, f, toy_config(Scenario::V2, 0.7, 40, 2));
  const auto v3 = cloak_v3(x, e, f, toy_config(Scenario::V3, 0.7, 40, 2));
  CHECK(v2.objective_trace == v3.objective_trace);
  CHECK(v2.cloaked.data == v3.cloaked.data);
}

TEST_CASE("budget invariant across scenarios, budgets and seeds") {
  const auto f = testing::toy_extractor(15);
  const auto e = testing::toy_encoder(16);
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto x = testing::toy_image(20 + seed);
    for (double eps : {0.01, 0.07, 0.2}) {
      check_budget(x, cloak_v0(x, e, f, Latent<double>(Latent<double>::Ones(3)), toy_config(Scenario::V0, 0.5, 25, seed, eps)));
      check_budget(x, cloak_feature_only(x, f, toy_config(Scenario::V1, 0, 25, seed, eps)));
      check_budget(x, cloak_v2(x, e, f, toy_config(Scenario::V2, 0.5, 25, seed, eps)));
      check_budget(x, cloak_v3(x, e, f, toy_config(Scenario::V3, 1.0, 25, seed, eps)));
      check_budget(x, cloak_feature_only(x, f, toy_config(Scenario::V4, 0, 25, seed, eps)));
    }
  }
  // Saturated pixels stay inside the unit cube.
  const Image<double> white = Image<double>::constant(testing::kToyImage, 1.0);
  check_budget(white, cloak_feature_only(white, f, toy_config(Scenario::V1, 0, 10, 0, 0.2)));
}

TEST_CASE("shadow encoder") {
  const Shape s{32, 32, 3};
  const auto g = make_dcgan_generator(LatentSpec{16}, s, 1, 16);
  const auto init = make_encoder(s, g.latent, 2, 8);
  CHECK(std::abs(latent_recovery_cosine(g, init, 200, 3)) < 0.1);

  ShadowEncoderConfig cfg;
  cfg.steps = 0;
  CHECK(train_shadow_encoder_v0(g, init, cfg).encoder.net.params() == init.net.params());

  cfg.steps = 120;
  cfg.batch_size = 16;
  const auto r = train_shadow_encoder_v0(g, init, cfg);
  REQUIRE(r.loss.size() == 120);
  const auto mean = [](auto b, auto e) { return std::accumulate(b, e, 0.0) / double(e - b); };
  CHECK(mean(r.loss.end() - 10, r.loss.end()) < mean(r.loss.begin(), r.loss.begin() + 10));
  CHECK_THROWS_AS(train_shadow_encoder_v0(g, make_encoder(s, LatentSpec{8}, 2, 8), cfg), ShapeError);
}

TEST_CASE("stealing with zero steps returns the initialization") {
  const Shape s{32, 32, 3};
  const auto target = make_encoder(s, LatentSpec{16}, 4, 8);
  const auto student = make_encoder(s, LatentSpec{16}, 5, 8);
  const auto crafter = make_shadow_generator(LatentSpec{16}, s, 6, 8);
  StealConfig cfg;
  cfg.steps = 0;
  const auto r = steal_encoder(target, student, crafter, cfg);
  CHECK(r.encoder.net.params() == student.net.params());
  CHECK(r.generator.net.params() == crafter.net.params());
  CHECK(r.encoder_loss.empty());
}
