#include <doctest.h>

#include "support.hpp"
#include "ungan/latent_edit.hpp"

#include <numbers>

using namespace ungan;

namespace {

Vector<double> gaussian(int dim, Rng& rng) {
  std::normal_distribution<double> n(0, 1);
  Vector<double> v(dim);
  for (int i = 0; i < dim; ++i) v[i] = n(rng);
  return v;
}

double angle_degrees(const Vector<double>& a, const Vector<double>& b) {
  return std::acos(std::clamp(a.dot(b) / (a.norm() * b.norm()), -1.0, 1.0)) * 180 / std::numbers::pi;
}

}  // namespace

TEST_CASE("boundary recovers a planted direction") {
  Rng rng(1);
  std::vector<Vector<double>> z;
  std::vector<int> labels;
  for (int i = 0; i < 20000; ++i) {
    Vector<double> v = gaussian(5, rng);
    const int y = i % 2;
    v[0] += y ? 1.0 : -1.0;
    z.push_back(v);
    labels.push_back(y);
  }
  const auto d = fit_boundary(z, labels, "planted");
  const Vector<double> e1 = Vector<double>::Unit(5, 0);
  CHECK(angle_degrees(d.normal, e1) < 5.0);
  CHECK(d.normal.norm() == doctest::Approx(1.0));
  CHECK(d.train_accuracy > 0.75);
  CHECK(d.reliable);
  CHECK(d.attribute == "planted");

  std::vector<int> flipped;
  for (int y : labels) flipped.push_back(1 - y);
  const auto r = fit_boundary(z, flipped);
  CHECK((r.normal + d.normal).norm() < 1e-6);
}

TEST_CASE("random labels give chance accuracy and are flagged") {
  Rng rng(2);
  std::vector<Vector<double>> z;
  std::vector<int> labels;
  std::bernoulli_distribution coin(0.5);
  for (int i = 0; i < 1000; ++i) {
    z.push_back(gaussian(2, rng));
    labels.push_back(coin(rng));
  }
  const auto d = fit_boundary(z, labels);
  CHECK(d.train_accuracy == doctest::Approx(0.5).epsilon(0.1));
  CHECK_FALSE(d.reliable);
  CHECK_THROWS(fit_boundary(z, std::vector<int>(3, 1)));
}

TEST_CASE("edit algebra") {
  Rng rng(3);
  SemanticDirection d;
  d.normal = gaussian(8, rng).normalized();
  d.bias = 0.3;
  const Vector<double> z = gaussian(8, rng);
  CHECK(edit_latent(z, d, 0.0) == z);
  CHECK((edit_latent(edit_latent(z, d, 1.7), d, -1.7) - z).norm() < 1e-12);
  for (double alpha : {-2.0, 0.5, 3.0})
    CHECK(signed_distance(d, edit_latent(z, d, alpha)) - signed_distance(d, z) == doctest::Approx(alpha).epsilon(1e-12));
}

TEST_CASE("conditional direction") {
  const Vector<double> e1 = Vector<double>::Unit(4, 0), e2 = Vector<double>::Unit(4, 1);
  CHECK((conditional_direction(e1, e2) - e1).norm() < 1e-15);
  CHECK(conditional_direction(e1, e1).norm() < 1e-15);

  Rng rng(4);
  for (int i = 0; i < 1000; ++i) {
    const Vector<double> n1 = gaussian(12, rng).normalized(), n2 = gaussian(12, rng).normalized();
    const Vector<double> c = conditional_direction(n1, n2);
    CHECK(std::abs(c.dot(n2)) < 1e-6);

    // Moving along the conditional direction keeps the second separator's signed distance.
    SemanticDirection second;
    second.normal = n2;
    second.bias = -0.2;
    const Vector<double> z = gaussian(12, rng);
    CHECK(std::abs(signed_distance(second, z + 2.5 * c) - signed_distance(second, z)) < 1e-6);
  }
}

TEST_CASE("brightness labels split at the median") {
  const auto g = make_dcgan_generator(LatentSpec{8}, {32, 32, 3}, 9, 16);
  Rng rng(5);
  std::vector<Vector<double>> z;
  for (int i = 0; i < 40; ++i) z.push_back(gaussian(8, rng));
  const auto labels = brightness_labels(g, z);
  REQUIRE(labels.size() == 40);
  CHECK(std::count(labels.begin(), labels.end(), 1) == 20);
}
