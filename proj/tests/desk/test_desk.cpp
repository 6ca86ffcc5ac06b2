// Measured properties of the trained desk zoo. The zoo directory comes from
// UNGAN_DESK_ZOO (environment) or the path baked in at configure time.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ungan/checkpoint.hpp"
#include "ungan/hash.hpp"
#include "ungan/inversion.hpp"
#include "ungan/zoo.hpp"

#include <cstdlib>
#include <fstream>

using namespace ungan;
namespace fs = std::filesystem;

namespace {

const Zoo& zoo() {
  static const Zoo z = [] {
    const char* env = std::getenv("UNGAN_DESK_ZOO");
    return load_zoo(env ? env : UNGAN_DESK_ZOO_DEFAULT);
  }();
  return z;
}

std::vector<Image<float>> generated(int n, std::uint64_t seed) {
  std::vector<Image<float>> out;
  for (const auto& z : sample_latent(zoo().generator.latent, n, seed)) out.push_back(generate(zoo().generator, z));
  return out;
}

std::string golden(const std::string& name) {
  std::ifstream in(fs::path(UNGAN_GOLDEN_DIR) / name);
  std::string s;
  in >> s;
  return s;
}

}  // namespace

TEST_CASE("trained generator matches its golden image hash") {
  const auto z = sample_latent(zoo().generator.latent, 1, 2024).front();
  CHECK(sha256_hex(generate(zoo().generator, z).data) == golden("desk_generator_image.sha256"));
}

TEST_CASE("discriminator accepts a plausible share of held-out real images") {
  const auto d = load_discriminator(zoo().paths.discriminator());
  const double rate = discriminator_real_rate(d, to_batch(zoo().split.held_out.images));
  MESSAGE("held-out real rate " << rate);
  CHECK(rate > 0.3);
  CHECK(rate < 0.99);
}

TEST_CASE("target encoder beats random codes") {
  const auto images = generated(100, 515);
  const auto random = sample_latent(zoo().generator.latent, 100, 616);
  double enc = 0, rnd = 0;
  for (std::size_t j = 0; j < images.size(); ++j) {
    enc += mse(generate(zoo().generator, encode(zoo().encoder, images[j])), images[j]);
    rnd += mse(generate(zoo().generator, random[j]), images[j]);
  }
  MESSAGE("mean MSE: encoder " << enc / 100 << ", random " << rnd / 100);
  CHECK(enc < rnd);
}

TEST_CASE("distinct dataset images have distinct features") {
  const auto& imgs = zoo().dataset.images;
  const auto& f = zoo().feature_extractor;
  CHECK(cosine_similarity(extract_features(f, imgs[0]), extract_features(f, imgs[1])) < 1.0f);
}

TEST_CASE("optimization inversion lowers the pixel error") {
  const auto images = generated(100, 717);
  int improved = 0;
  for (std::size_t j = 0; j < images.size(); ++j) {
    InversionConfig c;
    c.seed = j;
    const auto r = invert_optimize(zoo().generator, images[j], &zoo().feature_extractor, c);
    improved += r.loss_trace.back().pixel < r.loss_trace.front().pixel;
    CHECK(r.loss_trace.back().total <= r.loss_trace.front().total * 1.05);
  }
  MESSAGE(improved << " / 100 improved");
  CHECK(improved >= 95);
}

TEST_CASE("shadow encoder recovers latent codes") {
  const double cos = latent_recovery_cosine(zoo().generator, zoo().shadow_encoder, 200, 818);
  MESSAGE("held-out latent cosine " << cos);
  CHECK(cos > 0.5);
}

TEST_CASE("stolen encoder agrees with the target better than an untrained one") {
  std::vector<Image<float>> probes(zoo().dataset.images.begin(), zoo().dataset.images.begin() + 200);
  const Matrix<float> batch = to_batch(probes);
  const double stolen = encoder_agreement(zoo().stolen_encoder, zoo().encoder, batch);
  const auto fresh = make_encoder(zoo().encoder.input_shape(), zoo().encoder.latent, 919);
  const double untrained = encoder_agreement(fresh, zoo().encoder, batch);
  MESSAGE("agreement: stolen " << stolen << ", untrained " << untrained);
  CHECK(stolen > untrained);
}

TEST_CASE("feature-only cloaks push features apart") {
  const auto images = generated(50, 4242);
  CloakConfig c;
  c.scenario = Scenario::V1;
  c.epsilon = budget_for(zoo().generator.family, kBudgetLevels - 1);
  int lowered = 0;
  const auto& f = zoo().feature_extractor;
  for (std::size_t j = 0; j < images.size(); ++j) {
    c.seed = j;
    c.iterations = 0;
    const auto start = cloak_feature_only(images[j], f, c);
    c.iterations = 500;
    const auto done = cloak_feature_only(images[j], f, c);
    const auto fx = extract_features(f, images[j]);
    lowered += cosine_similarity(extract_features(f, done.cloaked), fx) <
               cosine_similarity(extract_features(f, start.cloaked), fx);
  }
  MESSAGE(lowered << " / 50 lowered");
  CHECK(lowered >= 45);
}

TEST_CASE("identity embedder separates identities") {
  const auto pairs = identity_pairs(zoo().embedder, zoo().split.held_out, 100, 21);
  double same = 0, diff = 0;
  int ns = 0, nd = 0;
  for (const auto& p : pairs) (p.same ? (same += p.distance, ++ns) : (diff += p.distance, ++nd));
  MESSAGE("mean distance: same " << same / ns << ", different " << diff / nd);
  CHECK(same / ns < diff / nd);
  CHECK(zoo().calibration.reliable);
}

TEST_CASE("unrelated identities do not match") {
  const auto& held = zoo().split.held_out;
  std::vector<Image<float>> targets, others;
  for (std::size_t i = 0; i < held.size() && targets.size() < 200; ++i) {
    for (std::size_t k = 1; k < held.size(); ++k) {
      const std::size_t o = (i + k * 7) % held.size();
      if (held.identities[o] != held.identities[i]) {
        targets.push_back(held.images[i]);
        others.push_back(held.images[o]);
        break;
      }
    }
  }
  const double rate = matching_rate(zoo().embedder, targets, others, zoo().calibration);
  const double self = matching_rate(zoo().embedder, targets, targets, zoo().calibration);
  MESSAGE("cross-identity matching rate " << rate << ", self " << self);
  CHECK(rate <= 0.15);
  CHECK(self == 1.0);
}
