#include "ungan/zoo.hpp"

#include "ungan/checkpoint.hpp"

#include <json.hpp>

#include <chrono>
#include <fstream>

namespace ungan {

using json = nlohmann::json;

ZooConfig ZooConfig::desk() {
  ZooConfig c;
  c.gan.epochs = 80;
  c.gan.batch_size = 16;
  c.gan.generator_optimizer = {2e-4, 0.5, 0.999};
  c.gan.discriminator_optimizer = {2e-4, 0.5, 0.999};
  c.gan.r1_gamma = 1.0;
  c.gan.seed = 1;
  c.feature_extractor.embedding_dim = 0;
  c.feature_extractor.seed = 21;
  c.embedder.embedding_dim = 64;
  c.embedder.seed = 22;
  c.encoder.epochs = 40;
  c.encoder.critic_optimizer = {2e-4, 0.5, 0.999};
  c.encoder.seed = 13;
  c.shadow.steps = 3000;
  c.steal.steps = 1000;
  return c;
}

ZooConfig ZooConfig::tiny() {
  ZooConfig c = desk();
  c.sprites.identities = 6;
  c.gan.epochs = 1;
  c.feature_extractor.epochs = 1;
  c.embedder.epochs = 1;
  c.encoder.epochs = 1;
  c.shadow.steps = 2;
  c.shadow.eval_codes = 8;
  c.steal.steps = 2;
  c.calibration_pairs_per_class = 10;
  return c;
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

json calibration_json(const ThresholdCalibration& c) {
  json pairs = json::array();
  for (const auto& p : c.pairs) pairs.push_back({p.distance, p.same});
  return {{"threshold", c.threshold}, {"pairs_used", c.pairs_used},     {"method", c.method},
          {"equal_error_rate", c.equal_error_rate}, {"reliable", c.reliable}, {"pairs", pairs}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

}  // namespace

void save_calibration(const std::filesystem::path& path, const ThresholdCalibration& c) {
  write_text(path, calibration_json(c).dump(2) + "\n");
}

ThresholdCalibration load_calibration(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read calibration " + path.string());
  try {
    const json j = json::parse(in);
    ThresholdCalibration c;
    c.threshold = j.at("threshold").get<double>();
    c.pairs_used = j.at("pairs_used").get<int>();
    c.method = j.at("method").get<std::string>();
    c.equal_error_rate = j.at("equal_error_rate").get<double>();
    c.reliable = j.at("reliable").get<bool>();
    for (const auto& p : j.at("pairs")) c.pairs.push_back({p.at(0).get<double>(), p.at(1).get<bool>()});
    if (!(c.threshold > 0)) throw CorruptionError("calibration threshold must be positive");
    return c;
  } catch (const json::exception& e) {
    throw CorruptionError("malformed calibration " + path.string() + ": " + e.what());
  }
}

std::string build_zoo(const std::filesystem::path& root, const ZooConfig& config, const ZooLog& log) {
  auto say = [&](const std::string& s) {
    if (log) log(s);
  };
  const ZooPaths paths{root};
  std::filesystem::create_directories(root);
  json summary;
  const auto t_all = std::chrono::steady_clock::now();

  Dataset dataset = make_face_sprites(config.sprites);
  save_dataset(paths.dataset(), dataset);
  const Split split = split_dataset(dataset, config.hold_every);
  const Matrix<float> train = to_batch(split.train.images);
  const Matrix<float> held = to_batch(split.held_out.images);
  const Shape image = dataset.shape;
  const LatentSpec latent{config.latent_dim};
  summary["hold_every"] = config.hold_every;
  summary["dataset"] = {{"images", dataset.size()}, {"train", split.train.size()}, {"held_out", split.held_out.size()}};
  const std::uint64_t s = config.seed;

  auto t = std::chrono::steady_clock::now();
  say("training GAN");
  auto gan = train_gan(train, make_dcgan_generator(latent, image, s), make_discriminator(image, s + 1), config.gan);
  save_checkpoint(paths.generator(), gan.generator, s);
  save_checkpoint(paths.discriminator(), gan.discriminator, s + 1);
  summary["gan"] = {{"seconds", seconds_since(t)},
                    {"discriminator_loss", gan.discriminator_loss},
                    {"generator_loss", gan.generator_loss},
                    {"held_out_real_rate", discriminator_real_rate(gan.discriminator, held)}};

  t = std::chrono::steady_clock::now();
  say("training feature extractor");
  auto f = train_identity_classifier(split.train, config.feature_extractor);
  save_checkpoint(paths.feature_extractor(), f.embedder, CheckpointKind::FeatureExtractor, config.feature_extractor.seed);
  summary["feature_extractor"] = {{"seconds", seconds_since(t)}, {"loss", f.loss}, {"train_accuracy", f.train_accuracy}};

  t = std::chrono::steady_clock::now();
  say("training identity embedder");
  auto emb = train_identity_classifier(split.train, config.embedder);
  save_checkpoint(paths.embedder(), emb.embedder, CheckpointKind::Embedding, config.embedder.seed);
  const ThresholdCalibration calibration = calibrate_threshold(
      identity_pairs(emb.embedder, split.held_out, config.calibration_pairs_per_class, config.calibration_seed));
  save_calibration(paths.calibration(), calibration);
  summary["embedder"] = {{"seconds", seconds_since(t)},
                         {"loss", emb.loss},
                         {"train_accuracy", emb.train_accuracy},
                         {"threshold", calibration.threshold},
                         {"equal_error_rate", calibration.equal_error_rate},
                         {"reliable", calibration.reliable}};

  t = std::chrono::steady_clock::now();
  say("training target encoder");
  auto enc = train_target_encoder(gan.generator, make_discriminator(image, s + 3), train, f.embedder,
                                  make_encoder(image, latent, s + 4), config.encoder);
  save_checkpoint(paths.encoder(), enc.encoder, s + 4);
  save_checkpoint(paths.encoder_critic(), enc.critic, s + 3);
  summary["encoder"] = {{"seconds", seconds_since(t)},       {"loss", enc.loss},
                        {"pixel_term", enc.pixel_term},      {"feature_term", enc.feature_term},
                        {"adversarial_term", enc.adversarial_term}, {"critic_loss", enc.critic_loss}};

  t = std::chrono::steady_clock::now();
  say("training shadow encoder");
  auto shadow = train_shadow_encoder_v0(gan.generator, make_encoder(image, latent, s + 20), config.shadow);
  save_checkpoint(paths.shadow_encoder(), shadow.encoder, s + 20);
  summary["shadow_encoder"] = {{"seconds", seconds_since(t)},
                               {"first_loss", shadow.loss.empty() ? 0.0 : shadow.loss.front()},
                               {"last_loss", shadow.loss.empty() ? 0.0 : shadow.loss.back()},
                               {"held_out_loss", shadow.held_out_loss},
                               {"held_out_cosine", shadow.held_out_cosine}};

  t = std::chrono::steady_clock::now();
  say("stealing target encoder");
  const Matrix<float> probes = held.leftCols(std::min<Eigen::Index>(held.cols(), config.steal.probe_count));
  auto stolen = steal_encoder(enc.encoder, make_encoder(image, latent, s + 30),
                              make_shadow_generator(latent, image, s + 31), config.steal, &probes);
  save_checkpoint(paths.stolen_encoder(), stolen.encoder, s + 30);
  summary["stolen_encoder"] = {
      {"seconds", seconds_since(t)},
      {"agreement", stolen.agreement},
      {"untrained_agreement", encoder_agreement(make_encoder(image, latent, s + 30), enc.encoder, probes)},
      {"last_encoder_loss", stolen.encoder_loss.empty() ? 0.0 : stolen.encoder_loss.back()}};

  summary["seconds"] = seconds_since(t_all);
  const std::string text = summary.dump(2) + "\n";
  write_text(paths.summary(), text);
  return text;
}

bool zoo_complete(const std::filesystem::path& root) {
  const ZooPaths p{root};
  for (const auto& d : {p.generator(), p.discriminator(), p.feature_extractor(), p.embedder(), p.encoder(),
                        p.encoder_critic(), p.shadow_encoder(), p.stolen_encoder()})
    if (!std::filesystem::exists(d / "manifest.json")) return false;
  return std::filesystem::exists(p.calibration()) && std::filesystem::exists(p.summary()) &&
         std::filesystem::exists(p.dataset());
}

Zoo load_zoo(const std::filesystem::path& root) {
  const ZooPaths p{root};
  if (!zoo_complete(root)) throw Error("incomplete model zoo at " + root.string());
  Zoo z{p,
        load_dataset(p.dataset()),
        {},
        load_generator(p.generator()),
        load_discriminator(p.encoder_critic()),
        load_feature_extractor(p.feature_extractor()),
        load_embedder(p.embedder()),
        load_encoder(p.encoder()),
        load_encoder(p.shadow_encoder()),
        load_encoder(p.stolen_encoder()),
        load_calibration(p.calibration())};
  std::ifstream in(p.summary());
  try {
    z.hold_every = json::parse(in).value("hold_every", 5);
  } catch (const json::exception& e) {
    throw CorruptionError("malformed zoo summary: " + std::string(e.what()));
  }
  z.split = split_dataset(z.dataset, z.hold_every);
  return z;
}

}  // namespace ungan
