#pragma once

// The desk model zoo: one directory holding the sprite dataset, the target GAN,
// target encoder, frozen feature extractor, identity embedder, the v0 shadow
// encoder, the v3 stolen encoder and the verification threshold.

#include "ungan/cloaks.hpp"
#include "ungan/dataset.hpp"
#include "ungan/metrics.hpp"
#include "ungan/training.hpp"

#include <filesystem>
#include <functional>
#include <string>

namespace ungan {

struct ZooConfig {
  SpriteConfig sprites;
  int hold_every = 5;
  int latent_dim = 100;
  GanTrainConfig gan;
  ClassifierTrainConfig feature_extractor;
  ClassifierTrainConfig embedder;
  EncoderTrainConfig encoder;
  ShadowEncoderConfig shadow;
  StealConfig steal;
  int calibration_pairs_per_class = 100;
  std::uint64_t calibration_seed = 3;
  std::uint64_t seed = 11;  // architecture initialization

  // The recipe used by the acceptance suite.
  static ZooConfig desk();
  // Seconds-scale variant for smoke tests; the models are not useful.
  static ZooConfig tiny();
};

struct ZooPaths {
  std::filesystem::path root;
  [[nodiscard]] std::filesystem::path dataset() const { return root / "dataset"; }
  [[nodiscard]] std::filesystem::path generator() const { return root / "generator"; }
  [[nodiscard]] std::filesystem::path discriminator() const { return root / "discriminator"; }
  [[nodiscard]] std::filesystem::path feature_extractor() const { return root / "feature_extractor"; }
  [[nodiscard]] std::filesystem::path embedder() const { return root / "embedder"; }
  [[nodiscard]] std::filesystem::path encoder() const { return root / "encoder"; }
  [[nodiscard]] std::filesystem::path encoder_critic() const { return root / "encoder_critic"; }
  [[nodiscard]] std::filesystem::path shadow_encoder() const { return root / "shadow_encoder"; }
  [[nodiscard]] std::filesystem::path stolen_encoder() const { return root / "stolen_encoder"; }
  [[nodiscard]] std::filesystem::path calibration() const { return root / "calibration.json"; }
  [[nodiscard]] std::filesystem::path summary() const { return root / "zoo.json"; }
};

using ZooLog = std::function<void(const std::string&)>;

// Trains everything into `root` (created if missing). Returns the summary JSON text.
std::string build_zoo(const std::filesystem::path& root, const ZooConfig& config, const ZooLog& log = {});
bool zoo_complete(const std::filesystem::path& root);

struct Zoo {
  ZooPaths paths;
  Dataset dataset;
  Split split;
  Generator<float> generator;
  Discriminator<float> encoder_critic;
  FeatureExtractor<float> feature_extractor;
  IdentityEmbedder<float> embedder;
  Encoder<float> encoder;
  Encoder<float> shadow_encoder;
  Encoder<float> stolen_encoder;
  ThresholdCalibration calibration;
  int hold_every = 5;
};

Zoo load_zoo(const std::filesystem::path& root);

void save_calibration(const std::filesystem::path& path, const ThresholdCalibration& c);
ThresholdCalibration load_calibration(const std::filesystem::path& path);

}  // namespace ungan
