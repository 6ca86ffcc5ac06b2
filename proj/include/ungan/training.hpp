#pragma once

// Training loops for the desk model zoo. All use Adam and explicit seeds.

#include "ungan/dataset.hpp"
#include "ungan/model_zoo.hpp"

#include <vector>

namespace ungan {

struct AdamSettings {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
};

struct GanTrainConfig {
  int epochs = 20;
  int batch_size = 32;
  AdamSettings generator_optimizer;
  AdamSettings discriminator_optimizer;
  double r1_gamma = 0;  // (r1_gamma/2) ||grad_x D(real)||^2 added to the discriminator loss
  std::uint64_t seed = 1;
};

struct GanTrainResult {
  Generator<float> generator;
  Discriminator<float> discriminator;
  std::vector<double> discriminator_loss;  // per epoch
  std::vector<double> generator_loss;      // per epoch
};

// Non-saturating adversarial training on logits. `data` holds one flattened
// image per column.
GanTrainResult train_gan(const Matrix<float>& data, Generator<float> generator, Discriminator<float> discriminator,
                         const GanTrainConfig& config);

// Fraction of images the discriminator scores as real (logit > 0).
double discriminator_real_rate(const Discriminator<float>& d, const Matrix<float>& images);

struct EncoderLossWeights {
  double lambda_vgg = 5e-5;
  double lambda_adv = 0.1;
  double gamma = 10.0;
};

struct EncoderTrainConfig {
  int epochs = 40;
  int batch_size = 32;
  EncoderLossWeights weights;
  AdamSettings encoder_optimizer;
  AdamSettings critic_optimizer;
  std::uint64_t seed = 1;
};

struct EncoderTrainResult {
  Encoder<float> encoder;
  Discriminator<float> critic;
  // Per-epoch means of the encoder objective and its three terms.
  std::vector<double> loss;
  std::vector<double> pixel_term;
  std::vector<double> feature_term;
  std::vector<double> adversarial_term;
  std::vector<double> critic_loss;
};

// Encoder objective per image: ||x - G(E(x))|| + lambda_vgg ||F(x) - F(G(E(x)))||
// - lambda_adv D(G(E(x))). Critic objective: D(fake) - D(real) + gamma/2 ||grad_x D(real)||^2.
// The generator and feature extractor stay frozen; encoder and critic are updated
// alternately, starting from `encoder` and `critic`.
EncoderTrainResult train_target_encoder(const Generator<float>& g, Discriminator<float> critic,
                                        const Matrix<float>& data, const FeatureExtractor<float>& f,
                                        Encoder<float> encoder, const EncoderTrainConfig& config);

struct ClassifierTrainConfig {
  int epochs = 30;
  int batch_size = 32;
  int width = 16;
  int embedding_dim = 0;  // 0: features are the conv trunk output
  AdamSettings optimizer;
  std::uint64_t seed = 1;
};

struct ClassifierTrainResult {
  FrozenEmbedder<float> embedder;  // classifier with its head removed
  std::vector<double> loss;        // per-epoch mean cross-entropy
  double train_accuracy = 0;
};

// Trains a conv classifier on dataset identity labels and strips the
// classification head. Requires identities on every image.
ClassifierTrainResult train_identity_classifier(const Dataset& dataset, const ClassifierTrainConfig& config);

}  // namespace ungan
