#pragma once

// Checkpoint directory = weights.bin (float32 params then buffers, native byte
// order) + manifest.json.

#include "ungan/model_zoo.hpp"

#include <filesystem>
#include <string>

namespace ungan {

enum class CheckpointKind { Generator, Encoder, FeatureExtractor, Embedding, Discriminator };

std::string to_string(CheckpointKind kind);
CheckpointKind checkpoint_kind_from_string(const std::string& name);

struct CheckpointManifest {
  CheckpointKind kind = CheckpointKind::Generator;
  Family family = Family::DcganLike;
  Shape input_shape;
  Shape output_shape;
  int latent_dim = 0;  // generators and encoders
  std::uint64_t seed = 0;
  std::vector<nn::LayerSpec> layers;
  Eigen::Index num_params = 0;
  Eigen::Index num_buffers = 0;
  std::string content_hash;  // SHA-256 of weights.bin
  std::string probe_hash;    // SHA-256 of the outputs on the fixed probe batch
};

// Fixed probe batch for a network input (latent codes or images).
Matrix<float> probe_batch(const nn::Network<float>& net, bool latent_input);
std::string probe_hash(const nn::Network<float>& net, bool latent_input);

CheckpointManifest save_checkpoint(const std::filesystem::path& dir, const Generator<float>& g, std::uint64_t seed);
CheckpointManifest save_checkpoint(const std::filesystem::path& dir, const Encoder<float>& e, std::uint64_t seed);
CheckpointManifest save_checkpoint(const std::filesystem::path& dir, const Discriminator<float>& d, std::uint64_t seed);
// kind must be FeatureExtractor or Embedding.
CheckpointManifest save_checkpoint(const std::filesystem::path& dir, const FrozenEmbedder<float>& f,
                                   CheckpointKind kind, std::uint64_t seed);

CheckpointManifest read_manifest(const std::filesystem::path& dir);

// Each loader checks the manifest kind (KindError), the blob hash and the probe
// hash (CorruptionError).
Generator<float> load_generator(const std::filesystem::path& dir);
Encoder<float> load_encoder(const std::filesystem::path& dir);
Discriminator<float> load_discriminator(const std::filesystem::path& dir);
FeatureExtractor<float> load_feature_extractor(const std::filesystem::path& dir);
IdentityEmbedder<float> load_embedder(const std::filesystem::path& dir);

}  // namespace ungan
