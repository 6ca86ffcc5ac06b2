#pragma once

#include "ungan/core.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace ungan {

struct AttributeLabel {
  std::string file;
  std::string attribute;
  int label = 0;  // 0 or 1
};

// A directory of PNG images with optional sidecars:
//   attributes.csv  file,attribute,label   (label in {0,1})
//   identities.csv  file,identity
struct Dataset {
  Shape shape;
  std::vector<std::string> names;
  std::vector<Image<float>> images;
  std::vector<int> identities;  // -1 where unknown
  std::vector<AttributeLabel> attributes;

  [[nodiscard]] std::size_t size() const { return images.size(); }
  [[nodiscard]] bool has_identities() const;
  [[nodiscard]] Dataset subset(const std::vector<std::size_t>& indices) const;
  // Per-image label of one attribute, -1 where the sidecar has no row.
  [[nodiscard]] std::vector<int> attribute_labels(const std::string& attribute) const;
};

Dataset load_dataset(const std::filesystem::path& dir);
void save_dataset(const std::filesystem::path& dir, const Dataset& dataset);

// Procedural face-like sprites: each identity fixes face geometry, skin, hair,
// eye colour and glasses; each image jitters position, lighting and smile.
struct SpriteConfig {
  int identities = 100;
  int per_identity = 10;
  int size = 32;
  std::uint64_t seed = 2023;
};

Dataset make_face_sprites(const SpriteConfig& config);

// Deterministic train/held-out split: every k-th image per identity is held out.
struct Split {
  Dataset train;
  Dataset held_out;
};
Split split_dataset(const Dataset& dataset, int hold_every);

}  // namespace ungan
