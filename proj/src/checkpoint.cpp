#include "ungan/checkpoint.hpp"

#include "ungan/hash.hpp"

#include <json.hpp>

#include <cstring>
#include <fstream>

namespace ungan {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr int kManifestVersion = 1;
constexpr std::uint64_t kProbeSeed = 0x9e3779b97f4a7c15ULL;
constexpr int kProbeCount = 4;

json shape_json(const Shape& s) { return json::array({s.height, s.width, s.channels}); }

Shape shape_from(const json& j) { return {j.at(0).get<int>(), j.at(1).get<int>(), j.at(2).get<int>()}; }

json layer_json(const nn::LayerSpec& l) {
  return {{"kind", nn::to_string(l.kind)}, {"out_channels", l.out_channels}, {"kernel", l.kernel},
          {"stride", l.stride},            {"padding", l.padding},           {"slope", l.slope},
          {"lo", l.lo},                    {"hi", l.hi},                     {"out_shape", shape_json(l.out_shape)}};
}

nn::LayerSpec layer_from(const json& j) {
  nn::LayerSpec l;
  l.kind = nn::layer_kind_from_string(j.at("kind").get<std::string>());
  l.out_channels = j.at("out_channels").get<int>();
  l.kernel = j.at("kernel").get<int>();
  l.stride = j.at("stride").get<int>();
  l.padding = j.at("padding").get<int>();
  l.slope = j.at("slope").get<double>();
  l.lo = j.at("lo").get<double>();
  l.hi = j.at("hi").get<double>();
  l.out_shape = shape_from(j.at("out_shape"));
  return l;
}

bool latent_input(CheckpointKind kind) { return kind == CheckpointKind::Generator; }

std::string blob_of(const nn::Network<float>& net) {
  std::string blob;
  const std::size_t p = std::size_t(net.params().size()) * sizeof(float);
  const std::size_t b = std::size_t(net.buffers().size()) * sizeof(float);
  blob.resize(p + b);
  if (p) std::memcpy(blob.data(), net.params().data(), p);
  if (b) std::memcpy(blob.data() + p, net.buffers().data(), b);
  return blob;
}

CheckpointManifest write(const fs::path& dir, const nn::Network<float>& net, CheckpointKind kind, Family family,
                         int latent_dim, std::uint64_t seed) {
  fs::create_directories(dir);
  const std::string blob = blob_of(net);
  {
    std::ofstream out(dir / "weights.bin", std::ios::binary);
    out.write(blob.data(), std::streamsize(blob.size()));
    if (!out) throw Error("cannot write '" + (dir / "weights.bin").string() + "'");
  }
  CheckpointManifest m{kind,
                       family,
                       net.input_shape(),
                       net.output_shape(),
                       latent_dim,
                       seed,
                       net.layers(),
                       net.params().size(),
                       net.buffers().size(),
                       sha256_hex(blob),
                       probe_hash(net, latent_input(kind))};
  json layers = json::array();
  for (const auto& l : m.layers) layers.push_back(layer_json(l));
  json j{{"schema_version", kManifestVersion},
         {"kind", to_string(m.kind)},
         {"family", to_string(m.family)},
         {"input_shape", shape_json(m.input_shape)},
         {"output_shape", shape_json(m.output_shape)},
         {"latent_dim", m.latent_dim},
         {"seed", m.seed},
         {"layers", layers},
         {"num_params", m.num_params},
         {"num_buffers", m.num_buffers},
         {"content_hash", m.content_hash},
         {"probe_hash", m.probe_hash}};
  std::ofstream out(dir / "manifest.json");
  out << j.dump(2) << "\n";
  if (!out) throw Error("cannot write '" + (dir / "manifest.json").string() + "'");
  return m;
}

nn::Network<float> load_network(const fs::path& dir, CheckpointKind expected, CheckpointManifest* manifest_out) {
  const CheckpointManifest m = read_manifest(dir);
  if (m.kind != expected)
    throw KindError("checkpoint '" + dir.string() + "' holds a " + to_string(m.kind) + ", expected a " +
                    to_string(expected));
  std::ifstream in(dir / "weights.bin", std::ios::binary);
  if (!in) throw Error("cannot open '" + (dir / "weights.bin").string() + "'");
  std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (sha256_hex(blob) != m.content_hash)
    throw CorruptionError("weights in '" + dir.string() + "' do not match the manifest content hash");
  nn::Network<float> net(m.input_shape, m.layers);
  if (net.params().size() != m.num_params || net.buffers().size() != m.num_buffers ||
      blob.size() != std::size_t(m.num_params + m.num_buffers) * sizeof(float))
    throw CorruptionError("weights in '" + dir.string() + "' do not match the recorded architecture");
  if (m.num_params) std::memcpy(net.params().data(), blob.data(), std::size_t(m.num_params) * sizeof(float));
  if (m.num_buffers)
    std::memcpy(net.buffers().data(), blob.data() + std::size_t(m.num_params) * sizeof(float),
                std::size_t(m.num_buffers) * sizeof(float));
  if (probe_hash(net, latent_input(m.kind)) != m.probe_hash)
    throw CorruptionError("probe outputs of '" + dir.string() + "' do not match the manifest");
  if (manifest_out) *manifest_out = m;
  return net;
}

}  // namespace

std::string to_string(CheckpointKind kind) {
  switch (kind) {
    case CheckpointKind::Generator: return "generator";
    case CheckpointKind::Encoder: return "encoder";
    case CheckpointKind::FeatureExtractor: return "feature_extractor";
    case CheckpointKind::Embedding: return "embedding";
    case CheckpointKind::Discriminator: return "discriminator";
  }
  return "?";
}

CheckpointKind checkpoint_kind_from_string(const std::string& name) {
  for (auto k : {CheckpointKind::Generator, CheckpointKind::Encoder, CheckpointKind::FeatureExtractor,
                 CheckpointKind::Embedding, CheckpointKind::Discriminator})
    if (to_string(k) == name) return k;
  throw Error("unknown checkpoint kind '" + name + "'");
}

Matrix<float> probe_batch(const nn::Network<float>& net, bool latent) {
  Rng rng(kProbeSeed);
  const Eigen::Index n = net.input_shape().size();
  Matrix<float> batch(n, kProbeCount);
  if (latent) {
    for (int j = 0; j < kProbeCount; ++j) batch.col(j) = gaussian_vector<float>(n, rng);
  } else {
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    for (Eigen::Index i = 0; i < batch.size(); ++i) batch.data()[i] = float(uniform(rng));
  }
  return batch;
}

std::string probe_hash(const nn::Network<float>& net, bool latent) {
  return sha256_hex(net.forward(probe_batch(net, latent)));
}

CheckpointManifest save_checkpoint(const fs::path& dir, const Generator<float>& g, std::uint64_t seed) {
  return write(dir, g.net, CheckpointKind::Generator, g.family, g.latent.dim, seed);
}

CheckpointManifest save_checkpoint(const fs::path& dir, const Encoder<float>& e, std::uint64_t seed) {
  return write(dir, e.net, CheckpointKind::Encoder, Family::DcganLike, e.latent.dim, seed);
}

CheckpointManifest save_checkpoint(const fs::path& dir, const Discriminator<float>& d, std::uint64_t seed) {
  return write(dir, d.net, CheckpointKind::Discriminator, Family::DcganLike, 0, seed);
}

CheckpointManifest save_checkpoint(const fs::path& dir, const FrozenEmbedder<float>& f, CheckpointKind kind,
                                   std::uint64_t seed) {
  if (kind != CheckpointKind::FeatureExtractor && kind != CheckpointKind::Embedding)
    throw KindError("frozen embedders are saved as feature_extractor or embedding, not " + to_string(kind));
  return write(dir, f.net(), kind, Family::DcganLike, 0, seed);
}

CheckpointManifest read_manifest(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw Error("missing checkpoint manifest in '" + dir.string() + "'");
  json j;
  try {
    in >> j;
    if (j.at("schema_version").get<int>() != kManifestVersion)
      throw CorruptionError("unsupported manifest schema in '" + dir.string() + "'");
    CheckpointManifest m;
    m.kind = checkpoint_kind_from_string(j.at("kind").get<std::string>());
    m.family = family_from_string(j.at("family").get<std::string>());
    m.input_shape = shape_from(j.at("input_shape"));
    m.output_shape = shape_from(j.at("output_shape"));
    m.latent_dim = j.at("latent_dim").get<int>();
    m.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& l : j.at("layers")) m.layers.push_back(layer_from(l));
    m.num_params = j.at("num_params").get<Eigen::Index>();
    m.num_buffers = j.at("num_buffers").get<Eigen::Index>();
    m.content_hash = j.at("content_hash").get<std::string>();
    m.probe_hash = j.at("probe_hash").get<std::string>();
    return m;
  } catch (const json::exception& e) {
    throw CorruptionError("malformed manifest in '" + dir.string() + "': " + e.what());
  }
}

Generator<float> load_generator(const fs::path& dir) {
  CheckpointManifest m;
  auto net = load_network(dir, CheckpointKind::Generator, &m);
  return {LatentSpec{m.latent_dim}, m.family, std::move(net)};
}

Encoder<float> load_encoder(const fs::path& dir) {
  CheckpointManifest m;
  auto net = load_network(dir, CheckpointKind::Encoder, &m);
  return {LatentSpec{m.latent_dim}, std::move(net)};
}

Discriminator<float> load_discriminator(const fs::path& dir) {
  return {load_network(dir, CheckpointKind::Discriminator, nullptr)};
}

FeatureExtractor<float> load_feature_extractor(const fs::path& dir) {
  return FeatureExtractor<float>(load_network(dir, CheckpointKind::FeatureExtractor, nullptr));
}

IdentityEmbedder<float> load_embedder(const fs::path& dir) {
  return IdentityEmbedder<float>(load_network(dir, CheckpointKind::Embedding, nullptr));
}

}  // namespace ungan
