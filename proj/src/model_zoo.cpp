#include "ungan/model_zoo.hpp"

namespace ungan {

using nn::LayerSpec;

std::string to_string(Family family) {
  switch (family) {
    case Family::DcganLike: return "dcgan_like";
    case Family::WganLike: return "wgan_like";
    case Family::StyleganLike: return "stylegan_like";
    case Family::Toy: return "toy";
  }
  return "?";
}

Family family_from_string(const std::string& name) {
  for (auto f : {Family::DcganLike, Family::WganLike, Family::StyleganLike, Family::Toy})
    if (to_string(f) == name) return f;
  throw Error("unknown generator family '" + name + "'");
}

std::vector<Latent<float>> sample_latent(const LatentSpec& spec, int n, std::uint64_t seed) {
  if (spec.dim <= 0) throw ShapeError("latent dimension must be positive");
  if (n < 0) throw RangeError("sample count must be non-negative");
  Rng rng(seed);
  std::vector<Latent<float>> out;
  out.reserve(std::size_t(n));
  for (int i = 0; i < n; ++i) out.push_back(gaussian_vector<float>(spec.dim, rng));
  return out;
}

Matrix<float> sample_latent_matrix(const LatentSpec& spec, int n, std::uint64_t seed) {
  const auto codes = sample_latent(spec, n, seed);
  Matrix<float> m(spec.dim, n);
  for (int i = 0; i < n; ++i) m.col(i) = codes[std::size_t(i)];
  return m;
}

template <typename S>
Image<S> generate(const Generator<S>& g, const Latent<S>& z) {
  if (z.size() != g.latent.dim)
    throw ShapeError("latent has dimension " + std::to_string(z.size()) + ", generator expects " +
                     std::to_string(g.latent.dim));
  return Image<S>(g.output_shape(), g.net.forward(z));
}

template <typename S>
Matrix<S> generate_batch(const Generator<S>& g, const Matrix<S>& latents) {
  if (latents.rows() != g.latent.dim) throw ShapeError("latent batch has the wrong dimension");
  return g.net.forward(latents);
}

template <typename S>
Vector<S> extract_features(const FrozenEmbedder<S>& f, const Image<S>& x) {
  if (!(x.shape == f.input_shape()))
    throw ShapeError("feature extractor expects " + to_string(f.input_shape()) + ", got " + to_string(x.shape));
  return f.net().forward(x.data);
}

template <typename S>
Matrix<S> extract_features_batch(const FrozenEmbedder<S>& f, const Matrix<S>& images) {
  return f.net().forward(images);
}

template <typename S>
Latent<S> encode(const Encoder<S>& e, const Image<S>& x) {
  if (!(x.shape == e.input_shape()))
    throw ShapeError("encoder expects " + to_string(e.input_shape()) + ", got " + to_string(x.shape));
  return e.net.forward(x.data);
}

namespace {

void require_32(Shape image, const char* what) {
  if (image.height != 32 || image.width != 32)
    throw ShapeError(std::string(what) + " is built for 32x32 images, got " + to_string(image));
}

// Three stride-2 4x4 convolutions with leaky ReLU: 32x32 -> 4x4.
std::vector<LayerSpec> conv_trunk(int width) {
  return {LayerSpec::conv(width, 4, 2, 1),     LayerSpec::leaky_relu(0.2),
          LayerSpec::conv(2 * width, 4, 2, 1), LayerSpec::leaky_relu(0.2),
          LayerSpec::conv(4 * width, 4, 2, 1), LayerSpec::leaky_relu(0.2)};
}

}  // namespace

Generator<float> make_dcgan_generator(const LatentSpec& latent, Shape image, std::uint64_t seed, int width) {
  require_32(image, "dcgan generator");
  std::vector<LayerSpec> layers{
      LayerSpec::linear(Shape{4, 4, width}), LayerSpec::batch_norm(), LayerSpec::relu(),
      LayerSpec::conv_transpose(width / 2, 4, 2, 1), LayerSpec::batch_norm(), LayerSpec::relu(),
      LayerSpec::conv_transpose(width / 4, 4, 2, 1), LayerSpec::batch_norm(), LayerSpec::relu(),
      LayerSpec::conv_transpose(image.channels, 4, 2, 1), LayerSpec::unit_tanh()};
  Generator<float> g{latent, Family::DcganLike, nn::Network<float>(Shape{1, 1, latent.dim}, layers)};
  g.net.initialize(seed);
  return g;
}

Discriminator<float> make_discriminator(Shape image, std::uint64_t seed, int width) {
  require_32(image, "discriminator");
  auto layers = conv_trunk(width);
  layers.push_back(LayerSpec::linear(1));
  Discriminator<float> d{nn::Network<float>(image, layers)};
  d.net.initialize(seed);
  return d;
}

Encoder<float> make_encoder(Shape image, const LatentSpec& latent, std::uint64_t seed, int width) {
  require_32(image, "encoder");
  auto layers = conv_trunk(width);
  layers.push_back(LayerSpec::linear(latent.dim));
  Encoder<float> e{latent, nn::Network<float>(image, layers)};
  e.net.initialize(seed);
  return e;
}

nn::Network<float> make_feature_trunk(Shape image, std::uint64_t seed, int width) {
  require_32(image, "feature trunk");
  nn::Network<float> net(image, conv_trunk(width));
  net.initialize(seed);
  return net;
}

Generator<float> make_shadow_generator(const LatentSpec& latent, Shape image, std::uint64_t seed, int width) {
  require_32(image, "shadow generator");
  std::vector<LayerSpec> layers{
      LayerSpec::linear(Shape{4, 4, width}), LayerSpec::batch_norm(),
      LayerSpec::conv_transpose(width, 4, 2, 1), LayerSpec::batch_norm(), LayerSpec::relu(),
      LayerSpec::conv_transpose(width / 2, 4, 2, 1), LayerSpec::batch_norm(), LayerSpec::relu(),
      LayerSpec::conv_transpose(width / 4, 4, 2, 1), LayerSpec::batch_norm(), LayerSpec::relu(),
      LayerSpec::conv(width / 4, 3, 1, 1), LayerSpec::batch_norm(), LayerSpec::relu(),
      LayerSpec::conv(image.channels, 3, 1, 1), LayerSpec::unit_tanh()};
  Generator<float> g{latent, Family::DcganLike, nn::Network<float>(Shape{1, 1, latent.dim}, layers)};
  g.net.initialize(seed);
  return g;
}

Generator<float> make_mlp_generator(const LatentSpec& latent, int data_dim, std::uint64_t seed, int hidden) {
  std::vector<LayerSpec> layers{LayerSpec::linear(hidden), LayerSpec::relu(),
                                LayerSpec::linear(hidden), LayerSpec::relu(),
                                LayerSpec::linear(data_dim), LayerSpec::unit_tanh()};
  Generator<float> g{latent, Family::Toy, nn::Network<float>(Shape{1, 1, latent.dim}, layers)};
  g.net.initialize(seed);
  return g;
}

Discriminator<float> make_mlp_discriminator(int data_dim, std::uint64_t seed, int hidden) {
  std::vector<LayerSpec> layers{LayerSpec::linear(hidden), LayerSpec::leaky_relu(0.2),
                                LayerSpec::linear(hidden), LayerSpec::leaky_relu(0.2),
                                LayerSpec::linear(1)};
  Discriminator<float> d{nn::Network<float>(Shape{1, 1, data_dim}, layers)};
  d.net.initialize(seed);
  return d;
}

template <typename S>
Generator<S> make_toy_affine_generator(Shape image, double offset, double scale) {
  Generator<S> g{LatentSpec{1}, Family::Toy,
                 nn::Network<S>(Shape{1, 1, 1}, {LayerSpec::linear(image), LayerSpec::clip(0.0, 1.0)})};
  const Eigen::Index n = image.size();
  g.net.params().head(n).setConstant(S(scale));
  g.net.params().tail(n).setConstant(S(offset));
  return g;
}

template Image<float> generate(const Generator<float>&, const Latent<float>&);
template Image<double> generate(const Generator<double>&, const Latent<double>&);
template Matrix<float> generate_batch(const Generator<float>&, const Matrix<float>&);
template Matrix<double> generate_batch(const Generator<double>&, const Matrix<double>&);
template Vector<float> extract_features(const FrozenEmbedder<float>&, const Image<float>&);
template Vector<double> extract_features(const FrozenEmbedder<double>&, const Image<double>&);
template Matrix<float> extract_features_batch(const FrozenEmbedder<float>&, const Matrix<float>&);
template Matrix<double> extract_features_batch(const FrozenEmbedder<double>&, const Matrix<double>&);
template Latent<float> encode(const Encoder<float>&, const Image<float>&);
template Latent<double> encode(const Encoder<double>&, const Image<double>&);
template Generator<float> make_toy_affine_generator(Shape, double, double);
template Generator<double> make_toy_affine_generator(Shape, double, double);

}  // namespace ungan
