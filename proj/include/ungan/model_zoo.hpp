#pragma once

// Generator / encoder / feature-extractor / discriminator handles and the
// desk-scale architectures used to build them.

#include "ungan/core.hpp"
#include "ungan/nn.hpp"

#include <string>
#include <vector>

namespace ungan {

enum class Prior { StandardGaussian };

struct LatentSpec {
  int dim = 0;
  Prior prior = Prior::StandardGaussian;
  bool operator==(const LatentSpec&) const = default;
};

enum class Family { DcganLike, WganLike, StyleganLike, Toy };

std::string to_string(Family family);
Family family_from_string(const std::string& name);

template <typename Scalar = float>
struct Generator {
  LatentSpec latent;
  Family family = Family::DcganLike;
  nn::Network<Scalar> net;

  [[nodiscard]] Shape output_shape() const { return net.output_shape(); }
  template <typename Other>
  [[nodiscard]] Generator<Other> cast() const {
    return {latent, family, net.template cast<Other>()};
  }
};

template <typename Scalar = float>
struct Encoder {
  LatentSpec latent;
  nn::Network<Scalar> net;

  [[nodiscard]] Shape input_shape() const { return net.input_shape(); }
  template <typename Other>
  [[nodiscard]] Encoder<Other> cast() const {
    return {latent, net.template cast<Other>()};
  }
};

template <typename Scalar = float>
struct Discriminator {
  nn::Network<Scalar> net;
  [[nodiscard]] Shape input_shape() const { return net.input_shape(); }
};

// A frozen network mapping images to a fixed-length vector. Parameters cannot
// be reached mutably once constructed.
template <typename Scalar = float>
class FrozenEmbedder {
 public:
  FrozenEmbedder() = default;
  explicit FrozenEmbedder(nn::Network<Scalar> net) : net_(std::move(net)) {}

  [[nodiscard]] const nn::Network<Scalar>& net() const { return net_; }
  [[nodiscard]] Shape input_shape() const { return net_.input_shape(); }
  [[nodiscard]] int feature_dim() const { return int(net_.output_size()); }
  template <typename Other>
  [[nodiscard]] FrozenEmbedder<Other> cast() const {
    return FrozenEmbedder<Other>(net_.template cast<Other>());
  }

 private:
  nn::Network<Scalar> net_;
};

// The defender's / adversary's frozen feature extractor F.
template <typename Scalar = float>
using FeatureExtractor = FrozenEmbedder<Scalar>;
// The identity model used for face verification (embedding distances).
template <typename Scalar = float>
using IdentityEmbedder = FrozenEmbedder<Scalar>;

// ---------------------------------------------------------------------------
// Operations

// n i.i.d. standard-Gaussian codes; identical seed gives identical codes.
std::vector<Latent<float>> sample_latent(const LatentSpec& spec, int n, std::uint64_t seed);
// Same codes as the columns of a (dim x n) matrix.
Matrix<float> sample_latent_matrix(const LatentSpec& spec, int n, std::uint64_t seed);

template <typename Scalar>
Image<Scalar> generate(const Generator<Scalar>& g, const Latent<Scalar>& z);
template <typename Scalar>
Matrix<Scalar> generate_batch(const Generator<Scalar>& g, const Matrix<Scalar>& latents);

template <typename Scalar>
Vector<Scalar> extract_features(const FrozenEmbedder<Scalar>& f, const Image<Scalar>& x);
template <typename Scalar>
Matrix<Scalar> extract_features_batch(const FrozenEmbedder<Scalar>& f, const Matrix<Scalar>& images);

template <typename Scalar>
Latent<Scalar> encode(const Encoder<Scalar>& e, const Image<Scalar>& x);

// ---------------------------------------------------------------------------
// Desk-scale architectures (all randomly initialized from `seed`).

// DCGAN-style: linear -> 3 x (transposed conv, batch-norm, ReLU) -> unit tanh.
Generator<float> make_dcgan_generator(const LatentSpec& latent, Shape image, std::uint64_t seed, int width = 64);
// Strided-conv critic producing one logit per image.
Discriminator<float> make_discriminator(Shape image, std::uint64_t seed, int width = 16);
// Strided-conv encoder producing a latent code.
Encoder<float> make_encoder(Shape image, const LatentSpec& latent, std::uint64_t seed, int width = 16);
// Convolutional trunk whose flattened last stage is the feature vector.
nn::Network<float> make_feature_trunk(Shape image, std::uint64_t seed, int width = 16);
// Linear layer on Gaussian noise followed by five conv and five batch-norm layers.
Generator<float> make_shadow_generator(const LatentSpec& latent, Shape image, std::uint64_t seed, int width = 32);
// Small MLP generator for low-dimensional toy data (output shape 1 x 1 x dim).
Generator<float> make_mlp_generator(const LatentSpec& latent, int data_dim, std::uint64_t seed, int hidden = 32);
Discriminator<float> make_mlp_discriminator(int data_dim, std::uint64_t seed, int hidden = 32);

// G(z) = clip(offset + scale * z) broadcast over every pixel (one latent dim).
template <typename Scalar = float>
Generator<Scalar> make_toy_affine_generator(Shape image, double offset = 0.5, double scale = 0.1);

extern template Image<float> generate(const Generator<float>&, const Latent<float>&);
extern template Image<double> generate(const Generator<double>&, const Latent<double>&);
extern template Matrix<float> generate_batch(const Generator<float>&, const Matrix<float>&);
extern template Matrix<double> generate_batch(const Generator<double>&, const Matrix<double>&);
extern template Vector<float> extract_features(const FrozenEmbedder<float>&, const Image<float>&);
extern template Vector<double> extract_features(const FrozenEmbedder<double>&, const Image<double>&);
extern template Matrix<float> extract_features_batch(const FrozenEmbedder<float>&, const Matrix<float>&);
extern template Matrix<double> extract_features_batch(const FrozenEmbedder<double>&, const Matrix<double>&);
extern template Latent<float> encode(const Encoder<float>&, const Image<float>&);
extern template Latent<double> encode(const Encoder<double>&, const Image<double>&);
extern template Generator<float> make_toy_affine_generator(Shape, double, double);
extern template Generator<double> make_toy_affine_generator(Shape, double, double);

}  // namespace ungan
