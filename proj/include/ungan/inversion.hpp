#pragma once

// Optimization-based and hybrid GAN inversion.

#include "ungan/model_zoo.hpp"

#include <optional>
#include <string>
#include <vector>

namespace ungan {

enum class InitMode { Gaussian, Zeros, Encoder };

std::string to_string(InitMode mode);
InitMode init_mode_from_string(const std::string& name);

struct ReconstructionWeights {
  double perceptual = 1.0;
  double pixel = 1.0;
};

// Adam on the latent code.
struct StepRule {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
};

struct InversionConfig {
  int iterations = 500;
  InitMode init_mode = InitMode::Gaussian;
  StepRule step_rule;
  ReconstructionWeights weights;
  std::uint64_t seed = 0;

  static InversionConfig optimization() { return {}; }
  static InversionConfig hybrid() {
    InversionConfig c;
    c.iterations = 100;
    c.init_mode = InitMode::Encoder;
    return c;
  }
};

void validate(const InversionConfig& config);

struct LossRecord {
  int iteration = 0;
  double total = 0;
  double perceptual = 0;
  double pixel = 0;
};

template <typename Scalar = float>
struct InversionResult {
  Latent<Scalar> z_star;
  Image<Scalar> reconstruction;
  std::vector<LossRecord> loss_trace;  // iterations + 1 entries, the first at the initial code
};

template <typename Scalar>
struct ReconstructionLoss {
  double total = 0;
  double perceptual = 0;  // mean squared feature difference
  double pixel = 0;       // mean squared pixel difference
  Vector<Scalar> grad;    // d total / d reconstruction, when requested
};

// weights.perceptual * MSE(F(x), F(x')) + weights.pixel * MSE(x, x'). The
// extractor may be null when the perceptual weight is zero.
template <typename Scalar>
ReconstructionLoss<Scalar> reconstruction_objective(const Image<Scalar>& x, const Image<Scalar>& reconstruction,
                                                    const FeatureExtractor<Scalar>* percept,
                                                    const ReconstructionWeights& weights, bool with_grad = false);

// gaussian: seeded standard normal; zeros: zero vector; encoder: E(x).
template <typename Scalar>
Latent<Scalar> init_latent(InitMode mode, const LatentSpec& spec, const Encoder<Scalar>* encoder,
                           const Image<Scalar>* x, std::uint64_t seed);

// Gradient descent (Adam) on the latent from an explicit starting code.
template <typename Scalar>
InversionResult<Scalar> invert_from(const Generator<Scalar>& g, const Image<Scalar>& x,
                                    const FeatureExtractor<Scalar>* percept, Latent<Scalar> z0,
                                    const InversionConfig& config);

// init_mode must be gaussian or zeros.
template <typename Scalar>
InversionResult<Scalar> invert_optimize(const Generator<Scalar>& g, const Image<Scalar>& x,
                                        const FeatureExtractor<Scalar>* percept, const InversionConfig& config);

// Starts from E(x); the initial trace entry is the objective at G(E(x)).
template <typename Scalar>
InversionResult<Scalar> invert_hybrid(const Generator<Scalar>& g, const Encoder<Scalar>& e, const Image<Scalar>& x,
                                      const FeatureExtractor<Scalar>* percept, const InversionConfig& config);

#define UNGAN_INVERSION_EXTERN(S)                                                                                    \
  extern template ReconstructionLoss<S> reconstruction_objective(const Image<S>&, const Image<S>&,                \
                                                                 const FeatureExtractor<S>*,                      \
                                                                 const ReconstructionWeights&, bool);             \
  extern template Latent<S> init_latent(InitMode, const LatentSpec&, const Encoder<S>*, const Image<S>*,          \
                                        std::uint64_t);                                                           \
  extern template InversionResult<S> invert_from(const Generator<S>&, const Image<S>&, const FeatureExtractor<S>*, \
                                                 Latent<S>, const InversionConfig&);                              \
  extern template InversionResult<S> invert_optimize(const Generator<S>&, const Image<S>&,                        \
                                                     const FeatureExtractor<S>*, const InversionConfig&);         \
  extern template InversionResult<S> invert_hybrid(const Generator<S>&, const Encoder<S>&, const Image<S>&,       \
                                                   const FeatureExtractor<S>*, const InversionConfig&);
UNGAN_INVERSION_EXTERN(float)
UNGAN_INVERSION_EXTERN(double)
#undef UNGAN_INVERSION_EXTERN

}  // namespace ungan
