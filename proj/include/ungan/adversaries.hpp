#pragma once

// Adaptive adversaries that try to undo a cloak: noise overwriting, spatial
// smoothing, longer inversion and encoder retraining on cloaked images.

#include "ungan/inversion.hpp"
#include "ungan/training.hpp"

#include <string>
#include <vector>

namespace ungan {

enum class Strategy { Overwrite, Purify, MoreIterations, EncoderEnhancement };

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& name);

inline constexpr int kMaxInversionIterations = 5000;
inline constexpr double kMaxOverwriteSigma = 1.0;
inline constexpr int kMaxFilterWidth = 31;

struct AdaptiveConfig {
  Strategy strategy = Strategy::Overwrite;
  double sigma = 0.0;     // overwrite
  int filter_width = 1;   // purify
  int iterations = 1000;  // more_iterations
  int cloaked_count = 0;  // encoder_enhancement
  std::uint64_t seed = 0;
};

void validate(const AdaptiveConfig& config);

// clip(x + N(0, sigma^2)), seeded.
Image<float> overwrite_cloak(const Image<float>& x, double sigma, std::uint64_t seed);

// Per-channel box filter of odd width with edge padding.
Image<float> purify(const Image<float>& x, int filter_width);

// Inversion with an extended iteration budget. With an encoder the start code
// is E(x) (hybrid), otherwise the config's gaussian or zeros start.
InversionResult<float> invert_extended(const Generator<float>& g, const Encoder<float>* encoder, const Image<float>& x,
                                       const FeatureExtractor<float>* percept, int iterations,
                                       InversionConfig config = {});

// Continues encoder training from `target` on the clean and cloaked images together.
EncoderTrainResult retrain_encoder(const Encoder<float>& target, const Generator<float>& g, Discriminator<float> critic,
                                   const std::vector<Image<float>>& clean, const std::vector<Image<float>>& cloaked,
                                   const FeatureExtractor<float>& f, const EncoderTrainConfig& config);

}  // namespace ungan
