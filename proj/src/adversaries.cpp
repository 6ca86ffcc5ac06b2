#include "ungan/adversaries.hpp"

#include <algorithm>
#include <random>

namespace ungan {

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::Overwrite: return "overwrite";
    case Strategy::Purify: return "purify";
    case Strategy::MoreIterations: return "more_iterations";
    case Strategy::EncoderEnhancement: return "encoder_enhancement";
  }
  return "?";
}

Strategy strategy_from_string(const std::string& name) {
  for (auto s : {Strategy::Overwrite, Strategy::Purify, Strategy::MoreIterations, Strategy::EncoderEnhancement})
    if (to_string(s) == name) return s;
  throw Error("unknown adaptive strategy '" + name + "'");
}

void validate(const AdaptiveConfig& c) {
  if (!(c.sigma >= 0 && c.sigma <= kMaxOverwriteSigma)) throw RangeError("overwrite sigma must lie in [0, 1]");
  if (c.filter_width < 1 || c.filter_width > kMaxFilterWidth || c.filter_width % 2 == 0)
    throw RangeError("purify filter width must be odd and in [1, " + std::to_string(kMaxFilterWidth) + "]");
  if (c.iterations < 0 || c.iterations > kMaxInversionIterations)
    throw RangeError("inversion iterations must lie in [0, " + std::to_string(kMaxInversionIterations) + "]");
  if (c.cloaked_count < 0) throw RangeError("cloaked image count must be >= 0");
}

Image<float> overwrite_cloak(const Image<float>& x, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0)) throw RangeError("overwrite sigma must be >= 0");
  if (sigma == 0) return x;
  Rng rng(seed);
  return Image<float>(x.shape, clip_unit((x.data + gaussian_vector<float>(x.data.size(), rng, sigma)).eval()));
}

Image<float> purify(const Image<float>& x, int w) {
  if (w < 1 || w % 2 == 0 || w > kMaxFilterWidth)
    throw RangeError("purify filter width must be an odd number in [1, " + std::to_string(kMaxFilterWidth) + "]");
  if (w == 1) return x;
  const int r = w / 2;
  const int h = x.shape.height, wd = x.shape.width;
  Image<float> out(x.shape);
  for (int c = 0; c < x.shape.channels; ++c)
    for (int y = 0; y < h; ++y)
      for (int xx = 0; xx < wd; ++xx) {
        double s = 0;
        for (int dy = -r; dy <= r; ++dy)
          for (int dx = -r; dx <= r; ++dx)
            s += x.at(std::clamp(y + dy, 0, h - 1), std::clamp(xx + dx, 0, wd - 1), c);
        out.at(y, xx, c) = float(s / (w * w));
      }
  return clip_unit(out);
}

InversionResult<float> invert_extended(const Generator<float>& g, const Encoder<float>* encoder, const Image<float>& x,
                                       const FeatureExtractor<float>* percept, int iterations, InversionConfig config) {
  if (iterations < 0 || iterations > kMaxInversionIterations)
    throw RangeError("inversion iterations must lie in [0, " + std::to_string(kMaxInversionIterations) + "]");
  config.iterations = iterations;
  if (encoder) {
    config.init_mode = InitMode::Encoder;
    return invert_hybrid(g, *encoder, x, percept, config);
  }
  return invert_optimize(g, x, percept, config);
}

EncoderTrainResult retrain_encoder(const Encoder<float>& target, const Generator<float>& g, Discriminator<float> critic,
                                   const std::vector<Image<float>>& clean, const std::vector<Image<float>>& cloaked,
                                   const FeatureExtractor<float>& f, const EncoderTrainConfig& config) {
  if (clean.empty()) throw Error("retrain_encoder: clean set is empty");
  std::vector<Image<float>> mix = clean;
  mix.insert(mix.end(), cloaked.begin(), cloaked.end());
  return train_target_encoder(g, std::move(critic), to_batch(mix), f, target, config);
}

}  // namespace ungan
