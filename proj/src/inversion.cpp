#include "ungan/inversion.hpp"

#include "ungan/losses.hpp"

#include <cmath>

namespace ungan {

std::string to_string(InitMode mode) {
  switch (mode) {
    case InitMode::Gaussian: return "gaussian";
    case InitMode::Zeros: return "zeros";
    case InitMode::Encoder: return "encoder";
  }
  return "?";
}

InitMode init_mode_from_string(const std::string& name) {
  for (auto m : {InitMode::Gaussian, InitMode::Zeros, InitMode::Encoder})
    if (to_string(m) == name) return m;
  throw Error("unknown init mode '" + name + "'");
}

void validate(const InversionConfig& c) {
  if (c.iterations < 0) throw RangeError("inversion iterations must be >= 0");
  if (c.weights.perceptual < 0 || c.weights.pixel < 0) throw RangeError("inversion loss weights must be >= 0");
  if (c.weights.perceptual == 0 && c.weights.pixel == 0) throw RangeError("inversion loss weights are both zero");
  if (!(c.step_rule.learning_rate > 0)) throw RangeError("inversion learning rate must be positive");
}

template <typename S>
ReconstructionLoss<S> reconstruction_objective(const Image<S>& x, const Image<S>& rec, const FeatureExtractor<S>* percept,
                                               const ReconstructionWeights& w, bool with_grad) {
  require_same_shape(x, rec, "reconstruction_objective");
  ReconstructionLoss<S> out;
  const auto pix = mean_squared_error_grad<S>(rec.data, x.data);
  out.pixel = double(pix.value);
  if (with_grad) out.grad = S(w.pixel) * pix.grad;
  if (w.perceptual > 0) {
    if (!percept) throw Error("reconstruction_objective: perceptual weight set without a feature extractor");
    nn::Tape<S> tape;
    const Vector<S> fx = percept->net().forward(x.data);
    const Vector<S> fr = percept->net().forward(rec.data, with_grad ? &tape : nullptr);
    const auto feat = mean_squared_error_grad<S>(fr, fx);
    out.perceptual = double(feat.value);
    if (with_grad) out.grad += percept->net().backward(tape, S(w.perceptual) * feat.grad, nullptr);
  }
  out.total = w.perceptual * out.perceptual + w.pixel * out.pixel;
  return out;
}

template <typename S>
Latent<S> init_latent(InitMode mode, const LatentSpec& spec, const Encoder<S>* encoder, const Image<S>* x,
                      std::uint64_t seed) {
  if (spec.dim <= 0) throw ShapeError("init_latent: latent dimension must be positive");
  switch (mode) {
    case InitMode::Gaussian: {
      Rng rng(seed);
      return gaussian_vector<S>(spec.dim, rng);
    }
    case InitMode::Zeros:
      return Latent<S>::Zero(spec.dim);
    case InitMode::Encoder:
      if (!encoder || !x) throw Error("init_latent: encoder mode needs an encoder and an image");
      if (encoder->latent.dim != spec.dim) throw ShapeError("init_latent: encoder latent dimension mismatch");
      return encode(*encoder, *x);
  }
  throw Error("init_latent: unknown mode");
}

template <typename S>
InversionResult<S> invert_from(const Generator<S>& g, const Image<S>& x, const FeatureExtractor<S>* percept, Latent<S> z,
                               const InversionConfig& config) {
  validate(config);
  if (!(x.shape == g.output_shape()))
    throw ShapeError("inversion target " + to_string(x.shape) + " does not match generator output " +
                     to_string(g.output_shape()));
  if (z.size() != g.latent.dim) throw ShapeError("inversion start code has the wrong dimension");

  nn::Adam<S> adam(config.step_rule.learning_rate, config.step_rule.beta1, config.step_rule.beta2);
  nn::Tape<S> tape;
  InversionResult<S> result;
  result.loss_trace.reserve(std::size_t(config.iterations) + 1);
  std::vector<double> totals;
  for (int it = 0;; ++it) {
    const bool last = it == config.iterations;
    Image<S> rec(g.output_shape(), g.net.forward(z, last ? nullptr : &tape));
    auto loss = reconstruction_objective<S>(x, rec, percept, config.weights, !last);
    result.loss_trace.push_back({it, loss.total, loss.perceptual, loss.pixel});
    totals.push_back(loss.total);
    if (!std::isfinite(loss.total)) throw DivergenceError("inversion loss became non-finite", totals);
    if (last) {
      result.reconstruction = std::move(rec);
      break;
    }
    Vector<S> grad = g.net.backward(tape, loss.grad, nullptr);
    if (!grad.allFinite()) throw DivergenceError("inversion gradient became non-finite", totals);
    adam.step(z, grad);
  }
  result.z_star = std::move(z);
  return result;
}

template <typename S>
InversionResult<S> invert_optimize(const Generator<S>& g, const Image<S>& x, const FeatureExtractor<S>* percept,
                                   const InversionConfig& config) {
  if (config.init_mode == InitMode::Encoder)
    throw Error("invert_optimize: encoder initialization belongs to invert_hybrid");
  return invert_from(g, x, percept, init_latent<S>(config.init_mode, g.latent, nullptr, nullptr, config.seed), config);
}

template <typename S>
InversionResult<S> invert_hybrid(const Generator<S>& g, const Encoder<S>& e, const Image<S>& x,
                                 const FeatureExtractor<S>* percept, const InversionConfig& config) {
  if (!(x.shape == e.input_shape())) throw ShapeError("invert_hybrid: image does not match the encoder input");
  return invert_from(g, x, percept, init_latent<S>(InitMode::Encoder, g.latent, &e, &x, config.seed), config);
}

#define UNGAN_INVERSION_INSTANTIATE(S)                                                                             \
  template ReconstructionLoss<S> reconstruction_objective(const Image<S>&, const Image<S>&,                     \
                                                          const FeatureExtractor<S>*, const ReconstructionWeights&, \
                                                          bool);                                                \
  template Latent<S> init_latent(InitMode, const LatentSpec&, const Encoder<S>*, const Image<S>*, std::uint64_t); \
  template InversionResult<S> invert_from(const Generator<S>&, const Image<S>&, const FeatureExtractor<S>*,      \
                                          Latent<S>, const InversionConfig&);                                   \
  template InversionResult<S> invert_optimize(const Generator<S>&, const Image<S>&, const FeatureExtractor<S>*, \
                                              const InversionConfig&);                                          \
  template InversionResult<S> invert_hybrid(const Generator<S>&, const Encoder<S>&, const Image<S>&,            \
                                            const FeatureExtractor<S>*, const InversionConfig&);
UNGAN_INVERSION_INSTANTIATE(float)
UNGAN_INVERSION_INSTANTIATE(double)

}  // namespace ungan
