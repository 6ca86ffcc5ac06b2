#include "ungan/cloaks.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace ungan {

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::V0: return "v0";
    case Scenario::V1: return "v1";
    case Scenario::V2: return "v2";
    case Scenario::V3: return "v3";
    case Scenario::V4: return "v4";
  }
  return "?";
}

Scenario scenario_from_string(const std::string& name) {
  for (auto s : {Scenario::V0, Scenario::V1, Scenario::V2, Scenario::V3, Scenario::V4})
    if (to_string(s) == name) return s;
  throw Error("unknown cloak scenario '" + name + "'");
}

void validate(const CloakConfig& c) {
  if (!(c.epsilon > 0) || c.epsilon > kMaxEpsilon)
    throw RangeError("cloak budget must lie in (0, " + std::to_string(kMaxEpsilon) + "], got " +
                     std::to_string(c.epsilon));
  if (!(c.kappa >= 0 && c.kappa <= 1)) throw RangeError("cloak kappa must lie in [0, 1]");
  if (c.iterations < 0) throw RangeError("cloak iterations must be >= 0");
  if (c.step_size < 0) throw RangeError("cloak step size must be >= 0");
}

// ---------------------------------------------------------------------------

template <typename S>
CloakObjective<S>::CloakObjective(const Image<S>& original, const FeatureExtractor<S>& f, double kappa)
    : f_(&f), original_features_(extract_features(f, original)), kappa_(kappa) {
  if (!(kappa >= 0 && kappa <= 1)) throw RangeError("cloak kappa must lie in [0, 1]");
}

template <typename S>
CloakObjective<S>& CloakObjective<S>::away_from(const Encoder<S>& e, Latent<S> anchor) {
  if (anchor.size() != e.latent.dim) throw ShapeError("cloak anchor does not match the encoder latent");
  latent_ = LatentTerm::AwayFromAnchor;
  encoder_ = &e;
  anchor_ = std::move(anchor);
  return *this;
}

template <typename S>
CloakObjective<S>& CloakObjective<S>::toward_zero(const Encoder<S>& e) {
  latent_ = LatentTerm::TowardZero;
  encoder_ = &e;
  anchor_ = Latent<S>::Zero(e.latent.dim);
  return *this;
}

template <typename S>
double CloakObjective<S>::evaluate(const Vector<S>& x_hat, Vector<S>* grad) const {
  double value = 0;
  if (grad) *grad = Vector<S>::Zero(x_hat.size());
  const double feature_weight = 1.0 - kappa_;
  const double latent_weight = latent_ == LatentTerm::None ? 0.0 : kappa_;
  if (feature_weight > 0) {
    nn::Tape<S> tape;
    const Vector<S> feats = f_->net().forward(x_hat, grad ? &tape : nullptr);
    const auto term = latent_similarity_loss_grad<S>(feats, original_features_);
    value += feature_weight * double(term.value);
    if (grad) *grad += f_->net().backward(tape, S(feature_weight) * term.grad, nullptr);
  }
  if (latent_weight > 0) {
    nn::Tape<S> tape;
    const Vector<S> z = encoder_->net.forward(x_hat, grad ? &tape : nullptr);
    const auto term = latent_similarity_loss_grad<S>(z, anchor_);
    const double sign = latent_ == LatentTerm::TowardZero ? -1.0 : 1.0;
    value += latent_weight * sign * double(term.value);
    if (grad) *grad += encoder_->net.backward(tape, S(latent_weight * sign) * term.grad, nullptr);
  }
  return value;
}

template <typename S>
CloakResult<S> cloak_search(const Image<S>& x, const CloakObjective<S>& objective, const CloakConfig& config) {
  validate(config);
  const Eigen::Index n = x.data.size();
  const S step = S(config.effective_step());
  auto project = [&](const Vector<S>& d) -> Vector<S> {
    return clip_unit((x.data + project_linf<S>(d, config.epsilon)).eval()) - x.data;
  };

  Rng rng(config.seed);
  Vector<S> delta = project(gaussian_vector<S>(n, rng));
  CloakResult<S> result;
  result.objective_trace.reserve(std::size_t(config.iterations) + 1);
  Vector<S> grad;
  for (int it = 0;; ++it) {
    const bool last = it == config.iterations;
    const Vector<S> x_hat = clip_unit((x.data + delta).eval());
    const double value = objective.evaluate(x_hat, last ? nullptr : &grad);
    result.objective_trace.push_back(value);
    if (!std::isfinite(value)) throw DivergenceError("cloak objective became non-finite", result.objective_trace);
    if (last) break;
    delta = project(delta + step * grad.unaryExpr([](S g) { return S((g > 0) - (g < 0)); }));
  }
  result.delta = Image<S>(x.shape, delta);
  result.cloaked = Image<S>(x.shape, clip_unit((x.data + delta).eval()));
  result.config_used = config;
  return result;
}

template <typename S>
CloakResult<S> cloak_v0(const Image<S>& x, const Encoder<S>& shadow_encoder, const FeatureExtractor<S>& f,
                        const Latent<S>& anchor, const CloakConfig& config) {
  CloakObjective<S> objective(x, f, config.kappa);
  objective.away_from(shadow_encoder, anchor);
  return cloak_search(x, objective, config);
}

template <typename S>
CloakResult<S> cloak_feature_only(const Image<S>& x, const FeatureExtractor<S>& f, const CloakConfig& config) {
  validate(config);
  CloakConfig c = config;
  c.kappa = 0;
  return cloak_search(x, CloakObjective<S>(x, f, 0.0), c);
}

template <typename S>
CloakResult<S> cloak_v2(const Image<S>& x, const Encoder<S>& target_encoder, const FeatureExtractor<S>& f,
                        const CloakConfig& config) {
  CloakObjective<S> objective(x, f, config.kappa);
  objective.toward_zero(target_encoder);
  return cloak_search(x, objective, config);
}

template <typename S>
CloakResult<S> cloak_v3(const Image<S>& x, const Encoder<S>& stolen_encoder, const FeatureExtractor<S>& f,
                        const CloakConfig& config) {
  return cloak_v2(x, stolen_encoder, f, config);
}

// ---------------------------------------------------------------------------

std::vector<double> budget_schedule(Family family) {
  double hi = 0;
  switch (family) {
    case Family::DcganLike:
    case Family::WganLike: hi = 0.07; break;
    case Family::StyleganLike: hi = 0.1; break;
    case Family::Toy: throw Error("no budget schedule for the toy family");
  }
  std::vector<double> out(kBudgetLevels);
  for (int i = 0; i < kBudgetLevels; ++i) out[std::size_t(i)] = 0.01 + (hi - 0.01) * i / (kBudgetLevels - 1);
  return out;
}

double budget_for(Family family, int level) {
  if (level < 0 || level >= kBudgetLevels) throw RangeError("budget level must lie in 0..9");
  return budget_schedule(family)[std::size_t(level)];
}

namespace {

using KappaRow = std::array<double, kBudgetLevels>;

struct KappaColumn {
  KappaRow v0, v2, v3;
};

// Columns: DCGAN, WGAN, StyleGANv2 (used for the stylegan_like family).
const KappaColumn kDcgan{{0.7, 0, 0.3, 0.2, 0.2, 0.3, 0.4, 0.2, 0.6, 0.6},
                         {0.1, 0.5, 0, 0.8, 0.3, 0.2, 0.8, 0.6, 0.3, 0.2},
                         {0.2, 0.8, 0.9, 0.7, 0.9, 0.0, 0.8, 0.7, 0.1, 0.3}};
const KappaColumn kWgan{{0, 0.7, 0.4, 0.6, 0.8, 0.5, 0.2, 0.2, 0, 0.5},
                        {0.4, 0.1, 0.1, 0.7, 0.3, 0.1, 0, 0.1, 0.5, 0.9},
                        {0.1, 0.9, 0.7, 0.3, 0.1, 0.3, 0.6, 0, 0, 0}};
const KappaColumn kStylegan{{1, 0.4, 0.6, 0, 0.3, 0.7, 0.2, 1, 1, 1},
                            {0.4, 1, 1, 1, 1, 1, 1, 1, 1, 1},
                            {1, 0.1, 1, 0.3, 0.6, 1, 0.7, 0.8, 0.9, 0.9}};

}  // namespace

std::optional<double> kappa_table(Family family, Scenario scenario, int level) {
  if (level < 0 || level >= kBudgetLevels) throw RangeError("budget level must lie in 0..9");
  const KappaColumn* col = nullptr;
  switch (family) {
    case Family::DcganLike: col = &kDcgan; break;
    case Family::WganLike: col = &kWgan; break;
    case Family::StyleganLike: col = &kStylegan; break;
    case Family::Toy: return std::nullopt;
  }
  switch (scenario) {
    case Scenario::V0: return col->v0[std::size_t(level)];
    case Scenario::V2: return col->v2[std::size_t(level)];
    case Scenario::V3: return col->v3[std::size_t(level)];
    default: return std::nullopt;
  }
}

std::vector<double> default_kappa_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 10; ++i) g.push_back(i / 10.0);
  return g;
}

double grid_search_kappa(const std::vector<double>& grid, const std::function<double(double)>& score) {
  if (grid.empty()) throw Error("grid_search_kappa: empty grid");
  for (double k : grid)
    if (!(k >= 0 && k <= 1)) throw RangeError("grid_search_kappa: kappa values must lie in [0, 1]");
  std::vector<double> sorted = grid;
  std::sort(sorted.begin(), sorted.end());
  double best = sorted.front(), best_score = score(best);
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    const double s = score(sorted[i]);
    if (s < best_score) {
      best_score = s;
      best = sorted[i];
    }
  }
  return best;
}

double grid_search_kappa(const std::function<Image<float>(const Image<float>&, double)>& cloak_fn,
                         const std::vector<Image<float>>& x_set, const std::vector<double>& grid,
                         const std::function<double(const std::vector<Image<float>>&,
                                                    const std::vector<Image<float>>&)>& eval_fn) {
  if (x_set.empty()) throw Error("grid_search_kappa: empty image set");
  return grid_search_kappa(grid, [&](double kappa) {
    std::vector<Image<float>> cloaked;
    cloaked.reserve(x_set.size());
    for (const auto& x : x_set) cloaked.push_back(cloak_fn(x, kappa));
    return eval_fn(x_set, cloaked);
  });
}

// ---------------------------------------------------------------------------

namespace {

Matrix<float> gaussian_codes(int dim, int n, Rng& rng) {
  Matrix<float> z(dim, n);
  for (int j = 0; j < n; ++j) z.col(j) = gaussian_vector<float>(dim, rng);
  return z;
}

// Sum over columns of L_rec(pred_j, target_j) / n with its gradient wrt pred.
double batch_similarity(const Matrix<float>& pred, const Matrix<float>& target, Matrix<float>* grad) {
  const Eigen::Index n = pred.cols();
  double total = 0;
  if (grad) grad->resize(pred.rows(), n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto t = latent_similarity_loss_grad<float>(pred.col(j), target.col(j));
    total += double(t.value);
    if (grad) grad->col(j) = t.grad / float(n);
  }
  return total / double(n);
}

double mean_cosine(const Matrix<float>& a, const Matrix<float>& b) {
  double s = 0;
  for (Eigen::Index j = 0; j < a.cols(); ++j) s += double(cosine_similarity<float>(a.col(j), b.col(j)));
  return s / double(a.cols());
}

}  // namespace

ShadowEncoderResult train_shadow_encoder_v0(const Generator<float>& g, Encoder<float> init,
                                            const ShadowEncoderConfig& config) {
  if (init.latent.dim != g.latent.dim) throw ShapeError("shadow encoder latent does not match the generator");
  if (!(init.input_shape() == g.output_shape())) throw ShapeError("shadow encoder input does not match the generator");
  Rng rng(config.seed);
  nn::Adam<float> adam(config.learning_rate);
  nn::Tape<float> tape;
  ShadowEncoderResult r{std::move(init), {}, 0, 0};
  for (int step = 0; step < config.steps; ++step) {
    const Matrix<float> z = gaussian_codes(g.latent.dim, config.batch_size, rng);
    const Matrix<float> x = g.net.forward(z);
    const Matrix<float> pred = r.encoder.net.forward(x, &tape);
    Matrix<float> dpred;
    const double loss = batch_similarity(pred, z, &dpred);
    r.loss.push_back(loss);
    if (!std::isfinite(loss)) throw DivergenceError("shadow encoder loss became non-finite", r.loss);
    Vector<float> grad = Vector<float>::Zero(r.encoder.net.num_params());
    r.encoder.net.backward(tape, dpred, &grad, false);
    adam.step(r.encoder.net.params(), grad);
  }
  Rng eval_rng(derive_seed(config.seed, 1));
  const Matrix<float> z = gaussian_codes(g.latent.dim, config.eval_codes, eval_rng);
  const Matrix<float> pred = r.encoder.net.forward(g.net.forward(z));
  r.held_out_loss = batch_similarity(pred, z, nullptr);
  r.held_out_cosine = mean_cosine(pred, z);
  return r;
}

double latent_recovery_cosine(const Generator<float>& g, const Encoder<float>& e, int n, std::uint64_t seed) {
  Rng rng(seed);
  const Matrix<float> z = gaussian_codes(g.latent.dim, n, rng);
  return mean_cosine(e.net.forward(g.net.forward(z)), z);
}

double encoder_agreement(const Encoder<float>& a, const Encoder<float>& b, const Matrix<float>& probes) {
  if (probes.cols() == 0) throw Error("encoder_agreement: no probes");
  return mean_cosine(a.net.forward(probes), b.net.forward(probes));
}

StealResult steal_encoder(const Encoder<float>& target, Encoder<float> student, Generator<float> crafter,
                          const StealConfig& config, const Matrix<float>* probes) {
  if (!(student.input_shape() == target.input_shape()) || student.latent.dim != target.latent.dim)
    throw ShapeError("student encoder does not match the target encoder");
  if (!(crafter.output_shape() == target.input_shape()))
    throw ShapeError("query crafter output does not match the target encoder input");
  Rng rng(config.seed);
  nn::Adam<float> adam_e(config.encoder_learning_rate);
  nn::Adam<float> adam_g(config.generator_learning_rate);
  nn::Tape<float> tape_g, tape_e;
  StealResult r{std::move(student), std::move(crafter), {}, {}, 0};
  for (int step = 0; step < config.steps; ++step) {
    const Matrix<float> z = gaussian_codes(r.generator.latent.dim, config.batch_size, rng);

    // Crafter step: ascend the disagreement; the target's answers are constants.
    {
      const Matrix<float> x = r.generator.net.forward_train(z, &tape_g);
      const Matrix<float> labels = target.net.forward(x);
      const Matrix<float> pred = r.encoder.net.forward(x, &tape_e);
      Matrix<float> dpred;
      const double loss = batch_similarity(pred, labels, &dpred);
      r.generator_loss.push_back(loss);
      if (!std::isfinite(loss)) throw DivergenceError("stealing game diverged (crafter)", r.generator_loss);
      const Matrix<float> dx = r.encoder.net.backward(tape_e, -dpred, nullptr);
      Vector<float> grad = Vector<float>::Zero(r.generator.net.num_params());
      r.generator.net.backward(tape_g, dx, &grad, false);
      adam_g.step(r.generator.net.params(), grad);
    }
    // Student step on freshly crafted queries.
    {
      const Matrix<float> x = r.generator.net.forward_train(z);
      const Matrix<float> labels = target.net.forward(x);
      const Matrix<float> pred = r.encoder.net.forward(x, &tape_e);
      Matrix<float> dpred;
      const double loss = batch_similarity(pred, labels, &dpred);
      r.encoder_loss.push_back(loss);
      if (!std::isfinite(loss)) throw DivergenceError("stealing game diverged (student)", r.encoder_loss);
      Vector<float> grad = Vector<float>::Zero(r.encoder.net.num_params());
      r.encoder.net.backward(tape_e, dpred, &grad, false);
      adam_e.step(r.encoder.net.params(), grad);
    }
  }
  if (probes && probes->cols() > 0) r.agreement = encoder_agreement(r.encoder, target, *probes);
  return r;
}

#define UNGAN_CLOAK_INSTANTIATE(S)                                                                                 \
  template class CloakObjective<S>;                                                                             \
  template CloakResult<S> cloak_search(const Image<S>&, const CloakObjective<S>&, const CloakConfig&);          \
  template CloakResult<S> cloak_v0(const Image<S>&, const Encoder<S>&, const FeatureExtractor<S>&,              \
                                   const Latent<S>&, const CloakConfig&);                                       \
  template CloakResult<S> cloak_feature_only(const Image<S>&, const FeatureExtractor<S>&, const CloakConfig&);  \
  template CloakResult<S> cloak_v2(const Image<S>&, const Encoder<S>&, const FeatureExtractor<S>&,              \
                                   const CloakConfig&);                                                         \
  template CloakResult<S> cloak_v3(const Image<S>&, const Encoder<S>&, const FeatureExtractor<S>&,              \
                                   const CloakConfig&);
UNGAN_CLOAK_INSTANTIATE(float)
UNGAN_CLOAK_INSTANTIATE(double)

}  // namespace ungan
