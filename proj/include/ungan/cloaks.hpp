#pragma once

// Cloak search (v0-v4), budget and kappa schedules, shadow-encoder training and
// the encoder-stealing game.

#include "ungan/losses.hpp"
#include "ungan/model_zoo.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace ungan {

// v0: white-box generator, shadow encoder.  v1: black-box, feature only.
// v2: white-box target encoder.             v3: stolen (shadow) encoder.
// v4: black-box against hybrid inversion, feature only.
enum class Scenario { V0, V1, V2, V3, V4 };

std::string to_string(Scenario s);
Scenario scenario_from_string(const std::string& name);

inline constexpr double kMaxEpsilon = 0.2;

struct CloakConfig {
  double epsilon = 0.05;
  double kappa = 0.5;
  int iterations = 500;
  Scenario scenario = Scenario::V1;
  double step_size = 0;  // 0 selects epsilon / 10
  std::uint64_t seed = 0;

  [[nodiscard]] double effective_step() const { return step_size > 0 ? step_size : epsilon / 10.0; }
};

void validate(const CloakConfig& config);

template <typename Scalar = float>
struct CloakResult {
  Image<Scalar> cloaked;
  Image<Scalar> delta;
  std::vector<double> objective_trace;  // iterations + 1 entries
  CloakConfig config_used;
};

// Elementwise clamp of a perturbation into [-epsilon, epsilon].
template <typename Scalar>
Vector<Scalar> project_linf(const Vector<Scalar>& delta, double epsilon) {
  return delta.cwiseMax(Scalar(-epsilon)).cwiseMin(Scalar(epsilon));
}

// The scalar the cloak search ascends, as a function of the cloaked image:
//   kappa * latent_term + (1 - kappa) * L_rec(F(x_hat), F(x))
// latent_term is L_rec(E(x_hat), anchor) (v0) or -L_rec(E(x_hat), 0) (v2/v3);
// L_rec(a, b) = -cos(a, b) + mean((a - b)^2).
template <typename Scalar>
class CloakObjective {
 public:
  enum class LatentTerm { None, AwayFromAnchor, TowardZero };

  CloakObjective(const Image<Scalar>& original, const FeatureExtractor<Scalar>& f, double kappa);
  CloakObjective& away_from(const Encoder<Scalar>& e, Latent<Scalar> anchor);
  CloakObjective& toward_zero(const Encoder<Scalar>& e);

  // Objective value at a cloaked image; fills *grad (d value / d x_hat) when non-null.
  double evaluate(const Vector<Scalar>& x_hat, Vector<Scalar>* grad) const;

  [[nodiscard]] double kappa() const { return kappa_; }

 private:
  const FeatureExtractor<Scalar>* f_;
  Vector<Scalar> original_features_;
  double kappa_;
  LatentTerm latent_ = LatentTerm::None;
  const Encoder<Scalar>* encoder_ = nullptr;
  Latent<Scalar> anchor_;
};

// Signed-gradient ascent from a seeded Gaussian start, projecting onto the
// epsilon-ball and the unit cube after every step.
template <typename Scalar>
CloakResult<Scalar> cloak_search(const Image<Scalar>& x, const CloakObjective<Scalar>& objective,
                                 const CloakConfig& config);

// Latent anchor for v0: the optimization-based inversion of x, frozen before the search.
template <typename Scalar>
CloakResult<Scalar> cloak_v0(const Image<Scalar>& x, const Encoder<Scalar>& shadow_encoder,
                             const FeatureExtractor<Scalar>& f, const Latent<Scalar>& anchor, const CloakConfig& config);
template <typename Scalar>
CloakResult<Scalar> cloak_feature_only(const Image<Scalar>& x, const FeatureExtractor<Scalar>& f,
                                       const CloakConfig& config);
template <typename Scalar>
CloakResult<Scalar> cloak_v2(const Image<Scalar>& x, const Encoder<Scalar>& target_encoder,
                             const FeatureExtractor<Scalar>& f, const CloakConfig& config);
template <typename Scalar>
CloakResult<Scalar> cloak_v3(const Image<Scalar>& x, const Encoder<Scalar>& stolen_encoder,
                             const FeatureExtractor<Scalar>& f, const CloakConfig& config);

// ---------------------------------------------------------------------------
// Budgets and kappa

inline constexpr int kBudgetLevels = 10;

std::vector<double> budget_schedule(Family family);
double budget_for(Family family, int level);

// Tabulated kappa for (family, scenario, level); nullopt for feature-only cloaks
// and the toy family.
std::optional<double> kappa_table(Family family, Scenario scenario, int level);

std::vector<double> default_kappa_grid();

// The grid value with the lowest score (mean matching rate); ties go to the smaller kappa.
double grid_search_kappa(const std::vector<double>& grid, const std::function<double(double)>& score);

double grid_search_kappa(const std::function<Image<float>(const Image<float>&, double)>& cloak_fn,
                         const std::vector<Image<float>>& x_set, const std::vector<double>& grid,
                         const std::function<double(const std::vector<Image<float>>&,
                                                    const std::vector<Image<float>>&)>& eval_fn);

// ---------------------------------------------------------------------------
// Shadow encoder (v0) and encoder stealing (v3)

struct ShadowEncoderConfig {
  int steps = 3000;
  int batch_size = 32;
  double learning_rate = 1e-3;
  int eval_codes = 200;
  std::uint64_t seed = 7;
};

struct ShadowEncoderResult {
  Encoder<float> encoder;
  std::vector<double> loss;  // per step, L_rec(E_s(G(z)), z)
  double held_out_loss = 0;
  double held_out_cosine = 0;  // mean cos(E_s(G(z)), z) on fresh codes
};

// Trains E_s on (G(z), z) pairs with the latent similarity loss.
ShadowEncoderResult train_shadow_encoder_v0(const Generator<float>& g, Encoder<float> init,
                                            const ShadowEncoderConfig& config);

// Mean cos(E(G(z)), z) over n fresh codes.
double latent_recovery_cosine(const Generator<float>& g, const Encoder<float>& e, int n, std::uint64_t seed);

struct StealConfig {
  int steps = 3000;
  int batch_size = 32;
  double encoder_learning_rate = 1e-3;
  double generator_learning_rate = 1e-4;
  int probe_count = 200;
  std::uint64_t seed = 9;
};

struct StealResult {
  Encoder<float> encoder;       // E_s
  Generator<float> generator;   // G_s, the query crafter
  std::vector<double> encoder_loss;    // per step
  std::vector<double> generator_loss;  // per step (the value G_s maximizes)
  double agreement = 0;                // mean cos(E_s(x), E_t(x)) on probes
};

// Query-only stealing: G_s crafts images from noise, E_t labels them, E_s
// minimizes and G_s maximizes L_rec(E_s(G_s(z')), E_t(G_s(z'))). E_t's answers
// are constants to both players.
StealResult steal_encoder(const Encoder<float>& target, Encoder<float> student_init, Generator<float> crafter_init,
                          const StealConfig& config, const Matrix<float>* probes = nullptr);

// Mean cos(a(x), b(x)) over probe images (one per column).
double encoder_agreement(const Encoder<float>& a, const Encoder<float>& b, const Matrix<float>& probes);

#define UNGAN_CLOAK_EXTERN(S)                                                                                      \
  extern template class CloakObjective<S>;                                                                      \
  extern template CloakResult<S> cloak_search(const Image<S>&, const CloakObjective<S>&, const CloakConfig&);   \
  extern template CloakResult<S> cloak_v0(const Image<S>&, const Encoder<S>&, const FeatureExtractor<S>&,       \
                                          const Latent<S>&, const CloakConfig&);                                \
  extern template CloakResult<S> cloak_feature_only(const Image<S>&, const FeatureExtractor<S>&,                \
                                                    const CloakConfig&);                                        \
  extern template CloakResult<S> cloak_v2(const Image<S>&, const Encoder<S>&, const FeatureExtractor<S>&,       \
                                          const CloakConfig&);                                                  \
  extern template CloakResult<S> cloak_v3(const Image<S>&, const Encoder<S>&, const FeatureExtractor<S>&,       \
                                          const CloakConfig&);
UNGAN_CLOAK_EXTERN(float)
UNGAN_CLOAK_EXTERN(double)
#undef UNGAN_CLOAK_EXTERN

}  // namespace ungan
