#include "ungan/training.hpp"

#include "ungan/losses.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace ungan {

using nn::Adam;
using nn::Tape;

namespace {

Adam<float> make_adam(const AdamSettings& s) { return Adam<float>(s.learning_rate, s.beta1, s.beta2); }

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Shuffled minibatch index lists for one epoch; the last short batch is kept.
std::vector<std::vector<Eigen::Index>> minibatches(Eigen::Index n, int batch_size, Rng& rng) {
  if (batch_size <= 0) throw RangeError("batch size must be positive");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index(0));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<Eigen::Index>> out;
  for (std::size_t i = 0; i < order.size(); i += std::size_t(batch_size))
    out.emplace_back(order.begin() + std::ptrdiff_t(i),
                     order.begin() + std::ptrdiff_t(std::min(order.size(), i + std::size_t(batch_size))));
  return out;
}

Matrix<float> gather(const Matrix<float>& data, const std::vector<Eigen::Index>& idx) {
  Matrix<float> out(data.rows(), Eigen::Index(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) out.col(Eigen::Index(j)) = data.col(idx[j]);
  return out;
}

Matrix<float> gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<float> normal(0.0f, 1.0f);
  Matrix<float> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

void check_finite(double value, const char* what, const std::vector<double>& trace) {
  if (!std::isfinite(value)) throw DivergenceError(std::string(what) + " became non-finite", trace);
}

// Adds the parameter gradient of (gamma/2) mean_n ||grad_x D(x_n)||^2 to grad and
// returns the penalty. That gradient is (gamma/B) sum_n H_{theta,x} v_n with
// v_n = grad_x D(x_n), a mixed Hessian-vector product taken by central
// differences along v_n. D must treat batch columns independently.
double add_gradient_penalty(const nn::Network<float>& d, const Matrix<float>& x, double gamma, Vector<float>& grad) {
  if (gamma <= 0) return 0;
  const Eigen::Index b = x.cols();
  Tape<float> tape, tape_plus, tape_minus;
  d.forward(x, &tape);
  const Matrix<float> v = d.backward(tape, Matrix<float>::Ones(1, b), nullptr);
  Matrix<float> plus = x, minus = x;
  Matrix<float> wp(1, b), wm(1, b);
  double penalty = 0;
  for (Eigen::Index j = 0; j < b; ++j) {
    penalty += double(v.col(j).squaredNorm());
    const float vmax = v.col(j).cwiseAbs().maxCoeff();
    const float h = vmax > 0 ? 1e-2f / vmax : 0.0f;
    plus.col(j) += h * v.col(j);
    minus.col(j) -= h * v.col(j);
    const float scale = h > 0 ? float(gamma) / (2 * h * float(b)) : 0.0f;
    wp(0, j) = scale;
    wm(0, j) = -scale;
  }
  d.forward(plus, &tape_plus);
  d.forward(minus, &tape_minus);
  d.backward(tape_plus, wp, &grad, false);
  d.backward(tape_minus, wm, &grad, false);
  return 0.5 * gamma * penalty / double(b);
}

}  // namespace

GanTrainResult train_gan(const Matrix<float>& data, Generator<float> g, Discriminator<float> d,
                         const GanTrainConfig& config) {
  if (data.cols() == 0) throw Error("train_gan: empty dataset");
  if (data.rows() != g.output_shape().size() || data.rows() != d.input_shape().size())
    throw ShapeError("train_gan: dataset images do not match the generator/discriminator resolution");
  if (config.epochs < 0) throw RangeError("train_gan: epochs must be non-negative");

  Rng rng(config.seed);
  auto opt_g = make_adam(config.generator_optimizer);
  auto opt_d = make_adam(config.discriminator_optimizer);
  Tape<float> tape_g, tape_real, tape_fake;
  GanTrainResult result{g, d, {}, {}};
  Generator<float>& G = result.generator;
  Discriminator<float>& D = result.discriminator;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double d_sum = 0, g_sum = 0;
    int steps = 0;
    for (const auto& idx : minibatches(data.cols(), config.batch_size, rng)) {
      const Matrix<float> real = gather(data, idx);
      const Eigen::Index b = real.cols();
      const Matrix<float> z = gaussian_matrix(G.latent.dim, b, rng);
      const Matrix<float> fake = G.net.forward_train(z, &tape_g);

      // Discriminator: softplus(-D(real)) + softplus(D(fake)).
      Vector<float> grad_d = Vector<float>::Zero(D.net.num_params());
      const Matrix<float> lr = D.net.forward(real, &tape_real);
      const Matrix<float> lf = D.net.forward(fake, &tape_fake);
      Matrix<float> dr(1, b), df(1, b);
      double d_loss = 0;
      for (Eigen::Index j = 0; j < b; ++j) {
        d_loss += softplus(-lr(0, j)) + softplus(lf(0, j));
        dr(0, j) = float(-sigmoid(-lr(0, j)) / double(b));
        df(0, j) = float(sigmoid(lf(0, j)) / double(b));
      }
      d_loss /= double(b);
      D.net.backward(tape_real, dr, &grad_d, false);
      D.net.backward(tape_fake, df, &grad_d, false);
      d_loss += add_gradient_penalty(D.net, real, config.r1_gamma, grad_d);
      check_finite(d_loss, "discriminator loss", result.discriminator_loss);
      opt_d.step(D.net.params(), grad_d);

      // Generator: softplus(-D(G(z))) against the updated discriminator.
      const Matrix<float> lg = D.net.forward(fake, &tape_fake);
      Matrix<float> dg(1, b);
      double g_loss = 0;
      for (Eigen::Index j = 0; j < b; ++j) {
        g_loss += softplus(-lg(0, j));
        dg(0, j) = float(-sigmoid(-lg(0, j)) / double(b));
      }
      g_loss /= double(b);
      check_finite(g_loss, "generator loss", result.generator_loss);
      const Matrix<float> dfake = D.net.backward(tape_fake, dg, nullptr);
      Vector<float> grad_g = Vector<float>::Zero(G.net.num_params());
      G.net.backward(tape_g, dfake, &grad_g, false);
      opt_g.step(G.net.params(), grad_g);

      d_sum += d_loss;
      g_sum += g_loss;
      ++steps;
    }
    result.discriminator_loss.push_back(d_sum / steps);
    result.generator_loss.push_back(g_sum / steps);
  }
  return result;
}

double discriminator_real_rate(const Discriminator<float>& d, const Matrix<float>& images) {
  if (images.cols() == 0) throw Error("discriminator_real_rate: no images");
  const Matrix<float> logits = d.net.forward(images);
  return double((logits.array() > 0.0f).count()) / double(images.cols());
}

EncoderTrainResult train_target_encoder(const Generator<float>& g, Discriminator<float> critic,
                                        const Matrix<float>& data, const FeatureExtractor<float>& f,
                                        Encoder<float> encoder, const EncoderTrainConfig& config) {
  if (data.cols() == 0) throw Error("train_target_encoder: empty dataset");
  if (data.rows() != g.output_shape().size())
    throw ShapeError("train_target_encoder: dataset resolution does not match the generator");
  if (encoder.latent.dim != g.latent.dim) throw ShapeError("train_target_encoder: encoder/generator latent mismatch");
  const auto& w = config.weights;
  if (w.lambda_vgg < 0 || w.lambda_adv < 0 || w.gamma < 0) throw RangeError("encoder loss weights must be >= 0");

  Rng rng(config.seed);
  auto opt_e = make_adam(config.encoder_optimizer);
  auto opt_c = make_adam(config.critic_optimizer);
  Tape<float> tape_e, tape_g, tape_f, tape_d, tape_real;
  EncoderTrainResult r{std::move(encoder), std::move(critic), {}, {}, {}, {}, {}};
  const bool use_feature = w.lambda_vgg > 0;
  const bool use_critic = w.lambda_adv > 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double sum_loss = 0, sum_pix = 0, sum_feat = 0, sum_adv = 0, sum_critic = 0;
    int steps = 0;
    for (const auto& idx : minibatches(data.cols(), config.batch_size, rng)) {
      const Matrix<float> x = gather(data, idx);
      const Eigen::Index b = x.cols();
      const float inv_b = 1.0f / float(b);

      // Encoder step through the frozen generator.
      const Matrix<float> z = r.encoder.net.forward(x, &tape_e);
      const Matrix<float> rec = g.net.forward(z, &tape_g);
      Matrix<float> d_rec(rec.rows(), b);
      double pix = 0, feat = 0, adv = 0;
      for (Eigen::Index j = 0; j < b; ++j) {
        const auto term = l2_distance_grad<float>(rec.col(j), x.col(j));
        pix += term.value;
        d_rec.col(j) = term.grad * inv_b;
      }
      if (use_feature) {
        const Matrix<float> fx = f.net().forward(x);
        const Matrix<float> fr = f.net().forward(rec, &tape_f);
        Matrix<float> d_fr(fr.rows(), b);
        for (Eigen::Index j = 0; j < b; ++j) {
          const auto term = l2_distance_grad<float>(fr.col(j), fx.col(j));
          feat += term.value;
          d_fr.col(j) = term.grad * float(w.lambda_vgg) * inv_b;
        }
        d_rec += f.net().backward(tape_f, d_fr, nullptr);
      }
      if (use_critic) {
        const Matrix<float> score = r.critic.net.forward(rec, &tape_d);
        adv = -double(score.sum());
        d_rec += r.critic.net.backward(tape_d, Matrix<float>::Constant(1, b, -float(w.lambda_adv) * inv_b), nullptr);
      }
      pix /= double(b);
      feat /= double(b);
      adv /= double(b);
      const double loss = pix + w.lambda_vgg * feat + w.lambda_adv * adv;
      check_finite(loss, "encoder loss", r.loss);
      const Matrix<float> dz = g.net.backward(tape_g, d_rec, nullptr);
      Vector<float> grad_e = Vector<float>::Zero(r.encoder.net.num_params());
      r.encoder.net.backward(tape_e, dz, &grad_e, false);
      opt_e.step(r.encoder.net.params(), grad_e);

      // Critic step: D(fake) - D(real) + gamma/2 ||grad_x D(real)||^2.
      if (use_critic) {
        Vector<float> grad_c = Vector<float>::Zero(r.critic.net.num_params());
        const Matrix<float> s_fake = r.critic.net.forward(rec, &tape_d);
        r.critic.net.backward(tape_d, Matrix<float>::Constant(1, b, inv_b), &grad_c, false);
        const Matrix<float> s_real = r.critic.net.forward(x, &tape_real);
        r.critic.net.backward(tape_real, Matrix<float>::Constant(1, b, -inv_b), &grad_c, false);
        const double penalty = add_gradient_penalty(r.critic.net, x, w.gamma, grad_c);
        const double critic_loss = double(s_fake.mean()) - double(s_real.mean()) + penalty;
        check_finite(critic_loss, "critic loss", r.critic_loss);
        opt_c.step(r.critic.net.params(), grad_c);
        sum_critic += critic_loss;
      }

      sum_loss += loss;
      sum_pix += pix;
      sum_feat += feat;
      sum_adv += adv;
      ++steps;
    }
    r.loss.push_back(sum_loss / steps);
    r.pixel_term.push_back(sum_pix / steps);
    r.feature_term.push_back(sum_feat / steps);
    r.adversarial_term.push_back(sum_adv / steps);
    r.critic_loss.push_back(sum_critic / steps);
  }
  return r;
}

ClassifierTrainResult train_identity_classifier(const Dataset& dataset, const ClassifierTrainConfig& config) {
  if (dataset.size() == 0) throw Error("train_identity_classifier: empty dataset");
  std::map<int, int> classes;
  for (int id : dataset.identities) {
    if (id < 0) throw Error("train_identity_classifier: every image needs an identity label");
    classes.emplace(id, 0);
  }
  if (dataset.identities.size() != dataset.size()) throw Error("train_identity_classifier: missing identity labels");
  int next = 0;
  for (auto& [id, label] : classes) label = next++;
  const int num_classes = next;

  nn::Network<float> trunk = make_feature_trunk(dataset.shape, config.seed, config.width);
  std::vector<nn::LayerSpec> layers = trunk.layers();
  std::size_t keep = layers.size();
  if (config.embedding_dim > 0) {
    layers.push_back(nn::LayerSpec::linear(config.embedding_dim));
    keep = layers.size();
  }
  layers.push_back(nn::LayerSpec::linear(num_classes));
  nn::Network<float> net(dataset.shape, layers);
  net.initialize(config.seed);

  std::vector<Image<float>> images = dataset.images;
  const Matrix<float> data = to_batch(images);
  std::vector<int> labels;
  for (int id : dataset.identities) labels.push_back(classes.at(id));

  Rng rng(derive_seed(config.seed, 1));
  auto opt = make_adam(config.optimizer);
  Tape<float> tape;
  ClassifierTrainResult result;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double sum = 0;
    int steps = 0;
    for (const auto& idx : minibatches(data.cols(), config.batch_size, rng)) {
      const Matrix<float> x = gather(data, idx);
      const Eigen::Index b = x.cols();
      const Matrix<float> logits = net.forward(x, &tape);
      Matrix<float> dl(logits.rows(), b);
      double loss = 0;
      for (Eigen::Index j = 0; j < b; ++j) {
        const int y = labels[std::size_t(idx[std::size_t(j)])];
        const float m = logits.col(j).maxCoeff();
        const Vector<float> e = (logits.col(j).array() - m).exp().matrix();
        const double s = double(e.sum());
        loss += std::log(s) - double(logits(y, j) - m);
        dl.col(j) = e / float(s);
        dl(y, j) -= 1.0f;
      }
      dl /= float(b);
      loss /= double(b);
      check_finite(loss, "classifier loss", result.loss);
      Vector<float> grad = Vector<float>::Zero(net.num_params());
      net.backward(tape, dl, &grad, false);
      opt.step(net.params(), grad);
      sum += loss;
      ++steps;
    }
    result.loss.push_back(sum / steps);
  }
  const Matrix<float> logits = net.forward(data);
  int correct = 0;
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    Eigen::Index arg;
    logits.col(j).maxCoeff(&arg);
    correct += int(arg) == labels[std::size_t(j)];
  }
  result.train_accuracy = double(correct) / double(logits.cols());
  result.embedder = FrozenEmbedder<float>(net.prefix(keep));
  return result;
}

}  // namespace ungan
