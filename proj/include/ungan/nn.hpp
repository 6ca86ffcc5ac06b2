#pragma once

// Minimal feed-forward network core on Eigen.
//
// A Network is an input shape plus an ordered list of LayerSpec. All trainable
// parameters live in one flat vector (and batch-norm running statistics in a
// second one), which makes optimizers, hashing, checkpointing and scalar casts
// uniform. Batches are column matrices: one flattened HWC sample per column.
//
// forward() and backward() are const: per-call intermediate state is written
// into a caller-owned Tape, so a network can be shared by concurrent readers.

#include "ungan/core.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ungan::nn {

enum class LayerKind {
  Linear,
  Conv2d,
  ConvTranspose2d,
  BatchNorm,
  LeakyReLU,  // slope 0 gives a plain ReLU
  Tanh,
  UnitTanh,   // (tanh(x) + 1) / 2, maps onto (0, 1)
  Clip,       // hard clamp to [lo, hi]
  GlobalAvgPool,
};

std::string to_string(LayerKind kind);
LayerKind layer_kind_from_string(const std::string& name);

struct LayerSpec {
  LayerKind kind = LayerKind::Linear;
  int out_channels = 0;  // Linear: uses out_shape instead
  int kernel = 0;
  int stride = 1;
  int padding = 0;
  double slope = 0.0;
  double lo = 0.0;
  double hi = 1.0;
  Shape out_shape{};  // Linear only: how the output vector is laid out

  static LayerSpec linear(Shape out) { return {.kind = LayerKind::Linear, .out_shape = out}; }
  static LayerSpec linear(int out_features) { return linear(Shape{1, 1, out_features}); }
  static LayerSpec conv(int out_channels, int kernel, int stride, int padding) {
    return {.kind = LayerKind::Conv2d, .out_channels = out_channels, .kernel = kernel, .stride = stride, .padding = padding};
  }
  static LayerSpec conv_transpose(int out_channels, int kernel, int stride, int padding) {
    return {.kind = LayerKind::ConvTranspose2d, .out_channels = out_channels, .kernel = kernel, .stride = stride,
            .padding = padding};
  }
  static LayerSpec batch_norm() { return {.kind = LayerKind::BatchNorm}; }
  static LayerSpec leaky_relu(double slope) { return {.kind = LayerKind::LeakyReLU, .slope = slope}; }
  static LayerSpec relu() { return leaky_relu(0.0); }
  static LayerSpec tanh() { return {.kind = LayerKind::Tanh}; }
  static LayerSpec unit_tanh() { return {.kind = LayerKind::UnitTanh}; }
  static LayerSpec clip(double lo, double hi) { return {.kind = LayerKind::Clip, .lo = lo, .hi = hi}; }
  static LayerSpec global_avg_pool() { return {.kind = LayerKind::GlobalAvgPool}; }

  bool operator==(const LayerSpec&) const = default;
};

template <typename Scalar>
struct Tape {
  struct Entry {
    Matrix<Scalar> a;  // layer-specific: input, im2col columns, or output
    Matrix<Scalar> b;
  };
  std::vector<Entry> entries;
  bool training = false;
};

template <typename Scalar>
class Network {
 public:
  Network() = default;
  Network(Shape input, std::vector<LayerSpec> layers);

  [[nodiscard]] const Shape& input_shape() const { return shapes_.front(); }
  [[nodiscard]] const Shape& output_shape() const { return shapes_.back(); }
  [[nodiscard]] Eigen::Index output_size() const { return output_shape().size(); }
  [[nodiscard]] const std::vector<LayerSpec>& layers() const { return specs_; }
  [[nodiscard]] const std::vector<Shape>& shapes() const { return shapes_; }
  [[nodiscard]] bool empty() const { return specs_.empty(); }

  [[nodiscard]] Eigen::Index num_params() const { return params_.size(); }
  Vector<Scalar>& params() { return params_; }
  [[nodiscard]] const Vector<Scalar>& params() const { return params_; }
  Vector<Scalar>& buffers() { return buffers_; }
  [[nodiscard]] const Vector<Scalar>& buffers() const { return buffers_; }

  // Offset and length of layer i's parameters inside params().
  [[nodiscard]] Eigen::Index param_offset(std::size_t i) const { return param_offset_[i]; }
  [[nodiscard]] Eigen::Index param_count(std::size_t i) const { return param_count_[i]; }

  // He-normal weights, zero biases, identity batch-norm.
  void initialize(std::uint64_t seed);

  // Inference mode: batch-norm uses running statistics.
  Matrix<Scalar> forward(const Matrix<Scalar>& x, Tape<Scalar>* tape = nullptr) const;
  // Training mode: batch-norm uses batch statistics and updates running ones.
  Matrix<Scalar> forward_train(const Matrix<Scalar>& x, Tape<Scalar>* tape = nullptr);

  // Propagates dy (d loss / d output) back through a recorded tape. Adds the
  // parameter gradient into *param_grad when it is non-null. Returns
  // d loss / d input unless need_input_grad is false.
  Matrix<Scalar> backward(const Tape<Scalar>& tape, const Matrix<Scalar>& dy, Vector<Scalar>* param_grad,
                          bool need_input_grad = true) const;

  // Leading layers [0, count) with their parameters and buffers.
  [[nodiscard]] Network prefix(std::size_t count) const;

  template <typename Other>
  [[nodiscard]] Network<Other> cast() const {
    Network<Other> out(input_shape(), specs_);
    out.params() = params_.template cast<Other>();
    out.buffers() = buffers_.template cast<Other>();
    return out;
  }

  static constexpr double kBatchNormEps = 1e-5;
  static constexpr double kBatchNormMomentum = 0.1;

 private:
  Matrix<Scalar> run(const Matrix<Scalar>& x, Tape<Scalar>* tape, bool training, Vector<Scalar>* buffers) const;

  std::vector<LayerSpec> specs_;
  std::vector<Shape> shapes_{Shape{}};
  std::vector<Eigen::Index> param_offset_, param_count_, buffer_offset_;
  Vector<Scalar> params_;
  Vector<Scalar> buffers_;
};

// Adaptive moment estimation over a flat parameter vector.
template <typename Scalar>
struct Adam {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  Vector<Scalar> m, v;
  long step_count = 0;

  Adam() = default;
  explicit Adam(double lr, double b1 = 0.9, double b2 = 0.999) : learning_rate(lr), beta1(b1), beta2(b2) {}

  // Descent step: params -= lr * mhat / (sqrt(vhat) + eps).
  void step(Vector<Scalar>& params, const Vector<Scalar>& grad);
};

extern template class Network<float>;
extern template class Network<double>;
extern template struct Adam<float>;
extern template struct Adam<double>;

}  // namespace ungan::nn
