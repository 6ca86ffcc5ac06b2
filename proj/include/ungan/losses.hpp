#pragma once

// Scalar losses with closed-form gradients, shared by inversion, cloaks and
// training loops.

#include "ungan/core.hpp"

#include <cmath>

namespace ungan {

template <typename Scalar>
struct LossGrad {
  Scalar value = 0;
  Vector<Scalar> grad;  // d value / d first argument
};

// Cosine similarity; 0 when either vector is zero.
template <typename Scalar>
Scalar cosine_similarity(const Vector<Scalar>& a, const Vector<Scalar>& b) {
  if (a.size() != b.size()) throw ShapeError("cosine_similarity: length mismatch");
  const Scalar na = a.norm(), nb = b.norm();
  if (na == Scalar(0) || nb == Scalar(0)) return Scalar(0);
  return a.dot(b) / (na * nb);
}

template <typename Scalar>
LossGrad<Scalar> mean_squared_error_grad(const Vector<Scalar>& a, const Vector<Scalar>& b) {
  if (a.size() != b.size()) throw ShapeError("mean_squared_error: length mismatch");
  if (a.size() == 0) throw ShapeError("mean_squared_error: empty input");
  const Vector<Scalar> d = a - b;
  return {d.squaredNorm() / Scalar(d.size()), (Scalar(2) / Scalar(d.size())) * d};
}

// -cos(a, b) + mean((a - b)^2). The cosine term contributes nothing (value and
// gradient) when either vector is zero.
template <typename Scalar>
LossGrad<Scalar> latent_similarity_loss_grad(const Vector<Scalar>& a, const Vector<Scalar>& b) {
  LossGrad<Scalar> out = mean_squared_error_grad(a, b);
  const Scalar na = a.norm(), nb = b.norm();
  if (na > Scalar(0) && nb > Scalar(0)) {
    const Scalar cos = a.dot(b) / (na * nb);
    out.value -= cos;
    out.grad -= b / (na * nb) - (cos / (na * na)) * a;
  }
  return out;
}

template <typename Scalar>
Scalar latent_similarity_loss(const Vector<Scalar>& a, const Vector<Scalar>& b) {
  return latent_similarity_loss_grad(a, b).value;
}

// Euclidean distance ||a - b|| with gradient (zero gradient at a == b).
template <typename Scalar>
LossGrad<Scalar> l2_distance_grad(const Vector<Scalar>& a, const Vector<Scalar>& b) {
  const Vector<Scalar> d = a - b;
  const Scalar n = d.norm();
  if (n == Scalar(0)) return {Scalar(0), Vector<Scalar>::Zero(d.size())};
  return {n, d / n};
}

inline bool finite(double v) { return std::isfinite(v); }

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.derived().allFinite();
}

}  // namespace ungan
