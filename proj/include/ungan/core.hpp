#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace ungan {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// A latent code in the generator's z-space.
template <typename Scalar>
using Latent = Vector<Scalar>;

// ---------------------------------------------------------------------------
// Errors. Every failure mode named by the module contracts maps to one type.

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ShapeError : Error {
  using Error::Error;
};
struct RangeError : Error {
  using Error::Error;
};
struct CorruptionError : Error {
  using Error::Error;
};
struct KindError : Error {
  using Error::Error;
};
// Raised when a loss or gradient stops being finite; carries the trace so far.
struct DivergenceError : Error {
  DivergenceError(const std::string& what, std::vector<double> trace_so_far = {})
      : Error(what), trace(std::move(trace_so_far)) {}
  std::vector<double> trace;
};

// ---------------------------------------------------------------------------

struct Shape {
  int height = 0;
  int width = 0;
  int channels = 0;

  [[nodiscard]] Eigen::Index size() const {
    return Eigen::Index(height) * width * channels;
  }
  [[nodiscard]] Eigen::Index pixels() const { return Eigen::Index(height) * width; }
  bool operator==(const Shape&) const = default;
};

std::string to_string(const Shape& s);

// H x W x C image, channel index fastest (HWC), values nominally in [0,1].
template <typename Scalar = float>
struct Image {
  Shape shape;
  Vector<Scalar> data;

  Image() = default;
  explicit Image(Shape s) : shape(s), data(Vector<Scalar>::Zero(s.size())) {}
  Image(Shape s, Vector<Scalar> values) : shape(s), data(std::move(values)) {
    if (data.size() != shape.size()) throw ShapeError("image data does not match shape " + to_string(shape));
  }

  static Image constant(Shape s, Scalar value) { return Image(s, Vector<Scalar>::Constant(s.size(), value)); }

  Scalar& at(int y, int x, int c) { return data[index(y, x, c)]; }
  Scalar at(int y, int x, int c) const { return data[index(y, x, c)]; }
  [[nodiscard]] Eigen::Index index(int y, int x, int c) const {
    return c + Eigen::Index(shape.channels) * (x + Eigen::Index(shape.width) * y);
  }

  template <typename Other>
  Image<Other> cast() const {
    return Image<Other>(shape, data.template cast<Other>());
  }
  bool operator==(const Image& o) const { return shape == o.shape && data == o.data; }
};

template <typename Scalar>
void require_same_shape(const Image<Scalar>& a, const Image<Scalar>& b, const char* what) {
  if (!(a.shape == b.shape))
    throw ShapeError(std::string(what) + ": shape mismatch " + to_string(a.shape) + " vs " + to_string(b.shape));
}

// Elementwise clamp into the unit interval.
template <typename Derived>
auto clip_unit(const Eigen::MatrixBase<Derived>& x) {
  using S = typename Derived::Scalar;
  return x.cwiseMax(S(0)).cwiseMin(S(1));
}

template <typename Scalar>
Image<Scalar> clip_unit(const Image<Scalar>& x) {
  return Image<Scalar>(x.shape, clip_unit(x.data));
}

// Pack images as the columns of a batch matrix (the network input layout).
template <typename Scalar>
Matrix<Scalar> to_batch(const std::vector<Image<Scalar>>& images) {
  if (images.empty()) return {};
  Matrix<Scalar> batch(images.front().data.size(), Eigen::Index(images.size()));
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (!(images[i].shape == images.front().shape)) throw ShapeError("to_batch: images differ in shape");
    batch.col(Eigen::Index(i)) = images[i].data;
  }
  return batch;
}

template <typename Scalar>
std::vector<Image<Scalar>> from_batch(const Matrix<Scalar>& batch, Shape shape) {
  std::vector<Image<Scalar>> out;
  out.reserve(std::size_t(batch.cols()));
  for (Eigen::Index j = 0; j < batch.cols(); ++j) out.emplace_back(shape, batch.col(j));
  return out;
}

// ---------------------------------------------------------------------------
// Seeded randomness. All stochastic operations take an explicit seed.

using Rng = std::mt19937_64;

template <typename Scalar>
Vector<Scalar> gaussian_vector(Eigen::Index n, Rng& rng, double stddev = 1.0) {
  std::normal_distribution<double> normal(0.0, stddev);
  Vector<Scalar> v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = Scalar(normal(rng));
  return v;
}

// Derive an independent stream seed from a base seed and a stream index.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace ungan
