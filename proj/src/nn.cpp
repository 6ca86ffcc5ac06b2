#include "ungan/nn.hpp"

#include <algorithm>
#include <cmath>

namespace ungan {

std::string to_string(const Shape& s) {
  return std::to_string(s.height) + "x" + std::to_string(s.width) + "x" + std::to_string(s.channels);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  // splitmix64 over the combined key
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace ungan

namespace ungan::nn {

namespace {

using Index = Eigen::Index;

// Sliding-window geometry: an "image side" of C x H x W and a grid of
// out_h x out_w window positions.
struct Window {
  Index channels, height, width, kernel, stride, padding, out_h, out_w;
  [[nodiscard]] Index rows() const { return channels * kernel * kernel; }
  [[nodiscard]] Index positions() const { return out_h * out_w; }
  [[nodiscard]] Index image_size() const { return channels * height * width; }
};

// Column q = ox + out_w * (oy + out_h * n); row = c + C * (kx + k * ky).
template <typename S>
void im2col(const S* image, const Window& g, Index batch, S* cols) {
  const Index rows = g.rows();
  for (Index n = 0; n < batch; ++n) {
    const S* src = image + n * g.image_size();
    for (Index oy = 0; oy < g.out_h; ++oy) {
      for (Index ox = 0; ox < g.out_w; ++ox) {
        S* col = cols + rows * (ox + g.out_w * (oy + g.out_h * n));
        for (Index ky = 0; ky < g.kernel; ++ky) {
          const Index iy = oy * g.stride - g.padding + ky;
          for (Index kx = 0; kx < g.kernel; ++kx) {
            const Index ix = ox * g.stride - g.padding + kx;
            S* dst = col + g.channels * (kx + g.kernel * ky);
            if (iy < 0 || iy >= g.height || ix < 0 || ix >= g.width) {
              std::fill(dst, dst + g.channels, S(0));
            } else {
              const S* p = src + g.channels * (ix + g.width * iy);
              std::copy(p, p + g.channels, dst);
            }
          }
        }
      }
    }
  }
}

template <typename S>
void col2im(const S* cols, const Window& g, Index batch, S* image) {
  const Index rows = g.rows();
  std::fill(image, image + g.image_size() * batch, S(0));
  for (Index n = 0; n < batch; ++n) {
    S* dst_image = image + n * g.image_size();
    for (Index oy = 0; oy < g.out_h; ++oy) {
      for (Index ox = 0; ox < g.out_w; ++ox) {
        const S* col = cols + rows * (ox + g.out_w * (oy + g.out_h * n));
        for (Index ky = 0; ky < g.kernel; ++ky) {
          const Index iy = oy * g.stride - g.padding + ky;
          if (iy < 0 || iy >= g.height) continue;
          for (Index kx = 0; kx < g.kernel; ++kx) {
            const Index ix = ox * g.stride - g.padding + kx;
            if (ix < 0 || ix >= g.width) continue;
            const S* src = col + g.channels * (kx + g.kernel * ky);
            S* dst = dst_image + g.channels * (ix + g.width * iy);
            for (Index c = 0; c < g.channels; ++c) dst[c] += src[c];
          }
        }
      }
    }
  }
}

Window conv_window(const Shape& in, const Shape& out, const LayerSpec& s) {
  return {in.channels, in.height, in.width, s.kernel, s.stride, s.padding, out.height, out.width};
}

// A transposed convolution is the adjoint of a convolution whose image side
// is the transposed layer's output.
Window conv_transpose_window(const Shape& in, const Shape& out, const LayerSpec& s) {
  return {out.channels, out.height, out.width, s.kernel, s.stride, s.padding, in.height, in.width};
}

Shape infer_shape(const Shape& in, const LayerSpec& s) {
  switch (s.kind) {
    case LayerKind::Linear:
      if (s.out_shape.size() <= 0) throw ShapeError("linear layer needs a positive output size");
      return s.out_shape;
    case LayerKind::Conv2d: {
      const int h = (in.height + 2 * s.padding - s.kernel) / s.stride + 1;
      const int w = (in.width + 2 * s.padding - s.kernel) / s.stride + 1;
      if (h <= 0 || w <= 0 || s.out_channels <= 0) throw ShapeError("conv layer produces an empty output");
      return {h, w, s.out_channels};
    }
    case LayerKind::ConvTranspose2d: {
      const int h = (in.height - 1) * s.stride - 2 * s.padding + s.kernel;
      const int w = (in.width - 1) * s.stride - 2 * s.padding + s.kernel;
      if (h <= 0 || w <= 0 || s.out_channels <= 0) throw ShapeError("transposed conv produces an empty output");
      return {h, w, s.out_channels};
    }
    case LayerKind::GlobalAvgPool:
      return {1, 1, in.channels};
    default:
      return in;
  }
}

Index count_params(const Shape& in, const Shape& out, const LayerSpec& s) {
  switch (s.kind) {
    case LayerKind::Linear:
      return out.size() * in.size() + out.size();
    case LayerKind::Conv2d:
    case LayerKind::ConvTranspose2d:
      return Index(in.channels) * out.channels * s.kernel * s.kernel + out.channels;
    case LayerKind::BatchNorm:
      return 2 * Index(in.channels);
    default:
      return 0;
  }
}

}  // namespace

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Linear: return "linear";
    case LayerKind::Conv2d: return "conv2d";
    case LayerKind::ConvTranspose2d: return "conv_transpose2d";
    case LayerKind::BatchNorm: return "batch_norm";
    case LayerKind::LeakyReLU: return "leaky_relu";
    case LayerKind::Tanh: return "tanh";
    case LayerKind::UnitTanh: return "unit_tanh";
    case LayerKind::Clip: return "clip";
    case LayerKind::GlobalAvgPool: return "global_avg_pool";
  }
  return "unknown";
}

LayerKind layer_kind_from_string(const std::string& name) {
  for (auto k : {LayerKind::Linear, LayerKind::Conv2d, LayerKind::ConvTranspose2d, LayerKind::BatchNorm,
                 LayerKind::LeakyReLU, LayerKind::Tanh, LayerKind::UnitTanh, LayerKind::Clip,
                 LayerKind::GlobalAvgPool})
    if (to_string(k) == name) return k;
  throw KindError("unknown layer kind '" + name + "'");
}

template <typename S>
Network<S>::Network(Shape input, std::vector<LayerSpec> layers) : specs_(std::move(layers)) {
  if (input.size() <= 0) throw ShapeError("network input shape must be non-empty");
  shapes_ = {input};
  Index params = 0, buffers = 0;
  for (const auto& spec : specs_) {
    const Shape in = shapes_.back();
    const Shape out = infer_shape(in, spec);
    param_offset_.push_back(params);
    param_count_.push_back(count_params(in, out, spec));
    buffer_offset_.push_back(buffers);
    params += param_count_.back();
    if (spec.kind == LayerKind::BatchNorm) buffers += 2 * Index(in.channels);
    shapes_.push_back(out);
  }
  param_offset_.push_back(params);
  buffer_offset_.push_back(buffers);
  params_ = Vector<S>::Zero(params);
  buffers_ = Vector<S>::Zero(buffers);
  // running variance starts at one
  for (std::size_t i = 0; i < specs_.size(); ++i)
    if (specs_[i].kind == LayerKind::BatchNorm)
      buffers_.segment(buffer_offset_[i] + shapes_[i].channels, shapes_[i].channels).setOnes();
}

template <typename S>
void Network<S>::initialize(std::uint64_t seed) {
  Rng rng(seed);
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    const auto& spec = specs_[i];
    const Shape& in = shapes_[i];
    const Shape& out = shapes_[i + 1];
    S* p = params_.data() + param_offset_[i];
    Index weights = 0;
    double fan_in = 1;
    switch (spec.kind) {
      case LayerKind::Linear:
        weights = out.size() * in.size();
        fan_in = double(in.size());
        break;
      case LayerKind::Conv2d:
        weights = Index(in.channels) * out.channels * spec.kernel * spec.kernel;
        fan_in = double(in.channels) * spec.kernel * spec.kernel;
        break;
      case LayerKind::ConvTranspose2d:
        weights = Index(in.channels) * out.channels * spec.kernel * spec.kernel;
        fan_in = double(in.channels) * spec.kernel * spec.kernel / (double(spec.stride) * spec.stride);
        break;
      case LayerKind::BatchNorm:
        std::fill(p, p + in.channels, S(1));
        std::fill(p + in.channels, p + 2 * in.channels, S(0));
        continue;
      default:
        continue;
    }
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / fan_in));
    for (Index j = 0; j < weights; ++j) p[j] = S(normal(rng));
    std::fill(p + weights, p + param_count_[i], S(0));
  }
}

template <typename S>
Matrix<S> Network<S>::forward(const Matrix<S>& x, Tape<S>* tape) const {
  return run(x, tape, false, nullptr);
}

template <typename S>
Matrix<S> Network<S>::forward_train(const Matrix<S>& x, Tape<S>* tape) {
  return run(x, tape, true, &buffers_);
}

template <typename S>
Matrix<S> Network<S>::run(const Matrix<S>& x, Tape<S>* tape, bool training, Vector<S>* running) const {
  using Map = Eigen::Map<Matrix<S>>;
  using ConstMap = Eigen::Map<const Matrix<S>>;
  if (x.rows() != input_shape().size())
    throw ShapeError("network expects inputs of size " + std::to_string(input_shape().size()) + ", got " +
                     std::to_string(x.rows()));
  const Index batch = x.cols();
  if (tape) {
    tape->entries.assign(specs_.size(), {});
    tape->training = training;
  }
  Matrix<S> cur = x;
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    const auto& spec = specs_[i];
    const Shape& in = shapes_[i];
    const Shape& out = shapes_[i + 1];
    const S* p = params_.data() + param_offset_[i];
    Matrix<S> next;
    typename Tape<S>::Entry entry;
    switch (spec.kind) {
      case LayerKind::Linear: {
        ConstMap w(p, out.size(), in.size());
        ConstMap b(p + out.size() * in.size(), out.size(), 1);
        next.noalias() = w * cur;
        next.colwise() += b.col(0);
        if (tape) entry.a = std::move(cur);
        break;
      }
      case LayerKind::Conv2d: {
        const Window g = conv_window(in, out, spec);
        Matrix<S> cols(g.rows(), g.positions() * batch);
        im2col(cur.data(), g, batch, cols.data());
        ConstMap w(p, out.channels, g.rows());
        ConstMap b(p + Index(out.channels) * g.rows(), out.channels, 1);
        next.resize(out.size(), batch);
        Map y(next.data(), out.channels, g.positions() * batch);
        y.noalias() = w * cols;
        y.colwise() += b.col(0);
        if (tape) entry.a = std::move(cols);
        break;
      }
      case LayerKind::ConvTranspose2d: {
        const Window g = conv_transpose_window(in, out, spec);
        ConstMap w(p, in.channels, g.rows());
        ConstMap b(p + Index(in.channels) * g.rows(), out.channels, 1);
        ConstMap xin(cur.data(), in.channels, in.pixels() * batch);
        Matrix<S> cols = w.transpose() * xin;
        next.resize(out.size(), batch);
        col2im(cols.data(), g, batch, next.data());
        Map y(next.data(), out.channels, out.pixels() * batch);
        y.colwise() += b.col(0);
        if (tape) entry.a = std::move(cur);
        break;
      }
      case LayerKind::BatchNorm: {
        const Index c = in.channels;
        const Index m = in.pixels() * batch;
        ConstMap xm(cur.data(), c, m);
        Eigen::Map<const Vector<S>> gamma(p, c), beta(p + c, c);
        Vector<S> mean, var;
        const S* buf = buffers_.data() + buffer_offset_[i];
        if (training) {
          mean = xm.rowwise().mean();
          var = (xm.colwise() - mean).array().square().rowwise().mean().matrix();
          if (running) {
            Eigen::Map<Vector<S>> rm(running->data() + buffer_offset_[i], c), rv(running->data() + buffer_offset_[i] + c, c);
            const S mom = S(kBatchNormMomentum);
            const S unbias = m > 1 ? S(double(m) / double(m - 1)) : S(1);
            rm = (S(1) - mom) * rm + mom * mean;
            rv = (S(1) - mom) * rv + mom * unbias * var;
          }
        } else {
          mean = Eigen::Map<const Vector<S>>(buf, c);
          var = Eigen::Map<const Vector<S>>(buf + c, c);
        }
        Vector<S> inv = (var.array() + S(kBatchNormEps)).rsqrt().matrix();
        Matrix<S> xhat = (xm.colwise() - mean).array().colwise() * inv.array();
        next.resize(out.size(), batch);
        Map y(next.data(), c, m);
        y = (xhat.array().colwise() * gamma.array()).colwise() + beta.array();
        if (tape) {
          entry.a = std::move(xhat);
          entry.b = inv;
        }
        break;
      }
      case LayerKind::LeakyReLU: {
        const S slope = S(spec.slope);
        next = cur.unaryExpr([slope](S v) { return v > S(0) ? v : slope * v; });
        if (tape) entry.a = std::move(cur);
        break;
      }
      case LayerKind::Tanh:
        next = cur.array().tanh().matrix();
        if (tape) entry.a = next;
        break;
      case LayerKind::UnitTanh:
        next = ((cur.array().tanh() + S(1)) * S(0.5)).matrix();
        if (tape) entry.a = next;
        break;
      case LayerKind::Clip:
        next = cur.cwiseMax(S(spec.lo)).cwiseMin(S(spec.hi));
        if (tape) entry.a = std::move(cur);
        break;
      case LayerKind::GlobalAvgPool: {
        next.resize(in.channels, batch);
        for (Index n = 0; n < batch; ++n)
          next.col(n) = ConstMap(cur.col(n).data(), in.channels, in.pixels()).rowwise().mean();
        break;
      }
    }
    if (tape) tape->entries[i] = std::move(entry);
    cur = std::move(next);
  }
  return cur;
}

template <typename S>
Matrix<S> Network<S>::backward(const Tape<S>& tape, const Matrix<S>& dy, Vector<S>* param_grad,
                               bool need_input_grad) const {
  using Map = Eigen::Map<Matrix<S>>;
  using ConstMap = Eigen::Map<const Matrix<S>>;
  if (tape.entries.size() != specs_.size()) throw ShapeError("tape does not belong to this network");
  if (param_grad && param_grad->size() != params_.size()) *param_grad = Vector<S>::Zero(params_.size());
  const Index batch = dy.cols();
  Matrix<S> grad = dy;
  for (std::size_t r = specs_.size(); r-- > 0;) {
    const auto& spec = specs_[r];
    const auto& entry = tape.entries[r];
    const Shape& in = shapes_[r];
    const Shape& out = shapes_[r + 1];
    const S* p = params_.data() + param_offset_[r];
    S* gp = param_grad ? param_grad->data() + param_offset_[r] : nullptr;
    const bool want_dx = need_input_grad || r > 0;
    Matrix<S> dx;
    switch (spec.kind) {
      case LayerKind::Linear: {
        ConstMap w(p, out.size(), in.size());
        if (gp) {
          Map(gp, out.size(), in.size()).noalias() += grad * entry.a.transpose();
          Map(gp + out.size() * in.size(), out.size(), 1) += grad.rowwise().sum();
        }
        if (want_dx) dx.noalias() = w.transpose() * grad;
        break;
      }
      case LayerKind::Conv2d: {
        const Window g = conv_window(in, out, spec);
        ConstMap w(p, out.channels, g.rows());
        ConstMap gy(grad.data(), out.channels, g.positions() * batch);
        if (gp) {
          Map(gp, out.channels, g.rows()).noalias() += gy * entry.a.transpose();
          Map(gp + Index(out.channels) * g.rows(), out.channels, 1) += gy.rowwise().sum();
        }
        if (want_dx) {
          Matrix<S> dcols = w.transpose() * gy;
          dx.resize(in.size(), batch);
          col2im(dcols.data(), g, batch, dx.data());
        }
        break;
      }
      case LayerKind::ConvTranspose2d: {
        const Window g = conv_transpose_window(in, out, spec);
        ConstMap w(p, in.channels, g.rows());
        Matrix<S> dcols(g.rows(), g.positions() * batch);
        im2col(grad.data(), g, batch, dcols.data());
        if (gp) {
          ConstMap xin(entry.a.data(), in.channels, in.pixels() * batch);
          Map(gp, in.channels, g.rows()).noalias() += xin * dcols.transpose();
          Map(gp + Index(in.channels) * g.rows(), out.channels, 1) +=
              ConstMap(grad.data(), out.channels, out.pixels() * batch).rowwise().sum();
        }
        if (want_dx) {
          dx.resize(in.size(), batch);
          Map(dx.data(), in.channels, in.pixels() * batch).noalias() = w * dcols;
        }
        break;
      }
      case LayerKind::BatchNorm: {
        const Index c = in.channels;
        const Index m = in.pixels() * batch;
        ConstMap gy(grad.data(), c, m);
        Eigen::Map<const Vector<S>> gamma(p, c);
        const Matrix<S>& xhat = entry.a;
        const Vector<S>& inv = entry.b;
        if (gp) {
          Eigen::Map<Vector<S>>(gp, c) += (gy.array() * xhat.array()).rowwise().sum().matrix();
          Eigen::Map<Vector<S>>(gp + c, c) += gy.rowwise().sum();
        }
        if (want_dx) {
          dx.resize(in.size(), batch);
          Map dxm(dx.data(), c, m);
          Matrix<S> dxhat = gy.array().colwise() * gamma.array();
          if (tape.training) {
            Vector<S> sum_d = dxhat.rowwise().sum();
            Vector<S> sum_dx = (dxhat.array() * xhat.array()).rowwise().sum().matrix();
            const S inv_m = S(1) / S(m);
            dxm = ((dxhat.array() * S(m)).colwise() - sum_d.array() - (xhat.array().colwise() * sum_dx.array()))
                      .colwise() *
                  (inv.array() * inv_m);
          } else {
            dxm = dxhat.array().colwise() * inv.array();
          }
        }
        break;
      }
      case LayerKind::LeakyReLU: {
        const S slope = S(spec.slope);
        dx = grad.binaryExpr(entry.a, [slope](S g, S v) { return v > S(0) ? g : slope * g; });
        break;
      }
      case LayerKind::Tanh:
        dx = (grad.array() * (S(1) - entry.a.array().square())).matrix();
        break;
      case LayerKind::UnitTanh:
        dx = (grad.array() * S(2) * entry.a.array() * (S(1) - entry.a.array())).matrix();
        break;
      case LayerKind::Clip: {
        const S lo = S(spec.lo), hi = S(spec.hi);
        dx = grad.binaryExpr(entry.a, [lo, hi](S g, S v) { return (v > lo && v < hi) ? g : S(0); });
        break;
      }
      case LayerKind::GlobalAvgPool: {
        dx.resize(in.size(), batch);
        const S scale = S(1) / S(in.pixels());
        for (Index n = 0; n < batch; ++n)
          Map(dx.col(n).data(), in.channels, in.pixels()) = (grad.col(n) * scale).replicate(1, in.pixels());
        break;
      }
    }
    if (!want_dx) return {};
    grad = std::move(dx);
  }
  return grad;
}

template <typename S>
Network<S> Network<S>::prefix(std::size_t count) const {
  count = std::min(count, specs_.size());
  Network out(input_shape(), std::vector<LayerSpec>(specs_.begin(), specs_.begin() + Index(count)));
  out.params_ = params_.head(param_offset_[count]);
  out.buffers_ = buffers_.head(buffer_offset_[count]);
  return out;
}

template <typename S>
void Adam<S>::step(Vector<S>& params, const Vector<S>& grad) {
  if (m.size() != params.size()) {
    m = Vector<S>::Zero(params.size());
    v = Vector<S>::Zero(params.size());
    step_count = 0;
  }
  ++step_count;
  const S b1 = S(beta1), b2 = S(beta2);
  m = b1 * m + (S(1) - b1) * grad;
  v = b2 * v + (S(1) - b2) * grad.cwiseAbs2();
  const S c1 = S(1.0 - std::pow(beta1, double(step_count)));
  const S c2 = S(1.0 - std::pow(beta2, double(step_count)));
  const S lr = S(learning_rate);
  params.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + S(epsilon));
}

template class Network<float>;
template class Network<double>;
template struct Adam<float>;
template struct Adam<double>;

}  // namespace ungan::nn
