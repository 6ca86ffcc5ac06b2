#pragma once

// Test-only helpers: central finite differences and small fixtures. Nothing
// here calls into the gradient code paths it is used to check.

#include "ungan/core.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace ungan::testing {

inline Vector<double> central_difference(const std::function<double(const Vector<double>&)>& f,
                                         const Vector<double>& x, double h = 1e-6) {
  Vector<double> g(x.size());
  Vector<double> probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double up = f(probe);
    probe[i] = x[i] - h;
    const double down = f(probe);
    probe[i] = x[i];
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

inline double relative_error(const Vector<double>& a, const Vector<double>& b) {
  const double scale = std::max({a.norm(), b.norm(), 1e-12});
  return (a - b).norm() / scale;
}

// Smooth deterministic pattern used wherever a fixture image is needed.
inline Image<float> pattern_image(Shape s, double phase) {
  Image<float> img(s);
  for (int y = 0; y < s.height; ++y)
    for (int x = 0; x < s.width; ++x)
      for (int c = 0; c < s.channels; ++c)
        img.at(y, x, c) = float(0.5 + 0.35 * std::sin(0.37 * x + 0.23 * y * (c + 1) + phase) *
                                          std::cos(0.11 * (x - y) + 0.5 * c + 0.3 * phase));
  return img;
}

// Metric fixture pair k (0..19); tests/oracles/metrics_oracle.py builds the same pairs.
inline std::pair<Image<float>, Image<float>> metric_fixture(int k) {
  const Shape shapes[] = {{16, 16, 3}, {12, 14, 1}, {11, 13, 3}, {20, 12, 1}};
  const Shape s = shapes[k % 4];
  const Image<float> a = pattern_image(s, 0.7 * k);
  Image<float> b(s);
  const double amp = 0.02 + 0.01 * k;
  for (int y = 0; y < s.height; ++y)
    for (int x = 0; x < s.width; ++x)
      for (int c = 0; c < s.channels; ++c) {
        double v = double(a.at(y, x, c)) + amp * std::sin(1.3 * x - 0.7 * y + 2.1 * c + k);
        if (k == 19) v = 1.0 - double(a.at(y, x, c));
        b.at(y, x, c) = float(std::clamp(v, 0.0, 1.0));
      }
  return {a, b};
}

}  // namespace ungan::testing
