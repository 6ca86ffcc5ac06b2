#include "ungan/latent_edit.hpp"

#include <algorithm>
#include <cmath>

namespace ungan {

SemanticDirection fit_boundary(const std::vector<Vector<double>>& latents, const std::vector<int>& labels,
                               const std::string& attribute, const BoundaryFitConfig& config) {
  if (latents.empty() || latents.size() != labels.size()) throw ShapeError("fit_boundary: latents and labels differ");
  const Eigen::Index d = latents.front().size();
  for (const auto& z : latents)
    if (z.size() != d) throw ShapeError("fit_boundary: latents differ in dimension");
  const bool any1 = std::any_of(labels.begin(), labels.end(), [](int l) { return l == 1; });
  const bool any0 = std::any_of(labels.begin(), labels.end(), [](int l) { return l == 0; });
  for (int l : labels)
    if (l != 0 && l != 1) throw RangeError("fit_boundary: labels must be 0 or 1");
  if (!any0 || !any1) throw Error("fit_boundary: both classes must be present");

  const Eigen::Index n = Eigen::Index(latents.size());
  Eigen::MatrixXd x(n, d + 1);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x.row(i).head(d) = latents[std::size_t(i)].transpose();
    x(i, d) = 1.0;
    y[i] = labels[std::size_t(i)];
  }
  Eigen::VectorXd reg = Eigen::VectorXd::Constant(d + 1, config.l2);
  reg[d] = 0;

  Eigen::VectorXd w = Eigen::VectorXd::Zero(d + 1);
  for (int it = 0; it < config.max_iterations; ++it) {
    const Eigen::VectorXd p = (1.0 + (-(x * w).array()).exp()).inverse().matrix();
    const Eigen::VectorXd s = (p.array() * (1 - p.array())).max(1e-12).matrix();
    const Eigen::VectorXd grad = x.transpose() * (p - y) + reg.cwiseProduct(w);
    Eigen::MatrixXd hess = x.transpose() * s.asDiagonal() * x;
    hess.diagonal() += reg;
    const Eigen::VectorXd step = hess.ldlt().solve(grad);
    w -= step;
    if (step.squaredNorm() < config.tolerance) break;
  }

  SemanticDirection out;
  const double norm = w.head(d).norm();
  if (!(norm > 0)) throw Error("fit_boundary: degenerate separator");
  out.normal = w.head(d) / norm;
  out.bias = w[d] / norm;
  out.attribute = attribute;
  int correct = 0;
  for (Eigen::Index i = 0; i < n; ++i) correct += (signed_distance(out, latents[std::size_t(i)]) > 0) == (y[i] == 1);
  out.train_accuracy = double(correct) / double(n);
  out.reliable = out.train_accuracy >= kUnreliableBoundaryAccuracy;
  return out;
}

double signed_distance(const SemanticDirection& d, const Vector<double>& z) {
  if (z.size() != d.normal.size()) throw ShapeError("signed_distance: dimension mismatch");
  return d.normal.dot(z) + d.bias;
}

Vector<double> edit_latent(const Vector<double>& z, const SemanticDirection& d, double alpha) {
  if (z.size() != d.normal.size()) throw ShapeError("edit_latent: dimension mismatch");
  return z + alpha * d.normal;
}

Vector<double> conditional_direction(const Vector<double>& n1, const Vector<double>& n2) {
  if (n1.size() != n2.size()) throw ShapeError("conditional_direction: dimension mismatch");
  const double norm = n2.norm();
  if (!(norm > 0)) throw Error("conditional_direction: zero condition direction");
  const Vector<double> u = n2 / norm;
  return n1 - n1.dot(u) * u;
}

std::vector<int> brightness_labels(const Generator<float>& g, const std::vector<Vector<double>>& latents) {
  if (latents.empty()) throw Error("brightness_labels: no latents");
  Matrix<float> z(g.latent.dim, Eigen::Index(latents.size()));
  for (std::size_t j = 0; j < latents.size(); ++j) {
    if (latents[j].size() != g.latent.dim) throw ShapeError("brightness_labels: latent dimension mismatch");
    z.col(Eigen::Index(j)) = latents[j].cast<float>();
  }
  const Matrix<float> images = generate_batch(g, z);
  std::vector<double> mean(latents.size());
  for (std::size_t j = 0; j < latents.size(); ++j) mean[j] = double(images.col(Eigen::Index(j)).mean());
  std::vector<double> sorted = mean;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const double median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  std::vector<int> labels;
  for (double m : mean) labels.push_back(m > median ? 1 : 0);
  return labels;
}

}  // namespace ungan
