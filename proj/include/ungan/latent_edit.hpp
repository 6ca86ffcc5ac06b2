#pragma once

// Linear attribute boundaries in latent space and edits along them.

#include "ungan/model_zoo.hpp"

#include <string>
#include <vector>

namespace ungan {

inline constexpr double kUnreliableBoundaryAccuracy = 0.6;

struct SemanticDirection {
  Vector<double> normal;  // unit norm
  std::string attribute;
  double bias = 0;        // separator: normal . z + bias = 0
  double train_accuracy = 0;
  bool reliable = false;  // train_accuracy >= kUnreliableBoundaryAccuracy
};

struct BoundaryFitConfig {
  double l2 = 1e-2;
  int max_iterations = 50;
  double tolerance = 1e-10;
};

// L2-regularized logistic regression fitted by Newton (IRLS) steps. Labels are
// 0/1; the normal points toward label 1.
SemanticDirection fit_boundary(const std::vector<Vector<double>>& latents, const std::vector<int>& labels,
                               const std::string& attribute = "", const BoundaryFitConfig& config = {});

double signed_distance(const SemanticDirection& d, const Vector<double>& z);

Vector<double> edit_latent(const Vector<double>& z, const SemanticDirection& d, double alpha);

// n1 with its component along n2 removed; n2 is normalized first.
Vector<double> conditional_direction(const Vector<double>& n1, const Vector<double>& n2);

// Synthetic attribute: 1 when the generated image is brighter than the median.
std::vector<int> brightness_labels(const Generator<float>& g, const std::vector<Vector<double>>& latents);

}  // namespace ungan
