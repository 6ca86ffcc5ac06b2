#pragma once

// Utility metrics (MSE / SSIM / PSNR) and identity-verification metrics
// (embedding distance, threshold calibration, matching rate).

#include "ungan/dataset.hpp"
#include "ungan/model_zoo.hpp"

#include <string>
#include <vector>

namespace ungan {

inline constexpr double kPsnrCap = 100.0;

struct SsimSettings {
  int window = 7;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
};

struct UtilityReport {
  double mse = 0;
  double ssim = 1;
  double psnr = kPsnrCap;
};

double mse(const Image<float>& a, const Image<float>& b);
// Mean of the local SSIM map over every fully contained window and channel.
double ssim(const Image<float>& a, const Image<float>& b, const SsimSettings& settings = {});
// 10 log10(1 / mse); kPsnrCap for identical images.
double psnr(const Image<float>& a, const Image<float>& b);
UtilityReport utility(const Image<float>& a, const Image<float>& b);

// Unit-normalized identity embedding.
Vector<float> identity_embedding(const IdentityEmbedder<float>& embedder, const Image<float>& x);
// L2 distance between unit-normalized embeddings.
double face_distance(const IdentityEmbedder<float>& embedder, const Image<float>& a, const Image<float>& b);

struct LabeledDistance {
  double distance = 0;
  bool same = false;
};

struct ThresholdCalibration {
  double threshold = 0;
  int pairs_used = 0;
  std::string method = "min_max_far_frr";
  double equal_error_rate = 0;  // max(FAR, FRR) at the threshold
  bool reliable = true;         // false when equal_error_rate > kUnreliableEer
  std::vector<LabeledDistance> pairs;
};

inline constexpr double kUnreliableEer = 0.25;

// Error rates of a threshold: FAR = different pairs accepted (d < t), FRR = same
// pairs rejected (d >= t).
double false_accept_rate(const std::vector<LabeledDistance>& pairs, double threshold);
double false_reject_rate(const std::vector<LabeledDistance>& pairs, double threshold);

// Scans the midpoints between consecutive distinct sorted distances and keeps
// the one minimizing max(FAR, FRR) (the smallest such midpoint on ties).
ThresholdCalibration calibrate_threshold(const std::vector<LabeledDistance>& pairs);

// Balanced same/different identity pairs drawn from a labeled dataset.
std::vector<LabeledDistance> identity_pairs(const IdentityEmbedder<float>& embedder, const Dataset& dataset,
                                            int pairs_per_class, std::uint64_t seed);

struct MatchVerdict {
  double distance = 0;
  bool same_identity = false;
};

MatchVerdict verify(const IdentityEmbedder<float>& embedder, const ThresholdCalibration& calibration,
                    const Image<float>& a, const Image<float>& b);

// Fraction of aligned (target, reconstruction) pairs judged the same identity.
double matching_rate(const IdentityEmbedder<float>& embedder, const std::vector<Image<float>>& targets,
                     const std::vector<Image<float>>& reconstructions, const ThresholdCalibration& calibration);
double matching_rate(const std::vector<double>& distances, const ThresholdCalibration& calibration);

}  // namespace ungan
