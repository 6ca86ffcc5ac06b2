#pragma once

// Baseline image distortions for comparison against cloaks.

#include "ungan/metrics.hpp"

#include <string>
#include <vector>

namespace ungan {

enum class DistortionKind {
  ShearX,
  ShearY,
  TranslateX,
  TranslateY,
  Rotate,
  Brightness,
  Color,
  Contrast,
  Solarize,
  CenterCrop,
  GaussianBlur,
  GaussianNoise,
  JpegCompression,
};

std::string to_string(DistortionKind kind);
DistortionKind distortion_from_string(const std::string& name);
std::vector<DistortionKind> all_distortions();

struct MagnitudeRange {
  double lo, hi;
  double identity;  // magnitude that leaves the image unchanged (NaN for jpeg)
};

// Units: shear factor; translation as a fraction of the side; degrees;
// enhancement factors (1 = unchanged); solarize threshold; crop ratio; odd blur
// kernel size; noise stddev; jpeg quality.
MagnitudeRange magnitude_range(DistortionKind kind);

struct DistortionSpec {
  DistortionKind kind = DistortionKind::Rotate;
  double magnitude = 0;
  std::uint64_t seed = 0;  // GaussianNoise only
};

void validate(const DistortionSpec& spec);

Image<float> apply_distortion(const Image<float>& x, const DistortionSpec& spec);

struct SweepPoint {
  double magnitude;
  UtilityReport utility;  // means over the image set
};

// magnitudes must be ascending.
std::vector<SweepPoint> sweep_distortion(const std::vector<Image<float>>& images, DistortionKind kind,
                                         const std::vector<double>& magnitudes, std::uint64_t seed = 0);

// libjpeg round trip at the given quality (1..100).
Image<float> jpeg_roundtrip(const Image<float>& x, int quality);

}  // namespace ungan
