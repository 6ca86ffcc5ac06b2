#include "ungan/distortions.hpp"

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <limits>
#include <numbers>

#include <jpeglib.h>

namespace ungan {

namespace {

constexpr const char* kNames[] = {"shear_x",  "shear_y",    "translate_x", "translate_y",   "rotate",
                                  "brightness", "color",    "contrast",    "solarize",      "center_crop",
                                  "gaussian_blur", "gaussian_noise", "jpeg_compression"};

float sample_bilinear(const Image<float>& x, double sy, double sx, int c) {
  const int h = x.shape.height, w = x.shape.width;
  const int y0 = int(std::floor(sy)), x0 = int(std::floor(sx));
  const double fy = sy - y0, fx = sx - x0;
  double acc = 0;
  for (int dy = 0; dy < 2; ++dy)
    for (int dx = 0; dx < 2; ++dx) {
      const int yy = y0 + dy, xx = x0 + dx;
      if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
      acc += (dy ? fy : 1 - fy) * (dx ? fx : 1 - fx) * x.at(yy, xx, c);
    }
  return float(acc);
}

// Output pixel (y, x) samples the input at map(y, x), both relative to the image centre.
template <typename Map>
Image<float> warp(const Image<float>& x, Map map) {
  Image<float> out(x.shape);
  const double cy = (x.shape.height - 1) / 2.0, cx = (x.shape.width - 1) / 2.0;
  for (int y = 0; y < x.shape.height; ++y)
    for (int xx = 0; xx < x.shape.width; ++xx) {
      const auto [sy, sx] = map(y - cy, xx - cx);
      for (int c = 0; c < x.shape.channels; ++c) out.at(y, xx, c) = sample_bilinear(x, sy + cy, sx + cx, c);
    }
  return out;
}

Image<float> grayscale(const Image<float>& x) {
  Image<float> g(x.shape);
  for (int y = 0; y < x.shape.height; ++y)
    for (int xx = 0; xx < x.shape.width; ++xx) {
      float v = x.at(y, xx, 0);
      if (x.shape.channels >= 3) v = 0.299f * x.at(y, xx, 0) + 0.587f * x.at(y, xx, 1) + 0.114f * x.at(y, xx, 2);
      for (int c = 0; c < x.shape.channels; ++c) g.at(y, xx, c) = v;
    }
  return g;
}

Image<float> blend(const Image<float>& base, const Image<float>& x, double factor) {
  return clip_unit(Image<float>(x.shape, (base.data + float(factor) * (x.data - base.data)).eval()));
}

Image<float> gaussian_blur(const Image<float>& x, int k) {
  const double sigma = 0.3 * ((k - 1) * 0.5 - 1) + 0.8;
  const int r = k / 2;
  std::vector<double> w(static_cast<std::size_t>(k));
  double total = 0;
  for (int i = 0; i < k; ++i) total += w[std::size_t(i)] = std::exp(-double((i - r) * (i - r)) / (2 * sigma * sigma));
  for (auto& v : w) v /= total;
  const int h = x.shape.height, wd = x.shape.width;
  auto reflect = [](int i, int n) {
    while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - i - 1;
    return i;
  };
  Image<float> tmp(x.shape), out(x.shape);
  for (int c = 0; c < x.shape.channels; ++c) {
    for (int y = 0; y < h; ++y)
      for (int xx = 0; xx < wd; ++xx) {
        double s = 0;
        for (int i = -r; i <= r; ++i) s += w[std::size_t(i + r)] * x.at(y, reflect(xx + i, wd), c);
        tmp.at(y, xx, c) = float(s);
      }
    for (int y = 0; y < h; ++y)
      for (int xx = 0; xx < wd; ++xx) {
        double s = 0;
        for (int i = -r; i <= r; ++i) s += w[std::size_t(i + r)] * tmp.at(reflect(y + i, h), xx, c);
        out.at(y, xx, c) = float(s);
      }
  }
  return clip_unit(out);
}

Image<float> center_crop(const Image<float>& x, double ratio) {
  const double ch = x.shape.height * ratio, cw = x.shape.width * ratio;
  const double oy = (x.shape.height - ch) / 2.0, ox = (x.shape.width - cw) / 2.0;
  Image<float> out(x.shape);
  for (int y = 0; y < x.shape.height; ++y)
    for (int xx = 0; xx < x.shape.width; ++xx) {
      // Pixel-centre alignment of the resized crop.
      const double sy = std::clamp(oy + (y + 0.5) * ratio - 0.5, 0.0, double(x.shape.height - 1));
      const double sx = std::clamp(ox + (xx + 0.5) * ratio - 0.5, 0.0, double(x.shape.width - 1));
      for (int c = 0; c < x.shape.channels; ++c) out.at(y, xx, c) = sample_bilinear(x, sy, sx, c);
    }
  return out;
}

struct JpegError {
  jpeg_error_mgr mgr;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void on_jpeg_error(j_common_ptr info) {
  auto* err = reinterpret_cast<JpegError*>(info->err);
  (*info->err->format_message)(info, err->message);
  std::longjmp(err->jump, 1);
}

}  // namespace

std::string to_string(DistortionKind kind) { return kNames[int(kind)]; }

DistortionKind distortion_from_string(const std::string& name) {
  for (auto k : all_distortions())
    if (to_string(k) == name) return k;
  throw Error("unknown distortion '" + name + "'");
}

std::vector<DistortionKind> all_distortions() {
  std::vector<DistortionKind> out;
  for (int i = 0; i <= int(DistortionKind::JpegCompression); ++i) out.push_back(DistortionKind(i));
  return out;
}

MagnitudeRange magnitude_range(DistortionKind kind) {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  switch (kind) {
    case DistortionKind::ShearX:
    case DistortionKind::ShearY: return {0, 0.3, 0};
    case DistortionKind::TranslateX:
    case DistortionKind::TranslateY: return {0, 0.3, 0};
    case DistortionKind::Rotate: return {0, 30, 0};
    case DistortionKind::Brightness:
    case DistortionKind::Color:
    case DistortionKind::Contrast: return {0, 2, 1};
    case DistortionKind::Solarize: return {0, 1, 1};
    case DistortionKind::CenterCrop: return {0.6, 1, 1};
    case DistortionKind::GaussianBlur: return {1, 9, 1};
    case DistortionKind::GaussianNoise: return {0, 0.1, 0};
    case DistortionKind::JpegCompression: return {10, 90, nan};
  }
  throw Error("unknown distortion kind");
}

void validate(const DistortionSpec& spec) {
  const auto r = magnitude_range(spec.kind);
  if (!(spec.magnitude >= r.lo && spec.magnitude <= r.hi))
    throw RangeError(to_string(spec.kind) + " magnitude " + std::to_string(spec.magnitude) + " outside [" +
                     std::to_string(r.lo) + ", " + std::to_string(r.hi) + "]");
  if (spec.kind == DistortionKind::GaussianBlur) {
    const double k = spec.magnitude;
    if (k != std::floor(k) || int(k) % 2 == 0) throw RangeError("gaussian_blur kernel must be an odd integer");
  }
  if (spec.kind == DistortionKind::JpegCompression && spec.magnitude != std::floor(spec.magnitude))
    throw RangeError("jpeg quality must be an integer");
}

Image<float> apply_distortion(const Image<float>& x, const DistortionSpec& spec) {
  validate(spec);
  const double m = spec.magnitude;
  if (spec.kind != DistortionKind::JpegCompression && m == magnitude_range(spec.kind).identity) return x;
  switch (spec.kind) {
    case DistortionKind::ShearX:
      return warp(x, [m](double y, double xx) { return std::pair{y, xx + m * y}; });
    case DistortionKind::ShearY:
      return warp(x, [m](double y, double xx) { return std::pair{y + m * xx, xx}; });
    case DistortionKind::TranslateX: {
      const double d = m * x.shape.width;
      return warp(x, [d](double y, double xx) { return std::pair{y, xx - d}; });
    }
    case DistortionKind::TranslateY: {
      const double d = m * x.shape.height;
      return warp(x, [d](double y, double xx) { return std::pair{y - d, xx}; });
    }
    case DistortionKind::Rotate: {
      const double a = m * std::numbers::pi / 180.0, c = std::cos(a), s = std::sin(a);
      return warp(x, [c, s](double y, double xx) { return std::pair{-s * xx + c * y, c * xx + s * y}; });
    }
    case DistortionKind::Brightness:
      return blend(Image<float>(x.shape), x, m);
    case DistortionKind::Color:
      return blend(grayscale(x), x, m);
    case DistortionKind::Contrast: {
      const float mean = grayscale(x).data.mean();
      return blend(Image<float>::constant(x.shape, mean), x, m);
    }
    case DistortionKind::Solarize: {
      const float t = float(m);
      return Image<float>(x.shape, x.data.unaryExpr([t](float v) { return v > t ? 1.0f - v : v; }).eval());
    }
    case DistortionKind::CenterCrop:
      return center_crop(x, m);
    case DistortionKind::GaussianBlur:
      return gaussian_blur(x, int(m));
    case DistortionKind::GaussianNoise: {
      Rng rng(spec.seed);
      return Image<float>(x.shape, clip_unit((x.data + gaussian_vector<float>(x.data.size(), rng, m)).eval()));
    }
    case DistortionKind::JpegCompression:
      return jpeg_roundtrip(x, int(m));
  }
  throw Error("unknown distortion kind");
}

std::vector<SweepPoint> sweep_distortion(const std::vector<Image<float>>& images, DistortionKind kind,
                                         const std::vector<double>& magnitudes, std::uint64_t seed) {
  if (images.empty() || magnitudes.empty()) throw Error("sweep_distortion: empty inputs");
  if (!std::is_sorted(magnitudes.begin(), magnitudes.end()))
    throw Error("sweep_distortion: magnitudes must be ascending");
  std::vector<SweepPoint> out;
  for (double m : magnitudes) {
    UtilityReport mean{0, 0, 0};
    for (std::size_t i = 0; i < images.size(); ++i) {
      const auto u = utility(images[i], apply_distortion(images[i], {kind, m, derive_seed(seed, i)}));
      mean.mse += u.mse;
      mean.ssim += u.ssim;
      mean.psnr += u.psnr;
    }
    const double n = double(images.size());
    out.push_back({m, {mean.mse / n, mean.ssim / n, mean.psnr / n}});
  }
  return out;
}

Image<float> jpeg_roundtrip(const Image<float>& x, int quality) {
  if (quality < 1 || quality > 100) throw RangeError("jpeg quality must lie in [1, 100]");
  const int channels = x.shape.channels;
  if (channels != 1 && channels != 3) throw ShapeError("jpeg needs 1 or 3 channels");
  const int h = x.shape.height, w = x.shape.width;
  std::vector<unsigned char> pixels(std::size_t(h) * w * channels);
  for (std::size_t i = 0; i < pixels.size(); ++i)
    pixels[i] = static_cast<unsigned char>(std::lround(std::clamp(x.data[Eigen::Index(i)], 0.0f, 1.0f) * 255.0f));

  unsigned char* buffer = nullptr;
  unsigned long size = 0;
  JpegError err;
  {
    jpeg_compress_struct cinfo;
    cinfo.err = jpeg_std_error(&err.mgr);
    err.mgr.error_exit = on_jpeg_error;
    if (setjmp(err.jump)) {
      jpeg_destroy_compress(&cinfo);
      std::free(buffer);
      throw Error(std::string("jpeg encode: ") + err.message);
    }
    jpeg_create_compress(&cinfo);
    jpeg_mem_dest(&cinfo, &buffer, &size);
    cinfo.image_width = JDIMENSION(w);
    cinfo.image_height = JDIMENSION(h);
    cinfo.input_components = channels;
    cinfo.in_color_space = channels == 3 ? JCS_RGB : JCS_GRAYSCALE;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, quality, TRUE);
    jpeg_start_compress(&cinfo, TRUE);
    while (cinfo.next_scanline < cinfo.image_height) {
      JSAMPROW row = &pixels[std::size_t(cinfo.next_scanline) * w * channels];
      jpeg_write_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_compress(&cinfo);
    jpeg_destroy_compress(&cinfo);
  }

  Image<float> out(x.shape);
  std::vector<unsigned char> row(std::size_t(w) * channels);
  jpeg_decompress_struct dinfo;
  dinfo.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = on_jpeg_error;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&dinfo);
    std::free(buffer);
    throw Error(std::string("jpeg decode: ") + err.message);
  }
  jpeg_create_decompress(&dinfo);
  jpeg_mem_src(&dinfo, buffer, size);
  jpeg_read_header(&dinfo, TRUE);
  dinfo.out_color_space = channels == 3 ? JCS_RGB : JCS_GRAYSCALE;
  jpeg_start_decompress(&dinfo);
  while (dinfo.output_scanline < dinfo.output_height) {
    const int y = int(dinfo.output_scanline);
    JSAMPROW r = row.data();
    jpeg_read_scanlines(&dinfo, &r, 1);
    for (int i = 0; i < w * channels; ++i) out.data[Eigen::Index(y) * w * channels + i] = row[std::size_t(i)] / 255.0f;
  }
  jpeg_finish_decompress(&dinfo);
  jpeg_destroy_decompress(&dinfo);
  std::free(buffer);
  return out;
}

}  // namespace ungan
