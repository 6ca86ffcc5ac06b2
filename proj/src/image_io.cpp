#include "ungan/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>

namespace ungan {

namespace fs = std::filesystem;

Image<float> read_png(const fs::path& path) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str()))
    throw Error("cannot read PNG '" + path.string() + "': " + png.message);
  const bool gray = (png.format & PNG_FORMAT_FLAG_COLOR) == 0;
  png.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, buffer.data(), 0, nullptr))
    throw Error("cannot decode PNG '" + path.string() + "': " + png.message);
  Image<float> img(Shape{int(png.height), int(png.width), gray ? 1 : 3});
  for (Eigen::Index i = 0; i < img.data.size(); ++i) img.data[i] = float(buffer[std::size_t(i)]) / 255.0f;
  return img;
}

void write_png(const fs::path& path, const Image<float>& image) {
  if (image.shape.channels != 1 && image.shape.channels != 3)
    throw ShapeError("PNG output supports 1 or 3 channels, got " + to_string(image.shape));
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = png_uint_32(image.shape.width);
  png.height = png_uint_32(image.shape.height);
  png.format = image.shape.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  std::vector<png_byte> buffer(std::size_t(image.data.size()));
  for (Eigen::Index i = 0; i < image.data.size(); ++i)
    buffer[std::size_t(i)] = png_byte(std::lround(std::clamp(image.data[i], 0.0f, 1.0f) * 255.0f));
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  if (!png_image_write_to_file(&png, path.c_str(), 0, buffer.data(), 0, nullptr))
    throw Error("cannot write PNG '" + path.string() + "': " + png.message);
}

Image<float> quantize_8bit(const Image<float>& image) {
  Image<float> out = image;
  for (auto& v : out.data) v = float(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)) / 255.0f;
  return out;
}

std::vector<ImageFile> read_png_directory(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error("not a directory: '" + dir.string() + "'");
  std::vector<fs::path> paths;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".png") paths.push_back(entry.path());
  std::sort(paths.begin(), paths.end());
  std::vector<ImageFile> files;
  files.reserve(paths.size());
  for (const auto& p : paths) files.push_back({p.filename().string(), read_png(p)});
  return files;
}

void write_png_directory(const fs::path& dir, const std::vector<ImageFile>& files) {
  fs::create_directories(dir);
  for (const auto& f : files) write_png(dir / f.name, f.image);
}

}  // namespace ungan
