#pragma once

#include "ungan/core.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace ungan {

// 8-bit PNG round trip; values are quantized to k/255.
Image<float> read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image<float>& image);

// Quantize to the 8-bit grid without touching disk (what a PNG round trip yields).
Image<float> quantize_8bit(const Image<float>& image);

struct ImageFile {
  std::string name;  // file name relative to the directory
  Image<float> image;
};

// All *.png files of a directory, sorted by name.
std::vector<ImageFile> read_png_directory(const std::filesystem::path& dir);
void write_png_directory(const std::filesystem::path& dir, const std::vector<ImageFile>& files);

}  // namespace ungan
