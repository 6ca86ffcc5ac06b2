#include "ungan/dataset.hpp"

#include "ungan/image_io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace ungan {

namespace fs = std::filesystem;

bool Dataset::has_identities() const {
  return !identities.empty() && std::all_of(identities.begin(), identities.end(), [](int v) { return v >= 0; });
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  Dataset out;
  out.shape = shape;
  std::map<std::string, bool> keep;
  for (auto i : indices) {
    out.names.push_back(names.at(i));
    out.images.push_back(images.at(i));
    out.identities.push_back(identities.empty() ? -1 : identities.at(i));
    keep[names.at(i)] = true;
  }
  for (const auto& a : attributes)
    if (keep.count(a.file)) out.attributes.push_back(a);
  return out;
}

std::vector<int> Dataset::attribute_labels(const std::string& attribute) const {
  std::map<std::string, int> by_file;
  for (const auto& a : attributes)
    if (a.attribute == attribute) by_file[a.file] = a.label;
  std::vector<int> labels;
  labels.reserve(names.size());
  for (const auto& n : names) {
    auto it = by_file.find(n);
    labels.push_back(it == by_file.end() ? -1 : it->second);
  }
  return labels;
}

namespace {

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::vector<std::vector<std::string>> rows;
  std::ifstream in(path);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (header) {
      header = false;
      if (!cells.empty() && (cells[0] == "file" || cells[0] == "filename")) continue;
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace

Dataset load_dataset(const fs::path& dir) {
  Dataset ds;
  auto files = read_png_directory(dir);
  if (files.empty()) throw Error("dataset directory '" + dir.string() + "' contains no PNG images");
  ds.shape = files.front().image.shape;
  std::map<std::string, std::size_t> index;
  for (auto& f : files) {
    if (!(f.image.shape == ds.shape))
      throw ShapeError("dataset image '" + f.name + "' has shape " + to_string(f.image.shape) + ", expected " +
                       to_string(ds.shape));
    index[f.name] = ds.names.size();
    ds.names.push_back(f.name);
    ds.images.push_back(std::move(f.image));
  }
  ds.identities.assign(ds.names.size(), -1);
  if (fs::exists(dir / "identities.csv")) {
    for (const auto& row : read_csv(dir / "identities.csv")) {
      if (row.size() < 2) continue;
      auto it = index.find(row[0]);
      if (it != index.end()) ds.identities[it->second] = std::stoi(row[1]);
    }
  }
  if (fs::exists(dir / "attributes.csv")) {
    for (const auto& row : read_csv(dir / "attributes.csv")) {
      if (row.size() < 3) continue;
      const int label = std::stoi(row[2]);
      if (label != 0 && label != 1) throw RangeError("attribute label must be 0 or 1 in row for '" + row[0] + "'");
      ds.attributes.push_back({row[0], row[1], label});
    }
  }
  return ds;
}

void save_dataset(const fs::path& dir, const Dataset& ds) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < ds.size(); ++i) write_png(dir / ds.names[i], ds.images[i]);
  if (!ds.identities.empty()) {
    std::ofstream out(dir / "identities.csv");
    out << "file,identity\n";
    for (std::size_t i = 0; i < ds.size(); ++i) out << ds.names[i] << ',' << ds.identities[i] << '\n';
  }
  if (!ds.attributes.empty()) {
    std::ofstream out(dir / "attributes.csv");
    out << "file,attribute,label\n";
    for (const auto& a : ds.attributes) out << a.file << ',' << a.attribute << ',' << a.label << '\n';
  }
}

namespace {

using Rgb = std::array<float, 3>;

struct FaceIdentity {
  Rgb skin, hair, iris;
  double radius_x, radius_y;
  double hair_line;  // fraction of the face height covered from the top
  bool long_hair;
  double eye_spacing, eye_radius, eye_height;
  double mouth_half_width;
  double nose_length;
  bool glasses;
  bool dark_hair;
};

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

Rgb mix(const Rgb& a, const Rgb& b, double t) {
  return {float(a[0] + (b[0] - a[0]) * t), float(a[1] + (b[1] - a[1]) * t), float(a[2] + (b[2] - a[2]) * t)};
}

FaceIdentity sample_identity(Rng& rng) {
  FaceIdentity id{};
  id.skin = mix({0.98f, 0.86f, 0.74f}, {0.42f, 0.28f, 0.18f}, uniform(rng, 0, 1));
  static const std::array<Rgb, 5> hair_palette{{{0.08f, 0.07f, 0.06f},
                                                 {0.38f, 0.22f, 0.10f},
                                                 {0.92f, 0.80f, 0.45f},
                                                 {0.72f, 0.30f, 0.10f},
                                                 {0.75f, 0.75f, 0.75f}}};
  const auto h = std::uniform_int_distribution<int>(0, 4)(rng);
  id.hair = hair_palette[std::size_t(h)];
  for (auto& c : id.hair) c = float(std::clamp(c + uniform(rng, -0.06, 0.06), 0.0, 1.0));
  id.dark_hair = h <= 1;
  static const std::array<Rgb, 3> iris_palette{{{0.15f, 0.35f, 0.75f}, {0.35f, 0.20f, 0.08f}, {0.20f, 0.55f, 0.25f}}};
  id.iris = iris_palette[std::size_t(std::uniform_int_distribution<int>(0, 2)(rng))];
  id.radius_x = uniform(rng, 0.25, 0.34);
  id.radius_y = uniform(rng, 0.31, 0.40);
  id.hair_line = uniform(rng, 0.15, 0.55);
  id.long_hair = uniform(rng, 0, 1) < 0.4;
  id.eye_spacing = uniform(rng, 0.08, 0.14);
  id.eye_radius = uniform(rng, 0.028, 0.048);
  id.eye_height = uniform(rng, 0.08, 0.22);
  id.mouth_half_width = uniform(rng, 0.06, 0.13);
  id.nose_length = uniform(rng, 0.05, 0.14);
  id.glasses = uniform(rng, 0, 1) < 0.3;
  return id;
}

// Anti-aliased coverage of a shape given its signed distance in pixels.
double coverage(double signed_distance_px) { return std::clamp(0.5 - signed_distance_px, 0.0, 1.0); }

void blend(Rgb& dst, const Rgb& src, double alpha) {
  for (int c = 0; c < 3; ++c) dst[std::size_t(c)] = float(dst[std::size_t(c)] * (1 - alpha) + src[std::size_t(c)] * alpha);
}

Image<float> render_face(const FaceIdentity& id, const Rgb& background, int size, double shift_x, double shift_y,
                         double gain, bool smiling, Rng& rng) {
  Image<float> img(Shape{size, size, 3});
  const double px = 1.0 / size;
  const double cx = 0.5 + shift_x * px, cy = 0.55 + shift_y * px;
  const double rx = id.radius_x, ry = id.radius_y;
  const Rgb white{0.96f, 0.96f, 0.96f}, dark{0.08f, 0.06f, 0.06f}, lips{0.75f, 0.25f, 0.28f};
  std::normal_distribution<double> grain(0.0, 0.01);
  for (int yi = 0; yi < size; ++yi) {
    for (int xi = 0; xi < size; ++xi) {
      const double u = (xi + 0.5) * px, v = (yi + 0.5) * px;
      Rgb col = background;
      const double du = (u - cx) / rx, dv = (v - cy) / ry;
      const double face_r = std::sqrt(du * du + dv * dv);
      // hair: a slightly larger ellipse behind the face, plus long sides
      const double hair_r = std::sqrt(std::pow((u - cx) / (rx * 1.12), 2) + std::pow((v - cy + 0.03) / (ry * 1.1), 2));
      double hair_alpha = coverage((hair_r - 1.0) * std::min(rx, ry) / px);
      if (!id.long_hair) hair_alpha *= coverage((v - cy) / px);
      blend(col, id.hair, hair_alpha);
      blend(col, id.skin, coverage((face_r - 1.0) * std::min(rx, ry) / px));
      // fringe over the forehead
      const double fringe_y = cy - ry + 2 * ry * id.hair_line * 0.5;
      blend(col, id.hair, coverage((face_r - 1.0) * std::min(rx, ry) / px) * coverage((v - fringe_y) / px));
      const double eye_y = cy - id.eye_height * ry;
      for (int side : {-1, 1}) {
        const double ex = cx + side * id.eye_spacing;
        const double d = std::hypot(u - ex, v - eye_y);
        blend(col, white, coverage((d - id.eye_radius) / px));
        blend(col, id.iris, coverage((d - id.eye_radius * 0.55) / px));
        // brow
        const double by = eye_y - id.eye_radius - 0.03;
        const double brow = std::max(std::abs(u - ex) - id.eye_radius * 1.2, std::abs(v - by) - 0.008);
        blend(col, dark, 0.8 * coverage(brow / px));
        if (id.glasses) {
          const double ring = std::abs(d - id.eye_radius * 1.6) - 0.012;
          blend(col, dark, coverage(ring / px));
        }
      }
      // nose
      const double nose = std::max(std::abs(u - cx) - 0.012, std::abs(v - (eye_y + id.nose_length * 0.5 + 0.04)) -
                                                                 id.nose_length * 0.5);
      blend(col, mix(id.skin, dark, 0.35), coverage(nose / px));
      // mouth: a parabola, curved upwards when smiling
      const double my = cy + 0.45 * ry;
      const double curvature = smiling ? 9.0 : -1.5;
      const double t = u - cx;
      if (std::abs(t) < id.mouth_half_width + px) {
        const double curve = my - curvature * (id.mouth_half_width * id.mouth_half_width - t * t) * 0.5;
        const double d = std::max(std::abs(v - curve) - 0.014, std::abs(t) - id.mouth_half_width);
        blend(col, lips, coverage(d / px));
      }
      for (int c = 0; c < 3; ++c)
        img.at(yi, xi, c) = float(std::clamp(col[std::size_t(c)] * gain + grain(rng), 0.0, 1.0));
    }
  }
  return img;
}

}  // namespace

Dataset make_face_sprites(const SpriteConfig& config) {
  if (config.identities <= 0 || config.per_identity <= 0 || config.size < 8)
    throw RangeError("sprite config needs identities > 0, per_identity > 0 and size >= 8");
  Dataset ds;
  ds.shape = Shape{config.size, config.size, 3};
  for (int i = 0; i < config.identities; ++i) {
    Rng id_rng(derive_seed(config.seed, std::uint64_t(i)));
    const FaceIdentity id = sample_identity(id_rng);
    for (int k = 0; k < config.per_identity; ++k) {
      Rng rng(derive_seed(config.seed ^ 0xA5A5A5A5ULL, std::uint64_t(i) * 1000 + std::uint64_t(k)));
      const double sx = uniform(rng, -1.0, 1.0), sy = uniform(rng, -1.0, 1.0);
      const double gain = uniform(rng, 0.9, 1.1);
      const bool smiling = uniform(rng, 0, 1) < 0.5;
      const Rgb background{float(uniform(rng, 0.3, 0.8)), float(uniform(rng, 0.3, 0.8)), float(uniform(rng, 0.3, 0.8))};
      char name[64];
      std::snprintf(name, sizeof(name), "id%03d_%02d.png", i, k);
      ds.names.emplace_back(name);
      ds.images.push_back(quantize_8bit(render_face(id, background, config.size, sx, sy, gain, smiling, rng)));
      ds.identities.push_back(i);
      ds.attributes.push_back({name, "smiling", smiling ? 1 : 0});
      ds.attributes.push_back({name, "dark_hair", id.dark_hair ? 1 : 0});
      ds.attributes.push_back({name, "glasses", id.glasses ? 1 : 0});
    }
  }
  return ds;
}

Split split_dataset(const Dataset& dataset, int hold_every) {
  if (hold_every < 2) throw RangeError("hold_every must be at least 2");
  std::vector<std::size_t> train, held;
  std::map<int, int> seen;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const int key = dataset.identities.empty() ? 0 : dataset.identities[i];
    const int k = seen[key]++;
    (k % hold_every == hold_every - 1 ? held : train).push_back(i);
  }
  return {dataset.subset(train), dataset.subset(held)};
}

}  // namespace ungan
