#include <doctest.h>

#include "support.hpp"
#include "ungan/dataset.hpp"
#include "ungan/hash.hpp"
#include "ungan/image_io.hpp"
#include "ungan/worker_pool.hpp"

#include <filesystem>

using namespace ungan;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ungan_unit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("sha256 known answers") {
  CHECK(sha256_hex(std::string_view("abc")) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex(std::string_view("")) == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("png round trip is the 8-bit quantization") {
  const fs::path dir = scratch_dir("png");
  for (Shape s : {Shape{32, 32, 3}, Shape{7, 5, 1}}) {
    const auto x = testing::pattern_image(s, 0.6);
    write_png(dir / "x.png", x);
    const auto y = read_png(dir / "x.png");
    CHECK(y.shape == s);
    CHECK(y.data == quantize_8bit(x).data);
    CHECK((y.data - x.data).cwiseAbs().maxCoeff() <= 0.5f / 255 + 1e-6f);
    CHECK(quantize_8bit(y).data == y.data);
  }
  CHECK_THROWS(read_png(dir / "missing.png"));
  fs::remove_all(dir);
}

TEST_CASE("dataset save and load") {
  const fs::path dir = scratch_dir("dataset");
  SpriteConfig cfg;
  cfg.identities = 4;
  cfg.per_identity = 3;
  const auto d = make_face_sprites(cfg);
  REQUIRE(d.size() == 12);
  CHECK(d.has_identities());
  CHECK(make_face_sprites(cfg).images.front().data == d.images.front().data);
  cfg.seed += 1;
  CHECK_FALSE(make_face_sprites(cfg).images.front().data == d.images.front().data);

  save_dataset(dir, d);
  const auto back = load_dataset(dir);
  CHECK(back.size() == d.size());
  CHECK(back.names == d.names);
  CHECK(back.identities == d.identities);
  CHECK(back.attributes.size() == d.attributes.size());
  for (std::size_t i = 0; i < d.size(); ++i) CHECK(back.images[i].data == quantize_8bit(d.images[i]).data);
  fs::remove_all(dir);
}

TEST_CASE("split holds out every k-th image per identity") {
  SpriteConfig cfg;
  cfg.identities = 5;
  cfg.per_identity = 10;
  const auto d = make_face_sprites(cfg);
  const auto s = split_dataset(d, 5);
  CHECK(s.train.size() == 40);
  CHECK(s.held_out.size() == 10);
  for (int id = 0; id < 5; ++id) CHECK(std::count(s.held_out.identities.begin(), s.held_out.identities.end(), id) == 2);
  CHECK_THROWS_AS(split_dataset(d, 1), RangeError);
}

TEST_CASE("parallel_for gives the same result for any worker count") {
  auto run = [](int workers) {
    std::vector<double> out(257);
    parallel_for(out.size(), workers, [&](std::size_t i) { out[i] = std::sin(double(i)) * double(i); });
    return out;
  };
  const auto one = run(1);
  CHECK(run(4) == one);
  CHECK(run(0) == one);
  CHECK_THROWS(parallel_for(10, 3, [](std::size_t i) {
    if (i == 7) throw Error("boom");
  }));
}
