#include <doctest.h>

#include <opencv2/imgproc.hpp>

#include <filesystem>
#include <fstream>

#include "g2gan/dataset.hpp"
#include "g2gan/error.hpp"
#include "g2gan/image.hpp"
#include "g2gan/labels.hpp"
#include "g2gan/rng.hpp"

namespace fs = std::filesystem;
using namespace g2gan;

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("g2gan_test_data_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Hue rotation through OpenCV's float HSV conversion, hue in degrees.
torch::Tensor opencv_rotate_hue(const torch::Tensor& chw, double degrees) {
  auto unit = to_unit_range(chw).permute({1, 2, 0}).contiguous().to(torch::kFloat32);
  const int h = static_cast<int>(unit.size(0)), w = static_cast<int>(unit.size(1));
  cv::Mat rgb(h, w, CV_32FC3, unit.data_ptr<float>());
  cv::Mat hsv;
  cv::cvtColor(rgb, hsv, cv::COLOR_RGB2HSV);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      auto& px = hsv.at<cv::Vec3f>(y, x);
      px[0] = static_cast<float>(std::fmod(px[0] + degrees + 360.0, 360.0));
    }
  }
  cv::Mat back;
  cv::cvtColor(hsv, back, cv::COLOR_HSV2RGB);
  auto out = torch::from_blob(back.data, {h, w, 3}, torch::kFloat32).clone();
  return from_unit_range(out.permute({2, 0, 1}));
}

}  // namespace

TEST_CASE("rng sequences repeat for a seed and resume from saved state") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) {
    CHECK(a.next_u64() == b.next_u64());
  }
  const auto state = a.engine_state();
  std::vector<double> first;
  for (int i = 0; i < 10; ++i) first.push_back(a.uniform());
  Rng c(7);
  c.set_engine_state(state);
  for (int i = 0; i < 10; ++i) CHECK(c.uniform() == first[static_cast<std::size_t>(i)]);

  Rng d(3);
  for (int i = 0; i < 1000; ++i) {
    const auto k = d.uniform_int(7);
    CHECK(k >= 0);
    CHECK(k < 7);
  }
}

TEST_CASE("8-bit normalization round-trips exactly") {
  auto u8 = torch::arange(0, 256, torch::kInt64).remainder(256).to(torch::kUInt8);
  u8 = u8.repeat({3 * 16}).view({16, 16, 3 * 16}).slice(2, 0, 3).contiguous();
  auto x = normalize_u8(u8);
  CHECK(x.sizes() == torch::IntArrayRef({3, 16, 16}));
  CHECK(x.min().item<float>() >= -1.0f);
  CHECK(x.max().item<float>() <= 1.0f);
  CHECK(torch::equal(denormalize_u8(x), u8));
}

TEST_CASE("image batch validation") {
  CHECK_NOTHROW(check_image_batch(torch::zeros({2, 3, 16, 16})));
  CHECK_THROWS_AS(check_image_batch(torch::zeros({3, 16, 16})), ShapeError);
  CHECK_THROWS_AS(check_image_batch(torch::zeros({1, 1, 16, 16})), ShapeError);
  CHECK_THROWS_AS(check_image_batch(torch::zeros({1, 3, 18, 16})), ShapeError);
  CHECK_THROWS_AS(check_image_batch(torch::full({1, 3, 16, 16}, 1.5)), ShapeError);
  auto bad = torch::zeros({1, 3, 16, 16});
  bad[0][0][0][0] = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(check_image_batch(bad), ShapeError);
}

TEST_CASE("domain labels tile a one-hot map") {
  const auto label = encode_label(2, 4, 8, 8);
  CHECK(label.onehot.sizes() == torch::IntArrayRef({4}));
  CHECK(label.onehot[2].item<float>() == 1.0f);
  CHECK(label.onehot.sum().item<float>() == 1.0f);
  CHECK(label.tiled.sizes() == torch::IntArrayRef({4, 8, 8}));
  CHECK(label.tiled[2].min().item<float>() == 1.0f);
  CHECK(label.tiled.sum().item<float>() == 64.0f);
  CHECK_THROWS_AS(encode_label(4, 4, 8, 8), LabelError);
  CHECK_THROWS_AS(encode_label(-1, 4, 8, 8), LabelError);
  CHECK_THROWS_AS(encode_label(0, 1, 8, 8), LabelError);

  const auto tiled = tile_labels(torch::tensor({0, 3}, torch::kInt64), 4, 4, 4);
  CHECK(tiled.sizes() == torch::IntArrayRef({2, 4, 4, 4}));
  CHECK(tiled[1][3].min().item<float>() == 1.0f);
  CHECK(tiled[1].sum().item<float>() == 16.0f);
  CHECK_THROWS_AS(check_label_indices(torch::tensor({0, 5}, torch::kInt64), 4), LabelError);
}

TEST_CASE("hue rotation matches OpenCV HSV and keeps saturation/value") {
  torch::manual_seed(0);
  auto img = torch::rand({3, 12, 12}) * 2 - 1;
  for (double deg : {30.0, 90.0, 180.0, 270.0}) {
    const auto ours = rotate_hue(img, deg * M_PI / 180.0);
    const auto ref = opencv_rotate_hue(img, deg);
    CHECK((ours - ref).abs().max().item<double>() < 2e-3);
  }
  // a full turn is the identity; max and min channel (value, chroma) survive any rotation
  CHECK((rotate_hue(img, 2 * M_PI) - img).abs().max().item<double>() < 1e-5);
  const auto rotated = rotate_hue(img, 1.0);
  CHECK((rotated.amax(0) - img.amax(0)).abs().max().item<double>() < 1e-5);
  CHECK((rotated.amin(0) - img.amin(0)).abs().max().item<double>() < 1e-5);
}

TEST_CASE("synthetic domains are seeded, hue-shifted copies with identity pairing") {
  SynthSpec spec;
  spec.m = 3;
  spec.images_per_domain = 6;
  spec.height = spec.width = 16;
  spec.seed = 5;
  const auto a = synthesize_multidomain(spec);
  const auto b = synthesize_multidomain(spec);
  REQUIRE(a.domain_count() == 3);
  for (std::int64_t d = 0; d < 3; ++d) {
    CHECK(a.size(d) == 6);
    CHECK(torch::equal(a.images(d), b.images(d)));
  }
  REQUIRE(a.pairing().has_value());
  CHECK(a.pairing()->rows.size() == 6);
  CHECK(a.pairing()->rows[4] == std::vector<std::int64_t>{4, 4, 4});
  const auto shifted = rotate_hue(a.images(0), synthetic_hue_shift(2, 3));
  CHECK((shifted - a.images(2)).abs().max().item<double>() < 1e-5);
  CHECK(a.images(0).min().item<float>() >= -1.0f);
  CHECK(a.images(0).max().item<float>() <= 1.0f);

  spec.seed = 6;
  CHECK_FALSE(torch::equal(synthesize_multidomain(spec).images(0), a.images(0)));
  spec.m = 1;
  CHECK_THROWS_AS(synthesize_multidomain(spec), ConfigError);
}

TEST_CASE("dataset invariants") {
  std::vector<DomainImages> one{{"a", torch::zeros({2, 3, 8, 8})}};
  CHECK_THROWS_AS(DomainDataset{one}, DatasetError);
  std::vector<DomainImages> mixed{{"a", torch::zeros({2, 3, 8, 8})}, {"b", torch::zeros({2, 3, 16, 16})}};
  CHECK_THROWS_AS(DomainDataset{mixed}, DatasetError);
  std::vector<DomainImages> empty{{"a", torch::zeros({2, 3, 8, 8})}, {"b", torch::zeros({0, 3, 8, 8})}};
  CHECK_THROWS_AS(DomainDataset{empty}, DatasetError);
  std::vector<DomainImages> ok{{"a", torch::zeros({2, 3, 8, 8})}, {"b", torch::zeros({3, 3, 8, 8})}};
  DomainDataset ds(ok);
  CHECK(ds.total_images() == 5);
  CHECK(ds.find_domain("b") == 1);
  CHECK(ds.find_domain("c") == -1);
}

TEST_CASE("folder export and load round-trip, skipping undecodable files") {
  SynthSpec spec;
  spec.m = 2;
  spec.images_per_domain = 4;
  spec.height = spec.width = 16;
  const auto ds = synthesize_multidomain(spec);
  const auto root = scratch("roundtrip");
  export_dataset(ds, root);
  CHECK(fs::exists(root / "pairing.json"));
  CHECK(fs::exists(root / ds.name(1) / "00003.png"));
  {
    std::ofstream junk(root / ds.name(0) / "zzz_broken.png");
    junk << "not an image";
  }
  const auto loaded = load_domain_folders(root, 16);
  REQUIRE(loaded.domain_count() == 2);
  CHECK(loaded.names() == ds.names());
  CHECK(loaded.size(0) == 4);
  REQUIRE(loaded.pairing().has_value());
  // PNG stores 8 bits per channel
  CHECK((loaded.images(1) - ds.images(1)).abs().max().item<double>() <= 1.0 / 255.0 + 1e-6);
  fs::remove_all(root);

  CHECK_THROWS_AS(load_domain_folders(root / "missing", 16), DatasetError);
}

TEST_CASE("holdout split keeps pairing rows aligned") {
  SynthSpec spec;
  spec.m = 3;
  spec.images_per_domain = 20;
  spec.height = spec.width = 16;
  const auto ds = synthesize_multidomain(spec);
  const auto split = split_holdout(ds, 0.25, 1);
  for (std::int64_t d = 0; d < 3; ++d) {
    CHECK(split.holdout.size(d) == 5);
    CHECK(split.train.size(d) == 15);
  }
  REQUIRE(split.holdout.pairing().has_value());
  // held-out rows are still the same scene hue-shifted across domains
  const auto& rows = split.holdout.pairing()->rows;
  for (const auto& row : rows) {
    const auto a = split.holdout.images(0)[row[0]];
    const auto c = split.holdout.images(2)[row[2]];
    CHECK((rotate_hue(a, synthetic_hue_shift(2, 3)) - c).abs().max().item<double>() < 1e-5);
  }
  const auto again = split_holdout(ds, 0.25, 1);
  CHECK(torch::equal(again.holdout.images(1), split.holdout.images(1)));
  CHECK_THROWS_AS(split_holdout(ds, 1.0, 1), ConfigError);
}

TEST_CASE("unpaired sampling never targets the source domain") {
  SynthSpec spec;
  spec.m = 4;
  spec.images_per_domain = 3;
  spec.height = spec.width = 16;
  const auto ds = synthesize_multidomain(spec);
  Rng rng(9);
  std::vector<int> hits(4, 0);
  for (int i = 0; i < 400; ++i) {
    const auto s = sample_unpaired(ds, rng);
    CHECK(s.source.index != s.target.index);
    CHECK(s.x.sizes() == torch::IntArrayRef({1, 3, 16, 16}));
    ++hits[static_cast<std::size_t>(s.target.index)];
  }
  for (int h : hits) CHECK(h > 50);
}
