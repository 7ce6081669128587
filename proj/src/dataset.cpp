#include "g2gan/dataset.hpp"

#include <json.hpp>

#include <algorithm>
#include <numeric>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>
#include <set>

#include "g2gan/error.hpp"
#include "g2gan/image.hpp"

namespace g2gan {

namespace fs = std::filesystem;

DomainDataset::DomainDataset(std::vector<DomainImages> domains, std::optional<Pairing> pairing)
    : domains_(std::move(domains)), pairing_(std::move(pairing)) {
  if (domains_.size() < 2) {
    throw DatasetError("a dataset needs at least 2 domains, got " + std::to_string(domains_.size()));
  }
  for (const auto& d : domains_) {
    if (!d.images.defined() || d.images.dim() != 4 || d.images.size(0) == 0) {
      throw DatasetError("domain '" + d.name + "' is empty");
    }
    if (d.images.size(1) != 3) {
      throw DatasetError("domain '" + d.name + "' does not hold 3-channel images");
    }
    if (d.images.size(2) != domains_.front().images.size(2) ||
        d.images.size(3) != domains_.front().images.size(3)) {
      throw DatasetError("domain '" + d.name + "' has a different image size");
    }
  }
  if (pairing_) {
    const auto n = domains_.front().images.size(0);
    for (const auto& d : domains_) {
      if (d.images.size(0) != n) {
        throw DatasetError("pairing requires equal-length domains");
      }
    }
    if (static_cast<std::int64_t>(pairing_->rows.size()) != n) {
      throw DatasetError("pairing must have one row per image");
    }
    for (std::size_t d = 0; d < domains_.size(); ++d) {
      std::vector<bool> seen(n, false);
      for (const auto& row : pairing_->rows) {
        if (row.size() != domains_.size() || row[d] < 0 || row[d] >= n || seen[row[d]]) {
          throw DatasetError("pairing is not a bijection between domains");
        }
        seen[row[d]] = true;
      }
    }
  }
}

std::int64_t DomainDataset::total_images() const {
  std::int64_t total = 0;
  for (const auto& d : domains_) {
    total += d.images.size(0);
  }
  return total;
}

std::vector<std::string> DomainDataset::names() const {
  std::vector<std::string> out;
  for (const auto& d : domains_) {
    out.push_back(d.name);
  }
  return out;
}

std::int64_t DomainDataset::find_domain(const std::string& name) const {
  for (std::size_t i = 0; i < domains_.size(); ++i) {
    if (domains_[i].name == name) {
      return static_cast<std::int64_t>(i);
    }
  }
  return -1;
}

// ---------------------------------------------------------------------------
// synthetic scenes

namespace {

struct Hsv {
  double h;  // radians
  double s;
  double v;
};

void hsv_to_rgb(const Hsv& c, double& r, double& g, double& b) {
  double h = std::fmod(c.h / (std::numbers::pi / 3.0), 6.0);
  if (h < 0.0) {
    h += 6.0;
  }
  const double chroma = c.v * c.s;
  const double x = chroma * (1.0 - std::abs(std::fmod(h, 2.0) - 1.0));
  const double mn = c.v - chroma;
  double r1 = 0.0, g1 = 0.0, b1 = 0.0;
  switch (static_cast<int>(h)) {
    case 0: r1 = chroma; g1 = x; break;
    case 1: r1 = x; g1 = chroma; break;
    case 2: g1 = chroma; b1 = x; break;
    case 3: g1 = x; b1 = chroma; break;
    case 4: r1 = x; b1 = chroma; break;
    default: r1 = chroma; b1 = x; break;
  }
  r = r1 + mn;
  g = g1 + mn;
  b = b1 + mn;
}

class SceneCanvas {
 public:
  SceneCanvas(std::int64_t height, std::int64_t width)
      : height_(height), width_(width), pixels_(static_cast<std::size_t>(height * width)) {}

  Hsv& at(std::int64_t y, std::int64_t x) { return pixels_[static_cast<std::size_t>(y * width_ + x)]; }
  std::int64_t height() const { return height_; }
  std::int64_t width() const { return width_; }

  torch::Tensor to_tensor() const {
    auto out = torch::empty({3, height_, width_}, torch::kFloat64);
    auto acc = out.accessor<double, 3>();
    for (std::int64_t y = 0; y < height_; ++y) {
      for (std::int64_t x = 0; x < width_; ++x) {
        double r, g, b;
        hsv_to_rgb(pixels_[static_cast<std::size_t>(y * width_ + x)], r, g, b);
        acc[0][y][x] = r * 2.0 - 1.0;
        acc[1][y][x] = g * 2.0 - 1.0;
        acc[2][y][x] = b * 2.0 - 1.0;
      }
    }
    return out.to(torch::kFloat32);
  }

 private:
  std::int64_t height_;
  std::int64_t width_;
  std::vector<Hsv> pixels_;
};

double lerp(double a, double b, double t) { return a + (b - a) * t; }

// Scene hues are confined to half of one domain's hue sector, so hue-rotated
// domains occupy disjoint hue bands.
torch::Tensor render_base_scene(std::int64_t height, std::int64_t width, double hue_band, Rng& rng) {
  SceneCanvas canvas(height, width);
  const double hue_a = rng.uniform() * hue_band;
  const double hue_b = rng.uniform() * hue_band;
  const double sat = lerp(0.35, 0.6, rng.uniform());
  const double val_lo = lerp(0.45, 0.6, rng.uniform());
  const double val_hi = lerp(0.65, 0.85, rng.uniform());
  const double freq = lerp(0.15, 0.6, rng.uniform());
  const double phase = rng.uniform() * 2.0 * std::numbers::pi;
  const double angle = rng.uniform() * std::numbers::pi;
  const double dx = std::cos(angle);
  const double dy = std::sin(angle);
  for (std::int64_t y = 0; y < height; ++y) {
    const double t = static_cast<double>(y) / static_cast<double>(height - 1);
    for (std::int64_t x = 0; x < width; ++x) {
      const double stripe = 0.06 * std::sin(freq * (dx * x + dy * y) + phase);
      const double grain = 0.03 * (rng.uniform() * 2.0 - 1.0);
      canvas.at(y, x) = Hsv{lerp(hue_a, hue_b, t), sat,
                            std::clamp(lerp(val_lo, val_hi, t) + stripe + grain, 0.0, 1.0)};
    }
  }

  const auto shapes = 2 + rng.uniform_int(3);
  const double extent = static_cast<double>(std::min(height, width));
  for (std::int64_t s = 0; s < shapes; ++s) {
    const Hsv color{rng.uniform() * hue_band, lerp(0.7, 1.0, rng.uniform()), lerp(0.6, 1.0, rng.uniform())};
    const double cx = rng.uniform() * static_cast<double>(width);
    const double cy = rng.uniform() * static_cast<double>(height);
    const double radius = lerp(0.1, 0.25, rng.uniform()) * extent;
    const auto kind = rng.uniform_int(3);
    const double rot = rng.uniform() * 2.0 * std::numbers::pi;
    for (std::int64_t y = 0; y < height; ++y) {
      for (std::int64_t x = 0; x < width; ++x) {
        const double px = static_cast<double>(x) + 0.5 - cx;
        const double py = static_cast<double>(y) + 0.5 - cy;
        bool inside = false;
        if (kind == 0) {
          inside = px * px + py * py <= radius * radius;
        } else if (kind == 1) {
          const double u = px * std::cos(rot) + py * std::sin(rot);
          const double v = -px * std::sin(rot) + py * std::cos(rot);
          inside = std::abs(u) <= radius && std::abs(v) <= 0.6 * radius;
        } else {
          // equilateral triangle: inside all three half-planes
          inside = true;
          for (int k = 0; k < 3; ++k) {
            const double a = rot + k * 2.0 * std::numbers::pi / 3.0;
            if (px * std::cos(a) + py * std::sin(a) > 0.5 * radius) {
              inside = false;
              break;
            }
          }
        }
        if (inside) {
          canvas.at(y, x) = color;
        }
      }
    }
  }
  return canvas.to_tensor();
}

}  // namespace

double synthetic_hue_shift(std::int64_t domain, std::int64_t m) {
  return 2.0 * std::numbers::pi * static_cast<double>(domain) / static_cast<double>(m);
}

DomainDataset synthesize_multidomain(const SynthSpec& spec) {
  if (spec.m < 2) {
    throw ConfigError("synthetic dataset needs m >= 2");
  }
  if (spec.images_per_domain < 1) {
    throw ConfigError("images_per_domain must be >= 1");
  }
  if (spec.height < 8 || spec.width < 8 || spec.height % 4 != 0 || spec.width % 4 != 0) {
    throw ConfigError("synthetic height and width must be >= 8 and divisible by 4");
  }
  Rng rng(spec.seed);
  const double hue_band = 0.5 * 2.0 * std::numbers::pi / static_cast<double>(spec.m);
  std::vector<torch::Tensor> base;
  base.reserve(static_cast<std::size_t>(spec.images_per_domain));
  for (std::int64_t i = 0; i < spec.images_per_domain; ++i) {
    base.push_back(render_base_scene(spec.height, spec.width, hue_band, rng));
  }
  auto base_batch = torch::stack(base);

  std::vector<DomainImages> domains;
  for (std::int64_t k = 0; k < spec.m; ++k) {
    auto images = k == 0 ? base_batch.clone() : rotate_hue(base_batch, synthetic_hue_shift(k, spec.m));
    domains.push_back({"domain" + std::to_string(k), images});
  }
  Pairing pairing;
  for (std::int64_t i = 0; i < spec.images_per_domain; ++i) {
    pairing.rows.emplace_back(static_cast<std::size_t>(spec.m), i);
  }
  return DomainDataset(std::move(domains), std::move(pairing));
}

// ---------------------------------------------------------------------------
// folders

namespace {

bool is_image_file(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

std::optional<Pairing> read_pairing(const fs::path& file, const std::vector<std::string>& names,
                                    const std::vector<DomainImages>& domains) {
  std::ifstream in(file);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "warning: ignoring unreadable " << file << ": " << e.what() << "\n";
    return std::nullopt;
  }
  const auto order = doc.value("domain_order", std::vector<std::string>{});
  if (order.size() != names.size()) {
    std::cerr << "warning: " << file << " does not match the domain folders, ignored\n";
    return std::nullopt;
  }
  // Columns in the file follow domain_order; remap to lexicographic folder order.
  std::vector<std::size_t> column(names.size());
  for (std::size_t d = 0; d < names.size(); ++d) {
    auto it = std::find(order.begin(), order.end(), names[d]);
    if (it == order.end()) {
      std::cerr << "warning: " << file << " does not match the domain folders, ignored\n";
      return std::nullopt;
    }
    column[d] = static_cast<std::size_t>(it - order.begin());
  }
  Pairing pairing;
  for (const auto& row : doc.value("pairs", nlohmann::json::array())) {
    std::vector<std::int64_t> mapped(names.size());
    for (std::size_t d = 0; d < names.size(); ++d) {
      mapped[d] = row.at(column[d]).get<std::int64_t>();
    }
    pairing.rows.push_back(std::move(mapped));
  }
  try {
    DomainDataset probe(domains, pairing);
  } catch (const DatasetError& e) {
    std::cerr << "warning: ignoring " << file << ": " << e.what() << "\n";
    return std::nullopt;
  }
  return pairing;
}

}  // namespace

DomainDataset load_domain_folders(const fs::path& root, int size) {
  if (size < 8 || size % 4 != 0) {
    throw ConfigError("image size must be >= 8 and divisible by 4");
  }
  std::error_code ec;
  if (!fs::is_directory(root, ec)) {
    throw DatasetError("dataset root " + root.string() + " is not a directory");
  }
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) {
      dirs.push_back(entry.path());
    }
  }
  std::sort(dirs.begin(), dirs.end());
  if (dirs.size() < 2) {
    throw DatasetError("dataset root " + root.string() + " must contain at least 2 domain folders");
  }

  std::vector<DomainImages> domains;
  std::vector<std::string> names;
  for (const auto& dir : dirs) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file() && is_image_file(entry.path())) {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    std::vector<torch::Tensor> images;
    for (const auto& file : files) {
      auto image = read_image(file, size);
      if (!image) {
        std::cerr << "warning: skipping undecodable image " << file << "\n";
        continue;
      }
      images.push_back(*image);
    }
    if (images.empty()) {
      throw DatasetError("domain folder " + dir.string() + " has no decodable images");
    }
    names.push_back(dir.filename().string());
    domains.push_back({names.back(), torch::stack(images)});
  }

  std::optional<Pairing> pairing;
  if (fs::exists(root / "pairing.json")) {
    pairing = read_pairing(root / "pairing.json", names, domains);
  }
  return DomainDataset(std::move(domains), std::move(pairing));
}

void export_dataset(const DomainDataset& dataset, const fs::path& root) {
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) {
    throw IoError("cannot create " + root.string() + ": " + ec.message());
  }
  for (std::int64_t d = 0; d < dataset.domain_count(); ++d) {
    const auto dir = root / dataset.name(d);
    fs::create_directories(dir, ec);
    if (ec) {
      throw IoError("cannot create " + dir.string() + ": " + ec.message());
    }
    for (std::int64_t i = 0; i < dataset.size(d); ++i) {
      char file[32];
      std::snprintf(file, sizeof(file), "%05lld.png", static_cast<long long>(i));
      write_png(dir / file, dataset.images(d)[i]);
    }
  }
  if (dataset.pairing()) {
    nlohmann::json doc;
    doc["domain_order"] = dataset.names();
    doc["pairs"] = dataset.pairing()->rows;
    std::ofstream out(root / "pairing.json");
    out << doc.dump() << "\n";
    if (!out) {
      throw IoError("cannot write " + (root / "pairing.json").string());
    }
  }
}

// ---------------------------------------------------------------------------
// split and sampling

namespace {

std::int64_t holdout_count(std::int64_t n, double fraction) {
  auto count = static_cast<std::int64_t>(std::llround(static_cast<double>(n) * fraction));
  return std::clamp<std::int64_t>(count, 1, n - 1);
}

torch::Tensor take(const torch::Tensor& images, const std::vector<std::int64_t>& idx) {
  return images.index_select(0, torch::tensor(idx, torch::kInt64));
}

}  // namespace

DatasetSplit split_holdout(const DomainDataset& dataset, double holdout_fraction, std::uint64_t seed) {
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) {
    throw ConfigError("holdout fraction must be in (0, 1)");
  }
  for (std::int64_t d = 0; d < dataset.domain_count(); ++d) {
    if (dataset.size(d) < 2) {
      throw DatasetError("domain '" + dataset.name(d) + "' is too small to split");
    }
  }
  Rng rng(seed);
  std::vector<DomainImages> train;
  std::vector<DomainImages> holdout;
  const auto m = dataset.domain_count();

  if (dataset.pairing()) {
    const auto& rows = dataset.pairing()->rows;
    const auto n = static_cast<std::int64_t>(rows.size());
    std::vector<std::int64_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order.begin(), order.end());
    const auto n_hold = holdout_count(n, holdout_fraction);
    std::vector<std::int64_t> hold_rows(order.begin(), order.begin() + n_hold);
    std::vector<std::int64_t> train_rows(order.begin() + n_hold, order.end());
    std::sort(hold_rows.begin(), hold_rows.end());
    std::sort(train_rows.begin(), train_rows.end());
    auto pick = [&](const std::vector<std::int64_t>& selected, std::vector<DomainImages>& out) {
      Pairing pairing;
      for (std::size_t r = 0; r < selected.size(); ++r) {
        pairing.rows.emplace_back(static_cast<std::size_t>(m), static_cast<std::int64_t>(r));
      }
      for (std::int64_t d = 0; d < m; ++d) {
        std::vector<std::int64_t> idx;
        for (auto r : selected) {
          idx.push_back(rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(d)]);
        }
        out.push_back({dataset.name(d), take(dataset.images(d), idx)});
      }
      return pairing;
    };
    auto train_pairing = pick(train_rows, train);
    auto hold_pairing = pick(hold_rows, holdout);
    return {DomainDataset(std::move(train), std::move(train_pairing)),
            DomainDataset(std::move(holdout), std::move(hold_pairing))};
  }

  for (std::int64_t d = 0; d < m; ++d) {
    const auto n = dataset.size(d);
    std::vector<std::int64_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order.begin(), order.end());
    const auto n_hold = holdout_count(n, holdout_fraction);
    std::vector<std::int64_t> hold_idx(order.begin(), order.begin() + n_hold);
    std::vector<std::int64_t> train_idx(order.begin() + n_hold, order.end());
    std::sort(hold_idx.begin(), hold_idx.end());
    std::sort(train_idx.begin(), train_idx.end());
    train.push_back({dataset.name(d), take(dataset.images(d), train_idx)});
    holdout.push_back({dataset.name(d), take(dataset.images(d), hold_idx)});
  }
  return {DomainDataset(std::move(train)), DomainDataset(std::move(holdout))};
}

std::int64_t sample_other_domain(std::int64_t source, std::int64_t m, Rng& rng) {
  const auto draw = rng.uniform_int(m - 1);
  return draw >= source ? draw + 1 : draw;
}

UnpairedSample sample_unpaired(const DomainDataset& dataset, Rng& rng) {
  const auto m = dataset.domain_count();
  const auto source = rng.uniform_int(m);
  const auto target = sample_other_domain(source, m, rng);
  const auto index = rng.uniform_int(dataset.size(source));
  UnpairedSample sample;
  sample.x = dataset.images(source)[index].unsqueeze(0);
  sample.source = encode_label(source, m, dataset.height(), dataset.width());
  sample.target = encode_label(target, m, dataset.height(), dataset.width());
  return sample;
}

}  // namespace g2gan
