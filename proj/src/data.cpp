#include "msga/data.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "msga/error.hpp"
#include "msga/nst.hpp"
#include "msga/ops.hpp"

namespace msga::data {

namespace fs = std::filesystem;

void SyntheticSpec::validate() const {
  if (num_classes < 2) throw ConfigError("synthetic data needs at least 2 classes");
  if (cell == 0 || height % cell || width % cell) {
    throw ConfigError("image size must be a multiple of the cell size " + std::to_string(cell));
  }
  if (sigma < 0) throw ConfigError("noise sigma must be non-negative");
  if (!class_means.empty() && class_means.size() != std::size_t(num_classes)) {
    throw ConfigError("class_means needs one entry per class");
  }
  if (min_extent && max_extent && min_extent > max_extent) throw ConfigError("min_extent exceeds max_extent");
}

double SyntheticSpec::class_mean(int k) const {
  if (!class_means.empty()) return class_means[std::size_t(k)];
  return double(k) / double(num_classes - 1);
}

namespace {

struct Blob {
  bool ellipse;
  double cy, cx, ry, rx;  // cell units, centre in continuous coordinates

  bool covers(std::size_t i, std::size_t j) const {
    const double dy = (double(i) + 0.5 - cy) / ry, dx = (double(j) + 0.5 - cx) / rx;
    if (ellipse) return dy * dy + dx * dx <= 1.0;
    return std::abs(dy) <= 1.0 && std::abs(dx) <= 1.0;
  }
};

bool try_fill(const SyntheticSpec& spec, std::mt19937_64& rng, std::vector<int>& grid) {
  const std::size_t gh = spec.height / spec.cell, gw = spec.width / spec.cell;
  const std::size_t shortest = std::min(gh, gw);
  const std::size_t lo = spec.min_extent ? spec.min_extent : std::max<std::size_t>(2, shortest / 5);
  const std::size_t hi = spec.max_extent ? spec.max_extent : std::max(lo, 2 * shortest / 5);
  if (hi + 2 > shortest) return false;
  std::uniform_int_distribution<std::size_t> extent(lo, hi);
  std::fill(grid.begin(), grid.end(), 0);

  for (int k = 1; k < spec.num_classes; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
      const std::size_t eh = extent(rng), ew = extent(rng);
      // one-cell margin to the image border
      std::uniform_int_distribution<std::size_t> top(1, gh - eh - 1), left(1, gw - ew - 1);
      const std::size_t y0 = top(rng), x0 = left(rng);
      const Blob b{k % 2 == 1, double(y0) + double(eh) / 2, double(x0) + double(ew) / 2, double(eh) / 2,
                   double(ew) / 2};
      // the blob plus a one-cell ring must be free of other classes
      bool free = true;
      for (std::size_t i = y0 - 1; i <= y0 + eh && free; ++i)
        for (std::size_t j = x0 - 1; j <= x0 + ew && free; ++j)
          if (grid[i * gw + j] != 0) free = false;
      if (!free) continue;
      std::size_t area = 0;
      for (std::size_t i = y0; i < y0 + eh; ++i)
        for (std::size_t j = x0; j < x0 + ew; ++j)
          if (b.covers(i, j)) {
            grid[i * gw + j] = k;
            ++area;
          }
      placed = area > 0;
    }
    if (!placed) return false;
  }
  return true;
}

}  // namespace

Sample generate_one(const SyntheticSpec& spec, std::size_t index) {
  spec.validate();
  std::seed_seq seq{std::uint64_t(spec.seed), std::uint64_t(index), std::uint64_t(0x5eed)};
  std::mt19937_64 rng(seq);
  const std::size_t gh = spec.height / spec.cell, gw = spec.width / spec.cell;
  std::vector<int> grid(gh * gw);
  bool ok = false;
  for (int round = 0; round < 20 && !ok; ++round) ok = try_fill(spec, rng, grid);
  if (!ok) {
    throw ConfigError("cannot fit " + std::to_string(spec.num_classes - 1) + " shapes into a " +
                      std::to_string(spec.height) + "x" + std::to_string(spec.width) + " image");
  }

  Sample s{Tensor({1, spec.height, spec.width}), LabelMap({spec.height, spec.width})};
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t y = 0; y < spec.height; ++y) {
    for (std::size_t x = 0; x < spec.width; ++x) {
      const int k = grid[(y / spec.cell) * gw + x / spec.cell];
      const std::size_t i = y * spec.width + x;
      s.labels[i] = k;
      s.image[i] = spec.class_mean(k) + (spec.sigma > 0 ? spec.sigma * noise(rng) : 0.0);
    }
  }
  return s;
}

std::vector<Sample> generate(const SyntheticSpec& spec, std::size_t n) {
  if (n == 0) throw UsageError("dataset size must be at least 1");
  std::vector<Sample> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = generate_one(spec, i);
  return out;
}

// ---- augmentation ---------------------------------------------------------

Augmentation draw_augmentation(std::mt19937_64& rng, bool square) {
  std::bernoulli_distribution coin(0.5);
  Augmentation a;
  a.flip = coin(rng);
  a.mirror = coin(rng);
  a.rotate = coin(rng) && square;
  return a;
}

namespace {

// Remaps every plane of a (planes × h × w) buffer; `src_of(y, x)` gives the
// source pixel for output (y, x) in an output of size oh × ow.
template <class T, class F>
std::vector<T> remap(const std::vector<T>& in, std::size_t planes, std::size_t oh, std::size_t ow, F src_of) {
  std::vector<T> out(in.size());
  const std::size_t plane = oh * ow;
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t x = 0; x < ow; ++x) out[p * plane + y * ow + x] = in[p * plane + src_of(y, x)];
  return out;
}

template <class T>
std::vector<T> transform(std::vector<T> v, std::size_t planes, std::size_t h, std::size_t w, const Augmentation& a,
                         bool inverse) {
  auto flip = [&](std::vector<T>& buf) {
    buf = remap(buf, planes, h, w, [&](std::size_t y, std::size_t x) { return (h - 1 - y) * w + x; });
  };
  auto mirror = [&](std::vector<T>& buf) {
    buf = remap(buf, planes, h, w, [&](std::size_t y, std::size_t x) { return y * w + (w - 1 - x); });
  };
  // clockwise: out(y, x) = in(n-1-x, y); counter-clockwise: out(y, x) = in(x, n-1-y)
  auto rotate = [&](std::vector<T>& buf, bool clockwise) {
    buf = remap(buf, planes, h, w, [&](std::size_t y, std::size_t x) {
      return clockwise ? (h - 1 - x) * w + y : x * w + (w - 1 - y);
    });
  };
  if (!inverse) {
    if (a.flip) flip(v);
    if (a.mirror) mirror(v);
    if (a.rotate) rotate(v, true);
  } else {
    if (a.rotate) rotate(v, false);
    if (a.mirror) mirror(v);
    if (a.flip) flip(v);
  }
  return v;
}

}  // namespace

Sample apply_augmentation(const Sample& s, const Augmentation& a) {
  const std::size_t h = s.labels.shape[0], w = s.labels.shape[1];
  if (a.rotate && h != w) throw UsageError("rotation augmentation needs a square image");
  const std::size_t planes = s.image.dim(0);
  std::vector<double> img(s.image.values().begin(), s.image.values().end());
  Sample out;
  out.image = Tensor(s.image.shape(), transform(std::move(img), planes, h, w, a, false));
  out.labels = LabelMap(s.labels.shape, transform(s.labels.values, 1, h, w, a, false));
  return out;
}

LabelMap undo_augmentation(const LabelMap& labels, const Augmentation& a) {
  const std::size_t h = labels.shape[0], w = labels.shape[1];
  return LabelMap(labels.shape, transform(labels.values, 1, h, w, a, true));
}

// ---- files ----------------------------------------------------------------

Tensor labels_to_tensor(const LabelMap& labels) {
  std::vector<double> v(labels.values.begin(), labels.values.end());
  return Tensor(labels.shape, std::move(v));
}

LabelMap labels_from_tensor(const Tensor& t, int num_classes) {
  LabelMap out(t.shape());
  for (std::size_t i = 0; i < t.numel(); ++i) {
    const double v = t[i];
    if (v != std::floor(v)) throw DataError("non-integral label value " + std::to_string(v) + " at index " +
                                            std::to_string(i));
    if (v < 0 || v >= num_classes) {
      throw DataError("label value " + std::to_string(int(v)) + " at index " + std::to_string(i) +
                      " out of range for " + std::to_string(num_classes) + " classes");
    }
    out[i] = int(v);
  }
  return out;
}

void save_sample(const fs::path& image_path, const fs::path& label_path, const Sample& s) {
  nst::save(image_path, s.image);
  nst::save(label_path, labels_to_tensor(s.labels));
}

Sample load_sample(const fs::path& image_path, const fs::path& label_path, int num_classes) {
  Sample s;
  s.image = nst::load(image_path);
  const Tensor lbl = nst::load(label_path);
  if (s.image.rank() != 3 || lbl.rank() != 2 || s.image.dim(1) != lbl.dim(0) || s.image.dim(2) != lbl.dim(1)) {
    throw DataError("image " + shape_str(s.image.shape()) + " and labels " + shape_str(lbl.shape()) +
                    " do not form a sample");
  }
  s.labels = labels_from_tensor(lbl, num_classes);
  return s;
}

namespace {

std::string stem(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04zu", i);
  return buf;
}

}  // namespace

void save_dataset(const fs::path& dir, const Dataset& ds) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    save_sample(dir / (stem(i) + ".img.nst"), dir / (stem(i) + ".lbl.nst"), ds.samples[i]);
  }
  std::ofstream os(dir / "dataset.txt", std::ios::trunc);
  if (!os) throw IoError("cannot write " + (dir / "dataset.txt").string());
  os << "count=" << ds.samples.size() << '\n'
     << "height=" << ds.info.height << '\n'
     << "width=" << ds.info.width << '\n'
     << "classes=" << ds.info.num_classes << '\n'
     << "seed=" << ds.info.seed << '\n'
     << "sigma=" << ds.info.sigma << '\n';
}

Dataset load_dataset(const fs::path& dir) {
  std::ifstream is(dir / "dataset.txt");
  if (!is) throw IoError("no dataset.txt in " + dir.string());
  Dataset ds;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("dataset.txt line without '=': " + line);
    const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    try {
      if (key == "count") ds.info.count = std::stoul(value);
      else if (key == "height") ds.info.height = std::stoul(value);
      else if (key == "width") ds.info.width = std::stoul(value);
      else if (key == "classes") ds.info.num_classes = std::stoi(value);
      else if (key == "seed") ds.info.seed = std::stoull(value);
      else if (key == "sigma") ds.info.sigma = std::stod(value);
    } catch (const std::logic_error&) {
      throw FormatError("dataset.txt: bad value for " + key + ": " + value);
    }
  }
  if (ds.info.count == 0 || ds.info.num_classes < 2) throw FormatError("dataset.txt is missing count or classes");
  for (std::size_t i = 0; i < ds.info.count; ++i) {
    Sample s = load_sample(dir / (stem(i) + ".img.nst"), dir / (stem(i) + ".lbl.nst"), ds.info.num_classes);
    if (s.labels.shape != Shape{ds.info.height, ds.info.width}) {
      throw DataError("sample " + stem(i) + " has size " + shape_str(s.labels.shape) + ", manifest says " +
                      std::to_string(ds.info.height) + "x" + std::to_string(ds.info.width));
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

}  // namespace msga::data
