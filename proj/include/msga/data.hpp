#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include "msga/label_map.hpp"
#include "msga/tensor.hpp"

namespace msga::data {

// Seeded stand-in for a multi-organ dataset: every image holds one
// non-overlapping blob per foreground class (odd classes ellipses, even
// classes rectangles) on a background, with class-specific intensity plus
// Gaussian noise. Shapes are rasterised on a grid of `cell`×`cell` pixel
// blocks so object borders line up with the network's output stride.
struct SyntheticSpec {
  std::size_t height = 32;
  std::size_t width = 32;
  int num_classes = 4;
  double sigma = 0.1;
  std::uint64_t seed = 7;
  std::size_t cell = 2;
  // Shape extents in cells; 0 picks defaults from the grid size.
  std::size_t min_extent = 0;
  std::size_t max_extent = 0;
  // Mean intensity per class; empty means k / (K-1).
  std::vector<double> class_means;

  void validate() const;
  double class_mean(int k) const;
};

struct Sample {
  Tensor image;     // 1×H×W
  LabelMap labels;  // H×W
};

// Sample i only depends on (seed, i).
Sample generate_one(const SyntheticSpec& spec, std::size_t index);
std::vector<Sample> generate(const SyntheticSpec& spec, std::size_t n);

// Rot90 (square images only), vertical flip and horizontal mirror, each
// drawn with probability 0.5.
struct Augmentation {
  bool flip = false;    // upside down
  bool mirror = false;  // left-right
  bool rotate = false;  // 90° clockwise, applied last
};

Augmentation draw_augmentation(std::mt19937_64& rng, bool square);
Sample apply_augmentation(const Sample& s, const Augmentation& a);
LabelMap undo_augmentation(const LabelMap& labels, const Augmentation& a);

void save_sample(const std::filesystem::path& image_path, const std::filesystem::path& label_path,
                 const Sample& s);
Sample load_sample(const std::filesystem::path& image_path, const std::filesystem::path& label_path,
                   int num_classes);
// Label NST (H×W of integral floats) to a LabelMap; checks range.
LabelMap labels_from_tensor(const Tensor& t, int num_classes);
Tensor labels_to_tensor(const LabelMap& labels);

struct DatasetInfo {
  std::size_t count = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  int num_classes = 0;
  std::uint64_t seed = 0;
  double sigma = 0.0;
};

struct Dataset {
  DatasetInfo info;
  std::vector<Sample> samples;
};

// Directory layout: NNNN.img.nst, NNNN.lbl.nst and a dataset.txt manifest.
void save_dataset(const std::filesystem::path& dir, const Dataset& ds);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace msga::data
