#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "msga/label_map.hpp"

namespace msga::metrics {

// Binary mask over a 2-D (H×W) or 3-D (D×H×W) grid.
struct Mask {
  Shape shape;
  std::vector<std::uint8_t> on;

  std::size_t count() const;
};

Mask binarize(const LabelMap& labels, int class_id);

// 2|A∩B| / (|A|+|B|); 1 when both masks are empty.
double dsc(const Mask& a, const Mask& b);
// 1 − ||A|−|B|| / (|A|+|B|); 1 when both masks are empty.
double vs(const Mask& a, const Mask& b);
// Symmetric mean surface distance in pixel units. Surface points are mask
// pixels with a face neighbour outside the mask or on the grid border.
// Undefined (nullopt) when either mask is empty.
std::optional<double> msd(const Mask& a, const Mask& b);

// Surface points as grid coordinates (row-major order).
std::vector<std::vector<std::size_t>> surface_points(const Mask& m);

struct ClassMetrics {
  int class_id = 0;
  double dsc = 0.0;
  double vs = 0.0;
  std::optional<double> msd;
  bool truth_empty = false;
  bool pred_empty = false;
};

struct MetricsReport {
  std::vector<ClassMetrics> per_class;  // classes 1..K-1
  // Means over classes present in the ground truth; nullopt if there are none.
  std::optional<double> mean_dsc, mean_vs, mean_msd;
  std::vector<int> flagged;  // classes excluded from the means
};

// Background (class 0) is not scored.
MetricsReport evaluate(const LabelMap& pred, const LabelMap& truth, int num_classes);

}  // namespace msga::metrics
