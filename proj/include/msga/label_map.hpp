#pragma once

#include <vector>

#include "msga/tensor.hpp"

namespace msga {

// Per-pixel class ids, row-major over a 2-D (H×W) or 3-D (D×H×W) grid.
struct LabelMap {
  Shape shape;
  std::vector<int> values;

  LabelMap() = default;
  LabelMap(Shape s, int fill = 0) : shape(std::move(s)), values(shape_numel(shape), fill) {}
  LabelMap(Shape s, std::vector<int> v) : shape(std::move(s)), values(std::move(v)) {}

  std::size_t numel() const { return values.size(); }
  int& operator[](std::size_t i) { return values[i]; }
  int operator[](std::size_t i) const { return values[i]; }
  bool operator==(const LabelMap&) const = default;
};

// Throws DataError if any value falls outside [0, num_classes).
void validate_labels(const LabelMap& labels, int num_classes);

// Per-pixel argmax over the leading (class) axis of a K×H×W tensor.
LabelMap argmax_classes(const Tensor& logits);

// Nearest-neighbour resize of a 2-D label map (source index floor(o·in/out)).
LabelMap resize_nearest(const LabelMap& labels, std::size_t out_h, std::size_t out_w);

}  // namespace msga
