#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "msga/tensor.hpp"

// NST tensor files:
//   "NST1" | u32 rank | rank × u32 dims | prod(dims) × f32 values
// All integers and floats little-endian; values are row-major. Values are
// narrowed to f32 on save and widened to f64 on load.
namespace msga::nst {

void write(std::ostream& os, const Tensor& t);
Tensor read(std::istream& is);

void save(const std::filesystem::path& path, const Tensor& t);
Tensor load(const std::filesystem::path& path);

// Encoded byte image, handy for byte-for-byte comparisons.
std::vector<char> encode(const Tensor& t);

}  // namespace msga::nst
