#pragma once

#include <filesystem>

#include "msga/layers.hpp"

namespace msga {

// A checkpoint is a directory holding one NST file per parameter plus
// `manifest.txt` with one line per parameter: `<name> <file> <shape>`,
// shape written as e.g. 8x1x3x3.
void save_checkpoint(const std::filesystem::path& dir, const ParameterList& params);

// Loads values into the given (already constructed) parameters. Missing
// names, extra names and shape disagreements are reported together.
void load_checkpoint(const std::filesystem::path& dir, const ParameterList& params);

}  // namespace msga
