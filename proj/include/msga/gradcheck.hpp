#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "msga/layers.hpp"

namespace msga {

struct GradcheckResult {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
};

// Builds a scalar loss on the given tape. Must be deterministic.
using LossFn = std::function<Tensor(Tape&)>;

// Compares tape gradients with central differences on `sample_size` entries
// drawn uniformly from all parameter entries (every entry when sample_size is
// 0 or exceeds the total). Per entry the error is
// |g_a − g_n| / max(|g_a|, |g_n|, floor). The floor keeps gradients that are
// zero by construction (a query bias under a row softmax) from turning
// difference noise into error 1. A probe whose ±h points straddle a relu kink
// is not a derivative estimate, so disagreeing entries are re-probed with
// steps h/10 and h/100 and the closest estimate is kept; a wrong gradient
// disagrees at every step. Parameter values are restored and gradients zeroed.
GradcheckResult gradcheck(const LossFn& loss, const ParameterList& params, std::size_t sample_size,
                          std::uint64_t seed, double h = 1e-4, double floor = 1e-6);

enum class GradcheckScope { kOp, kBlock, kNet };

// Pass thresholds: 1e-6 for single ops, 1e-4 for blocks, 1e-3 for the network.
double gradcheck_threshold(GradcheckScope scope);

struct NamedGradcheck {
  std::string name;
  GradcheckResult result;
  double threshold = 0.0;
  bool passed() const { return result.max_rel_error < threshold; }
};

// Op scope: every differentiable op on small random inputs. Block scope:
// position, channel and dual attention plus a two-step guided module, with
// the gating scalars moved off zero. Net scope: the full training loss of a
// small network on a random image, 10 sampled parameters.
std::vector<NamedGradcheck> run_gradcheck_scope(GradcheckScope scope, std::uint64_t seed);

}  // namespace msga
