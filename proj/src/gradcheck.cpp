#include "msga/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <random>
#include <utility>

#include "msga/attention.hpp"
#include "msga/error.hpp"
#include "msga/guided.hpp"
#include "msga/network.hpp"
#include "msga/ops.hpp"

namespace msga {

GradcheckResult gradcheck(const LossFn& loss, const ParameterList& params, std::size_t sample_size,
                          std::uint64_t seed, double h, double floor) {
  std::vector<std::size_t> offsets;  // prefix sums of parameter sizes
  std::size_t total = 0;
  for (const auto& p : params) {
    offsets.push_back(total);
    total += p.tensor.numel();
  }
  if (total == 0) throw UsageError("gradcheck needs at least one parameter");

  std::vector<std::size_t> picks(total);
  std::iota(picks.begin(), picks.end(), 0);
  if (sample_size > 0 && sample_size < total) {
    std::mt19937_64 rng(seed);
    std::shuffle(picks.begin(), picks.end(), rng);
    picks.resize(sample_size);
    std::sort(picks.begin(), picks.end());
  }

  zero_grads(params);
  {
    Tape tape;
    Tensor l = loss(tape);
    tape.backward(l);
  }

  GradcheckResult result;
  Tape off(false);
  for (std::size_t flat : picks) {
    const std::size_t k = std::size_t(std::upper_bound(offsets.begin(), offsets.end(), flat) - offsets.begin()) - 1;
    Tensor t = params[k].tensor;
    const std::size_t i = flat - offsets[k];
    const double analytic = t.has_grad() ? std::as_const(t).grad()[i] : 0.0;

    const double saved = t[i];
    double numeric = 0.0, err = std::numeric_limits<double>::infinity();
    for (double step = h; step >= h * 1e-2 && err > 1e-8; step *= 0.1) {
      t[i] = saved + step;
      const double up = loss(off).item();
      t[i] = saved - step;
      const double down = loss(off).item();
      t[i] = saved;
      const double n = (up - down) / (2.0 * step);
      if (!std::isfinite(analytic) || !std::isfinite(n)) {
        throw NumericError("non-finite gradient for " + params[k].name + "[" + std::to_string(i) + "]");
      }
      const double e = std::abs(analytic - n) / std::max({std::abs(analytic), std::abs(n), floor});
      if (e < err) {
        err = e;
        numeric = n;
      }
    }
    ++result.checked;
    if (err > result.max_rel_error || result.checked == 1) {
      result.max_rel_error = err;
      result.worst_parameter = params[k].name;
      result.worst_index = i;
      result.worst_analytic = analytic;
      result.worst_numeric = numeric;
    }
  }
  zero_grads(params);
  return result;
}

}  // namespace msga

namespace msga {

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape), 0.0, true);
  for (auto& v : t.values()) v = u(rng);
  return t;
}

// Values with magnitude in [0.1, 1] so relu kinks sit far from every probe.
Tensor off_zero_tensor(Shape shape, Rng& rng) {
  Tensor t = random_tensor(std::move(shape), rng, 0.1, 1.0);
  std::bernoulli_distribution sign(0.5);
  for (auto& v : t.values()) v = sign(rng) ? v : -v;
  return t;
}

struct Case {
  std::string name;
  ParameterList params;
  LossFn loss;
};

ParameterList inputs(std::initializer_list<Tensor> ts) {
  ParameterList out;
  std::size_t i = 0;
  for (const auto& t : ts) out.push_back({"input" + std::to_string(i++), t});
  return out;
}

// Builds the loss closure: `body` maps inputs to an op output, then the output
// is reduced with a weight tensor fixed at construction.
template <class Body>
Case op_case(std::string name, std::initializer_list<Tensor> ts, Rng& rng, Body body) {
  ParameterList params = inputs(ts);
  Tape probe(false);
  std::vector<Tensor> args;
  for (const auto& p : params) args.push_back(p.tensor);
  Tensor shape_probe = body(probe, args);
  Tensor w = random_tensor(shape_probe.shape(), rng);
  w.set_requires_grad(false);
  LossFn loss = [args, w, body](Tape& tape) { return sum_all(tape, mul(tape, body(tape, args), w)); };
  return {std::move(name), std::move(params), std::move(loss)};
}

std::vector<Case> op_cases(Rng& rng) {
  using Args = const std::vector<Tensor>&;
  std::vector<Case> cases;
  cases.push_back(op_case("matmul", {random_tensor({3, 4}, rng), random_tensor({4, 5}, rng)}, rng,
                          [](Tape& t, Args a) { return matmul(t, a[0], a[1]); }));
  cases.push_back(op_case("transpose", {random_tensor({3, 5}, rng)}, rng,
                          [](Tape& t, Args a) { return transpose(t, a[0]); }));
  cases.push_back(op_case("reshape", {random_tensor({2, 3, 4}, rng)}, rng,
                          [](Tape& t, Args a) { return reshape(t, a[0], {6, 4}); }));
  cases.push_back(op_case("permute", {random_tensor({2, 3, 4}, rng)}, rng, [](Tape& t, Args a) {
    const std::size_t axes[] = {2, 0, 1};
    return permute(t, a[0], axes);
  }));
  cases.push_back(op_case("concat_channels", {random_tensor({2, 3, 3}, rng), random_tensor({1, 3, 3}, rng)}, rng,
                          [](Tape& t, Args a) { return concat_channels(t, a); }));
  cases.push_back(op_case("add", {random_tensor({2, 3}, rng), random_tensor({2, 3}, rng)}, rng,
                          [](Tape& t, Args a) { return add(t, a[0], a[1]); }));
  cases.push_back(op_case("sub", {random_tensor({2, 3}, rng), random_tensor({2, 3}, rng)}, rng,
                          [](Tape& t, Args a) { return sub(t, a[0], a[1]); }));
  cases.push_back(op_case("mul", {random_tensor({2, 3}, rng), random_tensor({2, 3}, rng)}, rng,
                          [](Tape& t, Args a) { return mul(t, a[0], a[1]); }));
  cases.push_back(op_case("scale", {random_tensor({2, 3}, rng)}, rng,
                          [](Tape& t, Args a) { return scale(t, a[0], -1.7); }));
  cases.push_back(op_case("scale_by", {random_tensor({2, 3}, rng), random_tensor({1}, rng)}, rng,
                          [](Tape& t, Args a) { return scale_by(t, a[0], a[1]); }));
  cases.push_back(op_case("relu", {off_zero_tensor({3, 4}, rng)}, rng,
                          [](Tape& t, Args a) { return relu(t, a[0]); }));
  cases.push_back(op_case("sum_all", {random_tensor({3, 4}, rng)}, rng,
                          [](Tape& t, Args a) { return sum_all(t, a[0]); }));
  cases.push_back(op_case("sum_squares", {random_tensor({3, 4}, rng)}, rng,
                          [](Tape& t, Args a) { return sum_squares(t, a[0]); }));
  cases.push_back(op_case("softmax_rows", {random_tensor({3, 5}, rng, -2.0, 2.0)}, rng,
                          [](Tape& t, Args a) { return softmax_rows(t, a[0]); }));
  cases.push_back(op_case("conv2d", {random_tensor({2, 5, 4}, rng), random_tensor({3, 2, 3, 3}, rng),
                                     random_tensor({3}, rng)},
                          rng, [](Tape& t, Args a) { return conv2d(t, a[0], a[1], a[2], 1, 1); }));
  cases.push_back(op_case("conv2d_stride2", {random_tensor({2, 6, 6}, rng), random_tensor({3, 2, 3, 3}, rng),
                                             random_tensor({3}, rng)},
                          rng, [](Tape& t, Args a) { return conv2d(t, a[0], a[1], a[2], 2, 1); }));
  cases.push_back(op_case("bilinear_upsample", {random_tensor({2, 3, 4}, rng)}, rng,
                          [](Tape& t, Args a) { return bilinear_upsample(t, a[0], 7, 9); }));
  cases.push_back(op_case("avg_pool2", {random_tensor({2, 4, 6}, rng)}, rng,
                          [](Tape& t, Args a) { return avg_pool2(t, a[0]); }));
  {
    LabelMap labels({3, 4}, std::vector<int>{0, 1, 2, 1, 2, 0, 0, 1, 2, 2, 1, 0});
    cases.push_back(op_case("cross_entropy", {random_tensor({3, 3, 4}, rng, -2.0, 2.0)}, rng,
                            [labels](Tape& t, Args a) { return cross_entropy(t, a[0], labels); }));
  }
  return cases;
}

void set_lambdas(const ParameterList& params, Rng& rng) {
  std::uniform_real_distribution<double> u(0.3, 0.9);
  for (const auto& p : params) {
    if (p.name.ends_with(".lambda")) Tensor(p.tensor)[0] = u(rng);
  }
}

template <class Module, class Reduce>
Case block_case(std::string name, std::shared_ptr<Module> module, Tensor input, Rng& rng, Reduce reduce) {
  ParameterList params;
  module->collect(name, params);
  set_lambdas(params, rng);
  params.push_back({name + ".input", input});
  Tape probe(false);
  Tensor w = random_tensor(reduce(probe, *module, input).shape(), rng);
  w.set_requires_grad(false);
  LossFn loss = [module, input, w, reduce](Tape& tape) {
    return sum_all(tape, mul(tape, reduce(tape, *module, input), w));
  };
  return {std::move(name), std::move(params), std::move(loss)};
}

std::vector<Case> block_cases(Rng& rng) {
  std::vector<Case> cases;
  cases.push_back(block_case("pam", std::make_shared<PamBlock>(8, rng), random_tensor({8, 4, 4}, rng), rng,
                             [](Tape& t, const PamBlock& m, const Tensor& x) { return m.forward(t, x).out; }));
  cases.push_back(block_case("cam", std::make_shared<CamBlock>(), random_tensor({4, 3, 3}, rng), rng,
                             [](Tape& t, const CamBlock& m, const Tensor& x) { return m.forward(t, x).out; }));
  cases.push_back(block_case("dual", std::make_shared<DualBlock>(8, rng), random_tensor({8, 4, 4}, rng), rng,
                             [](Tape& t, const DualBlock& m, const Tensor& x) { return m.forward(t, x).out; }));
  // Features plus both auxiliary losses, so every path into the loss is covered.
  cases.push_back(block_case("guided", std::make_shared<GuidedModule>(8, 2, rng), random_tensor({8, 4, 4}, rng),
                             rng, [](Tape& t, const GuidedModule& m, const Tensor& x) {
                               GuidedOutput g = m.forward(t, x);
                               const Tensor parts[] = {reshape(t, g.features, {g.features.numel(), 1, 1}),
                                                       reshape(t, g.guide_loss, {1, 1, 1}),
                                                       reshape(t, g.recon_loss, {1, 1, 1})};
                               return concat_channels(t, parts);
                             }));
  return cases;
}

Case net_case(Rng& rng) {
  NetworkConfig cfg;
  cfg.num_classes = 3;
  cfg.base_width = 4;
  cfg.fusion_channels = 8;
  cfg.refinement_steps = 2;
  cfg.height = cfg.width = 16;
  cfg.seed = rng();
  auto net = std::make_shared<MsgaNet>(cfg);
  set_lambdas(net->parameters(), rng);
  Tensor image = random_tensor({1, cfg.height, cfg.width}, rng, 0.0, 1.0);
  image.set_requires_grad(false);
  std::uniform_int_distribution<int> cls(0, int(cfg.num_classes) - 1);
  LabelMap labels({cfg.height, cfg.width}, 0);
  for (auto& v : labels.values) v = cls(rng);
  LossFn loss = [net, image, labels](Tape& tape) {
    return total_loss(tape, net->forward(tape, image), labels, net->config()).total;
  };
  return {"net", net->parameters(), std::move(loss)};
}

}  // namespace

double gradcheck_threshold(GradcheckScope scope) {
  switch (scope) {
    case GradcheckScope::kOp:
      return 1e-6;
    case GradcheckScope::kBlock:
      return 1e-4;
    case GradcheckScope::kNet:
      return 1e-3;
  }
  return 0.0;
}

std::vector<NamedGradcheck> run_gradcheck_scope(GradcheckScope scope, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Case> cases;
  std::size_t sample = 0;
  switch (scope) {
    case GradcheckScope::kOp:
      cases = op_cases(rng);
      break;
    case GradcheckScope::kBlock:
      cases = block_cases(rng);
      sample = 200;
      break;
    case GradcheckScope::kNet:
      cases.push_back(net_case(rng));
      sample = 10;
      break;
  }
  std::vector<NamedGradcheck> out;
  for (auto& c : cases) {
    out.push_back({c.name, gradcheck(c.loss, c.params, sample, rng()), gradcheck_threshold(scope)});
  }
  return out;
}

}  // namespace msga
