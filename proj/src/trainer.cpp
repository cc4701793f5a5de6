#include "msga/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <utility>

#include "msga/error.hpp"
#include "msga/metrics.hpp"

namespace msga::train {

namespace fs = std::filesystem;

Adam::Adam(ParameterList params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor.numel(), 0.0);
    v_.emplace_back(p.tensor.numel(), 0.0);
  }
}

void Adam::step() {
  for (const auto& p : params_) {
    if (!p.tensor.has_grad()) throw UsageError("parameter " + p.name + " has no gradient");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, double(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, double(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor theta = params_[k].tensor;
    auto g = std::as_const(theta).grad();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < g.size(); ++i) {
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      const double mhat = m[i] / c1, vhat = v[i] / c2;
      theta[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

bool PlateauSchedule::observe(double metric) {
  if (metric > best_) {
    best_ = metric;
    bad_epochs_ = 0;
    return false;
  }
  if (++bad_epochs_ < patience_) return false;
  lr_ *= factor_;
  bad_epochs_ = 0;
  return true;
}

void TrainReport::write_csv(const fs::path& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os << "epoch,loss,seg_loss,guide_loss,recon_loss,val_dsc,lr\n";
  char buf[512];
  for (const auto& e : epochs) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", e.epoch, e.loss, e.seg_loss,
                  e.guide_loss, e.recon_loss, e.val_dsc, e.lr);
    os << buf;
  }
}

void TrainReport::write_timing_csv(const fs::path& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os << "epoch,seconds\n";
  for (const auto& e : epochs) os << e.epoch << ',' << e.seconds << '\n';
}

double mean_foreground_dsc(const MsgaNet& net, std::span<const data::Sample> samples) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& s : samples) {
    const auto report = metrics::evaluate(net.predict(s.image), s.labels, int(net.config().num_classes));
    if (report.mean_dsc) {
      sum += *report.mean_dsc;
      ++n;
    }
  }
  return n ? sum / double(n) : 0.0;
}

Split split_indices(std::size_t n, double val_fraction, std::uint64_t seed) {
  if (val_fraction < 0 || val_fraction >= 1) throw UsageError("validation fraction must lie in [0, 1)");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto nval = std::size_t(std::lround(double(n) * val_fraction));
  Split s;
  s.train.assign(idx.begin(), idx.end() - long(nval));
  s.val.assign(idx.end() - long(nval), idx.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.val.begin(), s.val.end());
  return s;
}

TrainReport train(MsgaNet& net, std::span<const data::Sample> train_set, std::span<const data::Sample> val_set,
                  const TrainOptions& opts) {
  TrainReport report;
  if (opts.epochs == 0) return report;
  if (opts.batch_size == 0) throw UsageError("batch size must be positive");
  if (train_set.size() < opts.batch_size) {
    throw UsageError("training set has " + std::to_string(train_set.size()) + " samples, fewer than one batch of " +
                     std::to_string(opts.batch_size));
  }
  const NetworkConfig& cfg = net.config();
  const ParameterList& params = net.parameters();
  Adam adam(params, {opts.lr, opts.beta1, opts.beta2, 1e-8});
  PlateauSchedule schedule(opts.lr, opts.lr_factor, opts.patience);
  std::mt19937_64 rng(opts.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  double best_val = -std::numeric_limits<double>::infinity();
  const bool square = cfg.height == cfg.width;
  zero_grads(params);

  for (std::size_t epoch = 1; epoch <= opts.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = schedule.lr();
    adam.set_lr(schedule.lr());
    std::shuffle(order.begin(), order.end(), rng);

    for (std::size_t b0 = 0; b0 < order.size(); b0 += opts.batch_size) {
      const std::size_t b1 = std::min(order.size(), b0 + opts.batch_size);
      // Per-sample tapes; gradients sum into the parameters in sample order.
      for (std::size_t j = b0; j < b1; ++j) {
        const data::Sample* sample = &train_set[order[j]];
        data::Sample augmented;
        if (opts.augment) {
          augmented = data::apply_augmentation(*sample, data::draw_augmentation(rng, square));
          sample = &augmented;
        }
        Tape tape;
        ForwardResult r = net.forward(tape, sample->image);
        LossBreakdown l = total_loss(tape, r, sample->labels, cfg);
        if (!std::isfinite(l.total.item())) {
          throw NumericError("non-finite loss at epoch " + std::to_string(epoch));
        }
        tape.backward(l.total);
        rec.loss += l.total.item();
        rec.seg_loss += l.seg.item();
        rec.guide_loss += l.guide.item();
        rec.recon_loss += l.recon.item();
      }
      adam.step();
      zero_grads(params);
    }
    const double n = double(order.size());
    rec.loss /= n;
    rec.seg_loss /= n;
    rec.guide_loss /= n;
    rec.recon_loss /= n;

    rec.val_dsc = mean_foreground_dsc(net, val_set.empty() ? train_set : val_set);
    schedule.observe(rec.val_dsc);
    if (rec.val_dsc > best_val) {
      best_val = rec.val_dsc;
      report.best_epoch = epoch;
      if (!opts.out_dir.empty()) {
        report.best_checkpoint = opts.out_dir / "checkpoint";
        net.save(report.best_checkpoint);
      }
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report.epochs.push_back(rec);
    if (opts.on_epoch) opts.on_epoch(rec);
  }
  return report;
}

}  // namespace msga::train
