#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "msga/data.hpp"
#include "msga/network.hpp"

namespace msga::train {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-8;
};

// Adam with bias correction. Reads parameter gradients, never clears them.
class Adam {
 public:
  Adam(ParameterList params, AdamConfig cfg = {});

  void step();

  double lr() const { return cfg_.lr; }
  void set_lr(double lr) { cfg_.lr = lr; }
  std::size_t steps_taken() const { return t_; }

 private:
  ParameterList params_;
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

// Multiplies the learning rate by `factor` once `patience` consecutive
// epochs pass without the monitored metric (higher is better) improving.
class PlateauSchedule {
 public:
  PlateauSchedule(double lr, double factor = 0.5, std::size_t patience = 50)
      : lr_(lr), factor_(factor), patience_(patience) {}

  // Returns true if this observation reduced the learning rate.
  bool observe(double metric);
  double lr() const { return lr_; }
  std::size_t epochs_without_improvement() const { return bad_epochs_; }

 private:
  double lr_, factor_;
  std::size_t patience_;
  double best_ = -std::numeric_limits<double>::infinity();
  std::size_t bad_epochs_ = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double loss = 0;        // mean L_total over the epoch's samples
  double seg_loss = 0;
  double guide_loss = 0;
  double recon_loss = 0;
  double val_dsc = 0;
  double lr = 0;  // rate used during the epoch
  double seconds = 0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::optional<std::size_t> best_epoch;
  std::filesystem::path best_checkpoint;

  // epoch,loss,seg_loss,guide_loss,recon_loss,val_dsc,lr (no timing, so the
  // file is reproducible bit for bit)
  void write_csv(const std::filesystem::path& path) const;
  // epoch,seconds
  void write_timing_csv(const std::filesystem::path& path) const;
};

struct TrainOptions {
  std::size_t epochs = 0;
  std::size_t batch_size = 8;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double lr_factor = 0.5;
  std::size_t patience = 50;
  std::uint64_t seed = 1;  // shuffling and augmentation
  bool augment = false;
  // When set, the best-validation checkpoint is written to <out_dir>/checkpoint.
  std::filesystem::path out_dir;
  std::function<void(const EpochRecord&)> on_epoch;
};

TrainReport train(MsgaNet& net, std::span<const data::Sample> train_set, std::span<const data::Sample> val_set,
                  const TrainOptions& opts);

// Mean over samples of the per-sample mean foreground DSC of net.predict.
double mean_foreground_dsc(const MsgaNet& net, std::span<const data::Sample> samples);

struct Split {
  std::vector<std::size_t> train, val;
};
// Seeded shuffle, then the last round(n·val_fraction) indices go to validation.
Split split_indices(std::size_t n, double val_fraction, std::uint64_t seed);

}  // namespace msga::train
