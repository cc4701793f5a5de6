#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "msga/error.hpp"
#include "msga/gradcheck.hpp"
#include "msga/metrics.hpp"
#include "msga/nst.hpp"
#include "msga/trainer.hpp"

namespace fs = std::filesystem;
using namespace msga;

namespace {

struct SynthArgs {
  fs::path out;
  std::size_t n = 16;
  std::size_t size = 32;
  int classes = 4;
  std::uint64_t seed = 7;
  double sigma = 0.1;
  bool force = false;
};

struct TrainArgs {
  fs::path data, out;
  std::size_t epochs = 300;
  std::size_t m = 2;
  double alpha = 1.0, beta = 0.25, gamma = 0.1;
  std::uint64_t seed = 1;
  std::size_t base_width = 8;
  std::size_t fusion_channels = 16;
  double lr = 1e-3;
  std::size_t batch = 8;
  std::size_t patience = 50;
  double val_fraction = 0.0;
  bool augment = false;
};

struct EvalArgs {
  fs::path checkpoint, data, csv;
};

struct PredictArgs {
  fs::path checkpoint, image, out;
};

struct GradcheckArgs {
  std::string scope = "op";
  std::uint64_t seed = 1;
};

struct DumpArgs {
  fs::path checkpoint, image, out;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string opt_fmt(const std::optional<double>& v) { return v ? fmt(*v) : ""; }

int cmd_synth(const SynthArgs& a) {
  if (a.classes < 2) throw UsageError("--classes must be at least 2");
  if (a.n == 0) throw UsageError("--n must be at least 1");
  if (fs::exists(a.out) && !fs::is_empty(a.out) && !a.force) {
    throw UsageError(a.out.string() + " exists and is not empty (use --force to overwrite)");
  }
  data::SyntheticSpec spec;
  spec.height = spec.width = a.size;
  spec.num_classes = a.classes;
  spec.seed = a.seed;
  spec.sigma = a.sigma;
  data::Dataset ds;
  ds.info = {a.n, a.size, a.size, a.classes, a.seed, a.sigma};
  ds.samples = data::generate(spec, a.n);
  data::save_dataset(a.out, ds);
  std::cout << "wrote " << a.n << " samples of " << a.size << "x" << a.size << " with " << a.classes
            << " classes (seed " << a.seed << ", sigma " << fmt(a.sigma) << ") to " << a.out.string() << "\n";
  return 0;
}

NetworkConfig config_for(const data::DatasetInfo& info, const TrainArgs& a) {
  NetworkConfig cfg;
  cfg.num_classes = std::size_t(info.num_classes);
  cfg.height = info.height;
  cfg.width = info.width;
  cfg.base_width = a.base_width;
  cfg.fusion_channels = a.fusion_channels;
  cfg.refinement_steps = a.m;
  cfg.alpha = a.alpha;
  cfg.beta = a.beta;
  cfg.gamma = a.gamma;
  cfg.seed = a.seed;
  cfg.validate();
  return cfg;
}

int cmd_train(const TrainArgs& a) {
  if (a.batch == 0) throw UsageError("--batch must be at least 1");
  data::Dataset ds = data::load_dataset(a.data);
  const NetworkConfig cfg = config_for(ds.info, a);
  const auto split = train::split_indices(ds.samples.size(), a.val_fraction, a.seed);
  std::vector<data::Sample> train_set, val_set;
  for (auto i : split.train) train_set.push_back(ds.samples[i]);
  for (auto i : split.val) val_set.push_back(ds.samples[i]);

  std::cout << "alpha=" << fmt(cfg.alpha) << " beta=" << fmt(cfg.beta) << " gamma=" << fmt(cfg.gamma)
            << " M=" << cfg.refinement_steps << " lr=" << fmt(a.lr) << " batch=" << a.batch
            << " epochs=" << a.epochs << " seed=" << a.seed << "\n"
            << "train=" << train_set.size() << " val=" << val_set.size() << " size=" << cfg.height << "x"
            << cfg.width << " classes=" << cfg.num_classes << "\n";

  fs::create_directories(a.out);
  MsgaNet net(cfg);
  std::cout << "parameters=" << net.parameter_count() << "\n" << std::flush;
  train::TrainOptions opts;
  opts.epochs = a.epochs;
  opts.batch_size = a.batch;
  opts.lr = a.lr;
  opts.patience = a.patience;
  opts.seed = a.seed;
  opts.augment = a.augment;
  opts.out_dir = a.out;
  opts.on_epoch = [](const train::EpochRecord& e) {
    std::printf("epoch %zu loss %.6f seg %.6f guide %.6f recon %.6f val_dsc %.4f lr %.3g (%.2fs)\n", e.epoch,
                e.loss, e.seg_loss, e.guide_loss, e.recon_loss, e.val_dsc, e.lr, e.seconds);
    std::fflush(stdout);
  };
  const auto report = train::train(net, train_set, val_set, opts);
  report.write_csv(a.out / "report.csv");
  report.write_timing_csv(a.out / "timing.csv");
  if (report.best_epoch) {
    std::cout << "best val_dsc at epoch " << *report.best_epoch << ", checkpoint " << report.best_checkpoint.string()
              << "\n";
  }
  return 0;
}

void check_compatible(const NetworkConfig& cfg, const data::DatasetInfo& info) {
  std::vector<std::string> diffs;
  if (cfg.height != info.height) diffs.push_back("height (" + std::to_string(cfg.height) + " vs " + std::to_string(info.height) + ")");
  if (cfg.width != info.width) diffs.push_back("width (" + std::to_string(cfg.width) + " vs " + std::to_string(info.width) + ")");
  if (cfg.num_classes != std::size_t(info.num_classes)) {
    diffs.push_back("num_classes (" + std::to_string(cfg.num_classes) + " vs " + std::to_string(info.num_classes) + ")");
  }
  if (diffs.empty()) return;
  std::string msg = "checkpoint is incompatible with the dataset; differing fields (checkpoint vs data):";
  for (const auto& d : diffs) msg += " " + d;
  throw DataError(msg);
}

int cmd_eval(const EvalArgs& a) {
  MsgaNet net = MsgaNet::load(a.checkpoint);
  data::Dataset ds = data::load_dataset(a.data);
  check_compatible(net.config(), ds.info);
  const int k = int(net.config().num_classes);

  std::ofstream file;
  if (!a.csv.empty()) {
    file.open(a.csv, std::ios::trunc);
    if (!file) throw IoError("cannot write " + a.csv.string());
  }
  std::ostream& os = a.csv.empty() ? std::cout : file;
  os << "sample,class,dsc,vs,msd\n";

  struct Acc {
    double dsc = 0, vs = 0, msd = 0;
    std::size_t n = 0, n_msd = 0;
  };
  std::vector<Acc> per_class(static_cast<std::size_t>(k));
  Acc overall;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const auto& s = ds.samples[i];
    const auto report = metrics::evaluate(net.predict(s.image), s.labels, k);
    for (const auto& c : report.per_class) {
      os << i << ',' << c.class_id << ',' << fmt(c.dsc) << ',' << fmt(c.vs) << ',' << opt_fmt(c.msd) << '\n';
      if (c.truth_empty) continue;
      auto& acc = per_class[std::size_t(c.class_id)];
      acc.dsc += c.dsc;
      acc.vs += c.vs;
      ++acc.n;
      if (c.msd) {
        acc.msd += *c.msd;
        ++acc.n_msd;
      }
    }
    if (report.mean_dsc) {
      overall.dsc += *report.mean_dsc;
      overall.vs += *report.mean_vs;
      ++overall.n;
      if (report.mean_msd) {
        overall.msd += *report.mean_msd;
        ++overall.n_msd;
      }
    }
  }
  auto mean_row = [&os](const std::string& label, const Acc& acc) {
    if (acc.n == 0) return;
    os << "mean," << label << ',' << fmt(acc.dsc / double(acc.n)) << ',' << fmt(acc.vs / double(acc.n)) << ','
       << (acc.n_msd ? fmt(acc.msd / double(acc.n_msd)) : "") << '\n';
  };
  for (int c = 1; c < k; ++c) mean_row(std::to_string(c), per_class[std::size_t(c)]);
  mean_row("all", overall);
  if (!a.csv.empty() && overall.n) {
    std::cout << "samples=" << ds.samples.size() << " mean_dsc=" << fmt(overall.dsc / double(overall.n))
              << " mean_vs=" << fmt(overall.vs / double(overall.n)) << "\n";
  }
  return 0;
}

Tensor load_image(const fs::path& path, const NetworkConfig& cfg) {
  Tensor image = nst::load(path);
  if (image.rank() == 2 && cfg.image_channels == 1) {
    image = Tensor({1, image.dim(0), image.dim(1)}, std::vector<double>(image.values().begin(), image.values().end()));
  }
  const Shape expected{cfg.image_channels, cfg.height, cfg.width};
  if (image.shape() != expected) {
    throw DataError(path.string() + " has shape " + shape_str(image.shape()) + ", checkpoint expects " +
                    shape_str(expected));
  }
  return image;
}

int cmd_predict(const PredictArgs& a) {
  MsgaNet net = MsgaNet::load(a.checkpoint);
  const LabelMap labels = net.predict(load_image(a.image, net.config()));
  nst::save(a.out, data::labels_to_tensor(labels));
  std::cout << "wrote " << shape_str(labels.shape) << " label map to " << a.out.string() << "\n";
  return 0;
}

int cmd_gradcheck(const GradcheckArgs& a) {
  GradcheckScope scope;
  if (a.scope == "op") {
    scope = GradcheckScope::kOp;
  } else if (a.scope == "block") {
    scope = GradcheckScope::kBlock;
  } else if (a.scope == "net") {
    scope = GradcheckScope::kNet;
  } else {
    throw UsageError("--scope must be op, block or net");
  }
  bool ok = true;
  double worst = 0.0;
  for (const auto& c : run_gradcheck_scope(scope, a.seed)) {
    const auto& r = c.result;
    std::printf("%-20s max_rel_error %.3e over %zu entries (worst %s[%zu]: analytic %.6e numeric %.6e) %s\n",
                c.name.c_str(), r.max_rel_error, r.checked, r.worst_parameter.c_str(), r.worst_index,
                r.worst_analytic, r.worst_numeric, c.passed() ? "ok" : "FAIL");
    ok = ok && c.passed();
    worst = std::max(worst, r.max_rel_error);
  }
  std::printf("worst relative error %.3e, threshold %.0e\n", worst, gradcheck_threshold(scope));
  return ok ? 0 : 3;
}

int cmd_dump_attn(const DumpArgs& a) {
  MsgaNet net = MsgaNet::load(a.checkpoint);
  const Tensor image = load_image(a.image, net.config());
  Tape off(false);
  const ForwardResult r = net.forward(off, image);
  fs::create_directories(a.out);
  std::size_t files = 0;
  for (std::size_t s = 0; s < r.guided.size(); ++s) {
    const auto& steps = r.guided[s].steps;
    for (std::size_t i = 0; i < steps.size(); ++i) {
      const std::string stem = "s" + std::to_string(s) + "_step" + std::to_string(i + 1);
      nst::save(a.out / (stem + "_pam.nst"), steps[i].pam_attn);
      nst::save(a.out / (stem + "_cam.nst"), steps[i].cam_attn);
      nst::save(a.out / (stem + "_features.nst"), steps[i].output);
      files += 3;
    }
  }
  std::cout << "wrote " << files << " files to " << a.out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-scale guided attention segmentation toolkit"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Write a seeded synthetic dataset");
  c_synth->add_option("--out", synth.out, "Output directory")->required();
  c_synth->add_option("--n", synth.n, "Number of samples");
  c_synth->add_option("--size", synth.size, "Image height and width");
  c_synth->add_option("--classes", synth.classes, "Number of classes including background");
  c_synth->add_option("--seed", synth.seed, "Generator seed");
  c_synth->add_option("--sigma", synth.sigma, "Gaussian noise standard deviation");
  c_synth->add_flag("--force", synth.force, "Write into a non-empty directory");

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train a network on a dataset directory");
  c_train->add_option("--data", tr.data, "Dataset directory")->required();
  c_train->add_option("--out", tr.out, "Run directory (report.csv, timing.csv, checkpoint/)")->required();
  c_train->add_option("--epochs", tr.epochs, "Training epochs");
  c_train->add_option("--m", tr.m, "Refinement steps per guided module");
  c_train->add_option("--alpha", tr.alpha, "Segmentation loss weight");
  c_train->add_option("--beta", tr.beta, "Guided loss weight");
  c_train->add_option("--gamma", tr.gamma, "Reconstruction loss weight");
  c_train->add_option("--seed", tr.seed, "Initialisation, split and shuffling seed");
  c_train->add_option("--base-width", tr.base_width, "Backbone base width");
  c_train->add_option("--fusion-channels", tr.fusion_channels, "Fusion channel count (multiple of 8)");
  c_train->add_option("--lr", tr.lr, "Initial learning rate");
  c_train->add_option("--batch", tr.batch, "Mini-batch size");
  c_train->add_option("--patience", tr.patience, "Epochs without improvement before halving the rate");
  c_train->add_option("--val-fraction", tr.val_fraction, "Held-out fraction (0 validates on the training set)");
  c_train->add_flag("--augment", tr.augment, "Random flips, mirrors and rotations");

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "Score a checkpoint on a dataset");
  c_eval->add_option("--checkpoint", ev.checkpoint, "Checkpoint directory")->required();
  c_eval->add_option("--data", ev.data, "Dataset directory")->required();
  c_eval->add_option("--csv", ev.csv, "Metrics CSV path (stdout when empty)");

  PredictArgs pr;
  auto* c_predict = app.add_subcommand("predict", "Write the predicted label map of one image");
  c_predict->add_option("--checkpoint", pr.checkpoint, "Checkpoint directory")->required();
  c_predict->add_option("--image", pr.image, "Image NST (C×H×W or H×W)")->required();
  c_predict->add_option("--out", pr.out, "Output label NST")->required();

  GradcheckArgs gc;
  auto* c_gc = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients");
  c_gc->add_option("--scope", gc.scope, "op, block or net")->check(CLI::IsMember({"op", "block", "net"}));
  c_gc->add_option("--seed", gc.seed, "Seed for inputs, weights and sampled entries");

  DumpArgs du;
  auto* c_dump = app.add_subcommand("dump-attn", "Write attention maps and refined features of one image");
  c_dump->add_option("--checkpoint", du.checkpoint, "Checkpoint directory")->required();
  c_dump->add_option("--image", du.image, "Image NST (C×H×W or H×W)")->required();
  c_dump->add_option("--out", du.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*c_synth) return cmd_synth(synth);
    if (*c_train) return cmd_train(tr);
    if (*c_eval) return cmd_eval(ev);
    if (*c_predict) return cmd_predict(pr);
    if (*c_gc) return cmd_gradcheck(gc);
    if (*c_dump) return cmd_dump_attn(du);
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return e.exit_code();
  } catch (const fs::filesystem_error& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
