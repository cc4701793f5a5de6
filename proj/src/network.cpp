#include "msga/network.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "msga/checkpoint.hpp"
#include "msga/error.hpp"
#include "msga/ops.hpp"

namespace msga {

namespace fs = std::filesystem;

void NetworkConfig::validate() const {
  if (num_classes < 2) throw ConfigError("num_classes must be at least 2");
  if (image_channels < 1) throw ConfigError("image_channels must be positive");
  if (base_width < 1) throw ConfigError("base_width must be positive");
  if (fusion_channels == 0 || fusion_channels % 8 != 0) {
    throw ConfigError("fusion_channels must be a positive multiple of 8, got " + std::to_string(fusion_channels));
  }
  if (refinement_steps < 1) throw ConfigError("refinement_steps must be at least 1");
  if (alpha < 0 || beta < 0 || gamma < 0) throw ConfigError("loss weights must be non-negative");
  if (height == 0 || width == 0 || height % 16 || width % 16) {
    throw ConfigError("input size " + std::to_string(height) + "x" + std::to_string(width) +
                      " must be divisible by 16");
  }
}

namespace {

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw FormatError("config key '" + key + "' has invalid value '" + value + "'");
  }
  return out;
}

}  // namespace

std::string NetworkConfig::to_text() const {
  std::ostringstream os;
  os << "num_classes=" << num_classes << '\n'
     << "image_channels=" << image_channels << '\n'
     << "base_width=" << base_width << '\n'
     << "fusion_channels=" << fusion_channels << '\n'
     << "refinement_steps=" << refinement_steps << '\n'
     << "scales=" << kNumScales << '\n'
     << "alpha=" << format_double(alpha) << '\n'
     << "beta=" << format_double(beta) << '\n'
     << "gamma=" << format_double(gamma) << '\n'
     << "height=" << height << '\n'
     << "width=" << width << '\n'
     << "seed=" << seed << '\n';
  return os.str();
}

NetworkConfig NetworkConfig::from_text(const std::string& text) {
  NetworkConfig cfg;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("config line without '=': " + line);
    const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    if (key == "num_classes") cfg.num_classes = parse_number<std::size_t>(key, value);
    else if (key == "image_channels") cfg.image_channels = parse_number<std::size_t>(key, value);
    else if (key == "base_width") cfg.base_width = parse_number<std::size_t>(key, value);
    else if (key == "fusion_channels") cfg.fusion_channels = parse_number<std::size_t>(key, value);
    else if (key == "refinement_steps") cfg.refinement_steps = parse_number<std::size_t>(key, value);
    else if (key == "alpha") cfg.alpha = parse_number<double>(key, value);
    else if (key == "beta") cfg.beta = parse_number<double>(key, value);
    else if (key == "gamma") cfg.gamma = parse_number<double>(key, value);
    else if (key == "height") cfg.height = parse_number<std::size_t>(key, value);
    else if (key == "width") cfg.width = parse_number<std::size_t>(key, value);
    else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "scales") {
      if (parse_number<std::size_t>(key, value) != kNumScales) {
        throw ConfigError("only " + std::to_string(kNumScales) + " scales are supported");
      }
    } else {
      throw FormatError("unknown config key '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

void NetworkConfig::save(const fs::path& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os << to_text();
}

NetworkConfig NetworkConfig::load(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return from_text(ss.str());
}

std::vector<std::string> NetworkConfig::differences(const NetworkConfig& o) const {
  std::vector<std::string> d;
  if (num_classes != o.num_classes) d.push_back("num_classes");
  if (image_channels != o.image_channels) d.push_back("image_channels");
  if (base_width != o.base_width) d.push_back("base_width");
  if (fusion_channels != o.fusion_channels) d.push_back("fusion_channels");
  if (refinement_steps != o.refinement_steps) d.push_back("refinement_steps");
  if (alpha != o.alpha) d.push_back("alpha");
  if (beta != o.beta) d.push_back("beta");
  if (gamma != o.gamma) d.push_back("gamma");
  if (height != o.height) d.push_back("height");
  if (width != o.width) d.push_back("width");
  if (seed != o.seed) d.push_back("seed");
  return d;
}

MsgaNet::MsgaNet(const NetworkConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(cfg_.seed);
  backbone = Backbone(cfg_.image_channels, cfg_.base_width, rng);
  std::size_t all = 0;
  for (std::size_t s = 0; s < kNumScales; ++s) all += Backbone::stage_channels(cfg_.base_width, s);
  fuse_multiscale = ConvBlock(all, cfg_.fusion_channels, 3, Activation::kRelu, rng);
  for (std::size_t s = 0; s < kNumScales; ++s) {
    const std::size_t width = Backbone::stage_channels(cfg_.base_width, s);
    fuse_scale[s] = ConvBlock(width + cfg_.fusion_channels, cfg_.fusion_channels, 3, Activation::kRelu, rng);
    guided[s] = GuidedModule(cfg_.fusion_channels, cfg_.refinement_steps, rng);
    raw_heads[s] = SegHead(width, cfg_.num_classes, rng);
    attentive_heads[s] = SegHead(cfg_.fusion_channels, cfg_.num_classes, rng);
  }

  backbone.collect("backbone", params_);
  fuse_multiscale.collect("fuse_ms", params_);
  for (std::size_t s = 0; s < kNumScales; ++s) {
    const std::string p = "s" + std::to_string(s);
    fuse_scale[s].collect(p + ".fuse", params_);
    guided[s].collect(p + ".guided", params_);
    raw_heads[s].collect(p + ".raw_head", params_);
    attentive_heads[s].collect(p + ".att_head", params_);
  }
}

std::size_t MsgaNet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.numel();
  return n;
}

ForwardResult MsgaNet::forward(Tape& tape, const Tensor& image, const ForwardOptions& opts) const {
  const Shape expected{cfg_.image_channels, cfg_.height, cfg_.width};
  if (image.shape() != expected) {
    throw ConfigError("network configured for input " + shape_str(expected) + ", got " +
                      shape_str(image.shape()));
  }
  const std::size_t h = cfg_.head_height(), w = cfg_.head_width();
  const auto features = backbone.forward(tape, image);

  std::array<Tensor, kNumScales> enlarged;
  for (std::size_t s = 0; s < kNumScales; ++s) {
    enlarged[s] = s == 0 ? features[0] : bilinear_upsample(tape, features[s], h, w);
  }
  Tensor fused = fuse_multiscale.forward(tape, concat_channels(tape, enlarged));
  if (opts.ablate_multiscale) fused = Tensor(fused.shape(), 0.0);

  ForwardResult r;
  r.guided.reserve(kNumScales);
  for (std::size_t s = 0; s < kNumScales; ++s) {
    const Tensor parts[] = {enlarged[s], fused};
    Tensor input = fuse_scale[s].forward(tape, concat_channels(tape, parts));
    r.guided.push_back(guided[s].forward(tape, input));
    r.attentive[s] = r.guided.back().features;
    r.raw_logits[s] = raw_heads[s].forward(tape, enlarged[s]);
    r.attentive_logits[s] = attentive_heads[s].forward(tape, r.attentive[s]);
  }
  r.logits_final = r.attentive_logits[0];
  GuidedTotals totals = guided_losses_total(tape, r.guided);
  r.guide_total = totals.guide;
  r.recon_total = totals.recon;
  return r;
}

LabelMap MsgaNet::predict(const Tensor& image) const {
  Tape off(false);
  ForwardResult r = forward(off, image);
  return argmax_classes(bilinear_upsample(off, r.logits_final, cfg_.height, cfg_.width));
}

void MsgaNet::save(const fs::path& dir) const {
  save_checkpoint(dir, params_);
  cfg_.save(dir / "net.cfg");
}

MsgaNet MsgaNet::load(const fs::path& dir) {
  MsgaNet net(NetworkConfig::load(dir / "net.cfg"));
  load_checkpoint(dir, net.params_);
  return net;
}

Tensor compose_total(Tape& tape, const Tensor& seg, const Tensor& guide, const Tensor& recon,
                     const NetworkConfig& cfg) {
  Tensor t = scale(tape, seg, cfg.alpha);
  t = add(tape, t, scale(tape, guide, cfg.beta));
  return add(tape, t, scale(tape, recon, cfg.gamma));
}

LossBreakdown total_loss(Tape& tape, const ForwardResult& r, const LabelMap& labels, const NetworkConfig& cfg) {
  const std::size_t h = cfg.head_height(), w = cfg.head_width();
  LabelMap target;
  if (labels.shape == Shape{cfg.height, cfg.width}) {
    target = resize_nearest(labels, h, w);
  } else if (labels.shape == Shape{h, w}) {
    target = labels;
  } else {
    throw DataError("label map " + shape_str(labels.shape) + " matches neither the input nor the head resolution");
  }

  LossBreakdown out;
  for (std::size_t s = 0; s < kNumScales; ++s) {
    for (const Tensor* logits : {&r.raw_logits[s], &r.attentive_logits[s]}) {
      Tensor ce = cross_entropy(tape, *logits, target);
      out.seg = out.seg.defined() ? add(tape, out.seg, ce) : ce;
      ++out.ce_terms;
    }
  }
  out.guide = r.guide_total;
  out.recon = r.recon_total;
  out.total = compose_total(tape, out.seg, out.guide, out.recon, cfg);
  return out;
}

}  // namespace msga
