#include "liss/nets.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "liss/errors.hpp"

namespace nn = torch::nn;

namespace liss {

namespace {

constexpr double kLeakySlope = 0.2;
constexpr double kInitStd = 0.02;

std::string shape_string(const torch::Tensor &t) {
  std::ostringstream os;
  os << t.sizes();
  return os.str();
}

std::string conv_label(const char *kind, int out, int kernel, int stride, int padding) {
  std::ostringstream os;
  os << out << "x" << kernel << "x" << kernel << "-" << stride << "-" << padding << " " << kind;
  return os.str();
}

int conv_out(int n, int kernel, int stride, int padding) {
  return (n + 2 * padding - kernel) / stride + 1;
}

} // namespace

void ArchConfig::validate() const {
  if (input_channels != 3) throw ConfigError("input_channels must be 3");
  if (input_size < 32) throw ConfigError("input_size must be at least 32");
  if (input_size % 4 != 0)
    throw ConfigError("input_size " + std::to_string(input_size) + " is not divisible by 4");
  if (base_channels < 1 || base_channels % 2 != 0)
    throw ConfigError("base_channels must be a positive even number");
  if (n_residual_blocks < 1) throw ConfigError("n_residual_blocks must be at least 1");
  if (tasks.empty()) throw ConfigError("task list is empty");
  if (tasks.back() != TaskId::translation)
    throw ConfigError("task list must end with the translation task");
  std::set<TaskId> seen;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (!seen.insert(tasks[i]).second)
      throw ConfigError("task '" + std::string(task_name(tasks[i])) + "' listed twice");
    if (tasks[i] == TaskId::translation && i + 1 != tasks.size())
      throw ConfigError("translation must be the last task");
  }
}

bool ArchConfig::has_task(TaskId id) const {
  return std::find(tasks.begin(), tasks.end(), id) != tasks.end();
}

// -------------------------------------------------------------------------
// building blocks

torch::Tensor NetworkImpl::forward(torch::Tensor x) {
  for (auto &row : *rows_) x = row.forward(x);
  return x;
}

std::vector<torch::Tensor> NetworkImpl::trace(torch::Tensor x) {
  std::vector<torch::Tensor> out;
  out.reserve(rows_->size());
  for (auto &row : *rows_) {
    x = row.forward(x);
    out.push_back(x);
  }
  return out;
}

ResidualBlockImpl::ResidualBlockImpl(int channels) {
  const auto norm = nn::InstanceNorm2dOptions(channels).affine(true).track_running_stats(false);
  body_->push_back(nn::ReflectionPad2d(1));
  body_->push_back(nn::Conv2d(nn::Conv2dOptions(channels, channels, 3)));
  body_->push_back(nn::InstanceNorm2d(norm));
  body_->push_back(nn::ReLU());
  body_->push_back(nn::ReflectionPad2d(1));
  body_->push_back(nn::Conv2d(nn::Conv2dOptions(channels, channels, 3)));
  body_->push_back(nn::InstanceNorm2d(norm));
  register_module("body", body_);
}

torch::Tensor ResidualBlockImpl::forward(torch::Tensor x) { return x + body_->forward(x); }

ConvUnitImpl::ConvUnitImpl(const Options &opt) : opt_(opt) {
  if (opt.transposed) {
    tconv_ = register_module(
        "conv", nn::ConvTranspose2d(nn::ConvTranspose2dOptions(opt.in, opt.out, opt.kernel)
                                        .stride(opt.stride)
                                        .padding(opt.padding)
                                        .output_padding(opt.stride - 1)));
  } else {
    conv_ = register_module("conv", nn::Conv2d(nn::Conv2dOptions(opt.in, opt.out, opt.kernel)
                                                   .stride(opt.stride)
                                                   .padding(opt.padding)));
  }
  if (opt.instance_norm) {
    norm_ = register_module(
        "norm",
        nn::InstanceNorm2d(nn::InstanceNorm2dOptions(opt.out).affine(true).track_running_stats(false)));
  }
}

torch::Tensor ConvUnitImpl::forward(torch::Tensor x) {
  x = opt_.transposed ? tconv_->forward(x) : conv_->forward(x);
  if (norm_) x = norm_->forward(x);
  switch (opt_.activation) {
  case Activation::relu:
    return torch::relu(x);
  case Activation::leaky_relu:
    return torch::leaky_relu(x, kLeakySlope);
  case Activation::tanh:
    return torch::tanh(x);
  case Activation::none:
    break;
  }
  return x;
}

// -------------------------------------------------------------------------
// architectures

using Act = ConvUnitImpl::Activation;

Network make_encoder(const ArchConfig &cfg) {
  Network net;
  net->add("ReflectionPad p=3", nn::ReflectionPad2d(3));
  net->add(conv_label("NConv", cfg.width(64), 7, 1, 0),
           ConvUnit(ConvUnitImpl::Options{cfg.input_channels, cfg.width(64), 7, 1, 0, false, true,
                                          Act::relu}));
  net->add(conv_label("NConv", cfg.width(128), 3, 2, 1),
           ConvUnit(ConvUnitImpl::Options{cfg.width(64), cfg.width(128), 3, 2, 1, false, true,
                                          Act::relu}));
  net->add(conv_label("NConv", cfg.width(256), 3, 2, 1),
           ConvUnit(ConvUnitImpl::Options{cfg.width(128), cfg.width(256), 3, 2, 1, false, true,
                                          Act::relu}));
  for (int i = 0; i < cfg.n_residual_blocks; ++i)
    net->add("ResnetBlock", ResidualBlock(cfg.width(256)));
  net->finalize();
  return net;
}

Network make_classifier_head(const ArchConfig &cfg, int n_classes) {
  // Each down-sampling row halves the grid only while it is wider than 4, so
  // the flattened feature keeps a 4x4 grid at every supported input size (at
  // the reference size every row down-samples).
  constexpr int kMinGrid = 4;
  int extent = cfg.latent_size();
  auto stride_for = [&] { return extent > kMinGrid ? 2 : 1; };

  Network net;
  int in = cfg.latent_channels();
  for (int i = 0; i < 2; ++i) {
    const int s = stride_for();
    net->add(conv_label("NConv", cfg.width(256), 3, s, 1),
             ConvUnit(ConvUnitImpl::Options{in, cfg.width(256), 3, s, 1, false, true,
                                            Act::leaky_relu}));
    extent = conv_out(extent, 3, s, 1);
    in = cfg.width(256);
  }
  if (extent > kMinGrid) {
    net->add("2x2 MaxPool", nn::MaxPool2d(nn::MaxPool2dOptions(2)));
    extent /= 2;
  } else {
    net->add("2x2 MaxPool (identity)", nn::Identity());
  }
  const int s = stride_for();
  net->add(conv_label("NConv", cfg.width(128), 3, s, 1),
           ConvUnit(ConvUnitImpl::Options{in, cfg.width(128), 3, s, 1, false, true,
                                          Act::leaky_relu}));
  extent = conv_out(extent, 3, s, 1);
  const int flat = cfg.width(128) * extent * extent;
  net->add("Flatten", nn::Flatten());
  net->add(std::to_string(flat) + "x" + std::to_string(n_classes) + " Linear",
           nn::Linear(flat, n_classes));
  net->finalize();
  return net;
}

Network make_decoder_head(const ArchConfig &cfg, int out_channels, bool squash) {
  Network net;
  for (int i = 0; i < cfg.n_residual_blocks; ++i)
    net->add("ResnetBlock", ResidualBlock(cfg.latent_channels()));
  net->add(conv_label("TConv", cfg.width(128), 3, 2, 1),
           ConvUnit(ConvUnitImpl::Options{cfg.latent_channels(), cfg.width(128), 3, 2, 1, true,
                                          true, Act::relu}));
  net->add(conv_label("TConv", cfg.width(64), 3, 2, 1),
           ConvUnit(ConvUnitImpl::Options{cfg.width(128), cfg.width(64), 3, 2, 1, true, true,
                                          Act::relu}));
  net->add("ReflectionPad p=3", nn::ReflectionPad2d(3));
  net->add(conv_label("Conv", out_channels, 7, 1, 0),
           ConvUnit(ConvUnitImpl::Options{cfg.width(64), out_channels, 7, 1, 0, false, false,
                                          squash ? Act::tanh : Act::none}));
  net->finalize();
  return net;
}

Network make_patch_discriminator(const ArchConfig &cfg) {
  Network net;
  net->add(conv_label("Conv", cfg.width(64), 4, 2, 1),
           ConvUnit(ConvUnitImpl::Options{cfg.input_channels, cfg.width(64), 4, 2, 1, false, false,
                                          Act::leaky_relu}));
  net->add(conv_label("NConv", cfg.width(128), 4, 2, 1),
           ConvUnit(ConvUnitImpl::Options{cfg.width(64), cfg.width(128), 4, 2, 1, false, true,
                                          Act::leaky_relu}));
  net->add(conv_label("NConv", cfg.width(256), 4, 2, 1),
           ConvUnit(ConvUnitImpl::Options{cfg.width(128), cfg.width(256), 4, 2, 1, false, true,
                                          Act::leaky_relu}));
  // The last two rows use stride 1, which yields the 31x31 -> 30x30 grid of
  // the 70x70 PatchGAN at 256 px.
  net->add(conv_label("NConv", cfg.width(512), 4, 1, 1),
           ConvUnit(ConvUnitImpl::Options{cfg.width(256), cfg.width(512), 4, 1, 1, false, true,
                                          Act::leaky_relu}));
  net->add(conv_label("Conv", 1, 4, 1, 1),
           ConvUnit(ConvUnitImpl::Options{cfg.width(512), 1, 4, 1, 1, false, false, Act::none}));
  net->finalize();
  return net;
}

int class_count(TaskId id) {
  switch (id) {
  case TaskId::rotation:
    return 4;
  case TaskId::jigsaw:
    return 64;
  default:
    throw LookupError("task '" + std::string(task_name(id)) + "' is not a classification task");
  }
}

// -------------------------------------------------------------------------
// generator / discriminator

GeneratorImpl::GeneratorImpl(ArchConfig cfg, Domain domain) : cfg_(std::move(cfg)), domain_(domain) {
  cfg_.validate();
  encoder_ = register_module("encoder", make_encoder(cfg_));
  for (auto task : cfg_.tasks) {
    Network head{nullptr};
    switch (task) {
    case TaskId::rotation:
    case TaskId::jigsaw:
      head = make_classifier_head(cfg_, class_count(task));
      break;
    case TaskId::depth:
      head = make_decoder_head(cfg_, 1, false);
      break;
    case TaskId::colorization:
    case TaskId::translation:
      head = make_decoder_head(cfg_, 3, true);
      break;
    }
    heads_.emplace(task, register_module("head_" + std::string(task_name(task)), head));
  }
}

void GeneratorImpl::check_image_batch(const torch::Tensor &batch) const {
  if (batch.dim() != 4 || batch.size(1) != cfg_.input_channels ||
      batch.size(2) != cfg_.input_size || batch.size(3) != cfg_.input_size) {
    throw InputError("expected image batch Nx" + std::to_string(cfg_.input_channels) + "x" +
                     std::to_string(cfg_.input_size) + "x" + std::to_string(cfg_.input_size) +
                     ", got " + shape_string(batch));
  }
}

torch::Tensor GeneratorImpl::encode(const torch::Tensor &batch) {
  check_image_batch(batch);
  return encoder_->forward(batch);
}

Network &GeneratorImpl::head(TaskId task) {
  auto it = heads_.find(task);
  if (it == heads_.end())
    throw LookupError("generator " + std::string(domain_name(domain_)) + " has no '" +
                      std::string(task_name(task)) + "' head");
  return it->second;
}

torch::Tensor GeneratorImpl::head_forward(TaskId task, const torch::Tensor &latent) {
  auto &h = head(task);
  if (latent.dim() != 4 || latent.size(1) != cfg_.latent_channels() ||
      latent.size(2) != cfg_.latent_size() || latent.size(3) != cfg_.latent_size()) {
    throw InputError("latent shape " + shape_string(latent) + " does not match the encoder output");
  }
  return h->forward(latent);
}

DiscriminatorImpl::DiscriminatorImpl(const ArchConfig &cfg, TaskId purpose, Domain domain)
    : input_size_(cfg.input_size), purpose_(purpose), domain_(domain) {
  cfg.validate();
  if (!needs_discriminator(purpose))
    throw ConfigError("task '" + std::string(task_name(purpose)) + "' has no discriminator");
  net_ = register_module("net", make_patch_discriminator(cfg));
}

torch::Tensor DiscriminatorImpl::forward(const torch::Tensor &batch) {
  if (batch.dim() != 4 || batch.size(1) != 3 || batch.size(2) != input_size_ ||
      batch.size(3) != input_size_) {
    throw InputError("discriminator expects Nx3x" + std::to_string(input_size_) + "x" +
                     std::to_string(input_size_) + ", got " + shape_string(batch));
  }
  return net_->forward(batch);
}

void init_weights(nn::Module &module, std::uint64_t seed) {
  torch::NoGradGuard no_grad;
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  for (auto &m : module.modules(/*include_self=*/true)) {
    torch::Tensor weight, bias;
    if (auto *c = m->as<nn::Conv2d>()) {
      weight = c->weight;
      bias = c->bias;
    } else if (auto *t = m->as<nn::ConvTranspose2d>()) {
      weight = t->weight;
      bias = t->bias;
    } else if (auto *l = m->as<nn::Linear>()) {
      weight = l->weight;
      bias = l->bias;
    } else {
      continue;
    }
    weight.normal_(0.0, kInitStd, gen);
    if (bias.defined()) bias.zero_();
  }
}

Generator build_generator(const ArchConfig &cfg, Domain domain, std::uint64_t seed) {
  Generator g(cfg, domain);
  init_weights(*g, seed);
  return g;
}

Discriminator build_discriminator(const ArchConfig &cfg, TaskId purpose, Domain domain,
                                  std::uint64_t seed) {
  Discriminator d(cfg, purpose, domain);
  init_weights(*d, seed);
  return d;
}

// -------------------------------------------------------------------------
// parameter snapshots

std::int64_t ParamVector::numel() const {
  std::int64_t n = 0;
  for (const auto &[name, t] : entries) n += t.numel();
  return n;
}

void ParamVector::check_compatible(const ParamVector &other) const {
  if (entries.size() != other.entries.size())
    throw IncompatibleSnapshotError("snapshot has " + std::to_string(other.entries.size()) +
                                    " arrays, expected " + std::to_string(entries.size()));
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto &[name, t] = entries[i];
    const auto &[oname, ot] = other.entries[i];
    if (name != oname)
      throw IncompatibleSnapshotError("snapshot entry " + std::to_string(i) + " is '" + oname +
                                      "', expected '" + name + "'");
    if (t.sizes() != ot.sizes())
      throw IncompatibleSnapshotError("snapshot entry '" + name + "' has shape " +
                                      shape_string(ot) + ", expected " + shape_string(t));
  }
}

ParamVector snapshot_params(nn::Module &module) {
  ParamVector pv;
  for (const auto &item : module.named_parameters(/*recurse=*/true))
    pv.entries.emplace_back(item.key(), item.value().detach().clone());
  return pv;
}

void load_params(nn::Module &module, const ParamVector &pv) {
  auto params = module.named_parameters(/*recurse=*/true);
  ParamVector shape_only;
  for (const auto &item : params) shape_only.entries.emplace_back(item.key(), item.value());
  shape_only.check_compatible(pv);
  torch::NoGradGuard no_grad;
  for (std::size_t i = 0; i < pv.entries.size(); ++i)
    shape_only.entries[i].second.copy_(pv.entries[i].second);
}

std::uint64_t param_checksum(nn::Module &module) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto &p : module.parameters(/*recurse=*/true)) {
    auto c = p.detach().contiguous();
    const auto *bytes = static_cast<const unsigned char *>(c.data_ptr());
    const auto n = static_cast<std::size_t>(c.numel() * c.element_size());
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  }
  return h;
}

} // namespace liss
