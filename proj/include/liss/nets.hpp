#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "liss/task_id.hpp"

namespace liss {

/// Architecture parameters. The reference point (3x256x256 input, 64 base
/// channels, 3 residual blocks) reproduces the published layer tables; every
/// width scales linearly with base_channels / 64.
struct ArchConfig {
  int input_channels = 3;
  int input_size = 256;
  int base_channels = 64;
  int n_residual_blocks = 3;
  std::vector<TaskId> tasks{TaskId::rotation, TaskId::jigsaw, TaskId::depth,
                            TaskId::colorization, TaskId::translation};

  static ArchConfig reference() { return {}; }

  /// Throws ConfigError when the config violates an invariant.
  void validate() const;

  /// Channel count of a layer that has `reference_width` channels at 64 base
  /// channels.
  int width(int reference_width) const { return reference_width * base_channels / 64; }
  int latent_channels() const { return width(256); }
  int latent_size() const { return input_size / 4; }
  bool has_task(TaskId id) const;

  bool operator==(const ArchConfig &) const = default;
};

/// An ordered stack of layers, one element per architecture-table row. Keeps
/// a label per row so shapes can be traced row by row.
class NetworkImpl : public torch::nn::Module {
public:
  NetworkImpl() = default;

  template <typename M> void add(std::string label, M module) {
    auto name = std::to_string(labels_.size());
    rows_->push_back(std::move(name), std::move(module));
    labels_.push_back(std::move(label));
  }

  /// Must be called once after all rows are added.
  void finalize() { register_module("rows", rows_); }

  torch::Tensor forward(torch::Tensor x);
  /// Output of every row, in order.
  std::vector<torch::Tensor> trace(torch::Tensor x);
  const std::vector<std::string> &labels() const { return labels_; }

private:
  torch::nn::Sequential rows_;
  std::vector<std::string> labels_;
};
TORCH_MODULE(Network);

/// Two 3x3 reflection-padded convolutions with instance norm and an identity
/// skip. The rectifier follows only the first convolution.
class ResidualBlockImpl : public torch::nn::Module {
public:
  explicit ResidualBlockImpl(int channels);
  torch::Tensor forward(torch::Tensor x);

private:
  torch::nn::Sequential body_;
};
TORCH_MODULE(ResidualBlock);

/// A convolution (optionally transposed) followed by an optional instance
/// norm and an activation.
class ConvUnitImpl : public torch::nn::Module {
public:
  enum class Activation { none, relu, leaky_relu, tanh };

  struct Options {
    int in = 0;
    int out = 0;
    int kernel = 3;
    int stride = 1;
    int padding = 0;
    bool transposed = false;
    bool instance_norm = false;
    Activation activation = Activation::none;
  };

  explicit ConvUnitImpl(const Options &opt);
  torch::Tensor forward(torch::Tensor x);

private:
  Options opt_;
  torch::nn::Conv2d conv_{nullptr};
  torch::nn::ConvTranspose2d tconv_{nullptr};
  torch::nn::InstanceNorm2d norm_{nullptr};
};
TORCH_MODULE(ConvUnit);

Network make_encoder(const ArchConfig &cfg);
/// Rotation (4 classes) or jigsaw (64 classes) classifier.
Network make_classifier_head(const ArchConfig &cfg, int n_classes);
/// Decoder shared by translation, colorization (3 channels, tanh) and depth
/// (1 channel, no output activation).
Network make_decoder_head(const ArchConfig &cfg, int out_channels, bool squash);
Network make_patch_discriminator(const ArchConfig &cfg);

/// Number of classes a classification head predicts.
int class_count(TaskId id);

/// Shared encoder plus one head per configured task, for one domain.
class GeneratorImpl : public torch::nn::Module {
public:
  GeneratorImpl(ArchConfig cfg, Domain domain);

  /// Latent of an image batch in [-1, 1]. Throws InputError on shape mismatch.
  torch::Tensor encode(const torch::Tensor &batch);
  /// Throws LookupError for a task without a head, InputError on bad latent.
  torch::Tensor head_forward(TaskId task, const torch::Tensor &latent);

  Network &encoder() { return encoder_; }
  Network &head(TaskId task);
  bool has_head(TaskId task) const { return heads_.count(task) != 0; }
  const ArchConfig &config() const { return cfg_; }
  Domain domain() const { return domain_; }

  void check_image_batch(const torch::Tensor &batch) const;

private:
  ArchConfig cfg_;
  Domain domain_;
  Network encoder_{nullptr};
  std::map<TaskId, Network> heads_;
};
TORCH_MODULE(Generator);

/// PatchGAN discriminator for either the colorization or the translation
/// task of one domain.
class DiscriminatorImpl : public torch::nn::Module {
public:
  DiscriminatorImpl(const ArchConfig &cfg, TaskId purpose, Domain domain);

  /// Single-channel patch logit grid. Throws InputError on shape mismatch.
  torch::Tensor forward(const torch::Tensor &batch);
  Network &network() { return net_; }
  TaskId purpose() const { return purpose_; }
  Domain domain() const { return domain_; }

private:
  int input_size_;
  TaskId purpose_;
  Domain domain_;
  Network net_{nullptr};
};
TORCH_MODULE(Discriminator);

/// Builds a generator with N(0, 0.02) convolution and linear weights and zero
/// biases drawn from a generator seeded with `seed`.
Generator build_generator(const ArchConfig &cfg, Domain domain, std::uint64_t seed);
Discriminator build_discriminator(const ArchConfig &cfg, TaskId purpose, Domain domain,
                                  std::uint64_t seed);
void init_weights(torch::nn::Module &module, std::uint64_t seed);

/// Deep copy of a module's trainable parameters, in registration order.
struct ParamVector {
  std::vector<std::pair<std::string, torch::Tensor>> entries;

  std::int64_t numel() const;
  /// Throws IncompatibleSnapshotError unless names and shapes match exactly.
  void check_compatible(const ParamVector &other) const;
};

ParamVector snapshot_params(torch::nn::Module &module);
void load_params(torch::nn::Module &module, const ParamVector &pv);

/// Order-sensitive checksum of parameter bytes (FNV-1a), used to assert that
/// frozen parameters never change.
std::uint64_t param_checksum(torch::nn::Module &module);

} // namespace liss
