#include <gtest/gtest.h>

#include "liss/errors.hpp"
#include "liss/nets.hpp"

using namespace liss;

namespace {

ArchConfig tiny() {
  ArchConfig cfg;
  cfg.input_size = 32;
  cfg.base_channels = 4;
  cfg.n_residual_blocks = 1;
  return cfg;
}

ArchConfig desk() {
  ArchConfig cfg;
  cfg.input_size = 64;
  cfg.base_channels = 16;
  return cfg;
}

std::vector<int64_t> shape(const torch::Tensor &t) { return t.sizes().vec(); }

} // namespace

TEST(ArchConfig, Validation) {
  EXPECT_NO_THROW(ArchConfig::reference().validate());
  auto c = tiny();
  c.input_size = 30;
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny();
  c.base_channels = 3;
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny();
  c.tasks = {TaskId::translation, TaskId::rotation};
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny();
  c.tasks = {TaskId::rotation, TaskId::rotation, TaskId::translation};
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny();
  c.tasks = {TaskId::rotation};
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(ArchConfig, WidthsScaleLinearly) {
  auto c = desk();
  EXPECT_EQ(c.width(64), 16);
  EXPECT_EQ(c.latent_channels(), 64);
  EXPECT_EQ(c.latent_size(), 16);
  EXPECT_EQ(ArchConfig::reference().latent_channels(), 256);
}

TEST(Nets, DeskShapes) {
  auto cfg = desk();
  auto g = build_generator(cfg, Domain::A, 0);
  auto x = torch::rand({2, 3, 64, 64}) * 2 - 1;
  auto z = g->encode(x);
  EXPECT_EQ(shape(z), (std::vector<int64_t>{2, 64, 16, 16}));
  EXPECT_EQ(shape(g->head_forward(TaskId::rotation, z)), (std::vector<int64_t>{2, 4}));
  EXPECT_EQ(shape(g->head_forward(TaskId::jigsaw, z)), (std::vector<int64_t>{2, 64}));
  EXPECT_EQ(shape(g->head_forward(TaskId::depth, z)), (std::vector<int64_t>{2, 1, 64, 64}));
  EXPECT_EQ(shape(g->head_forward(TaskId::colorization, z)), (std::vector<int64_t>{2, 3, 64, 64}));
  auto y = g->head_forward(TaskId::translation, z);
  EXPECT_EQ(shape(y), (std::vector<int64_t>{2, 3, 64, 64}));
  EXPECT_LE(y.abs().max().item<double>(), 1.0);
  auto d = build_discriminator(cfg, TaskId::translation, Domain::A, 0);
  EXPECT_EQ(shape(d->forward(x)), (std::vector<int64_t>{2, 1, 6, 6}));
}

TEST(Nets, ClassifierFlattensFourByFourGrid) {
  auto cfg = desk();
  auto head = make_classifier_head(cfg, 4);
  auto rows = head->trace(torch::zeros({1, cfg.latent_channels(), 16, 16}));
  const auto &flat = rows[rows.size() - 2];
  EXPECT_EQ(flat.size(1), cfg.width(128) * 4 * 4);
}

TEST(Nets, ClassifierAtReferenceSizeFlattensTo2048) {
  auto cfg = ArchConfig::reference();
  auto head = make_classifier_head(cfg, 64);
  auto rows = head->trace(torch::zeros({1, 256, 64, 64}));
  EXPECT_EQ(rows[rows.size() - 2].size(1), 2048);
  EXPECT_EQ(shape(rows.back()), (std::vector<int64_t>{1, 64}));
}

TEST(Nets, DepthHeadHasNoSquash) {
  auto cfg = tiny();
  auto g = build_generator(cfg, Domain::B, 5);
  auto z = g->encode(torch::rand({1, 3, 32, 32}));
  // scale the final layer so unsquashed outputs exceed 1
  {
    torch::NoGradGuard ng;
    for (auto &p : g->head(TaskId::depth)->parameters()) p.mul_(50);
  }
  EXPECT_GT(g->head_forward(TaskId::depth, z).abs().max().item<double>(), 1.0);
}

TEST(Nets, ShapeErrors) {
  auto g = build_generator(tiny(), Domain::A, 0);
  EXPECT_THROW(g->encode(torch::zeros({1, 3, 64, 64})), InputError);
  EXPECT_THROW(g->encode(torch::zeros({3, 32, 32})), InputError);
  EXPECT_THROW(g->head_forward(TaskId::rotation, torch::zeros({1, 5, 8, 8})), InputError);
  auto d = build_discriminator(tiny(), TaskId::translation, Domain::A, 0);
  EXPECT_THROW(d->forward(torch::zeros({1, 1, 32, 32})), InputError);
  EXPECT_THROW(build_discriminator(tiny(), TaskId::depth, Domain::A, 0), ConfigError);
}

TEST(Nets, MissingHeadIsLookupError) {
  auto cfg = tiny();
  cfg.tasks = {TaskId::rotation, TaskId::translation};
  auto g = build_generator(cfg, Domain::A, 0);
  EXPECT_FALSE(g->has_head(TaskId::depth));
  auto z = g->encode(torch::zeros({1, 3, 32, 32}));
  EXPECT_THROW(g->head_forward(TaskId::depth, z), LookupError);
}

TEST(Nets, InitIsSeededGaussian) {
  auto a = build_generator(desk(), Domain::A, 42);
  auto b = build_generator(desk(), Domain::A, 42);
  auto c = build_generator(desk(), Domain::A, 43);
  EXPECT_EQ(param_checksum(*a), param_checksum(*b));
  EXPECT_NE(param_checksum(*a), param_checksum(*c));

  std::vector<torch::Tensor> weights;
  for (const auto &item : a->named_parameters()) {
    const auto &name = item.key();
    if (name.find("conv.weight") != std::string::npos) weights.push_back(item.value().flatten());
    if (name.find("conv.bias") != std::string::npos)
      EXPECT_EQ(item.value().abs().max().item<double>(), 0.0) << name;
  }
  auto all = torch::cat(weights);
  EXPECT_NEAR(all.mean().item<double>(), 0.0, 1e-3);
  EXPECT_NEAR(all.std().item<double>(), 0.02, 1e-3);
}

TEST(Nets, SnapshotLoadRoundTrip) {
  auto a = build_generator(tiny(), Domain::A, 1);
  auto b = build_generator(tiny(), Domain::A, 2);
  auto snap = snapshot_params(*a);
  load_params(*b, snap);
  EXPECT_EQ(param_checksum(*a), param_checksum(*b));
  // the snapshot is a deep copy
  {
    torch::NoGradGuard ng;
    a->parameters()[0].add_(1.0);
  }
  EXPECT_NE(param_checksum(*a), param_checksum(*b));
  EXPECT_GT(snap.numel(), 0);
}

TEST(Nets, IncompatibleSnapshotRejected) {
  auto a = build_generator(tiny(), Domain::A, 1);
  auto cfg = tiny();
  cfg.base_channels = 8;
  auto b = build_generator(cfg, Domain::A, 1);
  EXPECT_THROW(load_params(*b, snapshot_params(*a)), IncompatibleSnapshotError);
  auto enc = snapshot_params(*a->encoder());
  EXPECT_THROW(load_params(*a, enc), IncompatibleSnapshotError);
}

TEST(Nets, ResidualBlockPreservesShape) {
  ResidualBlock rb(8);
  auto x = torch::rand({2, 8, 5, 5});
  EXPECT_EQ(rb->forward(x).sizes(), x.sizes());
}

TEST(Nets, ClassCounts) {
  EXPECT_EQ(class_count(TaskId::rotation), 4);
  EXPECT_EQ(class_count(TaskId::jigsaw), 64);
  EXPECT_THROW(class_count(TaskId::depth), LookupError);
}
