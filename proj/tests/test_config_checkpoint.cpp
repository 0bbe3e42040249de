#include "support/oracles.hpp"

#include <gtest/gtest.h>

using namespace scrm;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::Io;
}

Checkpoint toy_checkpoint(std::uint64_t seed = 3) {
  const auto t = oracle::toy_problem();
  TrainConfig cfg;
  cfg.d0 = 4;
  cfg.d1 = 3;
  cfg.seed = seed;
  return {make_manifest(cfg, t.n_items, t.graphs), init_params(model_dims(cfg, t.n_items), seed)};
}

}  // namespace

TEST(Config, TextRoundTrip) {
  RunConfig c;
  c.train.lr = 0.0123456789;
  c.train.ablation.no_ex = true;
  c.train.ablation.mix_graphs = true;
  c.train.ablation.wgat_layers = 3;
  c.events_in = "data/x.csv";
  c.synth.session_len_range = {3, 9};
  c.synth.noise_rate = 0.0;
  RunConfig back;
  apply_config_text(back, config_text(c));
  EXPECT_EQ(back, c);
  EXPECT_EQ(config_text(back), config_text(c));
}

TEST(Config, CommentsOverridesAndErrors) {
  RunConfig c;
  apply_config_text(c, "# comment\n  top-k = 7  # trailing\n\nablate = no_se, sub_only\nsession-len-range=4:6\n");
  EXPECT_EQ(c.train.top_k, 7u);
  EXPECT_TRUE(c.train.ablation.no_se);
  EXPECT_TRUE(c.train.ablation.sub_only);
  EXPECT_EQ(c.synth.session_len_range, (LenRange{4, 6}));
  apply_config_text(c, "ablate = none");
  EXPECT_FALSE(c.train.ablation.no_se);

  try {
    apply_config_text(c, "lr = 0.1\nbogus\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::BadConfig);
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_EQ(kind_of([&] { set_field(c, "no-such-key", "1"); }), ErrorKind::BadConfig);
  EXPECT_EQ(kind_of([&] { set_field(c, "lr", "fast"); }), ErrorKind::BadConfig);
  EXPECT_EQ(kind_of([&] { set_field(c, "epochs", "-3"); }), ErrorKind::BadConfig);
  EXPECT_EQ(kind_of([&] { set_field(c, "ablate", "no_everything"); }), ErrorKind::BadConfig);
  EXPECT_EQ(kind_of([&] { set_field(c, "session-len-range", "5"); }), ErrorKind::BadConfig);
  EXPECT_EQ(kind_of([] { load_config("/nonexistent/scrm.cfg"); }), ErrorKind::Io);
}

TEST(Config, Validation) {
  EXPECT_NO_THROW(validate(RunConfig{}));
  RunConfig c;
  c.train.ablation.sub_only = c.train.ablation.comp_only = true;
  EXPECT_EQ(kind_of([&] { validate(c); }), ErrorKind::BadConfig);
  c = {};
  c.train.lr = 0.0;
  EXPECT_EQ(kind_of([&] { validate(c); }), ErrorKind::BadConfig);
  c = {};
  c.min_session_len = 1;
  EXPECT_EQ(kind_of([&] { validate(c); }), ErrorKind::BadConfig);
  c = {};
  c.synth.noise_rate = 1.5;
  EXPECT_EQ(kind_of([&] { validate(c); }), ErrorKind::BadConfig);
}

TEST(Config, DefaultsMatchPublishedHyperparameters) {
  const TrainConfig t;
  EXPECT_EQ(t.lr, 0.001);
  EXPECT_EQ(t.gamma1, 0.2);
  EXPECT_EQ(t.gamma2, 0.3);
  EXPECT_EQ(t.tau, 0.01);
  EXPECT_EQ(t.top_k, 4u);
}

TEST(Checkpoint, RoundTripIsExact) {
  const auto ck = toy_checkpoint();
  const std::string bytes = checkpoint_bytes(ck);
  std::istringstream in(bytes);
  const auto back = read_checkpoint(in);
  EXPECT_EQ(checkpoint_bytes(back), bytes);
  EXPECT_EQ(back.manifest.dims, ck.manifest.dims);
  EXPECT_EQ(back.manifest.sub_graph_hash, ck.manifest.sub_graph_hash);
  EXPECT_EQ(back.params.X0, ck.params.X0);
  EXPECT_EQ(back.params.W9, ck.params.W9);
  EXPECT_EQ(bytes.substr(0, 8), "SCRMCKPT");
}

TEST(Checkpoint, CorruptAndMismatchedInputs) {
  const std::string bytes = checkpoint_bytes(toy_checkpoint());
  std::istringstream bad_magic("NOTACKPT" + bytes.substr(8));
  EXPECT_EQ(kind_of([&] { read_checkpoint(bad_magic); }), ErrorKind::ConfigMismatch);
  std::istringstream truncated(bytes.substr(0, bytes.size() - 9));
  EXPECT_NE(kind_of([&] { read_checkpoint(truncated); }), ErrorKind::UnknownBehavior);

  auto ck = toy_checkpoint();
  ck.params.W9 = Matrix::Zero(2, 2);
  std::istringstream wrong_shape(checkpoint_bytes(ck));
  EXPECT_EQ(kind_of([&] { read_checkpoint(wrong_shape); }), ErrorKind::ConfigMismatch);
  EXPECT_EQ(kind_of([] { load_checkpoint("/nonexistent/model.ckpt"); }), ErrorKind::Io);
}

TEST(Checkpoint, ManifestJson) {
  auto m = toy_checkpoint().manifest;
  m.ablation.no_denoise = true;
  m.ablation.wgat_layers = 2;
  m.dims.layers = 2;
  const auto j = manifest_json(m);
  EXPECT_EQ(j.at("format"), "scrm-checkpoint");
  const auto back = manifest_from_json(j);
  EXPECT_EQ(back.ablation, m.ablation);
  EXPECT_EQ(back.dims, m.dims);
  EXPECT_EQ(back.top_k, m.top_k);
  EXPECT_EQ(back.seed, m.seed);
}
