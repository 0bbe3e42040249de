#include "support/oracles.hpp"

#include <gtest/gtest.h>

using namespace scrm;

namespace {

constexpr double kTol = 1e-4;

struct GradFixture {
  oracle::ToyProblem toy = oracle::toy_problem();
  ModelParams params = init_params({6, 4, 4, 2, 1}, 17);
  BatchSamples samples;
  ModelOptions mopt;

  explicit GradFixture(std::size_t layers = 1) {
    params = init_params({6, 4, 4, 2, layers}, 17);
    // Larger values keep the loss away from flat regions of the activations.
    params.visit([](const std::string&, Matrix& m) { m *= 5.0; });
    mopt.tau = 1.0;
    mopt.top_k = 2;
    std::mt19937_64 rng(3);
    samples = sample_batch(toy.batch, toy.graphs, 2, rng);
    // The toy graphs are dense, so add samples exercising every branch of the semantic loss.
    samples.relations.push_back({0, 1, 2, {3, 4}});
    samples.relations.push_back({5, kNoItem, 1, {2}});
    samples.relations.push_back({2, 3, kNoItem, {4}});
  }

  oracle::GradCheck check(const LossWeights& w, Variant v = Variant::Full) {
    mopt.variant = v;
    return oracle::gradient_check(params, graphs_for_variant(toy.graphs, v), toy.batch, samples, mopt, w);
  }
};

}  // namespace

TEST(Gradients, SamplesCoverEveryRole) {
  GradFixture f;
  EXPECT_FALSE(f.samples.pairs.empty());
  bool sub = false, comp = false, irr = false;
  for (const auto& s : f.samples.relations) {
    sub |= s.has_sub();
    comp |= s.has_comp();
    irr |= s.has_irr();
  }
  EXPECT_TRUE(sub && comp && irr);
}

TEST(Gradients, RecommendationTerm) {
  GradFixture f;
  const auto r = f.check({1.0, 0.0, 0.0});
  EXPECT_LE(r.max_rel_error, kTol) << r.worst_tensor;
}

TEST(Gradients, ExclusivityTerm) {
  GradFixture f;
  const auto r = f.check({0.0, 1.0, 0.0});
  EXPECT_LE(r.max_rel_error, kTol) << r.worst_tensor;
}

TEST(Gradients, SemanticTerm) {
  GradFixture f;
  const auto r = f.check({0.0, 0.0, 1.0});
  EXPECT_LE(r.max_rel_error, kTol) << r.worst_tensor;
}

TEST(Gradients, CombinedObjective) {
  GradFixture f;
  const auto r = f.check({1.0, 0.2, 0.3});
  EXPECT_LE(r.max_rel_error, kTol) << r.worst_tensor;
}

TEST(Gradients, DefaultTemperature) {
  // At tau = 0.01 many gradients are tiny and h = 1e-5 is dominated by roundoff;
  // a larger step balances roundoff against truncation.
  GradFixture f;
  f.params.visit([](const std::string&, Matrix& m) { m /= 5.0; });
  f.mopt.tau = 0.01;
  f.mopt.variant = Variant::Full;
  const auto r = oracle::gradient_check(f.params, f.toy.graphs, f.toy.batch, f.samples, f.mopt, {1.0, 0.2, 0.3}, 1e-4);
  EXPECT_LE(r.max_rel_error, kTol) << r.worst_tensor;
}

TEST(Gradients, Variants) {
  for (Variant v : {Variant::SubOnly, Variant::CompOnly, Variant::Mixed}) {
    GradFixture f;
    const auto r = f.check({1.0, 0.0, 0.0}, v);
    EXPECT_LE(r.max_rel_error, kTol) << static_cast<int>(v) << " " << r.worst_tensor;
  }
}

TEST(Gradients, NoDenoiseAndNoIntegration) {
  GradFixture f;
  f.mopt.use_denoise = false;
  auto r = f.check({1.0, 0.2, 0.3});
  EXPECT_LE(r.max_rel_error, kTol) << r.worst_tensor;
  f.mopt.use_denoise = true;
  f.mopt.use_integration = false;
  r = f.check({1.0, 0.2, 0.3});
  EXPECT_LE(r.max_rel_error, kTol) << r.worst_tensor;
}

TEST(Gradients, TwoWgatLayers) {
  GradFixture f(2);
  const auto r = f.check({1.0, 0.2, 0.3});
  EXPECT_LE(r.max_rel_error, kTol) << r.worst_tensor;
}

TEST(Gradients, RecommendationLogitGradient) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> logits(3 + t % 5);
    for (auto& v : logits) v = g(rng);
    const std::size_t target = rng() % logits.size();
    const auto probs = softmax(logits);
    const Vector a = loss_rec_grad_logits(probs, target);
    for (std::size_t j = 0; j < logits.size(); ++j) {
      auto lp = logits, lm = logits;
      lp[j] += 1e-6;
      lm[j] -= 1e-6;
      const double num = (loss_rec(softmax(lp), target) - loss_rec(softmax(lm), target)) / 2e-6;
      EXPECT_NEAR(a[static_cast<Eigen::Index>(j)], num, 1e-7);
    }
  }
}

TEST(Gradients, SessionVectorIdentityOnThreeItems) {
  Matrix X(3, 2);
  X << 0.3, -1.2, 0.8, 0.5, -0.4, 0.9;
  Vector S(2);
  S << 0.7, -0.2;
  const std::size_t target = 1;
  const Vector probs = predict_scores(S, X);
  const std::span<const double> ps(probs.data(), 3);

  // Categorical part of the loss: d(-log p_target)/dS = sum_j (p_j - y_j) x_j.
  std::vector<double> dp(3, 0.0);
  dp[target] = -1.0 / probs[target];
  Vector dlog(3);
  softmax_backward(ps, dp, std::span<double>(dlog.data(), 3));
  Vector identity = Vector::Zero(2);
  for (Eigen::Index j = 0; j < 3; ++j)
    identity += (probs[j] - (j == static_cast<Eigen::Index>(target) ? 1.0 : 0.0)) * X.row(j).transpose();
  EXPECT_LT((X.transpose() * dlog - identity).cwiseAbs().maxCoeff(), 1e-12);

  // Full loss including the (1 - y) log(1 - p) terms, against finite differences.
  const Vector dS = X.transpose() * loss_rec_grad_logits(ps, target);
  for (Eigen::Index k = 0; k < 2; ++k) {
    Vector sp = S, sm = S;
    sp[k] += 1e-6;
    sm[k] -= 1e-6;
    const Vector pp = predict_scores(sp, X), pm = predict_scores(sm, X);
    const double num = (loss_rec(std::span<const double>(pp.data(), 3), target) -
                        loss_rec(std::span<const double>(pm.data(), 3), target)) / 2e-6;
    EXPECT_NEAR(dS[k], num, 1e-7);
  }
}

TEST(Gradients, ZeroForSaturatedSemanticAndZeroWeights) {
  GradFixture f;
  ModelParams grads = f.params.zeros_like();
  batch_objective(f.params, f.toy.graphs, f.toy.batch, f.samples, f.mopt, {0.0, 0.0, 0.0},
                  DenoiseMode::Deterministic, nullptr, &grads);
  grads.visit([](const std::string& name, const Matrix& m) { EXPECT_EQ(m.cwiseAbs().maxCoeff(), 0.0) << name; });
}
