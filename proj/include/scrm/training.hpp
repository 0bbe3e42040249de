#pragma once

// Batch objective (L_r + gamma1 L_ex + gamma2 L_se), its exact gradient, and
// the epoch loop with Adam, validation and early stopping.

#include "scrm/backward.hpp"
#include "scrm/evaluation.hpp"
#include "scrm/losses.hpp"
#include "scrm/optimizer.hpp"
#include "scrm/parallel.hpp"
#include "scrm/session_ingest.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <functional>
#include <random>
#include <span>

namespace scrm {

struct AblationFlags {
  bool no_ex = false;           // drop L_ex
  bool no_se = false;           // drop L_se
  bool no_denoise = false;      // rule weights as zeta, no pruning
  bool sub_only = false;        // substitutable graph only
  bool comp_only = false;       // complementary graph only
  bool mix_graphs = false;      // one WGAT over the union graph
  bool no_integration = false;  // theta1 = theta2 = 0
  std::size_t wgat_layers = 1;

  bool operator==(const AblationFlags&) const = default;
};

struct TrainConfig {
  double lr = 0.001;
  double gamma1 = 0.2;
  double gamma2 = 0.3;
  double tau = 0.01;
  double tau_anneal = 1.0;  // per-epoch multiplier, 1 = fixed temperature
  double tau_min = 0.01;
  std::size_t top_k = 4;
  double l2 = 1e-7;
  std::size_t batch_size = 100;
  std::size_t epochs = 30;
  std::size_t patience = 5;
  std::size_t n_neg = 1;
  std::uint64_t seed = 7;
  std::size_t d0 = 128;
  std::size_t d1 = 128;
  std::size_t heads = 2;
  AblationFlags ablation;

  bool operator==(const TrainConfig&) const = default;
};

inline Variant variant_of(const AblationFlags& a) {
  if (a.mix_graphs) return Variant::Mixed;
  if (a.sub_only) return Variant::SubOnly;
  if (a.comp_only) return Variant::CompOnly;
  return Variant::Full;
}

inline ModelOptions model_options(const TrainConfig& c) {
  ModelOptions o;
  o.variant = variant_of(c.ablation);
  o.use_denoise = !c.ablation.no_denoise;
  o.use_integration = !c.ablation.no_integration;
  o.top_k = c.top_k;
  o.tau = c.tau;
  return o;
}

inline ModelDims model_dims(const TrainConfig& c, std::size_t num_items) {
  return ModelDims{num_items, c.d0, c.d1, c.heads, c.ablation.wgat_layers};
}

struct LossWeights {
  double rec = 1.0;
  double ex = 0.0;
  double se = 0.0;
};

/// Single-graph and mixed variants train on L_r alone.
inline LossWeights loss_weights(const TrainConfig& c) {
  LossWeights w;
  if (variant_of(c.ablation) != Variant::Full) return w;
  w.ex = c.ablation.no_ex ? 0.0 : c.gamma1;
  w.se = c.ablation.no_se ? 0.0 : c.gamma2;
  return w;
}

struct BatchSamples {
  std::vector<ItemPair> pairs;
  std::vector<RelationSample> relations;
};

/// `rule_graphs` are the constructed graphs (never the union graph).
inline BatchSamples sample_batch(std::span<const LabeledPrefix> batch,
                                 const RelationGraphs& rule_graphs, std::size_t n_neg,
                                 std::mt19937_64& rng) {
  const auto items = batch_items(batch);
  BatchSamples s;
  s.pairs = sample_exclusive_pairs(items, rng);
  s.relations = sample_relations(items, rule_graphs, n_neg, rng);
  return s;
}

struct BatchResult {
  LossTerms loss;
  bool no_semantic_samples = false;
};

/// Loss of one batch and, when `grads` is given, its gradient accumulated
/// into `grads`. L_r is averaged over the batch's prefixes.
inline BatchResult batch_objective(const ModelParams& p, const RelationGraphs& model_graphs,
                                   std::span<const LabeledPrefix> batch,
                                   const BatchSamples& samples, const ModelOptions& mopt,
                                   const LossWeights& w, DenoiseMode mode,
                                   std::mt19937_64* rng, ModelParams* grads) {
  BatchResult out;
  out.loss.gamma1 = w.ex;
  out.loss.gamma2 = w.se;
  if (batch.empty()) return out;
  const ItemForward items = compute_items(p, model_graphs, mopt, mode, rng);
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  const auto chunks = chunk_ranges(batch.size(), 8);
  std::vector<double> rec(chunks.size(), 0.0);
  std::vector<SessionGrads> sgrads;
  if (grads) sgrads.assign(chunks.size(), SessionGrads(p));
  parallel_for(chunks.size(), [&](std::size_t c) {
    for (std::size_t i = chunks[c].first; i < chunks[c].second; ++i) {
      const auto& pre = batch[i];
      const PrefixForward f = forward_prefix(p, items, pre.items);
      const std::span<const double> probs(f.probs.data(), static_cast<std::size_t>(f.probs.size()));
      rec[c] += loss_rec(probs, pre.target);
      if (grads) {
        const Vector dlogits = loss_rec_grad_logits(probs, pre.target, w.rec * inv_b);
        backward_prefix(p, items.X, f, dlogits, sgrads[c]);
      }
    }
  });
  for (double r : rec) out.loss.rec += r;
  out.loss.rec *= inv_b;

  const bool full = mopt.variant == Variant::Full;
  Matrix dX, dXs, dXc;
  if (grads) {
    dX = Matrix::Zero(items.X.rows(), items.X.cols());
    for (const auto& sg : sgrads) sg.add_to(*grads, dX);
    if (full) {
      dXs = Matrix::Zero(items.Xs.rows(), items.Xs.cols());
      dXc = Matrix::Zero(items.Xc.rows(), items.Xc.cols());
    }
  }
  if (full && w.ex != 0.0) {
    out.loss.ex = loss_exclusive(samples.pairs, items.Xs, items.Xc);
    if (grads) loss_exclusive_grad(samples.pairs, items.Xs, items.Xc, w.ex, dXs, dXc);
  }
  if (full && w.se != 0.0) {
    const SemanticLoss se = loss_semantic(samples.relations, items.X);
    out.loss.se = se.value;
    out.no_semantic_samples = se.no_samples();
    if (grads) loss_semantic_grad(samples.relations, items.X, w.se, dX);
  }
  out.loss.finalize();

  if (grads) {
    backward_items(p, items, dX, full ? &dXs : nullptr, full ? &dXc : nullptr, *grads);
    if (!gradients_finite(*grads)) {
      throw Error(ErrorKind::NonFiniteGradient, "gradient contains NaN or Inf");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation of a trained model

/// Scores by the logits S^T x_j (same order as the softmax probabilities).
inline Scorer model_scorer(const ModelParams& p, const ItemForward& items) {
  return [&p, &items](const LabeledPrefix& pre, std::vector<double>& out) {
    const SessionRepr s = session_repr(pre.items, items.X, p);
    const Vector logits = items.X * s.S;
    out.assign(logits.data(), logits.data() + logits.size());
  };
}

/// Deterministic-mode metrics over `prefixes`.
inline MetricTable evaluate_model(const ModelParams& p, const RelationGraphs& rule_graphs,
                                  std::span<const LabeledPrefix> prefixes,
                                  const ModelOptions& mopt,
                                  const std::vector<std::size_t>& ks = kDefaultKs) {
  const RelationGraphs g = graphs_for_variant(rule_graphs, mopt.variant);
  const ItemForward items = compute_items(p, g, mopt, DenoiseMode::Deterministic);
  return evaluate(model_scorer(p, items), prefixes, ks);
}

/// Mean batch loss in Deterministic mode with a fixed sampling seed, for
/// before/after comparisons.
inline LossTerms objective_value(const ModelParams& p, const RelationGraphs& rule_graphs,
                                 std::span<const LabeledPrefix> prefixes, const TrainConfig& cfg,
                                 std::uint64_t sample_seed = 1) {
  const ModelOptions mopt = model_options(cfg);
  const LossWeights w = loss_weights(cfg);
  const RelationGraphs g = graphs_for_variant(rule_graphs, mopt.variant);
  std::mt19937_64 rng(sample_seed);
  LossTerms sum;
  std::size_t batches = 0;
  for (std::size_t lo = 0; lo < prefixes.size(); lo += cfg.batch_size) {
    const auto batch = prefixes.subspan(lo, std::min(cfg.batch_size, prefixes.size() - lo));
    const BatchSamples s = sample_batch(batch, rule_graphs, cfg.n_neg, rng);
    const auto r = batch_objective(p, g, batch, s, mopt, w, DenoiseMode::Deterministic, nullptr, nullptr);
    sum.rec += r.loss.rec;
    sum.ex += r.loss.ex;
    sum.se += r.loss.se;
    ++batches;
  }
  if (batches) {
    sum.rec /= static_cast<double>(batches);
    sum.ex /= static_cast<double>(batches);
    sum.se /= static_cast<double>(batches);
  }
  sum.gamma1 = w.ex;
  sum.gamma2 = w.se;
  sum.finalize();
  return sum;
}

// ---------------------------------------------------------------------------
// Training loop

struct EpochLog {
  std::size_t epoch = 0;
  LossTerms loss;  // means over the epoch's batches
  MetricCell valid10;
  bool has_valid = false;
  double wall_ms = 0.0;
};

/// One JSON object per epoch: {epoch, L_r, L_ex, L_se, total, valid_HR@10,
/// valid_MRR@10, valid_NDCG@10, wall_ms}.
inline nlohmann::json epoch_log_json(const EpochLog& e, bool with_time = true) {
  nlohmann::json j;
  j["epoch"] = e.epoch;
  j["L_r"] = e.loss.rec;
  j["L_ex"] = e.loss.ex;
  j["L_se"] = e.loss.se;
  j["total"] = e.loss.total;
  j["valid_HR@10"] = e.valid10.hr;
  j["valid_MRR@10"] = e.valid10.mrr;
  j["valid_NDCG@10"] = e.valid10.ndcg;
  if (with_time) j["wall_ms"] = e.wall_ms;
  return j;
}

struct TrainResult {
  ModelParams best;   // parameters of the best validation epoch
  ModelParams final;  // parameters after the last epoch run
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  double best_valid_mrr = -1.0;
  bool early_stopped = false;
};

/// Per epoch: shuffle the training prefixes, and per batch denoise
/// stochastically, compute the loss, backpropagate and take an Adam step.
/// After each epoch the validation split is scored in Deterministic mode;
/// the best MRR@10 epoch is kept and training stops after `patience`
/// epochs without improvement. Without a validation split the last epoch wins.
inline TrainResult train(ModelParams params, const RelationGraphs& rule_graphs,
                         const DatasetSplit& split, const TrainConfig& cfg,
                         const std::function<void(const EpochLog&)>& on_epoch = {}) {
  ModelOptions mopt = model_options(cfg);
  const LossWeights w = loss_weights(cfg);
  const RelationGraphs model_graphs = graphs_for_variant(rule_graphs, mopt.variant);
  OptimizerState opt(params, AdamOptions{cfg.lr, 0.9, 0.999, 1e-8, cfg.l2}, &mopt);
  std::mt19937_64 rng(cfg.seed + 0x9E3779B97F4A7C15ull);

  std::vector<LabeledPrefix> order = split.train;
  const std::size_t bs = std::max<std::size_t>(cfg.batch_size, 1);
  TrainResult res;
  res.best = params;
  std::size_t since_best = 0;
  double tau = cfg.tau;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    mopt.tau = tau;
    std::shuffle(order.begin(), order.end(), rng);
    EpochLog log;
    log.epoch = epoch;
    std::size_t batches = 0;
    for (std::size_t lo = 0; lo < order.size(); lo += bs) {
      const std::span<const LabeledPrefix> batch(order.data() + lo, std::min(bs, order.size() - lo));
      const BatchSamples samples = sample_batch(batch, rule_graphs, cfg.n_neg, rng);
      ModelParams grads = params.zeros_like();
      const BatchResult r = batch_objective(params, model_graphs, batch, samples, mopt, w,
                                            DenoiseMode::Stochastic, &rng, &grads);
      adam_step(params, grads, opt);
      log.loss.rec += r.loss.rec;
      log.loss.ex += r.loss.ex;
      log.loss.se += r.loss.se;
      ++batches;
    }
    if (batches) {
      const double b = static_cast<double>(batches);
      log.loss.rec /= b;
      log.loss.ex /= b;
      log.loss.se /= b;
    }
    log.loss.gamma1 = w.ex;
    log.loss.gamma2 = w.se;
    log.loss.finalize();

    if (!split.valid.empty()) {
      log.valid10 = evaluate_model(params, rule_graphs, split.valid, mopt, {10}).at(10);
      log.has_valid = true;
    }
    log.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    res.log.push_back(log);
    if (on_epoch) on_epoch(log);

    const double score = log.has_valid ? log.valid10.mrr : 0.0;
    if (!log.has_valid || score > res.best_valid_mrr) {
      res.best_valid_mrr = score;
      res.best = params;
      res.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      res.early_stopped = true;
      break;
    }
    tau = std::max(cfg.tau_min, tau * cfg.tau_anneal);
  }
  res.final = std::move(params);
  return res;
}

}  // namespace scrm
