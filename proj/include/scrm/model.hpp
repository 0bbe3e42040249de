#pragma once

// Forward model: item embeddings, per-graph denoising, weighted graph
// attention, cross-graph integration, item fusion, session attention and the
// softmax over the catalog. Every intermediate the reverse pass needs is kept
// in the returned structs.

#include "scrm/error.hpp"
#include "scrm/linalg.hpp"
#include "scrm/relation_graphs.hpp"

#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace scrm {

struct ModelDims {
  std::size_t num_items = 0;
  std::size_t d0 = 128;
  std::size_t d1 = 128;
  std::size_t heads = 2;
  std::size_t layers = 1;

  bool operator==(const ModelDims&) const = default;
};

/// Two-layer edge scorer on [x_i; x_j].
struct DenoiseParams {
  Matrix W1;   // 2d0 x 2d0
  Matrix mu1;  // 2d0 x 1
  Matrix W2;   // 1 x 2d0
  Matrix mu2;  // 1 x 1
};

struct HeadParams {
  Matrix W3;  // d1 x d_in
  Matrix W4;  // 1 x (2 d1 + 1)
  Matrix W5;  // d1 x d_in
};

struct BranchParams {
  DenoiseParams denoise;
  std::vector<std::vector<HeadParams>> layers;  // [layer][head]
};

struct ModelParams {
  ModelDims dims;
  Matrix X0;  // N x d0
  BranchParams sub, comp;
  Matrix theta1, theta2;  // 1 x 1
  Matrix W6, mu3;         // d1 x 2d1, d1 x 1
  Matrix q, W7, W8, mu4;  // d1 x 1, d1 x d1, d1 x d1, d1 x 1
  Matrix W9;              // d1 x 2d1

  /// Visits every tensor in a fixed order with a stable dotted name.
  template <class Self, class F>
  static void visit_impl(Self& self, F&& f) {
    f(std::string("X0"), self.X0);
    const auto branch = [&](const std::string& prefix, auto& b) {
      f(prefix + ".denoise.W1", b.denoise.W1);
      f(prefix + ".denoise.mu1", b.denoise.mu1);
      f(prefix + ".denoise.W2", b.denoise.W2);
      f(prefix + ".denoise.mu2", b.denoise.mu2);
      for (std::size_t l = 0; l < b.layers.size(); ++l)
        for (std::size_t h = 0; h < b.layers[l].size(); ++h) {
          const std::string p = prefix + ".layer" + std::to_string(l) + ".head" + std::to_string(h);
          f(p + ".W3", b.layers[l][h].W3);
          f(p + ".W4", b.layers[l][h].W4);
          f(p + ".W5", b.layers[l][h].W5);
        }
    };
    branch("sub", self.sub);
    branch("comp", self.comp);
    f(std::string("theta1"), self.theta1);
    f(std::string("theta2"), self.theta2);
    f(std::string("W6"), self.W6);
    f(std::string("mu3"), self.mu3);
    f(std::string("q"), self.q);
    f(std::string("W7"), self.W7);
    f(std::string("W8"), self.W8);
    f(std::string("mu4"), self.mu4);
    f(std::string("W9"), self.W9);
  }
  template <class F> void visit(F&& f) { visit_impl(*this, std::forward<F>(f)); }
  template <class F> void visit(F&& f) const { visit_impl(*this, std::forward<F>(f)); }

  /// Same shapes, all zeros. Used as the gradient accumulator.
  ModelParams zeros_like() const {
    ModelParams z = *this;
    z.visit([](const std::string&, Matrix& m) { m.setZero(); });
    return z;
  }

  void add_scaled(const ModelParams& other, double scale) {
    std::vector<const Matrix*> src;
    other.visit([&](const std::string&, const Matrix& m) { src.push_back(&m); });
    std::size_t k = 0;
    visit([&](const std::string&, Matrix& m) { m += scale * *src[k++]; });
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    visit([&](const std::string&, const Matrix& m) { n += static_cast<std::size_t>(m.size()); });
    return n;
  }
};

namespace detail {
inline void allocate_branch(BranchParams& b, const ModelDims& d) {
  b.denoise.W1 = Matrix::Zero(2 * d.d0, 2 * d.d0);
  b.denoise.mu1 = Matrix::Zero(2 * d.d0, 1);
  b.denoise.W2 = Matrix::Zero(1, 2 * d.d0);
  b.denoise.mu2 = Matrix::Zero(1, 1);
  b.layers.assign(d.layers, std::vector<HeadParams>(d.heads));
  for (std::size_t l = 0; l < d.layers; ++l) {
    const std::size_t din = l == 0 ? d.d0 : d.d1;
    for (auto& h : b.layers[l]) {
      h.W3 = Matrix::Zero(d.d1, din);
      h.W4 = Matrix::Zero(1, 2 * d.d1 + 1);
      h.W5 = Matrix::Zero(d.d1, din);
    }
  }
}
}  // namespace detail

/// Zero-filled parameters with every shape fixed by `dims`.
inline ModelParams allocate_params(const ModelDims& dims) {
  if (dims.num_items == 0 || dims.d0 == 0 || dims.d1 == 0 || dims.heads == 0 || dims.layers == 0) {
    throw Error(ErrorKind::InvalidDim, "num_items, d0, d1, heads and layers must all be >= 1");
  }
  ModelParams p;
  p.dims = dims;
  p.X0 = Matrix::Zero(dims.num_items, dims.d0);
  detail::allocate_branch(p.sub, dims);
  detail::allocate_branch(p.comp, dims);
  p.theta1 = Matrix::Zero(1, 1);
  p.theta2 = Matrix::Zero(1, 1);
  p.W6 = Matrix::Zero(dims.d1, 2 * dims.d1);
  p.mu3 = Matrix::Zero(dims.d1, 1);
  p.q = Matrix::Zero(dims.d1, 1);
  p.W7 = Matrix::Zero(dims.d1, dims.d1);
  p.W8 = Matrix::Zero(dims.d1, dims.d1);
  p.mu4 = Matrix::Zero(dims.d1, 1);
  p.W9 = Matrix::Zero(dims.d1, 2 * dims.d1);
  return p;
}

inline constexpr double kInitStd = 0.1;

/// Every tensor drawn from N(0, 0.1^2), in visit order, from one seeded stream.
inline ModelParams init_params(const ModelDims& dims, std::uint64_t seed) {
  ModelParams p = allocate_params(dims);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, kInitStd);
  p.visit([&](const std::string&, Matrix& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = gauss(rng);
  });
  return p;
}

// ---------------------------------------------------------------------------
// Model variants (ablations)

enum class Variant : std::uint8_t {
  Full,      // both graphs, integration and fusion
  SubOnly,   // x_i = x_i^{s,1}
  CompOnly,  // x_i = x_i^{c,1}
  Mixed,     // one WGAT over the union of both edge sets
};

struct ModelOptions {
  Variant variant = Variant::Full;
  bool use_denoise = true;
  bool use_integration = true;
  std::size_t top_k = 4;
  double tau = 0.01;
};

/// True when the tensor named `name` takes part in the forward pass.
inline bool tensor_in_use(const std::string& name, const ModelOptions& opt) {
  const auto starts = [&](std::string_view p) { return name.rfind(p, 0) == 0; };
  const bool sub_branch = opt.variant != Variant::CompOnly;
  const bool comp_branch = opt.variant == Variant::Full || opt.variant == Variant::CompOnly;
  const bool fused = opt.variant == Variant::Full;
  if (starts("sub.")) return sub_branch && (opt.use_denoise || !starts("sub.denoise"));
  if (starts("comp.")) return comp_branch && (opt.use_denoise || !starts("comp.denoise"));
  if (starts("theta")) return fused && opt.use_integration;
  if (name == "W6" || name == "mu3") return fused;
  return true;
}

// ---------------------------------------------------------------------------
// Denoising

enum class DenoiseMode : std::uint8_t { Stochastic, Deterministic };

/// Learned edge weights for one graph. The pre-pruning neighborhood of node i
/// is `nbr[offsets[i] .. offsets[i+1])`; survivors plus the self-loop are the
/// attention edges `att_*[att_offsets[i] .. att_offsets[i+1])`.
struct DenoisedGraph {
  RelationKind kind = RelationKind::Substitutable;
  std::size_t num_items = 0;
  double tau = 1.0;
  DenoiseMode mode = DenoiseMode::Deterministic;
  bool learned = true;  // false: zeta is the normalized rule weight, no pruning

  // Full neighborhoods.
  std::vector<std::size_t> offsets;
  std::vector<ItemIndex> nbr;
  std::vector<double> w, score, beta, z, pi, noise, logit, zeta;
  std::vector<char> kept;

  // Attention edges; slot = index into the full arrays, -1 for the self-loop.
  std::vector<std::size_t> att_offsets;
  std::vector<ItemIndex> att_nbr;
  std::vector<double> att_zeta;
  std::vector<std::ptrdiff_t> att_slot;

  // Projections of X0 through the left/right halves of W1, times W2.
  Vector left_score, right_score;

  std::size_t surviving_neighbors(ItemIndex i) const {
    return att_offsets[i + 1] - att_offsets[i] - 1;
  }
};

namespace detail {
inline DenoisedGraph neighborhoods(const RelationGraph& g) {
  DenoisedGraph d;
  d.kind = g.kind();
  d.num_items = g.num_items();
  d.offsets.assign(1, 0);
  for (ItemIndex i = 0; i < g.num_items(); ++i) {
    for (ItemIndex j : g.neighbors(i)) {
      d.nbr.push_back(j);
      d.w.push_back(g.weight(i, j));
    }
    d.offsets.push_back(d.nbr.size());
  }
  return d;
}

inline double gumbel(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = 0.0;
  while (u <= 0.0) u = unif(rng);
  return -std::log(-std::log(u));
}
}  // namespace detail

/// Edge re-weighting and per-node top-K pruning for one graph.
///
/// Per directed edge (i, j): score = W2 (W1 [x_i; x_j] + mu1) + mu2,
/// beta = softmax of scores over N(i), z = beta + w, pi = softmax(z) over N(i),
/// zeta = softmax((log pi + eps) / tau) with Gumbel eps in Stochastic mode and
/// eps = 0 in Deterministic mode. Each node keeps its top-K edges by zeta
/// (ties to the lower neighbor index) plus a self-loop with zeta = 1.
inline DenoisedGraph denoise(const RelationGraph& graph, const Matrix& X0,
                             const DenoiseParams& p, std::size_t top_k, double tau,
                             DenoiseMode mode, std::mt19937_64* rng = nullptr) {
  const auto n = static_cast<Eigen::Index>(graph.num_items());
  const Eigen::Index d0 = X0.cols();
  DenoisedGraph d = detail::neighborhoods(graph);
  d.tau = tau;
  d.mode = mode;

  // W2 * W1 splits into a row acting on x_i and one acting on x_j.
  const RowVector proj = p.W2 * p.W1;
  d.left_score = X0 * proj.head(d0).transpose();
  d.right_score = X0 * proj.tail(d0).transpose();
  const double bias = (p.W2 * p.mu1)(0, 0) + p.mu2(0, 0);

  const std::size_t m = d.nbr.size();
  d.score.resize(m);
  d.beta.resize(m);
  d.z.resize(m);
  d.pi.resize(m);
  d.noise.assign(m, 0.0);
  d.logit.resize(m);
  d.zeta.resize(m);
  d.kept.assign(m, 0);
  d.att_offsets.assign(1, 0);

  std::vector<std::size_t> order;
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::size_t lo = d.offsets[i], hi = d.offsets[i + 1];
    for (std::size_t e = lo; e < hi; ++e) d.score[e] = d.left_score[i] + d.right_score[d.nbr[e]] + bias;
    const auto span_of = [&](std::vector<double>& v) { return std::span<double>(v.data() + lo, hi - lo); };
    softmax(span_of(d.score), span_of(d.beta));
    for (std::size_t e = lo; e < hi; ++e) d.z[e] = d.beta[e] + d.w[e];
    softmax(span_of(d.z), span_of(d.pi));
    for (std::size_t e = lo; e < hi; ++e) {
      if (mode == DenoiseMode::Stochastic && rng) d.noise[e] = detail::gumbel(*rng);
      d.logit[e] = (std::log(d.pi[e]) + d.noise[e]) / tau;
    }
    softmax(span_of(d.logit), span_of(d.zeta));

    order.resize(hi - lo);
    std::iota(order.begin(), order.end(), lo);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return d.zeta[a] > d.zeta[b]; });
    for (std::size_t r = 0; r < order.size() && r < top_k; ++r) d.kept[order[r]] = 1;
    for (std::size_t e = lo; e < hi; ++e) {
      if (!d.kept[e]) continue;
      d.att_nbr.push_back(d.nbr[e]);
      d.att_zeta.push_back(d.zeta[e]);
      d.att_slot.push_back(static_cast<std::ptrdiff_t>(e));
    }
    d.att_nbr.push_back(static_cast<ItemIndex>(i));
    d.att_zeta.push_back(1.0);
    d.att_slot.push_back(-1);
    d.att_offsets.push_back(d.att_nbr.size());
  }
  return d;
}

/// Denoising switched off: every rule edge survives with zeta = w.
inline DenoisedGraph passthrough_graph(const RelationGraph& graph) {
  DenoisedGraph d = detail::neighborhoods(graph);
  d.learned = false;
  d.att_offsets.assign(1, 0);
  for (std::size_t i = 0; i < d.num_items; ++i) {
    for (std::size_t e = d.offsets[i]; e < d.offsets[i + 1]; ++e) {
      d.att_nbr.push_back(d.nbr[e]);
      d.att_zeta.push_back(d.w[e]);
      d.att_slot.push_back(static_cast<std::ptrdiff_t>(e));
    }
    d.att_nbr.push_back(static_cast<ItemIndex>(i));
    d.att_zeta.push_back(1.0);
    d.att_slot.push_back(-1);
    d.att_offsets.push_back(d.att_nbr.size());
  }
  return d;
}

// ---------------------------------------------------------------------------
// Weighted graph attention

struct HeadCache {
  Matrix H, P;               // X_in W3^T, X_in W5^T
  std::vector<double> r;     // pre-activation attention logits per edge
  std::vector<double> alpha; // normalized attention per edge
  Matrix agg;                // sum_j alpha_ij P_j (pre-activation output)
};

struct LayerCache {
  Matrix input;
  std::vector<HeadCache> heads;
  Matrix output;  // mean over heads of LeakyReLU(agg)
};

/// One attention head: e_ij = LeakyReLU(W4 [W3 x_i; W3 x_j; zeta_ij]),
/// alpha = softmax over the node's attention edges, out = LeakyReLU(sum alpha W5 x_j).
inline HeadCache wgat_head(const DenoisedGraph& g, const Matrix& Xin, const HeadParams& hp) {
  const Eigen::Index d1 = hp.W3.rows();
  HeadCache c;
  c.H = Xin * hp.W3.transpose();
  c.P = Xin * hp.W5.transpose();
  const Vector src = c.H * hp.W4.leftCols(d1).transpose();
  const Vector dst = c.H * hp.W4.middleCols(d1, d1).transpose();
  const double wz = hp.W4(0, 2 * d1);
  c.r.resize(g.att_nbr.size());
  c.alpha.resize(g.att_nbr.size());
  c.agg = Matrix::Zero(Xin.rows(), d1);
  std::vector<double> e;
  for (std::size_t i = 0; i < g.num_items; ++i) {
    const std::size_t lo = g.att_offsets[i], hi = g.att_offsets[i + 1];
    e.resize(hi - lo);
    for (std::size_t k = lo; k < hi; ++k) {
      c.r[k] = src[static_cast<Eigen::Index>(i)] + dst[g.att_nbr[k]] + wz * g.att_zeta[k];
      e[k - lo] = leaky_relu(c.r[k]);
    }
    softmax(e, std::span<double>(c.alpha.data() + lo, hi - lo));
    for (std::size_t k = lo; k < hi; ++k) c.agg.row(static_cast<Eigen::Index>(i)) += c.alpha[k] * c.P.row(g.att_nbr[k]);
  }
  return c;
}

inline LayerCache wgat_layer(const DenoisedGraph& g, const Matrix& Xin,
                             const std::vector<HeadParams>& heads) {
  LayerCache layer;
  layer.input = Xin;
  layer.output = Matrix::Zero(Xin.rows(), heads.front().W3.rows());
  for (const auto& hp : heads) {
    layer.heads.push_back(wgat_head(g, Xin, hp));
    layer.output += leaky_relu(layer.heads.back().agg);
  }
  layer.output /= static_cast<double>(heads.size());
  return layer;
}

struct BranchForward {
  DenoisedGraph graph;
  std::vector<LayerCache> layers;
  const Matrix& output() const { return layers.back().output; }
};

inline std::vector<LayerCache> wgat_forward(const DenoisedGraph& g, const Matrix& X0,
                                            const BranchParams& bp) {
  std::vector<LayerCache> layers;
  const Matrix* in = &X0;
  for (const auto& heads : bp.layers) {
    layers.push_back(wgat_layer(g, *in, heads));
    in = &layers.back().output;
  }
  return layers;
}

// ---------------------------------------------------------------------------
// Integration, fusion, session representation, prediction

/// Xs = LeakyReLU(Xs1 + theta1 Xc1), Xc = LeakyReLU(Xc1 + theta2 Xs1).
inline std::pair<Matrix, Matrix> integrate(const Matrix& Xs1, const Matrix& Xc1, double theta1,
                                           double theta2) {
  return {leaky_relu(Xs1 + theta1 * Xc1), leaky_relu(Xc1 + theta2 * Xs1)};
}

/// x_i = W6 [x_i^s; x_i^c] + mu3, for every row.
inline Matrix fuse_items(const Matrix& Xs, const Matrix& Xc, const Matrix& W6, const Matrix& mu3) {
  const Eigen::Index d = Xs.cols();
  Matrix X = Xs * W6.leftCols(d).transpose() + Xc * W6.rightCols(d).transpose();
  X.rowwise() += mu3.col(0).transpose();
  return X;
}

struct ItemForward {
  ModelOptions options;
  BranchForward sub, comp;
  Matrix Xs1, Xc1;  // per-graph WGAT outputs
  Matrix Xs, Xc;    // integrated
  Matrix X;         // final item representations
  double theta1 = 0.0, theta2 = 0.0;
};

/// Graph inputs for one forward pass. For Variant::Mixed, `substitutable` is
/// expected to already hold the union graph.
inline ItemForward compute_items(const ModelParams& p, const RelationGraphs& graphs,
                                 const ModelOptions& opt, DenoiseMode mode,
                                 std::mt19937_64* rng = nullptr) {
  ItemForward f;
  f.options = opt;
  const auto run_branch = [&](const RelationGraph& g, const BranchParams& bp) {
    BranchForward b;
    b.graph = opt.use_denoise ? denoise(g, p.X0, bp.denoise, opt.top_k, opt.tau, mode, rng)
                              : passthrough_graph(g);
    b.layers = wgat_forward(b.graph, p.X0, bp);
    return b;
  };
  switch (opt.variant) {
    case Variant::SubOnly:
    case Variant::Mixed:
      f.sub = run_branch(graphs.substitutable, p.sub);
      f.Xs1 = f.sub.output();
      f.X = f.Xs1;
      break;
    case Variant::CompOnly:
      f.comp = run_branch(graphs.complementary, p.comp);
      f.Xc1 = f.comp.output();
      f.X = f.Xc1;
      break;
    case Variant::Full: {
      f.sub = run_branch(graphs.substitutable, p.sub);
      f.comp = run_branch(graphs.complementary, p.comp);
      f.Xs1 = f.sub.output();
      f.Xc1 = f.comp.output();
      f.theta1 = opt.use_integration ? p.theta1(0, 0) : 0.0;
      f.theta2 = opt.use_integration ? p.theta2(0, 0) : 0.0;
      std::tie(f.Xs, f.Xc) = integrate(f.Xs1, f.Xc1, f.theta1, f.theta2);
      f.X = fuse_items(f.Xs, f.Xc, p.W6, p.mu3);
      break;
    }
  }
  return f;
}

struct SessionRepr {
  std::vector<ItemIndex> items;
  Matrix U;       // l x d1, W7 x_l + W8 x_k + mu4 per position
  Vector alpha;   // unnormalized position weights
  Vector global;  // S_g = sum alpha_k x_k
  Vector S;       // W9 [x_l; S_g]
};

/// alpha_k = q^T LeakyReLU(W7 x_l + W8 x_k + mu4); S_g = sum_k alpha_k x_k;
/// S = W9 [x_l; S_g]. The weights are used as is, without normalization.
inline SessionRepr session_repr(std::span<const ItemIndex> prefix, const Matrix& X,
                                const ModelParams& p) {
  SessionRepr s;
  s.items.assign(prefix.begin(), prefix.end());
  const Eigen::Index l = static_cast<Eigen::Index>(prefix.size());
  const Eigen::Index d = X.cols();
  const Vector xl = X.row(prefix.back()).transpose();
  const Vector base = p.W7 * xl + p.mu4.col(0);
  s.U.resize(l, d);
  s.alpha.resize(l);
  s.global = Vector::Zero(d);
  for (Eigen::Index k = 0; k < l; ++k) {
    const auto xk = X.row(prefix[static_cast<std::size_t>(k)]).transpose();
    s.U.row(k) = (base + p.W8 * xk).transpose();
    s.alpha[k] = p.q.col(0).dot(leaky_relu(s.U.row(k).transpose()));
    s.global += s.alpha[k] * xk;
  }
  s.S = p.W9.leftCols(d) * xl + p.W9.rightCols(d) * s.global;
  return s;
}

/// softmax(X S) over the full catalog.
inline Vector predict_scores(const Vector& S, const Matrix& X) {
  Vector logits = X * S;
  Vector out(logits.size());
  softmax(std::span<const double>(logits.data(), static_cast<std::size_t>(logits.size())),
          std::span<double>(out.data(), static_cast<std::size_t>(out.size())));
  return out;
}

struct PrefixForward {
  SessionRepr session;
  Vector logits;
  Vector probs;
};

inline PrefixForward forward_prefix(const ModelParams& p, const ItemForward& items,
                                    std::span<const ItemIndex> prefix) {
  PrefixForward f;
  f.session = session_repr(prefix, items.X, p);
  f.logits = items.X * f.session.S;
  f.probs.resize(f.logits.size());
  softmax(std::span<const double>(f.logits.data(), static_cast<std::size_t>(f.logits.size())),
          std::span<double>(f.probs.data(), static_cast<std::size_t>(f.probs.size())));
  return f;
}

struct Forward {
  ItemForward items;
  PrefixForward prefix;
};

/// Full pass for one prefix: denoise, WGAT, integrate, fuse, session, softmax.
inline Forward forward(const ModelParams& p, const RelationGraphs& graphs,
                       std::span<const ItemIndex> prefix, const ModelOptions& opt,
                       DenoiseMode mode, std::mt19937_64* rng = nullptr) {
  Forward f;
  f.items = compute_items(p, graphs, opt, mode, rng);
  f.prefix = forward_prefix(p, f.items, prefix);
  return f;
}

/// The graphs a variant consumes: Mixed runs on the union edge set.
inline RelationGraphs graphs_for_variant(const RelationGraphs& g, Variant v) {
  if (v != Variant::Mixed) return g;
  RelationGraphs out;
  out.substitutable = merge_graphs(g.substitutable, g.complementary);
  out.complementary = g.complementary;
  return out;
}

}  // namespace scrm
