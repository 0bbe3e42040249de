#pragma once

// Reverse pass over the cached forward structs in model.hpp. Gradients are
// accumulated into a ModelParams-shaped buffer (see ModelParams::zeros_like).
//
// The top-K survivor set and every softmax normalization set are taken from
// the forward cache and held fixed; gradients reach the denoiser only through
// the zeta values of surviving edges.

#include "scrm/model.hpp"

namespace scrm {

/// Gradients touched by per-prefix work: item representations plus the
/// session attention parameters.
struct SessionGrads {
  Matrix dX, q, W7, W8, mu4, W9;

  explicit SessionGrads(const ModelParams& p)
      : dX(Matrix::Zero(p.dims.num_items, p.dims.d1)),
        q(Matrix::Zero(p.q.rows(), p.q.cols())),
        W7(Matrix::Zero(p.W7.rows(), p.W7.cols())),
        W8(Matrix::Zero(p.W8.rows(), p.W8.cols())),
        mu4(Matrix::Zero(p.mu4.rows(), p.mu4.cols())),
        W9(Matrix::Zero(p.W9.rows(), p.W9.cols())) {}

  void add_to(ModelParams& g, Matrix& dX_total) const {
    dX_total += dX;
    g.q += q;
    g.W7 += W7;
    g.W8 += W8;
    g.mu4 += mu4;
    g.W9 += W9;
  }
};

/// Session attention and prediction for one prefix, given dL/dlogits.
inline void backward_prefix(const ModelParams& p, const Matrix& X, const PrefixForward& f,
                            const Vector& dlogits, SessionGrads& g) {
  Matrix& dX = g.dX;
  const SessionRepr& s = f.session;
  const Eigen::Index d = X.cols();
  const Eigen::Index l = static_cast<Eigen::Index>(s.items.size());
  const ItemIndex last = s.items.back();
  const Vector xl = X.row(last).transpose();

  // logits = X S
  const Vector dS = X.transpose() * dlogits;
  dX.noalias() += dlogits * s.S.transpose();

  // S = W9 [x_l; S_g]
  g.W9.leftCols(d).noalias() += dS * xl.transpose();
  g.W9.rightCols(d).noalias() += dS * s.global.transpose();
  Vector dxl = p.W9.leftCols(d).transpose() * dS;
  const Vector dG = p.W9.rightCols(d).transpose() * dS;

  // alpha_k = q^T LeakyReLU(U_k), S_g = sum alpha_k x_k
  Vector dU_sum = Vector::Zero(d);
  for (Eigen::Index k = 0; k < l; ++k) {
    const ItemIndex item = s.items[static_cast<std::size_t>(k)];
    const Vector xk = X.row(item).transpose();
    const double dalpha = dG.dot(xk);
    dX.row(item) += s.alpha[k] * dG.transpose();
    const Vector u = s.U.row(k).transpose();
    g.q.col(0) += dalpha * leaky_relu(u);
    const Vector dU = (dalpha * p.q.col(0)).cwiseProduct(leaky_relu_grad(u));
    dU_sum += dU;
    g.W8.noalias() += dU * xk.transpose();
    dX.row(item) += (p.W8.transpose() * dU).transpose();
  }
  g.W7.noalias() += dU_sum * xl.transpose();
  g.mu4.col(0) += dU_sum;
  dxl += p.W7.transpose() * dU_sum;
  dX.row(last) += dxl.transpose();
}

/// One attention head. `dout` is the gradient on this head's activated
/// output. Adds into dXin and the per-attention-edge zeta gradient.
inline void wgat_head_backward(const DenoisedGraph& gr, const Matrix& Xin, const HeadParams& hp,
                               const HeadCache& c, const Matrix& dout, HeadParams& gh,
                               Matrix& dXin, std::vector<double>& dzeta) {
  const Eigen::Index d1 = hp.W3.rows();
  const Eigen::Index n = Xin.rows();
  const Matrix dagg = dout.cwiseProduct(leaky_relu_grad(c.agg));
  const double wz = hp.W4(0, 2 * d1);

  Matrix dP = Matrix::Zero(n, d1);
  Vector dsrc = Vector::Zero(n), ddst = Vector::Zero(n);
  double dwz = 0.0;
  std::vector<double> dalpha, de;
  for (std::size_t i = 0; i < gr.num_items; ++i) {
    const std::size_t lo = gr.att_offsets[i], hi = gr.att_offsets[i + 1];
    const auto ii = static_cast<Eigen::Index>(i);
    dalpha.resize(hi - lo);
    de.resize(hi - lo);
    for (std::size_t k = lo; k < hi; ++k) {
      const ItemIndex j = gr.att_nbr[k];
      dalpha[k - lo] = dagg.row(ii).dot(c.P.row(j));
      dP.row(j) += c.alpha[k] * dagg.row(ii);
    }
    softmax_backward(std::span<const double>(c.alpha.data() + lo, hi - lo), dalpha, de);
    for (std::size_t k = lo; k < hi; ++k) {
      const double dr = de[k - lo] * leaky_relu_grad(c.r[k]);
      dsrc[ii] += dr;
      ddst[gr.att_nbr[k]] += dr;
      dwz += dr * gr.att_zeta[k];
      dzeta[k] += dr * wz;
    }
  }
  const RowVector a1 = hp.W4.leftCols(d1);
  const RowVector a2 = hp.W4.middleCols(d1, d1);
  gh.W4.leftCols(d1) += (c.H.transpose() * dsrc).transpose();
  gh.W4.middleCols(d1, d1) += (c.H.transpose() * ddst).transpose();
  gh.W4(0, 2 * d1) += dwz;
  const Matrix dH = dsrc * a1 + ddst * a2;
  gh.W3.noalias() += dH.transpose() * Xin;
  gh.W5.noalias() += dP.transpose() * Xin;
  dXin.noalias() += dH * hp.W3 + dP * hp.W5;
}

/// Denoiser reverse pass from dL/dzeta on the full neighborhoods.
inline void denoise_backward(const DenoisedGraph& gr, const Matrix& X0, const DenoiseParams& p,
                             const std::vector<double>& dzeta_full, DenoiseParams& gp,
                             Matrix& dX0) {
  const Eigen::Index n = X0.rows(), d0 = X0.cols();
  Vector dleft = Vector::Zero(n), dright = Vector::Zero(n);
  double dbias = 0.0;
  std::vector<double> dlogit, dpi, dz, dscore;
  for (std::size_t i = 0; i < gr.num_items; ++i) {
    const std::size_t lo = gr.offsets[i], hi = gr.offsets[i + 1];
    if (lo == hi) continue;
    const std::size_t m = hi - lo;
    const auto sp = [&](const std::vector<double>& v) { return std::span<const double>(v.data() + lo, m); };
    dlogit.resize(m);
    dpi.resize(m);
    dz.resize(m);
    dscore.resize(m);
    softmax_backward(sp(gr.zeta), sp(dzeta_full), dlogit);
    for (std::size_t e = 0; e < m; ++e) dpi[e] = dlogit[e] / (gr.tau * gr.pi[lo + e]);
    softmax_backward(sp(gr.pi), dpi, dz);
    softmax_backward(sp(gr.beta), dz, dscore);  // z = beta + w
    for (std::size_t e = 0; e < m; ++e) {
      dleft[static_cast<Eigen::Index>(i)] += dscore[e];
      dright[gr.nbr[lo + e]] += dscore[e];
      dbias += dscore[e];
    }
  }
  // score_e = (W2 W1)_left x_i + (W2 W1)_right x_j + W2 mu1 + mu2
  const RowVector proj = p.W2 * p.W1;
  dX0.noalias() += dleft * proj.head(d0) + dright * proj.tail(d0);
  RowVector dproj(2 * d0);
  dproj.head(d0) = dleft.transpose() * X0;
  dproj.tail(d0) = dright.transpose() * X0;
  gp.W2.noalias() += dproj * p.W1.transpose();
  gp.W1.noalias() += p.W2.transpose() * dproj;
  gp.W2 += dbias * p.mu1.transpose();
  gp.mu1 += dbias * p.W2.transpose();
  gp.mu2(0, 0) += dbias;
}

/// Reverse pass through one graph branch, from the gradient on its output.
inline void branch_backward(const BranchForward& b, const Matrix& X0, const BranchParams& bp,
                            Matrix dout, BranchParams& gb, Matrix& dX0) {
  const DenoisedGraph& gr = b.graph;
  std::vector<double> dzeta(gr.att_nbr.size(), 0.0);
  for (std::size_t l = b.layers.size(); l-- > 0;) {
    const LayerCache& layer = b.layers[l];
    const double inv_heads = 1.0 / static_cast<double>(layer.heads.size());
    Matrix dXin = Matrix::Zero(layer.input.rows(), layer.input.cols());
    const Matrix dhead = dout * inv_heads;
    for (std::size_t h = 0; h < layer.heads.size(); ++h) {
      wgat_head_backward(gr, layer.input, bp.layers[l][h], layer.heads[h], dhead,
                         gb.layers[l][h], dXin, dzeta);
    }
    if (l == 0) dX0 += dXin;
    else dout = std::move(dXin);
  }
  if (!gr.learned) return;
  std::vector<double> dzeta_full(gr.nbr.size(), 0.0);
  for (std::size_t k = 0; k < gr.att_nbr.size(); ++k)
    if (gr.att_slot[k] >= 0) dzeta_full[static_cast<std::size_t>(gr.att_slot[k])] += dzeta[k];
  denoise_backward(gr, X0, bp.denoise, dzeta_full, gb.denoise, dX0);
}

/// Reverse pass from item-level gradients: dX on the final representations,
/// dXs / dXc on the integrated per-graph ones (Variant::Full only).
inline void backward_items(const ModelParams& p, const ItemForward& f, const Matrix& dX,
                           const Matrix* dXs, const Matrix* dXc, ModelParams& g) {
  switch (f.options.variant) {
    case Variant::SubOnly:
    case Variant::Mixed:
      branch_backward(f.sub, p.X0, p.sub, dX, g.sub, g.X0);
      return;
    case Variant::CompOnly:
      branch_backward(f.comp, p.X0, p.comp, dX, g.comp, g.X0);
      return;
    case Variant::Full:
      break;
  }
  const Eigen::Index d = f.Xs.cols();
  g.W6.leftCols(d).noalias() += dX.transpose() * f.Xs;
  g.W6.rightCols(d).noalias() += dX.transpose() * f.Xc;
  g.mu3.col(0) += dX.colwise().sum().transpose();
  Matrix dXs_tot = dX * p.W6.leftCols(d);
  Matrix dXc_tot = dX * p.W6.rightCols(d);
  if (dXs) dXs_tot += *dXs;
  if (dXc) dXc_tot += *dXc;

  const Matrix Us = f.Xs1 + f.theta1 * f.Xc1;
  const Matrix Uc = f.Xc1 + f.theta2 * f.Xs1;
  const Matrix dUs = dXs_tot.cwiseProduct(leaky_relu_grad(Us));
  const Matrix dUc = dXc_tot.cwiseProduct(leaky_relu_grad(Uc));
  if (f.options.use_integration) {
    g.theta1(0, 0) += dUs.cwiseProduct(f.Xc1).sum();
    g.theta2(0, 0) += dUc.cwiseProduct(f.Xs1).sum();
  }
  branch_backward(f.sub, p.X0, p.sub, dUs + f.theta2 * dUc, g.sub, g.X0);
  branch_backward(f.comp, p.X0, p.comp, dUc + f.theta1 * dUs, g.comp, g.X0);
}

inline bool gradients_finite(const ModelParams& g) {
  bool ok = true;
  g.visit([&](const std::string&, const Matrix& m) { ok = ok && m.allFinite(); });
  return ok;
}

}  // namespace scrm
