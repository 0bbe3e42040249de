#pragma once

#include "scrm/model.hpp"

#include <cmath>
#include <vector>

namespace scrm {

struct AdamOptions {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double l2 = 0.0;
};

/// First/second moments mirroring the parameter tensors. Tensors flagged
/// inactive are skipped entirely (no update, no weight decay).
struct OptimizerState {
  AdamOptions options;
  ModelParams m, v;
  std::uint64_t step = 0;
  std::vector<char> active;

  OptimizerState(const ModelParams& params, const AdamOptions& opt,
                 const ModelOptions* model_options = nullptr)
      : options(opt), m(params.zeros_like()), v(params.zeros_like()) {
    params.visit([&](const std::string& name, const Matrix&) {
      active.push_back(model_options ? tensor_in_use(name, *model_options) : 1);
    });
  }
};

/// Bias-corrected Adam; the L2 term is folded into the gradient before the
/// moment updates.
inline void adam_step(ModelParams& params, const ModelParams& grads, OptimizerState& st) {
  ++st.step;
  const auto& o = st.options;
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(st.step));

  std::vector<const Matrix*> g;
  std::vector<Matrix*> m, v;
  grads.visit([&](const std::string&, const Matrix& t) { g.push_back(&t); });
  st.m.visit([&](const std::string&, Matrix& t) { m.push_back(&t); });
  st.v.visit([&](const std::string&, Matrix& t) { v.push_back(&t); });
  std::size_t k = 0;
  params.visit([&](const std::string&, Matrix& p) {
    const std::size_t idx = k++;
    if (!st.active[idx]) return;
    double* pd = p.data();
    const double* gd = g[idx]->data();
    double* md = m[idx]->data();
    double* vd = v[idx]->data();
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      const double grad = gd[i] + o.l2 * pd[i];
      md[i] = o.beta1 * md[i] + (1.0 - o.beta1) * grad;
      vd[i] = o.beta2 * vd[i] + (1.0 - o.beta2) * grad * grad;
      pd[i] -= o.lr * (md[i] / c1) / (std::sqrt(vd[i] / c2) + o.eps);
    }
  });
}

}  // namespace scrm
