#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace scrm {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

inline constexpr double kLeakySlope = 0.01;

inline double leaky_relu(double x) { return x > 0.0 ? x : kLeakySlope * x; }
inline double leaky_relu_grad(double x) { return x > 0.0 ? 1.0 : kLeakySlope; }

template <class Derived>
auto leaky_relu(const Eigen::MatrixBase<Derived>& m) {
  return m.unaryExpr([](double v) { return leaky_relu(v); });
}
template <class Derived>
auto leaky_relu_grad(const Eigen::MatrixBase<Derived>& m) {
  return m.unaryExpr([](double v) { return leaky_relu_grad(v); });
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Max-subtracted softmax, written into `out` (may alias `in`).
inline void softmax(std::span<const double> in, std::span<double> out) {
  if (in.empty()) return;
  const double mx = *std::max_element(in.begin(), in.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < in.size(); ++i) {
    out[i] = std::exp(in[i] - mx);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
}

inline std::vector<double> softmax(std::span<const double> in) {
  std::vector<double> out(in.size());
  softmax(in, out);
  return out;
}

/// Reverse pass of a softmax: given y = softmax(x) and dL/dy, returns dL/dx.
inline void softmax_backward(std::span<const double> y, std::span<const double> dy,
                             std::span<double> dx) {
  double dot = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) dot += y[i] * dy[i];
  for (std::size_t i = 0; i < y.size(); ++i) dx[i] = y[i] * (dy[i] - dot);
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

/// FNV-1a, used for content hashes in checkpoint manifests.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[v & 0xF];
    v >>= 4;
  }
  return s;
}

/// Round-trip (17 significant digits) decimal form of a double.
inline std::string format_double(double v) {
  char buf[64];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(n));
}

}  // namespace scrm
