#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace rlsim {

// Dense gradient accumulator over a flat parameter vector, with a touched-set
// so sparse consumers (per-round updates touch O(G * L * V) of ~100k entries)
// can skip the zeros. add() is the only mutator; axpy-style accumulation keeps
// gradient assembly in one code path for surrogate, KL, and oracle terms.
class grad_accum {
 public:
  explicit grad_accum(size_t dim) : g_(dim, 0.0), touched_flag_(dim, 0) {}

  void add(size_t idx, double v) {
    if (v == 0.0) return;
    if (!touched_flag_[idx]) {
      touched_flag_[idx] = 1;
      touched_.push_back(idx);
    }
    g_[idx] += v;
  }

  void scale(double s) {
    for (size_t idx : touched_) g_[idx] *= s;
  }

  void add_scaled(const grad_accum& other, double s) {
    if (other.dim() != dim()) throw std::invalid_argument("grad_accum: dim mismatch");
    for (size_t idx : other.touched_) add(idx, s * other.g_[idx]);
  }

  void reset() {
    for (size_t idx : touched_) {
      g_[idx] = 0.0;
      touched_flag_[idx] = 0;
    }
    touched_.clear();
  }

  double operator[](size_t idx) const { return g_[idx]; }
  size_t dim() const { return g_.size(); }
  const std::vector<size_t>& touched() const { return touched_; }
  const std::vector<double>& dense() const { return g_; }

  double l2_norm() const {
    double s = 0.0;
    for (size_t idx : touched_) s += g_[idx] * g_[idx];
    return std::sqrt(s);
  }

 private:
  std::vector<double> g_;
  std::vector<char> touched_flag_;
  std::vector<size_t> touched_;
};

// ---------------------------------------------------------------------------
// Optimizer: maps an ascent gradient to a parameter update.
//
// rmsprop is the default: update = lr * g / (sqrt(v_hat) + eps) with
// v = beta2 * v + (1 - beta2) * g^2 decayed over the full vector every step
// and v_hat the bias-corrected estimate. No momentum. sgd applies lr * g
// directly. The adaptive default mirrors the normalized-step regime the
// system being modeled trains in; sgd is kept for sensitivity runs.
// ---------------------------------------------------------------------------

enum class optimizer_kind { sgd, rmsprop };

struct optimizer_config {
  optimizer_kind kind = optimizer_kind::rmsprop;
  double learning_rate = 0.05;
  double beta2 = 0.85;   // rmsprop second-moment decay
  double eps = 1e-8;     // rmsprop denominator floor
};

class optimizer {
 public:
  optimizer(const optimizer_config& cfg, size_t dim) : cfg_(cfg) {
    if (cfg.kind == optimizer_kind::rmsprop) v_.assign(dim, 0.0);
  }

  // Apply one ascent step in place. The gradient is consumed as-is; callers
  // own sign conventions (everything here maximizes).
  void step(std::vector<double>& params, const grad_accum& g) {
    if (params.size() != g.dim()) throw std::invalid_argument("optimizer: dim mismatch");
    if (cfg_.kind == optimizer_kind::sgd) {
      for (size_t idx : g.touched()) params[idx] += cfg_.learning_rate * g[idx];
      return;
    }
    // rmsprop: the second moment of *every* coordinate decays each step, so a
    // coordinate's memory of past gradients fades whether or not it was
    // touched this round. Bias correction keeps early steps from blowing up.
    ++t_;
    const double b2 = cfg_.beta2;
    for (double& vi : v_) vi *= b2;
    for (size_t idx : g.touched()) v_[idx] += (1.0 - b2) * g[idx] * g[idx];
    const double correction = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (size_t idx : g.touched()) {
      const double vhat = v_[idx] / correction;
      params[idx] += cfg_.learning_rate * g[idx] / (std::sqrt(vhat) + cfg_.eps);
    }
  }

  int64_t steps_taken() const { return t_; }

 private:
  optimizer_config cfg_;
  std::vector<double> v_;
  int64_t t_ = 0;
};

inline std::string to_string(optimizer_kind k) {
  return k == optimizer_kind::sgd ? "sgd" : "rmsprop";
}

inline optimizer_kind optimizer_kind_from_string(const std::string& s) {
  if (s == "sgd") return optimizer_kind::sgd;
  if (s == "rmsprop") return optimizer_kind::rmsprop;
  throw std::invalid_argument("unknown optimizer: " + s);
}

}  // namespace rlsim
