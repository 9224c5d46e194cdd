#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>

#include "relkit/autodiff.hpp"

namespace relkit {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Standard Adam with bias correction; first/second moments keyed by
// parameter name. Updates iterate parameters in ParamStore insertion order,
// so a step is deterministic given params, gradients and state.
class Adam {
 public:
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

  void step(ParamStore& params, const GradientMap& grads) {
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (const std::string& name : params.names()) {
      auto git = grads.find(name);
      if (git == grads.end()) throw Error("adam: missing gradient for " + name);
      const Tensor& g = git->second;
      if (!g.all_finite()) throw NumericError("adam: non-finite gradient for " + name);
      Tensor& theta = params.at(name);
      if (!theta.same_shape(g)) {
        throw ShapeError("adam: gradient shape " + g.shape_str() + " vs parameter " +
                         theta.shape_str() + " for " + name);
      }
      Tensor& m = state_slot(m_, name, theta);
      Tensor& v = state_slot(v_, name, theta);
      for (std::int64_t i = 0; i < theta.size(); ++i) {
        const double gi = g.data()[i];
        m.data()[i] = cfg_.beta1 * m.data()[i] + (1.0 - cfg_.beta1) * gi;
        v.data()[i] = cfg_.beta2 * v.data()[i] + (1.0 - cfg_.beta2) * gi * gi;
        const double m_hat = m.data()[i] / bc1;
        const double v_hat = v.data()[i] / bc2;
        theta.data()[i] -= cfg_.learning_rate * m_hat / (std::sqrt(v_hat) + cfg_.eps);
      }
    }
  }

  std::int64_t steps() const { return step_; }
  const Tensor& first_moment(const std::string& name) const { return m_.at(name); }
  const Tensor& second_moment(const std::string& name) const { return v_.at(name); }

 private:
  static Tensor& state_slot(std::map<std::string, Tensor>& state, const std::string& name,
                            const Tensor& like) {
    auto it = state.find(name);
    if (it == state.end()) it = state.emplace(name, Tensor(like.shape())).first;
    return it->second;
  }

  AdamConfig cfg_;
  std::int64_t step_ = 0;
  std::map<std::string, Tensor> m_;
  std::map<std::string, Tensor> v_;
};

}  // namespace relkit
