#include "nmd/tensor/optim.hpp"

#include <cmath>

namespace nmd {

OptimizerKind parse_optimizer_kind(const std::string& name) {
  if (name == "sgd" || name == "SGD") return OptimizerKind::sgd;
  if (name == "adam" || name == "Adam") return OptimizerKind::adam;
  throw TensorError("unknown optimizer '" + name + "' (expected sgd or adam)");
}

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::sgd ? "sgd" : "adam"; }

Optimizer::Optimizer(OptimizerConfig config) : config_(config) {}

void Optimizer::step(ParamSet& params) {
  bool any = false;
  for (const auto& [_, t] : params.tensors()) any = any || t.has_grad();
  if (!any) throw TensorError("optimizer step without gradients: run backward() first");

  ++steps_;
  const double lr = config_.lr;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
  for (const auto& name : params.names()) {
    Tensor& t = params.at(name);
    auto g = t.grad();
    auto w = t.mutable_values();
    if (g.size() != w.size()) continue;
    if (config_.kind == OptimizerKind::sgd) {
      for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * g[i];
    } else {
      auto& mo = moments_[name];
      if (mo.m.size() != w.size()) {
        mo.m.assign(w.size(), 0.0);
        mo.v.assign(w.size(), 0.0);
      }
      for (std::size_t i = 0; i < w.size(); ++i) {
        mo.m[i] = config_.beta1 * mo.m[i] + (1.0 - config_.beta1) * g[i];
        mo.v[i] = config_.beta2 * mo.v[i] + (1.0 - config_.beta2) * g[i] * g[i];
        const double mhat = mo.m[i] / bc1;
        const double vhat = mo.v[i] / bc2;
        w[i] -= lr * mhat / (std::sqrt(vhat) + config_.eps);
      }
    }
  }
  params.zero_grad();
}

}  // namespace nmd
