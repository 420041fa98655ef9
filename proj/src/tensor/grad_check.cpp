#include "nmd/tensor/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace nmd {

namespace {

double rel_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

}  // namespace

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h) {
  Tensor leaf = Tensor::parameter(x.shape(), {x.values().begin(), x.values().end()});
  backward(f(leaf));
  const std::vector<double> analytic(leaf.grad().begin(), leaf.grad().end());

  NoGradGuard guard;
  double worst = 0.0;
  auto w = leaf.mutable_values();
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double orig = w[i];
    w[i] = orig + h;
    const double fp = f(leaf).item();
    w[i] = orig - h;
    const double fm = f(leaf).item();
    w[i] = orig;
    worst = std::max(worst, rel_error(analytic[i], (fp - fm) / (2.0 * h)));
  }
  return worst;
}

double grad_check(const std::function<Tensor()>& loss, ParamSet& params, double h) {
  params.zero_grad();
  backward(loss());
  const std::vector<double> analytic = params.flat_grads();
  params.zero_grad();

  NoGradGuard guard;
  double worst = 0.0;
  std::size_t flat = 0;
  for (const auto& name : params.names()) {
    auto w = params.at(name).mutable_values();
    for (std::size_t i = 0; i < w.size(); ++i, ++flat) {
      const double orig = w[i];
      w[i] = orig + h;
      const double fp = loss().item();
      w[i] = orig - h;
      const double fm = loss().item();
      w[i] = orig;
      worst = std::max(worst, rel_error(analytic[flat], (fp - fm) / (2.0 * h)));
    }
  }
  return worst;
}

}  // namespace nmd
