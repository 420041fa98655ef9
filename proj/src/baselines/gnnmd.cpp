#include <cmath>

#include "nmd/baselines/baselines.hpp"
#include "nmd/errors.hpp"
#include "nmd/tensor/ops.hpp"

namespace nmd::baselines {

Tensor gnnmd_step(const model::BindingNet& net, const Tensor& x) { return x + net.force(x); }

double gnnmd_epoch(ParamSet& params, const model::BindingNetConfig& cfg, std::span<const Segment> segments,
                   Optimizer* optimizer) {
  double sum = 0.0;
  std::size_t count = 0, examples = 0;
  for (const auto& seg : segments) {
    seg.validate(2);
    const auto& traj = seg.record->trajectory;
    for (std::size_t t = seg.begin; t + 1 < seg.end; ++t) {
      ++examples;
      Tensor loss;
      try {
        const auto net = bind(params, cfg, *seg.record);
        const Tensor pred = gnnmd_step(net, geometry::from_vec3(traj[t].positions));
        loss = mean(abs(pred - geometry::from_vec3(traj[t + 1].positions)));
      } catch (const DomainError&) {
        params.zero_grad();
        continue;
      }
      sum += loss.item();
      ++count;
      if (optimizer) {
        backward(loss);
        optimizer->step(params);
      }
    }
  }
  if (examples == 0) throw std::invalid_argument("GNN-MD: no snapshot pairs to train on");
  return count == 0 ? std::nan("") : sum / static_cast<double>(count);
}

RolloutResult gnnmd_rollout(const ParamSet& params, const model::BindingNetConfig& cfg, const io::ComplexRecord& record,
                            const Frame& x0, std::size_t count) {
  NoGradGuard no_grad;
  const auto net = bind(params, cfg, record);
  RolloutResult out;
  Tensor x = geometry::from_vec3(x0);
  for (std::size_t k = 0; k < count; ++k) {
    try {
      x = gnnmd_step(net, x);
    } catch (const DomainError& e) {
      out.truncated = true;
      out.reason = e.what();
      break;
    }
    bool finite = true;
    for (double v : x.values()) finite = finite && std::isfinite(v);
    if (!finite) {
      out.truncated = true;
      out.reason = "non-finite coordinates at step " + std::to_string(k + 1);
      break;
    }
    out.positions.push_back(geometry::to_vec3(x));
  }
  return out;
}

}  // namespace nmd::baselines
