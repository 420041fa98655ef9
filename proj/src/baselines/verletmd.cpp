#include <cmath>

#include "nmd/baselines/baselines.hpp"
#include "nmd/dynamics/integrators.hpp"
#include "nmd/errors.hpp"
#include "nmd/tensor/ops.hpp"

namespace nmd::baselines {

namespace {

void discard_grads(const ParamSet& params) {
  for (const auto& [name, t] : params.tensors()) {
    Tensor handle = t;
    handle.zero_grad();
  }
}

}  // namespace

double verletmd_epoch(ParamSet& params, const model::BindingNetConfig& cfg, std::span<const Segment> segments,
                      Optimizer* optimizer, const VerletMDOptions& options) {
  if (!(options.fd_step > 0.0)) throw std::invalid_argument("VerletMD: fd_step must be positive");
  double sum = 0.0;
  std::size_t count = 0, examples = 0;
  for (const auto& seg : segments) {
    seg.validate(3);
    const auto& traj = seg.record->trajectory;
    const std::size_t n = seg.record->atom_count();
    for (std::size_t t = seg.begin + 1; t + 1 < seg.end; ++t) {
      const auto& x = traj[t].positions;
      ++examples;
      Tensor loss = Tensor::scalar(0.0);
      try {
        const auto net = bind(params, cfg, *seg.record);
        for (std::size_t i = 0; i < n; ++i) {
          for (int c = 0; c < 3; ++c) {
            const double accel = traj[t + 1].positions[i][c] - 2.0 * x[i][c] + traj[t - 1].positions[i][c];
            auto plus = x, minus = x;
            plus[i][c] += options.fd_step;
            minus[i][c] -= options.fd_step;
            const Tensor force = (net.energy(geometry::from_vec3(minus)) - net.energy(geometry::from_vec3(plus))) *
                                 (0.5 / options.fd_step);
            loss = loss + abs(force * (1.0 / seg.record->masses[i]) - accel);
          }
        }
      } catch (const DomainError&) {
        params.zero_grad();
        continue;
      }
      loss = loss * (1.0 / static_cast<double>(3 * n));
      sum += loss.item();
      ++count;
      if (optimizer) {
        backward(loss);
        optimizer->step(params);
      }
    }
  }
  if (examples == 0) throw std::invalid_argument("VerletMD: no interior snapshots to train on");
  return count == 0 ? std::nan("") : sum / static_cast<double>(count);
}

Tensor verletmd_force(const model::BindingNet& net, const Tensor& x) {
  const Tensor leaf = Tensor::parameter(x.shape(), {x.values().begin(), x.values().end()});
  const Tensor energy = net.energy(leaf);
  std::vector<double> f(x.numel(), 0.0);
  if (energy.requires_grad()) {
    backward(energy);
    if (leaf.has_grad())
      for (std::size_t k = 0; k < f.size(); ++k) f[k] = -leaf.grad()[k];
    discard_grads(net.params());
  }
  return Tensor::constant(x.shape(), std::move(f));
}

RolloutResult verletmd_rollout(const ParamSet& params, const model::BindingNetConfig& cfg,
                               const io::ComplexRecord& record, const Frame& x0, const Frame& v0, std::size_t count,
                               const VerletMDOptions& options) {
  const auto net = bind(params, cfg, record);
  const dynamics::ForceFn force = [&](const Tensor& x) { return verletmd_force(net, x); };
  const auto r = dynamics::integrate_verlet({geometry::from_vec3(x0), geometry::from_vec3(v0), 0.0},
                                            dynamics::unit_times(0.0, count), force, record.masses, options.substeps);
  RolloutResult out;
  for (const auto& p : r.positions) out.positions.push_back(geometry::to_vec3(p));
  out.truncated = r.truncated;
  out.reason = r.reason;
  return out;
}

}  // namespace nmd::baselines
