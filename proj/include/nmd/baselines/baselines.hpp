#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "nmd/baselines/common.hpp"

namespace nmd::baselines {

// Each *_epoch function makes one pass over the segments. With an optimizer
// it takes one update per training example (batch of one); with nullptr it
// only evaluates. It returns the mean example loss.

// VerletMD: BindingNet energy, force = -dE/dx, velocity-Verlet rollouts.

struct VerletMDOptions {
  double fd_step = 1e-3;     // Å, central difference of the energy during training
  std::size_t substeps = 4;  // Verlet steps per snapshot interval in rollouts
};

/// Force matching: the central-difference force -dE/dx divided by the mass is
/// compared to x_{t+1} - 2x_t + x_{t-1} for every interior snapshot.
double verletmd_epoch(ParamSet& params, const model::BindingNetConfig& cfg, std::span<const Segment> segments,
                      Optimizer* optimizer, const VerletMDOptions& options);

/// -dE/dx by reverse-mode differentiation. Clears the parameter gradients of
/// the network, so it must not run between backward() and an optimizer step.
Tensor verletmd_force(const model::BindingNet& net, const Tensor& x);

RolloutResult verletmd_rollout(const ParamSet& params, const model::BindingNetConfig& cfg,
                               const io::ComplexRecord& record, const Frame& x0, const Frame& v0, std::size_t count,
                               const VerletMDOptions& options);

// GNN-MD: the force output is read as the displacement to the next snapshot.

double gnnmd_epoch(ParamSet& params, const model::BindingNetConfig& cfg, std::span<const Segment> segments,
                   Optimizer* optimizer);

Tensor gnnmd_step(const model::BindingNet& net, const Tensor& x);

RolloutResult gnnmd_rollout(const ParamSet& params, const model::BindingNetConfig& cfg, const io::ComplexRecord& record,
                            const Frame& x0, std::size_t count);

// DenoisingLD: score matching on the next snapshot, annealed Langevin sampling.

struct NoiseSchedule {
  std::vector<double> sigmas;  // strictly descending, all > 0
  std::size_t steps_per_level = 5;
  double step_scale = 2e-3;  // step size at level l is step_scale * sigma_l^2

  void validate() const;
  double step_size(std::size_t level) const;
  // `levels` geometric levels from `first` down to `last`.
  static NoiseSchedule geometric(double first = 1.0, double last = 0.01, std::size_t levels = 10);
};

inline constexpr std::size_t kDenoisingFeatures = 2;

/// Registers the conditioning input (`lig.cond`) and the displacement gate
/// (`dld.gate`, zero-initialized last layer).
void add_denoising_heads(ParamSet& params, const model::BindingNetConfig& cfg, std::uint64_t seed);

/// Network output o for noisy coordinates x conditioned on the previous
/// snapshot; the score estimate is o / sigma^2. Atom features are
/// |x_i - prev_i| and log sigma; the gate scales the displacement x - prev.
Tensor denoising_output(const model::BindingNet& net, const ParamSet& params, const Tensor& x, const Tensor& prev,
                        double sigma);

/// Denoising score matching: x~ = x_{t+1} + sigma·eps with one random level
/// per example, loss mean (o/sigma + eps)^2. Noise is drawn from
/// mix_seed(seed, epoch, ...).
double denoisingld_epoch(ParamSet& params, const model::BindingNetConfig& cfg, std::span<const Segment> segments,
                         Optimizer* optimizer, const NoiseSchedule& schedule, std::uint64_t seed, std::size_t epoch);

/// Each transition starts from the previous prediction and runs
/// x <- x + (eps_l/2)·score + sqrt(eps_l)·N(0,I) over every level.
RolloutResult denoisingld_rollout(const ParamSet& params, const model::BindingNetConfig& cfg,
                                  const io::ComplexRecord& record, const Frame& x0, std::size_t count,
                                  const NoiseSchedule& schedule, std::uint64_t seed);

}  // namespace nmd::baselines
