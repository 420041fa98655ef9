#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nmd/tensor/params.hpp"
#include "nmd/tensor/tensor.hpp"

namespace nmd::dynamics {

/// Maps ligand coordinates [n,3] to forces [n,3].
using ForceFn = std::function<Tensor(const Tensor&)>;

/// Positions and velocities [n,3]; time in snapshot intervals.
struct PhaseState {
  Tensor x;
  Tensor v;
  double t = 0.0;
};

enum class Method { euler, euler_maruyama };
enum class GradientMode { backprop, adjoint };

struct SolverConfig {
  Method method = Method::euler;
  std::size_t substeps = 4;  // per snapshot interval
  GradientMode gradient = GradientMode::backprop;

  void validate() const;
};

struct LangevinConfig {
  double gamma = 0.0;        // 1 / snapshot interval
  double temperature = 0.0;  // K
  double kb = 1.0;
  std::uint64_t seed = 0;
  // Integrates the friction and noise terms exactly over each step (an
  // Ornstein–Uhlenbeck update) after the Euler force kick. When false, the
  // plain Euler–Maruyama update v += (F/m − γv)dt + sqrt(2γk_BT/m)·dW is used.
  bool exact_friction = true;

  void validate() const;
};

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Derivative {
  Tensor dx;
  Tensor dv;
};

/// (v, F(x)/m). Throws NonFiniteError naming the first atom whose force is
/// not finite.
Derivative derivative(const PhaseState& state, const ForceFn& force, std::span<const double> masses);

/// Positions emitted at the requested times. A blow-up (non-finite state or
/// a force evaluation outside the model's domain) stops the rollout early.
struct Rollout {
  std::vector<Tensor> positions;
  std::vector<Tensor> velocities;
  std::vector<double> times;
  PhaseState last;
  bool truncated = false;
  std::string reason;
};

/// Number of solver steps used between consecutive emission times.
std::size_t steps_for_interval(double dt, std::size_t substeps);

Rollout integrate_ode(const PhaseState& s0, std::span<const double> t_list, const ForceFn& force,
                      std::span<const double> masses, const SolverConfig& cfg);

Rollout integrate_sde(const PhaseState& s0, std::span<const double> t_list, const ForceFn& force,
                      std::span<const double> masses, const SolverConfig& cfg, const LangevinConfig& lang);

/// Scalar loss over the emitted positions of a rollout.
using TrajectoryLoss = std::function<Tensor(const std::vector<Tensor>& positions)>;

struct AdjointResult {
  double loss = 0.0;
  std::size_t emitted = 0;
  bool truncated = false;
  std::vector<double> grad_x0;
  std::vector<double> grad_v0;
};

/// Discrete adjoint of the explicit Euler solver. The forward pass keeps no
/// graph; the backward sweep reconstructs each earlier state from the later
/// one and applies one vector-Jacobian product of the force per step, so peak
/// memory does not depend on the number of steps. Parameter gradients
/// accumulate into the leaves reached by `force`, exactly as backward() would.
/// If s0.x or s0.v carry a graph, their gradients are propagated through it.
AdjointResult adjoint_gradients(const PhaseState& s0, std::span<const double> t_list, const ForceFn& force,
                                std::span<const double> masses, const SolverConfig& cfg, const TrajectoryLoss& loss);

struct VerletState {
  Tensor x;
  Tensor v;
  Tensor a;  // F(x)/m at x
};

/// x' = x + v dt + a dt²/2; v' = v + (a + a') dt/2.
VerletState velocity_verlet_step(const VerletState& s, const ForceFn& force, std::span<const double> masses,
                                 double dt);
VerletState verlet_start(const Tensor& x, const Tensor& v, const ForceFn& force, std::span<const double> masses);

/// Velocity-Verlet rollout with the same emission and truncation rules as
/// integrate_ode.
Rollout integrate_verlet(const PhaseState& s0, std::span<const double> t_list, const ForceFn& force,
                         std::span<const double> masses, std::size_t substeps);

/// Learned term plus coordinate momentum.
Tensor surrogate_velocity(const Tensor& learned, const Tensor& x_t, const Tensor& x_other, bool other_is_previous);

/// Time grid t0+1, t0+2, ..., t0+count.
std::vector<double> unit_times(double t0, std::size_t count);

}  // namespace nmd::dynamics
