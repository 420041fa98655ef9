#include "nmd/dynamics/integrators.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>

#include "nmd/errors.hpp"
#include "nmd/tensor/ops.hpp"

namespace nmd::dynamics {

void SolverConfig::validate() const {
  if (substeps == 0) throw std::invalid_argument("substeps must be at least 1");
}

void LangevinConfig::validate() const {
  if (!(gamma >= 0.0)) throw std::invalid_argument("damping gamma must be non-negative");
  if (!(temperature >= 0.0)) throw std::invalid_argument("temperature must be non-negative");
  if (!(kb > 0.0)) throw std::invalid_argument("Boltzmann constant must be positive");
}

namespace {

Tensor inverse_mass_column(std::span<const double> masses) {
  std::vector<double> inv(masses.size());
  for (std::size_t i = 0; i < masses.size(); ++i) {
    if (!(masses[i] > 0.0)) throw std::invalid_argument("non-positive mass at atom " + std::to_string(i));
    inv[i] = 1.0 / masses[i];
  }
  return Tensor::constant({masses.size(), 1}, std::move(inv));
}

bool all_finite(const Tensor& t) {
  return std::all_of(t.values().begin(), t.values().end(), [](double v) { return std::isfinite(v); });
}

void check_force(const Tensor& f) {
  const auto v = f.values();
  for (std::size_t k = 0; k < v.size(); ++k)
    if (!std::isfinite(v[k])) throw NonFiniteError("non-finite force on atom " + std::to_string(k / 3));
}

void check_times(double t0, std::span<const double> t_list) {
  double prev = t0;
  for (double t : t_list) {
    if (!(t > prev)) throw std::invalid_argument("time list must be strictly increasing and start after t0");
    prev = t;
  }
}

Tensor acceleration(const ForceFn& force, const Tensor& x, const Tensor& inv_mass) {
  Tensor f = force(x);
  check_force(f);
  return scale_rows(f, inv_mass);
}

// Shared Euler / Euler–Maruyama driver.
Rollout run_euler(const PhaseState& s0, std::span<const double> t_list, const ForceFn& force,
                  std::span<const double> masses, const SolverConfig& cfg, const LangevinConfig* lang) {
  cfg.validate();
  check_times(s0.t, t_list);
  const Tensor inv_mass = inverse_mass_column(masses);
  const std::size_t n = masses.size();

  const bool damped = lang && lang->gamma > 0.0;
  const bool noisy = lang && lang->gamma > 0.0 && lang->temperature > 0.0;
  std::optional<std::mt19937_64> rng;
  std::vector<double> sigma;
  if (lang) {
    lang->validate();
    rng.emplace(lang->seed);
    for (double m : masses) sigma.push_back(std::sqrt(2.0 * lang->gamma * lang->kb * lang->temperature / m));
  }
  std::normal_distribution<double> normal(0.0, 1.0);

  Rollout out;
  PhaseState s = s0;
  for (double t_next : t_list) {
    const std::size_t steps = steps_for_interval(t_next - s.t, cfg.substeps);
    const double dt = (t_next - s.t) / static_cast<double>(steps);
    try {
      for (std::size_t k = 0; k < steps; ++k) {
        const Tensor a = acceleration(force, s.x, inv_mass);
        Tensor x1 = s.x + s.v * dt;
        Tensor v1;
        if (damped && lang->exact_friction) {
          // Force kick, then the friction/noise part solved exactly over dt.
          const double c = std::exp(-lang->gamma * dt);
          v1 = (s.v + a * dt) * c;
          if (noisy) {
            std::vector<double> kick(3 * n);
            const double spread = std::sqrt(1.0 - c * c) / std::sqrt(2.0 * lang->gamma);
            for (std::size_t i = 0; i < 3 * n; ++i) kick[i] = sigma[i / 3] * spread * normal(*rng);
            v1 = v1 + Tensor::constant({n, 3}, std::move(kick));
          }
        } else if (damped) {
          v1 = s.v + (a - s.v * lang->gamma) * dt;
          if (noisy) {
            std::vector<double> kick(3 * n);
            const double root_dt = std::sqrt(dt);
            for (std::size_t i = 0; i < 3 * n; ++i) kick[i] = sigma[i / 3] * root_dt * normal(*rng);
            v1 = v1 + Tensor::constant({n, 3}, std::move(kick));
          }
        } else {
          v1 = s.v + a * dt;
        }
        if (!all_finite(x1) || !all_finite(v1)) throw NonFiniteError("state became non-finite");
        s.x = std::move(x1);
        s.v = std::move(v1);
      }
    } catch (const NonFiniteError& e) {
      out.truncated = true;
      out.reason = e.what();
    } catch (const DomainError& e) {
      out.truncated = true;
      out.reason = e.what();
    }
    if (out.truncated) break;
    s.t = t_next;
    out.positions.push_back(s.x);
    out.velocities.push_back(s.v);
    out.times.push_back(t_next);
  }
  out.last = s;
  return out;
}

}  // namespace

std::size_t steps_for_interval(double dt, std::size_t substeps) {
  const double raw = std::round(dt * static_cast<double>(substeps));
  return raw < 1.0 ? 1 : static_cast<std::size_t>(raw);
}

Derivative derivative(const PhaseState& state, const ForceFn& force, std::span<const double> masses) {
  return {state.v, acceleration(force, state.x, inverse_mass_column(masses))};
}

Rollout integrate_ode(const PhaseState& s0, std::span<const double> t_list, const ForceFn& force,
                      std::span<const double> masses, const SolverConfig& cfg) {
  return run_euler(s0, t_list, force, masses, cfg, nullptr);
}

Rollout integrate_sde(const PhaseState& s0, std::span<const double> t_list, const ForceFn& force,
                      std::span<const double> masses, const SolverConfig& cfg, const LangevinConfig& lang) {
  return run_euler(s0, t_list, force, masses, cfg, &lang);
}

AdjointResult adjoint_gradients(const PhaseState& s0, std::span<const double> t_list, const ForceFn& force,
                                std::span<const double> masses, const SolverConfig& cfg, const TrajectoryLoss& loss) {
  if (cfg.method != Method::euler) throw std::invalid_argument("adjoint gradients are only supported for the ODE solver");
  cfg.validate();
  check_times(s0.t, t_list);
  const Tensor inv_mass = inverse_mass_column(masses);
  const std::size_t n = masses.size();

  // Forward sweep without a graph, remembering only the step schedule.
  struct Interval {
    std::size_t steps;
    double dt;
  };
  std::vector<Interval> schedule;
  Rollout fwd;
  {
    NoGradGuard no_grad;
    const PhaseState start{s0.x.detach(), s0.v.detach(), s0.t};
    fwd = integrate_ode(start, t_list, force, masses, cfg);
    double t = s0.t;
    for (double te : fwd.times) {
      const std::size_t steps = steps_for_interval(te - t, cfg.substeps);
      schedule.push_back({steps, (te - t) / static_cast<double>(steps)});
      t = te;
    }
  }

  AdjointResult result;
  result.emitted = fwd.positions.size();
  result.truncated = fwd.truncated;
  result.grad_x0.assign(3 * n, 0.0);
  result.grad_v0.assign(3 * n, 0.0);
  if (fwd.positions.empty()) return result;

  // dL/dx at each emission.
  std::vector<Tensor> leaves;
  for (const auto& p : fwd.positions) leaves.push_back(Tensor::parameter(p.shape(), {p.values().begin(), p.values().end()}));
  const Tensor l = loss(leaves);
  result.loss = l.item();
  if (l.requires_grad()) backward(l);

  std::vector<double> lx(3 * n, 0.0), lv(3 * n, 0.0);
  std::vector<double> x(fwd.last.x.values().begin(), fwd.last.x.values().end());
  std::vector<double> v(fwd.last.v.values().begin(), fwd.last.v.values().end());
  std::vector<double> seed(3 * n), guess(3 * n), base(3 * n);

  for (std::size_t e = schedule.size(); e-- > 0;) {
    if (leaves[e].has_grad()) {
      const auto g = leaves[e].grad();
      for (std::size_t k = 0; k < 3 * n; ++k) lx[k] += g[k];
    }
    const double dt = schedule[e].dt;
    for (std::size_t step = 0; step < schedule[e].steps; ++step) {
      // Invert x_{k+1} = x_k + dt v_k, v_{k+1} = v_k + dt a(x_k):
      // x_k = x_{k+1} - dt v_{k+1} + dt² a(x_k), solved by fixed-point iteration.
      for (std::size_t k = 0; k < 3 * n; ++k) base[k] = x[k] - dt * v[k];
      guess = base;
      {
        NoGradGuard no_grad;
        for (int it = 0; it < 200; ++it) {
          const Tensor a = acceleration(force, Tensor::constant({n, 3}, guess), inv_mass);
          double change = 0.0, scale = 1.0;
          for (std::size_t k = 0; k < 3 * n; ++k) {
            const double next = base[k] + dt * dt * a.value(k);
            change = std::max(change, std::abs(next - guess[k]));
            scale = std::max(scale, std::abs(next));
            guess[k] = next;
          }
          if (change <= 1e-15 * scale) break;
        }
      }
      // Vector-Jacobian product of the force at the reconstructed x_k.
      const Tensor xk = Tensor::parameter({n, 3}, guess);
      const Tensor a = scale_rows(force(xk), inv_mass);
      for (std::size_t k = 0; k < 3 * n; ++k) seed[k] = dt * lv[k];
      if (a.requires_grad()) backward(a, seed);
      const auto gx = xk.has_grad() ? xk.grad() : std::span<const double>{};
      for (std::size_t k = 0; k < 3 * n; ++k) {
        const double vk = v[k] - dt * a.value(k);
        lv[k] += dt * lx[k];
        if (!gx.empty()) lx[k] += gx[k];
        v[k] = vk;
        x[k] = guess[k];
      }
    }
  }
  result.grad_x0 = lx;
  result.grad_v0 = lv;
  if (s0.x.requires_grad()) backward(s0.x, lx);
  if (s0.v.requires_grad()) backward(s0.v, lv);
  return result;
}

VerletState verlet_start(const Tensor& x, const Tensor& v, const ForceFn& force, std::span<const double> masses) {
  return {x, v, acceleration(force, x, inverse_mass_column(masses))};
}

VerletState velocity_verlet_step(const VerletState& s, const ForceFn& force, std::span<const double> masses,
                                 double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("time step must be positive");
  const Tensor inv_mass = inverse_mass_column(masses);
  VerletState out;
  out.x = s.x + s.v * dt + s.a * (0.5 * dt * dt);
  out.a = acceleration(force, out.x, inv_mass);
  out.v = s.v + (s.a + out.a) * (0.5 * dt);
  if (!all_finite(out.x) || !all_finite(out.v)) throw NonFiniteError("velocity Verlet state became non-finite");
  return out;
}

Rollout integrate_verlet(const PhaseState& s0, std::span<const double> t_list, const ForceFn& force,
                         std::span<const double> masses, std::size_t substeps) {
  if (substeps == 0) throw std::invalid_argument("substeps must be at least 1");
  check_times(s0.t, t_list);
  Rollout out;
  PhaseState s = s0;
  std::optional<VerletState> vs;
  try {
    vs = verlet_start(s0.x, s0.v, force, masses);
  } catch (const NonFiniteError& e) {
    out.truncated = true;
    out.reason = e.what();
  } catch (const DomainError& e) {
    out.truncated = true;
    out.reason = e.what();
  }
  if (!vs) {
    out.last = s;
    return out;
  }
  for (double t_next : t_list) {
    const std::size_t steps = steps_for_interval(t_next - s.t, substeps);
    const double dt = (t_next - s.t) / static_cast<double>(steps);
    try {
      for (std::size_t k = 0; k < steps; ++k) vs = velocity_verlet_step(*vs, force, masses, dt);
    } catch (const NonFiniteError& e) {
      out.truncated = true;
      out.reason = e.what();
    } catch (const DomainError& e) {
      out.truncated = true;
      out.reason = e.what();
    }
    if (out.truncated) break;
    s = {vs->x, vs->v, t_next};
    out.positions.push_back(s.x);
    out.velocities.push_back(s.v);
    out.times.push_back(t_next);
  }
  out.last = s;
  return out;
}

Tensor surrogate_velocity(const Tensor& learned, const Tensor& x_t, const Tensor& x_other, bool other_is_previous) {
  return learned + (other_is_previous ? x_t - x_other : x_other - x_t);
}

std::vector<double> unit_times(double t0, std::size_t count) {
  std::vector<double> out(count);
  for (std::size_t k = 0; k < count; ++k) out[k] = t0 + static_cast<double>(k + 1);
  return out;
}

}  // namespace nmd::dynamics
