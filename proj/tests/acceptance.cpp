// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/fmt/fmt.h>
#include <spdlog/spdlog.h>

#include "fixtures.hpp"
#include "nmd/dynamics/integrators.hpp"
#include "nmd/io/synthetic.hpp"
#include "nmd/tensor/grad_check.hpp"
#include "nmd/tensor/ops.hpp"
#include "nmd/train/trainer.hpp"

using namespace nmd;
using geometry::from_vec3;
using geometry::Mat3;
using geometry::to_vec3;
using geometry::Vec3;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string name;
  std::function<Outcome()> run;
};

double max_diff(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, (a[i] - b[i]).cwiseAbs().maxCoeff());
  return m;
}

double max_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a.value(i) - b.value(i)));
  return m;
}

double max_diff(const geometry::FrameBasis& a, const geometry::FrameBasis& b) {
  return std::max({(a.e1 - b.e1).cwiseAbs().maxCoeff(), (a.e2 - b.e2).cwiseAbs().maxCoeff(),
                   (a.e3 - b.e3).cwiseAbs().maxCoeff()});
}

std::vector<Vec3> rotate(const std::vector<Vec3>& v, const Mat3& r) {
  std::vector<Vec3> out;
  for (const auto& x : v) out.push_back(r * x);
  return out;
}

Vec3 random_vec(std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  return {u(rng), u(rng), u(rng)};
}

double norm(std::span<const double> a) { return std::sqrt(std::inner_product(a.begin(), a.end(), a.begin(), 0.0)); }

double rel_err(std::span<const double> a, std::span<const double> b) {
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return norm(d) / std::max(norm(b), 1e-300);
}

Tensor row(double x, double y, double z) { return Tensor::constant({1, 3}, {x, y, z}); }

dynamics::ForceFn harmonic() {
  return [](const Tensor& x) { return -x; };
}

// --- 1 ---------------------------------------------------------------------

Outcome equivariance_suite() {
  constexpr int kTrials = 20;
  std::mt19937_64 rng(101);
  double frames = 0.0;
  for (int t = 0; t < kTrials; ++t) {
    const Mat3 r = geometry::random_rotation(rng);
    const Vec3 shift = random_vec(rng, 10.0);
    const Vec3 a = random_vec(rng, 3.0), b = random_vec(rng, 3.0), c = random_vec(rng, 3.0);
    frames = std::max(frames, max_diff(geometry::atom_frame(r * a, r * b), geometry::atom_frame(a, b).rotated(r)));
    frames = std::max(frames, max_diff(geometry::complex_frame(r * a, r * b), geometry::complex_frame(a, b).rotated(r)));
    frames = std::max(frames, max_diff(geometry::backbone_frame(r * a + shift, r * b + shift, r * c + shift),
                                       geometry::backbone_frame(a, b, c).rotated(r)));
  }

  const auto cfg = fixtures::small_config();
  const auto params = model::init_bindingnet(cfg, 8);
  auto lig = fixtures::small_ligand();
  auto prot = fixtures::ring_protein();
  fixtures::centralize(lig, prot);

  const model::BindingNet base_net(params, cfg, lig.atomic_numbers, lig.masses, prot);
  const Tensor x = from_vec3(lig.positions);
  const auto base_lig = base_net.ligand(base_net.centralize(x).ligand);
  const auto base_lig_vec = to_vec3(base_lig.vec);
  const auto base_cplx = base_net.complex(x);
  const auto base_cplx_f = to_vec3(base_cplx.force);
  const auto base_force = model::predict_force(params, cfg, lig, prot);
  const double base_energy = model::predict_energy(params, cfg, lig, prot);

  double towers = 0.0, outputs = 0.0;
  for (int t = 0; t < kTrials; ++t) {
    auto l = lig;
    auto p = prot;
    const Mat3 r = geometry::random_rotation(rng);
    fixtures::move(l, p, r, random_vec(rng, 10.0));
    const model::BindingNet net(params, cfg, l.atomic_numbers, l.masses, p);
    const Tensor y = from_vec3(l.positions);
    const auto lo = net.ligand(net.centralize(y).ligand);
    towers = std::max({towers, max_diff(to_vec3(lo.vec), rotate(base_lig_vec, r)), max_diff(lo.h, base_lig.h)});
    towers = std::max(towers, max_diff(net.protein_h(), base_net.protein_h()));
    const auto co = net.complex(y);
    if (co.pair_count != base_cplx.pair_count) return {false, "complex tower pair count changed under a rigid motion"};
    towers = std::max(towers, max_diff(to_vec3(co.force), rotate(base_cplx_f, r)));
    if (co.pair_count > 0) towers = std::max(towers, max_diff(co.pair_h, base_cplx.pair_h));

    fixtures::centralize(l, p);
    outputs = std::max(outputs, max_diff(model::predict_force(params, cfg, l, p), rotate(base_force, r)));
    outputs = std::max(outputs, std::abs(model::predict_energy(params, cfg, l, p) - base_energy));
  }
  const bool pass = frames < 1e-9 && towers < 1e-6 && outputs < 1e-6;
  return {pass, fmt::format("{} motions each; frames {:.2e} (tol 1e-9), towers {:.2e}, force/energy {:.2e} (tol 1e-6)",
                            kTrials, frames, towers, outputs)};
}

// --- 2 ---------------------------------------------------------------------

Outcome reflection_antisymmetry() {
  const auto cfg = fixtures::small_config();
  const auto params = model::init_bindingnet(cfg, 8);
  auto lig = fixtures::small_ligand();
  auto prot = fixtures::ring_protein();
  fixtures::centralize(lig, prot);
  const auto direct = model::predict_force(params, cfg, lig, prot);
  fixtures::move(lig, prot, -Mat3::Identity(), Vec3::Zero());
  const auto mirrored = model::predict_force(params, cfg, lig, prot);
  const double gap = max_diff(mirrored, rotate(direct, -Mat3::Identity()));
  return {gap > 1e-3, fmt::format("|F(-x) - (-F(x))| = {:.3e} (need > 1e-3)", gap)};
}

// --- 3 ---------------------------------------------------------------------

Outcome gradient_correctness() {
  std::mt19937_64 rng(19);
  const double h = 1e-5;
  auto r = [&](Shape s, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> d(lo, hi);
    std::vector<double> v(numel(s));
    for (auto& e : v) e = d(rng);
    return Tensor::constant(s, v);
  };
  const auto w = r({2, 3});
  const auto pos = r({2, 3}, 0.5, 2.0);
  const auto m33 = r({3, 3});
  const auto v3 = r({4, 3});
  const auto u3 = r({4, 3});
  const auto col = r({4, 1});
  const auto w9 = r({4, 3, 3});
  const auto xa = r({4, 3}, -2.0, 2.0);
  const auto xb = r({4, 3}, -2.0, 2.0);
  const auto blk = r({4, 3, 2});
  ParamSet mlp_params;
  add_mlp(mlp_params, "net", {3, 8, 2}, rng);

  struct Case {
    const char* name;
    std::function<Tensor(const Tensor&)> f;
    Tensor x;
  };
  const std::vector<Case> cases{
      {"add", [&](const Tensor& t) { return sum((t + w) * w); }, r({2, 3})},
      {"sub", [&](const Tensor& t) { return sum((w - t) * w); }, r({2, 3})},
      {"mul", [&](const Tensor& t) { return sum(t * t * w); }, r({2, 3})},
      {"div", [&](const Tensor& t) { return sum(w / t); }, r({2, 3}, 0.5, 2.0)},
      {"div-broadcast", [&](const Tensor& t) { return sum(t / sum(pos)); }, r({2, 3})},
      {"scalar-ops", [&](const Tensor& t) { return sum(((t + 0.3) * 2.0 - 0.1) / 1.7 * w); }, r({2, 3})},
      {"neg", [&](const Tensor& t) { return sum(-t * w); }, r({2, 3})},
      {"abs", [&](const Tensor& t) { return sum(abs(t) * w); }, r({2, 3}, 0.2, 1.0)},
      {"exp", [&](const Tensor& t) { return sum(exp(t) * w); }, r({2, 3})},
      {"square", [&](const Tensor& t) { return sum(square(t) * w); }, r({2, 3})},
      {"sigmoid", [&](const Tensor& t) { return sum(sigmoid(t) * w); }, r({2, 3})},
      {"silu", [&](const Tensor& t) { return sum(silu(t) * w); }, r({2, 3})},
      {"mean", [&](const Tensor& t) { return mean(t * t); }, r({2, 3})},
      {"matmul", [&](const Tensor& t) { return sum(square(matmul(t, m33))); }, r({2, 3})},
      {"linear", [&](const Tensor& t) { return sum(square(linear(t, m33, sum_rows(w)))); }, r({2, 3})},
      {"sum_rows", [&](const Tensor& t) { return sum(square(sum_rows(t))); }, r({2, 3})},
      {"bmm", [&](const Tensor& t) { return sum(square(bmm(reshape(t, {2, 3, 1}), reshape(w, {2, 1, 3})))); },
       r({2, 3})},
      {"sum_axis1", [&](const Tensor& t) { return sum(square(sum_axis1(reshape(t, {2, 1, 3})))); }, r({2, 3})},
      {"gather_rows",
       [&](const Tensor& t) {
         const std::vector<std::size_t> idx{1, 0, 1};
         return sum(square(gather_rows(t, idx)));
       },
       r({2, 3})},
      {"mean_agg", [&](const Tensor& t) { return sum(square(mean_agg(t, {{0, 1}, {1}, {}}))); }, r({2, 3})},
      {"concat/slice", [&](const Tensor& t) { return sum(square(slice_cols(concat_cols(t, w), 2, 5))); }, r({2, 3})},
      {"stack_axis1", [&](const Tensor& t) { return sum(square(stack_axis1({t, w * t}))); }, r({2, 3})},
      {"scale_rows", [&](const Tensor& t) { return sum(square(scale_rows(u3, t))); }, col},
      {"cross_rows", [&](const Tensor& t) { return sum(cross_rows(t, u3) * v3); }, r({4, 3})},
      {"norm_rows", [&](const Tensor& t) { return sum(norm_rows(t) * col); }, r({4, 3})},
      {"normalize_rows", [&](const Tensor& t) { return sum(normalize_rows(t) * v3); }, r({4, 3})},
      {"atom_frames", [&](const Tensor& t) { return sum(geometry::atom_frames(t, xb) * w9); }, xa},
      {"backbone_frames", [&](const Tensor& t) { return sum(geometry::backbone_frames(xb, t, v3 * 3.0) * w9); }, xa},
      {"orthogonalize_frames",
       [&](const Tensor& t) { return sum(geometry::orthogonalize_frames(geometry::atom_frames(t, xb)) * w9); }, xa},
      {"scalarize_rows",
       [&](const Tensor& t) { return sum(square(geometry::scalarize_rows(geometry::atom_frames(xa, xb), t))); },
       blk},
      {"mlp", [&](const Tensor& t) { return sum(square(mlp(mlp_params, "net", t))); }, r({4, 3})},
  };

  double worst = 0.0;
  std::string worst_name;
  for (const auto& c : cases) {
    const double e = grad_check(c.f, c.x, h);
    if (!(e <= worst)) {
      worst = e;
      worst_name = c.name;
    }
  }

  // End-to-end loss of a d=8 BindingNet, in its parameters and coordinates.
  const auto cfg = fixtures::small_config();
  auto params = model::init_bindingnet(cfg, 10);
  auto lig = fixtures::small_ligand();
  auto prot = fixtures::ring_protein();
  fixtures::centralize(lig, prot);
  const Tensor x = from_vec3(lig.positions);
  std::vector<double> shifted(9);
  {
    const model::BindingNet net0(params, cfg, lig.atomic_numbers, lig.masses, prot);
    const Tensor f0 = net0.force(x);
    for (std::size_t i = 0; i < 9; ++i) shifted[i] = f0.value(i) + (i % 2 ? 0.02 : -0.02);
  }
  const Tensor target = Tensor::constant({3, 3}, shifted);
  const double net_params = grad_check(
      [&] {
        const model::BindingNet net(params, cfg, lig.atomic_numbers, lig.masses, prot);
        return mean(abs(net.force(x) - target));
      },
      params, h);
  const model::BindingNet net(params, cfg, lig.atomic_numbers, lig.masses, prot);
  const double net_x = grad_check([&](const Tensor& y) { return mean(abs(net.force(y) - target)); }, x, h);
  const double net_e = grad_check([&](const Tensor& y) { return net.energy(y); }, x, h);
  const double net_worst = std::max({net_params, net_x, net_e});

  const bool pass = worst < 1e-4 && net_worst < 1e-4;
  return {pass, fmt::format("{} ops, worst {:.2e} ({}); BindingNet d=8 params {:.2e}, coords {:.2e}, energy {:.2e}; "
                            "h=1e-5, tol 1e-4",
                            cases.size(), worst, worst_name, net_params, net_x, net_e)};
}

// --- 4 ---------------------------------------------------------------------

Outcome adjoint_equivalence() {
  auto cfg = fixtures::small_config(false);
  cfg.layers = 1;
  auto params = model::init_bindingnet(cfg, 3);
  auto lig = fixtures::small_ligand();
  auto prot = fixtures::ring_protein();
  fixtures::centralize(lig, prot);
  const model::BindingNet net(params, cfg, lig.atomic_numbers, lig.masses, prot);
  const dynamics::ForceFn force = [&](const Tensor& x) { return net.force(x); };

  const Tensor x0 = from_vec3(lig.positions), v0 = from_vec3(lig.velocities);
  std::vector<double> target(x0.values().begin(), x0.values().end());
  for (std::size_t i = 0; i < target.size(); ++i) target[i] += (i % 2 ? 0.05 : -0.04);
  const dynamics::TrajectoryLoss loss = [&](const std::vector<Tensor>& pos) {
    Tensor total = Tensor::scalar(0.0);
    for (const auto& p : pos) total = total + mean(abs(p - Tensor::constant(p.shape(), target)));
    return total * (1.0 / static_cast<double>(pos.size()));
  };
  const auto ts = dynamics::unit_times(0.0, 5);
  const dynamics::SolverConfig solver{dynamics::Method::euler, 1};

  params.zero_grad();
  const auto r = dynamics::integrate_ode({x0, v0, 0.0}, ts, force, lig.masses, solver);
  backward(loss(r.positions));
  const auto bp = params.flat_grads();
  params.zero_grad();
  dynamics::adjoint_gradients({x0, v0, 0.0}, ts, force, lig.masses, solver, loss);
  const auto ad = params.flat_grads();
  const double err = rel_err(ad, bp);

  // Peak live tensor memory over one gradient computation, for a fixed
  // horizon split into more and more steps.
  auto peak = [&](std::size_t substeps, dynamics::GradientMode mode) {
    params.zero_grad();
    const dynamics::PhaseState s0{x0, v0, 0.0};
    const auto base = memory_stats().live_bytes;
    reset_peak_memory();
    if (mode == dynamics::GradientMode::adjoint) {
      dynamics::adjoint_gradients(s0, ts, force, lig.masses, {dynamics::Method::euler, substeps}, loss);
    } else {
      const auto rr = dynamics::integrate_ode(s0, ts, force, lig.masses, {dynamics::Method::euler, substeps});
      backward(loss(rr.positions));
    }
    return memory_stats().peak_bytes - base;
  };
  std::vector<std::int64_t> adj;
  for (std::size_t s : {1, 4, 16}) adj.push_back(peak(s, dynamics::GradientMode::adjoint));
  const auto bp1 = peak(1, dynamics::GradientMode::backprop), bp16 = peak(16, dynamics::GradientMode::backprop);
  params.zero_grad();
  const bool flat = std::all_of(adj.begin(), adj.end(), [&](auto v) { return v == adj.front(); });

  return {err < 1e-3 && flat && norm(bp) > 0.0,
          fmt::format("relative gradient error {:.2e} (tol 1e-3); adjoint peak bytes at 5/20/80 steps {}/{}/{}; "
                      "backprop {} -> {}",
                      err, adj[0], adj[1], adj[2], bp1, bp16)};
}

// --- 5 ---------------------------------------------------------------------

double euler_error(std::size_t substeps) {
  std::vector<double> ts;
  for (int k = 1; k <= 20; ++k) ts.push_back(0.1 * k);
  const std::vector<double> m{1.0};
  const auto r = dynamics::integrate_ode({row(1, 0, 0), row(0, 0, 0), 0.0}, ts, harmonic(), m,
                                         {dynamics::Method::euler, substeps});
  double worst = 0.0;
  for (std::size_t k = 0; k < ts.size(); ++k)
    worst = std::max(worst, std::abs(r.positions[k].value(0) - std::cos(ts[k])));
  return worst;
}

Outcome integrator_orders() {
  std::vector<double> ratios;
  for (std::size_t s : {10, 20, 40, 80}) ratios.push_back(euler_error(s) / euler_error(2 * s));
  const bool first_order = std::all_of(ratios.begin(), ratios.end(), [](double q) { return q >= 1.7 && q <= 2.3; });

  // 10^4 steps of dt = 0.01 on m = k = 1, x0 = 1.
  const std::vector<double> m{1.0};
  const auto r = dynamics::integrate_verlet({row(1, 0, 0), row(0, 0, 0), 0.0}, dynamics::unit_times(0.0, 100),
                                            harmonic(), m, 100);
  double drift = 0.0;
  for (std::size_t k = 0; k < r.positions.size(); ++k) {
    const double x = r.positions[k].value(0), v = r.velocities[k].value(0);
    drift = std::max(drift, std::abs(0.5 * (x * x + v * v) - 0.5) / 0.5);
  }
  const bool bounded = r.positions.size() == 100 && drift < 1e-3;
  return {first_order && bounded,
          fmt::format("Euler error ratios per halving {:.3f} {:.3f} {:.3f} {:.3f} (need [1.7, 2.3]); "
                      "Verlet max relative energy drift {:.2e} over 10^4 steps (tol 1e-3)",
                      ratios[0], ratios[1], ratios[2], ratios[3], drift)};
}

// --- 6 ---------------------------------------------------------------------

Outcome langevin_physics() {
  const std::vector<double> m2{1.0, 2.0};
  const Tensor x0 = Tensor::constant({2, 3}, {0.3, 0.1, -0.2, 1.0, 0.5, 0.0});
  const Tensor v0 = Tensor::constant({2, 3}, {0.0, 0.2, 0.1, -0.3, 0.0, 0.4});
  const auto spring = [](const Tensor& x) { return x * -0.7; };
  const auto ts = dynamics::unit_times(0.0, 10);
  const auto ode = dynamics::integrate_ode({x0, v0, 0.0}, ts, spring, m2, {dynamics::Method::euler, 3});
  bool bitwise = true;
  for (bool exact : {true, false}) {
    dynamics::LangevinConfig lang;
    lang.seed = 99;
    lang.exact_friction = exact;
    const auto sde =
        dynamics::integrate_sde({x0, v0, 0.0}, ts, spring, m2, {dynamics::Method::euler_maruyama, 3}, lang);
    bitwise = bitwise && sde.positions.size() == ode.positions.size();
    for (std::size_t k = 0; bitwise && k < ode.positions.size(); ++k) {
      const auto a = sde.positions[k].values(), b = ode.positions[k].values();
      const auto va = sde.velocities[k].values(), vb = ode.velocities[k].values();
      bitwise = std::equal(a.begin(), a.end(), b.begin()) && std::equal(va.begin(), va.end(), vb.begin());
    }
  }

  // Three independent 1-D oscillators (one per axis), k = 1, m = 2, kT = 0.5.
  const double kt = 0.5, mass = 2.0;
  const std::vector<double> m{mass};
  dynamics::LangevinConfig lang;
  lang.gamma = 1.0;
  lang.temperature = kt;
  lang.kb = 1.0;
  lang.seed = 2024;
  std::vector<double> grid;
  for (int k = 1; k <= 20000; ++k) grid.push_back(0.1 * k);
  const auto r = dynamics::integrate_sde({row(0, 0, 0), row(0, 0, 0), 0.0}, grid, harmonic(), m,
                                         {dynamics::Method::euler_maruyama, 10}, lang);
  double s = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 500; k < r.velocities.size(); ++k)
    for (double v : r.velocities[k].values()) {
      s += v;
      sq += v * v;
      ++n;
    }
  const double mean_v = s / static_cast<double>(n);
  const double var = sq / static_cast<double>(n) - mean_v * mean_v;
  const double expected = kt / mass;
  const double rel = std::abs(var - expected) / expected;
  return {bitwise && r.velocities.size() == grid.size() && rel < 0.1,
          fmt::format("gamma=0,T=0 SDE {} the ODE; velocity variance {:.5f} vs kT/m {:.5f} ({:.1f}% off, tol 10%) "
                      "over t=2000",
                      bitwise ? "bitwise equals" : "DIFFERS FROM", var, expected, 100.0 * rel)};
}

// --- 7 ---------------------------------------------------------------------

Outcome metric_oracles() {
  using train::Frame;
  using train::Frames;
  const Frames pair(5, Frame{Vec3(0, 0, 0), Vec3(1, 0, 0)});
  const double perfect = train::metric_stability(pair, pair);
  const Frames violated(5, Frame{Vec3(0, 0, 0), Vec3(1.6, 0, 0)});
  const double single = train::metric_stability(violated, pair);

  // Two two-atom trajectories; the first breaks its pair in half of the
  // snapshots, the second never does.
  const Frames t4(4, Frame{Vec3(0, 0, 0), Vec3(1, 0, 0)});
  Frames p4 = t4;
  p4[0][1] = Vec3(1.6, 0, 0);
  p4[1][1] = Vec3(0, 1.7, 0);
  const auto pooled = train::aggregate("oracle", "multi", 0.5,
                                       {{"a", 2, 4, 0.0, 0.0, train::metric_stability(p4, t4)},
                                        {"b", 2, 4, 0.0, 0.0, train::metric_stability(t4, t4)}});

  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  Frames pred(4, Frame(3)), truth(4, Frame(3));
  for (auto* fs : {&pred, &truth})
    for (auto& f : *fs)
      for (auto& x : f) x = Vec3(g(rng), g(rng), g(rng));
  double abs_sum = 0.0, sq_sum = 0.0;
  for (std::size_t k = 0; k < 4; ++k)
    for (std::size_t i = 0; i < 3; ++i)
      for (int c = 0; c < 3; ++c) {
        const double d = pred[k][i][c] - truth[k][i][c];
        abs_sum += std::abs(d);
        sq_sum += d * d;
      }
  const auto rec = train::metric_recovery(pred, truth);
  const double mae_err = std::abs(rec.mae - abs_sum / 36.0), mse_err = std::abs(rec.mse - sq_sum / 36.0);

  std::vector<Tensor> pt, tt;
  for (std::size_t k = 0; k < 4; ++k) {
    pt.push_back(from_vec3(pred[k]));
    tt.push_back(from_vec3(truth[k]));
  }
  const double loss_err = std::abs(train::loss_trajectory_mae(pt, tt).item() - abs_sum / 36.0);

  const bool pass = perfect == 0.0 && single == 100.0 && pooled.stability == 25.0 && mae_err < 1e-12 &&
                    mse_err < 1e-12 && loss_err < 1e-12;
  return {pass, fmt::format("stability perfect {}%, single 0.6 A violation {}%, half-violating two-pair {}%; "
                            "MAE/MSE/loss deviations {:.1e}/{:.1e}/{:.1e} (tol 1e-12)",
                            perfect, single, pooled.stability, mae_err, mse_err, loss_err)};
}

// --- 8 ---------------------------------------------------------------------

io::ComplexRecord harmonic_toy(std::size_t snapshots = 100) {
  io::SyntheticSpec s;
  s.kind = io::ForceFieldKind::harmonic_tether;
  s.id = "harmonic_toy";
  s.atoms = 2;
  s.sites = 4;
  s.snapshots = snapshots;
  s.seed = 1;
  return io::generate_synthetic(s);
}

Outcome end_to_end_learning() {
  const train::Dataset ds{harmonic_toy()};
  train::TrainConfig cfg;
  cfg.method = train::MethodKind::neuralmd_ode;
  cfg.model.hidden = 16;
  cfg.model.layers = 2;
  cfg.epochs = 500;
  cfg.horizon = 5;
  cfg.substeps = 4;
  cfg.split = train::SplitKind::single;
  cfg.train_fraction = 0.8;
  cfg.seed = 1;
  const auto result = train::train(cfg, ds);
  if (result.aborted) return {false, "training aborted: " + result.abort_reason};
  const double drop = 1.0 - result.train_curve.back() / result.initial_loss;
  const auto model = train::evaluate(train::make_predictor(cfg, result.params), "neuralmd-ode", ds, result.split, cfg);
  const auto ballistic = train::evaluate(train::ballistic_predictor(cfg.velocity), "ballistic", ds, result.split, cfg);
  const bool pass = drop >= 0.5 && model.mae < ballistic.mae && model.truncated == 0;
  return {pass, fmt::format("train loss {:.5f} -> {:.5f} ({:.1f}% drop, need 50%); test MAE {:.4f} vs ballistic {:.4f} "
                            "over {} test snapshots",
                            result.initial_loss, result.train_curve.back(), 100.0 * drop, model.mae, ballistic.mae,
                            model.trajectories.at(0).snapshots)};
}

// --- 9, 10 -----------------------------------------------------------------

constexpr train::MethodKind kMethods[] = {train::MethodKind::neuralmd_ode, train::MethodKind::neuralmd_sde,
                                          train::MethodKind::verletmd, train::MethodKind::gnnmd,
                                          train::MethodKind::denoisingld};

train::TrainConfig harness_config(train::MethodKind method) {
  train::TrainConfig c;
  c.method = method;
  c.model.hidden = 8;
  c.model.layers = 1;
  c.model.rbf_count = 8;
  c.epochs = 100;
  c.horizon = 3;
  c.substeps = 2;
  c.optimizer.lr = 1e-3;
  c.noise_levels = 4;
  c.steps_per_level = 3;
  c.seed = 11;
  return c;
}

struct HarnessRun {
  train::TrainResult result;
  train::MetricReport report;
};

HarnessRun harness_run(train::MethodKind method, const train::Dataset& ds) {
  const auto cfg = harness_config(method);
  auto result = train::train(cfg, ds);
  auto report = train::evaluate(train::make_predictor(cfg, result.params), train::to_string(method), ds, result.split, cfg);
  return {std::move(result), std::move(report)};
}

Outcome harness_parity() {
  const train::Dataset ds{harmonic_toy()};
  std::vector<train::MetricReport> reports;
  std::string problems;
  for (auto method : kMethods) {
    const auto run = harness_run(method, ds);
    const auto& r = run.report;
    if (run.result.aborted) problems += fmt::format(" {} aborted ({});", r.method, run.result.abort_reason);
    if (!std::isfinite(r.mae) || !std::isfinite(r.mse) || !std::isfinite(r.fps) || r.stability < 0.0 ||
        r.stability > 100.0)
      problems += fmt::format(" {} has out-of-range metrics;", r.method);
    const auto back = nlohmann::json(r).get<train::MetricReport>();
    if (!back.same_accuracy(r)) problems += fmt::format(" {} report does not round trip;", r.method);
    reports.push_back(r);
  }
  for (const auto& r : reports)
    if (r.split != reports[0].split || r.delta != reports[0].delta || r.trajectories.size() != 1 ||
        r.trajectories[0].snapshots != reports[0].trajectories[0].snapshots)
      problems += fmt::format(" {} was scored on a different split;", r.method);

  std::string table;
  for (const auto& r : reports)
    table += fmt::format(" {} MAE {:.4f} stab {:.1f}%;", r.method, r.mae, r.stability);
  // Soft check: logged, never fails the criterion.
  const double nmd_stab = reports[0].stability, gnn_stab = reports[3].stability;
  if (nmd_stab <= gnn_stab)
    spdlog::info("stability ordering holds: neuralmd-ode {:.2f}% <= gnnmd {:.2f}%", nmd_stab, gnn_stab);
  else
    spdlog::warn("stability ordering does not hold on the toy: neuralmd-ode {:.2f}% > gnnmd {:.2f}%", nmd_stab,
                 gnn_stab);
  return {problems.empty(),
          fmt::format("{} test snapshots each;{} soft check NeuralMD <= GNN-MD stability: {}{}",
                      reports[0].trajectories.at(0).snapshots, table, nmd_stab <= gnn_stab ? "holds" : "does not hold",
                      problems.empty() ? "" : ";" + problems)};
}

Outcome determinism() {
  const train::Dataset single{harmonic_toy(40)};
  std::vector<std::string> differ;
  for (auto method : kMethods) {
    const auto a = harness_run(method, single), b = harness_run(method, single);
    const bool same = a.result.train_curve == b.result.train_curve &&
                      a.result.params.flat_values() == b.result.params.flat_values() &&
                      a.report.same_accuracy(b.report);
    if (!same) differ.push_back(train::to_string(method));
  }

  // Multi-trajectory split: the shuffle and SDE noise depend on the seed only.
  train::Dataset multi;
  for (std::uint64_t k = 0; k < 5; ++k) {
    io::SyntheticSpec s;
    s.atoms = 2;
    s.sites = 4;
    s.snapshots = 12;
    s.temperature = 0.05;
    s.seed = 30 + k;
    s.id = "multi_" + std::to_string(k);
    multi.push_back(io::generate_synthetic(s));
  }
  auto cfg = harness_config(train::MethodKind::neuralmd_sde);
  cfg.split = train::SplitKind::multi;
  cfg.fractions = {0.6, 0.2, 0.2};
  cfg.epochs = 5;
  const auto ra = train::train(cfg, multi), rb = train::train(cfg, multi);
  const auto ea = train::evaluate(train::make_predictor(cfg, ra.params), "a", multi, ra.split, cfg);
  const auto eb = train::evaluate(train::make_predictor(cfg, rb.params), "a", multi, rb.split, cfg);
  if (!(ra.split.test == rb.split.test && ra.train_curve == rb.train_curve && ra.val_curve == rb.val_curve &&
        ra.params.flat_values() == rb.params.flat_values() && ea.same_accuracy(eb)))
    differ.push_back("neuralmd-sde (multi split)");

  std::string list;
  for (const auto& d : differ) list += " " + d;
  return {differ.empty(), differ.empty() ? "5 methods (single split) and neuralmd-sde (multi split): loss curves, "
                                           "checkpoints and metrics identical across repeated runs"
                                         : "runs differ for:" + list};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {"equivariance-suite", equivariance_suite}, {"reflection-antisymmetry", reflection_antisymmetry},
      {"gradient-correctness", gradient_correctness}, {"adjoint-equivalence", adjoint_equivalence},
      {"integrator-orders", integrator_orders},   {"langevin-physics", langevin_physics},
      {"metric-oracles", metric_oracles},         {"end-to-end-learning", end_to_end_learning},
      {"method-harness-parity", harness_parity},  {"determinism", determinism},
  };

  std::vector<std::string> only;
  CLI::App app{"Runs the acceptance criteria and prints one PASS/FAIL line per criterion", "nmd_acceptance"};
  app.add_option("criteria", only, "Run only these criteria (by name)");
  CLI11_PARSE(app, argc, argv);
  for (const auto& name : only)
    if (std::none_of(criteria.begin(), criteria.end(), [&](const Criterion& c) { return c.name == name; })) {
      std::cerr << "unknown criterion '" << name << "'\n";
      return 2;
    }
  spdlog::set_level(spdlog::level::warn);

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto& c = criteria[i];
    if (!only.empty() && std::find(only.begin(), only.end(), c.name) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += o.pass ? 0 : 1;
    std::cout << fmt::format("{} [{:2}] {}: {} ({:.1f} s)", o.pass ? "PASS" : "FAIL", i + 1, c.name, o.detail, secs)
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
