#include "nmd/train/trainer.hpp"

#include <chrono>
#include <charconv>
#include <cmath>
#include <limits>
#include <memory>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "nmd/errors.hpp"
#include "nmd/tensor/ops.hpp"

namespace nmd::train {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string exact(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

bool use_recorded(const io::ComplexRecord& record, VelocitySource source) {
  if (source == VelocitySource::recorded) {
    if (!record.has_velocities())
      throw std::invalid_argument("record " + record.id + " has no velocities but the config requires them");
    return true;
  }
  return source == VelocitySource::automatic && record.has_velocities();
}

RolloutResult from_rollout(const dynamics::Rollout& r) {
  RolloutResult out;
  for (const auto& p : r.positions) out.positions.push_back(geometry::to_vec3(p));
  out.truncated = r.truncated;
  out.reason = r.reason;
  return out;
}

std::vector<Tensor> target_tensors(const io::ComplexRecord& record, std::size_t first, std::size_t count) {
  std::vector<Tensor> out;
  for (std::size_t k = 0; k < count; ++k) out.push_back(geometry::from_vec3(record.trajectory[first + k].positions));
  return out;
}

dynamics::LangevinConfig langevin(const TrainConfig& cfg, double kt, bool noise, std::uint64_t seed) {
  dynamics::LangevinConfig l;
  l.gamma = cfg.gamma;
  l.kb = cfg.kb;
  l.temperature = noise ? kt / cfg.kb : 0.0;
  l.seed = seed;
  l.exact_friction = cfg.exact_friction;
  return l;
}

double stored_kt(const ParamSet& params) {
  const auto it = params.meta().find("train.kt");
  return it == params.meta().end() ? 0.0 : std::stod(it->second);
}

}  // namespace

std::uint64_t id_hash(const std::string& id) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : id) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

ParamSet init_method_params(const TrainConfig& cfg) {
  cfg.validate();
  auto m = cfg.model;
  m.surrogate_tower = is_neuralmd(cfg.method);
  auto params = model::init_bindingnet(m, cfg.seed);
  if (cfg.method == MethodKind::denoisingld) baselines::add_denoising_heads(params, m, cfg.seed);
  params.meta()["train.method"] = to_string(cfg.method);
  params.meta()["train.config"] = nlohmann::json(cfg).dump();
  return params;
}

TrainConfig config_from_checkpoint(const ParamSet& params) {
  const auto it = params.meta().find("train.config");
  if (it == params.meta().end()) throw std::invalid_argument("checkpoint has no training config");
  return nlohmann::json::parse(it->second).get<TrainConfig>();
}

double kinetic_temperature(std::span<const Segment> segments) {
  double sum = 0.0;
  std::size_t dofs = 0;
  for (const auto& seg : segments) {
    const auto& rec = *seg.record;
    for (std::size_t t = seg.begin; t < seg.end; ++t) {
      if (!rec.has_velocities() && t == 0) continue;
      for (std::size_t i = 0; i < rec.atom_count(); ++i) {
        const geometry::Vec3 v = rec.has_velocities() ? rec.trajectory[t].velocities[i]
                                            : geometry::Vec3(rec.trajectory[t].positions[i] - rec.trajectory[t - 1].positions[i]);
        sum += rec.masses[i] * v.squaredNorm();
        dofs += 3;
      }
    }
  }
  return dofs == 0 ? 0.0 : sum / static_cast<double>(dofs);
}

Tensor start_velocity(const model::BindingNet& net, const io::ComplexRecord& record, std::size_t t,
                      VelocitySource source, bool next_allowed, std::size_t end) {
  if (use_recorded(record, source)) return geometry::from_vec3(record.trajectory[t].velocities);
  const Tensor x = geometry::from_vec3(record.trajectory[t].positions);
  const Tensor learned = net.config().surrogate_tower ? net.surrogate_term(x) : Tensor::zeros(x.shape());
  if (next_allowed && t + 1 < end)
    return dynamics::surrogate_velocity(learned, x, geometry::from_vec3(record.trajectory[t + 1].positions), false);
  if (t == 0) throw std::invalid_argument("surrogate velocity at snapshot 0 needs the next snapshot");
  return dynamics::surrogate_velocity(learned, x, geometry::from_vec3(record.trajectory[t - 1].positions), true);
}

double neuralmd_epoch(const TrainConfig& cfg, ParamSet& params, std::span<const Segment> segments,
                      Optimizer* optimizer, std::size_t epoch, double kt) {
  const auto mcfg = model::load_config(params);
  const auto solver = cfg.solver();
  const bool adjoint = optimizer && solver.gradient == dynamics::GradientMode::adjoint;
  double sum = 0.0;
  std::size_t used = 0, examples = 0;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    const auto& seg = segments[s];
    seg.validate(2);
    const auto& rec = *seg.record;
    for (std::size_t t = seg.begin; t + 1 < seg.end; ++t, ++examples) {
      const std::size_t last = cfg.horizon == 0 ? seg.end - 1 : std::min(seg.end - 1, t + cfg.horizon);
      const std::size_t count = last - t;
      const auto net = baselines::bind(params, mcfg, rec);
      const dynamics::ForceFn force = [&net](const Tensor& x) { return net.force(x); };
      const dynamics::PhaseState s0{geometry::from_vec3(rec.trajectory[t].positions),
                                    start_velocity(net, rec, t, cfg.velocity, true, seg.end), static_cast<double>(t)};
      const auto times = dynamics::unit_times(static_cast<double>(t), count);
      const auto targets = target_tensors(rec, t + 1, count);
      double loss_value = kNaN;
      try {
        if (adjoint) {
          const dynamics::TrajectoryLoss loss = [&](const std::vector<Tensor>& pos) {
            return loss_trajectory_mae(pos, std::vector<Tensor>(targets.begin(), targets.begin() + pos.size()));
          };
          const auto a = dynamics::adjoint_gradients(s0, times, force, rec.masses, solver, loss);
          if (a.emitted > 0) loss_value = a.loss;
        } else {
          const auto r = solver.method == dynamics::Method::euler
                             ? dynamics::integrate_ode(s0, times, force, rec.masses, solver)
                             : dynamics::integrate_sde(s0, times, force, rec.masses, solver,
                                                       langevin(cfg, kt, cfg.train_noise,
                                                                baselines::mix_seed(cfg.seed, epoch, s, t)));
          if (!r.positions.empty()) {
            const Tensor loss = loss_trajectory_mae(
                r.positions, std::vector<Tensor>(targets.begin(), targets.begin() + r.positions.size()));
            loss_value = loss.item();
            if (optimizer) backward(loss);
          }
        }
      } catch (const DomainError& e) {
        spdlog::debug("start {} of {}: {}", t, rec.id, e.what());
      }
      if (!std::isfinite(loss_value)) {
        params.zero_grad();
        continue;
      }
      sum += loss_value;
      ++used;
      if (optimizer) optimizer->step(params);
    }
  }
  if (examples == 0) throw std::invalid_argument("no training windows with at least two snapshots");
  return used == 0 ? kNaN : sum / static_cast<double>(used);
}

double run_epoch(const TrainConfig& cfg, ParamSet& params, std::span<const Segment> segments, Optimizer* optimizer,
                 std::size_t epoch, double kt) {
  if (segments.empty()) throw std::invalid_argument("empty split: nothing to train or evaluate on");
  std::optional<NoGradGuard> no_grad;
  if (!optimizer) no_grad.emplace();
  const auto mcfg = model::load_config(params);
  switch (cfg.method) {
    case MethodKind::neuralmd_ode:
    case MethodKind::neuralmd_sde: return neuralmd_epoch(cfg, params, segments, optimizer, epoch, kt);
    case MethodKind::verletmd: return baselines::verletmd_epoch(params, mcfg, segments, optimizer, cfg.verletmd);
    case MethodKind::gnnmd: return baselines::gnnmd_epoch(params, mcfg, segments, optimizer);
    case MethodKind::denoisingld:
      return baselines::denoisingld_epoch(params, mcfg, segments, optimizer, cfg.noise_schedule(), cfg.seed, epoch);
  }
  throw std::logic_error("unhandled method");
}

std::size_t select_checkpoint(SplitKind kind, std::span<const double> train_curve, std::span<const double> val_curve) {
  const auto curve = kind == SplitKind::single ? train_curve : val_curve;
  std::optional<std::size_t> best;
  for (std::size_t e = 0; e < curve.size(); ++e)
    if (std::isfinite(curve[e]) && (!best || curve[e] < curve[*best])) best = e;
  if (!best) throw std::invalid_argument("no finite loss to select a checkpoint from");
  return *best;
}

Split make_split(const TrainConfig& cfg, const Dataset& dataset) {
  if (dataset.empty()) throw std::invalid_argument("empty dataset");
  if (cfg.split == SplitKind::multi) return split_multi(dataset.size(), cfg.fractions, cfg.seed);
  const std::size_t n = dataset.front().snapshot_count();
  for (const auto& rec : dataset)
    if (rec.snapshot_count() != n)
      throw std::invalid_argument("single-trajectory split needs equal snapshot counts (" + rec.id + " has " +
                                  std::to_string(rec.snapshot_count()) + ", expected " + std::to_string(n) + ")");
  return split_single(n, cfg.train_fraction);
}

TrainResult train(const TrainConfig& cfg, const Dataset& dataset) {
  cfg.validate();
  TrainResult result;
  result.split = make_split(cfg, dataset);
  std::vector<Segment> train_segs, val_segs;
  if (cfg.split == SplitKind::single) {
    for (const auto& rec : dataset) train_segs.push_back({&rec, 0, result.split.train.size()});
  } else {
    for (std::size_t i : result.split.train) train_segs.push_back({&dataset[i], 0, dataset[i].snapshot_count()});
    for (std::size_t i : result.split.val) val_segs.push_back({&dataset[i], 0, dataset[i].snapshot_count()});
  }
  result.kt = cfg.method != MethodKind::neuralmd_sde ? 0.0
              : cfg.temperature < 0.0                 ? kinetic_temperature(train_segs)
                                                      : cfg.temperature * cfg.kb;

  ParamSet params = init_method_params(cfg);
  params.meta()["train.kt"] = exact(result.kt);
  const ParamSet initial = params.clone();
  Optimizer optimizer(cfg.optimizer);
  result.initial_loss = run_epoch(cfg, params, train_segs, nullptr, 0, result.kt);
  spdlog::info("{}: initial train loss {:.6g}", to_string(cfg.method), result.initial_loss);

  std::optional<ParamSet> best;
  double best_metric = 0.0;
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    const double loss = run_epoch(cfg, params, train_segs, &optimizer, e + 1, result.kt);
    result.train_curve.push_back(loss);
    if (!std::isfinite(loss)) {
      result.aborted = true;
      result.abort_reason = "non-finite training loss at epoch " + std::to_string(e + 1);
      spdlog::warn("{}; keeping the best checkpoint so far", result.abort_reason);
      break;
    }
    double metric = loss;
    if (cfg.split == SplitKind::multi) {
      metric = run_epoch(cfg, params, val_segs, nullptr, e + 1, result.kt);
      result.val_curve.push_back(metric);
    }
    if (std::isfinite(metric) && (!best || metric < best_metric)) {
      best_metric = metric;
      best = params.clone();
      result.best_epoch = e;
    }
    spdlog::debug("epoch {} train {:.6g}{}", e + 1, loss,
                  cfg.split == SplitKind::multi ? " val " + exact(metric) : std::string());
  }
  result.params = best ? std::move(*best) : initial.clone();
  result.params.meta()["train.best_epoch"] = result.best_epoch ? std::to_string(*result.best_epoch + 1) : "0";
  return result;
}

Predictor make_predictor(const TrainConfig& cfg, const ParamSet& params) {
  auto shared = std::make_shared<const ParamSet>(params.clone());
  const double kt = stored_kt(params);
  return [cfg, shared, kt](const io::ComplexRecord& rec, std::size_t t0, std::size_t count) -> RolloutResult {
    const auto mcfg = model::load_config(*shared);
    const auto frame0 = rec.trajectory.at(t0).positions;
    const std::uint64_t seed = baselines::mix_seed(cfg.seed, id_hash(rec.id), t0);
    try {
      switch (cfg.method) {
        case MethodKind::neuralmd_ode:
        case MethodKind::neuralmd_sde: {
          NoGradGuard no_grad;
          const auto net = baselines::bind(*shared, mcfg, rec);
          const dynamics::ForceFn force = [&net](const Tensor& x) { return net.force(x); };
          const dynamics::PhaseState s0{geometry::from_vec3(frame0),
                                        start_velocity(net, rec, t0, cfg.velocity, false, rec.snapshot_count()),
                                        static_cast<double>(t0)};
          const auto times = dynamics::unit_times(static_cast<double>(t0), count);
          auto solver = cfg.solver();
          solver.gradient = dynamics::GradientMode::backprop;
          return from_rollout(cfg.method == MethodKind::neuralmd_ode
                                  ? dynamics::integrate_ode(s0, times, force, rec.masses, solver)
                                  : dynamics::integrate_sde(s0, times, force, rec.masses, solver,
                                                            langevin(cfg, kt, true, seed)));
        }
        case MethodKind::verletmd: {
          Frame v0;
          {
            NoGradGuard no_grad;
            v0 = geometry::to_vec3(start_velocity(baselines::bind(*shared, mcfg, rec), rec, t0, cfg.velocity, false,
                                                  rec.snapshot_count()));
          }
          return baselines::verletmd_rollout(*shared, mcfg, rec, frame0, v0, count, cfg.verletmd);
        }
        case MethodKind::gnnmd: return baselines::gnnmd_rollout(*shared, mcfg, rec, frame0, count);
        case MethodKind::denoisingld:
          return baselines::denoisingld_rollout(*shared, mcfg, rec, frame0, count, cfg.noise_schedule(), seed);
      }
    } catch (const DomainError& e) {
      return {{}, true, e.what()};
    }
    throw std::logic_error("unhandled method");
  };
}

Predictor ballistic_predictor(VelocitySource source) {
  return [source](const io::ComplexRecord& rec, std::size_t t0, std::size_t count) {
    const auto& x0 = rec.trajectory.at(t0).positions;
    Frame v(x0.size());
    for (std::size_t i = 0; i < x0.size(); ++i) {
      if (use_recorded(rec, source)) v[i] = rec.trajectory[t0].velocities[i];
      else if (t0 > 0) v[i] = x0[i] - rec.trajectory[t0 - 1].positions[i];
      else throw std::invalid_argument("ballistic start at snapshot 0 needs recorded velocities");
    }
    RolloutResult out;
    for (std::size_t k = 1; k <= count; ++k) {
      Frame f = x0;
      for (std::size_t i = 0; i < f.size(); ++i) f[i] += static_cast<double>(k) * v[i];
      out.positions.push_back(std::move(f));
    }
    return out;
  };
}

Predictor ground_truth_predictor() {
  return [](const io::ComplexRecord& rec, std::size_t t0, std::size_t count) {
    if (t0 + count >= rec.snapshot_count()) throw std::out_of_range("ground truth ends before the requested window");
    RolloutResult out;
    for (std::size_t k = 1; k <= count; ++k) out.positions.push_back(rec.trajectory[t0 + k].positions);
    return out;
  };
}

std::size_t multi_start(const io::ComplexRecord& record, VelocitySource source) {
  return use_recorded(record, source) ? 0 : 1;
}

MetricReport evaluate(const Predictor& predict, const std::string& name, const Dataset& dataset, const Split& split,
                      const TrainConfig& cfg) {
  struct Window {
    const io::ComplexRecord* record;
    std::size_t t0;
    std::size_t count;
  };
  std::vector<Window> windows;
  if (split.kind == SplitKind::single) {
    if (split.train.empty() || split.test.empty()) throw std::invalid_argument("split has no train or test snapshots");
    for (const auto& rec : dataset) windows.push_back({&rec, split.train.back(), split.test.size()});
  } else {
    for (std::size_t i : split.test) {
      const auto& rec = dataset.at(i);
      const std::size_t t0 = multi_start(rec, cfg.velocity);
      if (t0 + 1 >= rec.snapshot_count()) throw std::invalid_argument("record " + rec.id + " is too short to evaluate");
      windows.push_back({&rec, t0, rec.snapshot_count() - 1 - t0});
    }
  }

  std::vector<TrajectoryMetrics> per;
  for (const auto& w : windows) {
    const auto start = std::chrono::steady_clock::now();
    auto r = predict(*w.record, w.t0, w.count);
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    TrajectoryMetrics m;
    m.id = w.record->id;
    m.atoms = w.record->atom_count();
    m.snapshots = w.count;
    m.fps = metric_fps(r.positions.size(), std::max(elapsed.count(), 1e-9));
    m.truncated = r.truncated || r.positions.size() < w.count;
    m.truncation_reason = r.reason;
    if (r.positions.size() > w.count) r.positions.resize(w.count);
    const Frame hold = r.positions.empty() ? w.record->trajectory[w.t0].positions : r.positions.back();
    r.positions.resize(w.count, hold);
    Frames truth;
    for (std::size_t k = 1; k <= w.count; ++k) truth.push_back(w.record->trajectory[w.t0 + k].positions);
    const auto rec = metric_recovery(r.positions, truth);
    m.mae = rec.mae;
    m.mse = rec.mse;
    m.stability = metric_stability(r.positions, truth, cfg.stability_delta);
    per.push_back(std::move(m));
  }
  return aggregate(name, to_string(split.kind), cfg.stability_delta, std::move(per));
}

}  // namespace nmd::train
