#include <cmath>
#include <random>

#include "nmd/baselines/baselines.hpp"
#include "nmd/errors.hpp"
#include "nmd/tensor/ops.hpp"

namespace nmd::baselines {

void NoiseSchedule::validate() const {
  if (sigmas.empty()) throw std::invalid_argument("noise schedule needs at least one level");
  for (std::size_t l = 0; l < sigmas.size(); ++l) {
    if (!(sigmas[l] > 0.0) || !std::isfinite(sigmas[l])) throw std::invalid_argument("noise levels must be positive");
    if (l > 0 && !(sigmas[l] < sigmas[l - 1])) throw std::invalid_argument("noise levels must be strictly descending");
  }
  if (steps_per_level == 0) throw std::invalid_argument("steps_per_level must be at least 1");
  if (!(step_scale > 0.0)) throw std::invalid_argument("step_scale must be positive");
}

double NoiseSchedule::step_size(std::size_t level) const { return step_scale * sigmas.at(level) * sigmas.at(level); }

NoiseSchedule NoiseSchedule::geometric(double first, double last, std::size_t levels) {
  NoiseSchedule s;
  if (levels == 1) {
    s.sigmas = {first};
  } else {
    for (std::size_t l = 0; l < levels; ++l)
      s.sigmas.push_back(first * std::pow(last / first, static_cast<double>(l) / static_cast<double>(levels - 1)));
  }
  s.validate();
  return s;
}

void add_denoising_heads(ParamSet& params, const model::BindingNetConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, 0xD15EA5E));
  model::add_condition_input(params, cfg, kDenoisingFeatures, rng);
  add_mlp(params, "dld.gate", {kDenoisingFeatures, cfg.hidden, 1}, rng, true);
}

Tensor denoising_output(const model::BindingNet& net, const ParamSet& params, const Tensor& x, const Tensor& prev,
                        double sigma) {
  const std::size_t n = x.dim(0);
  const Tensor delta = x - prev;
  const Tensor feats = concat_cols(norm_rows(delta), Tensor::constant({n, 1}, std::vector<double>(n, std::log(sigma))));
  return net.force(x, feats) + scale_rows(delta, mlp(params, "dld.gate", feats));
}

double denoisingld_epoch(ParamSet& params, const model::BindingNetConfig& cfg, std::span<const Segment> segments,
                         Optimizer* optimizer, const NoiseSchedule& schedule, std::uint64_t seed, std::size_t epoch) {
  schedule.validate();
  double sum = 0.0;
  std::size_t count = 0, examples = 0;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t s = 0; s < segments.size(); ++s) {
    const auto& seg = segments[s];
    seg.validate(2);
    const auto& traj = seg.record->trajectory;
    const std::size_t n = seg.record->atom_count();
    for (std::size_t t = seg.begin; t + 1 < seg.end; ++t) {
      std::mt19937_64 rng(mix_seed(seed, epoch, s, t));
      const std::size_t level = std::uniform_int_distribution<std::size_t>(0, schedule.sigmas.size() - 1)(rng);
      const double sigma = schedule.sigmas[level];
      std::vector<double> eps(3 * n);
      for (double& e : eps) e = normal(rng);
      const Tensor noise = Tensor::constant({n, 3}, eps);
      const Tensor noisy = geometry::from_vec3(traj[t + 1].positions) + noise * sigma;
      ++examples;
      Tensor loss;
      try {
        const auto net = bind(params, cfg, *seg.record);
        const Tensor out = denoising_output(net, params, noisy, geometry::from_vec3(traj[t].positions), sigma);
        loss = mean(square(out * (1.0 / sigma) + noise));
      } catch (const DomainError&) {
        // A large noise level can pull the ligand apart.
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
  if (examples == 0) throw std::invalid_argument("DenoisingLD: no snapshot pairs to train on");
  return count == 0 ? std::nan("") : sum / static_cast<double>(count);
}

RolloutResult denoisingld_rollout(const ParamSet& params, const model::BindingNetConfig& cfg,
                                  const io::ComplexRecord& record, const Frame& x0, std::size_t count,
                                  const NoiseSchedule& schedule, std::uint64_t seed) {
  schedule.validate();
  NoGradGuard no_grad;
  const auto net = bind(params, cfg, record);
  const std::size_t n = x0.size();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  RolloutResult out;
  Tensor x = geometry::from_vec3(x0);
  for (std::size_t k = 0; k < count && !out.truncated; ++k) {
    const Tensor prev = x;
    try {
      for (std::size_t l = 0; l < schedule.sigmas.size(); ++l) {
        const double sigma = schedule.sigmas[l];
        const double eps = schedule.step_size(l);
        for (std::size_t s = 0; s < schedule.steps_per_level; ++s) {
          const Tensor score = denoising_output(net, params, x, prev, sigma) * (1.0 / (sigma * sigma));
          std::vector<double> xi(3 * n);
          for (double& v : xi) v = normal(rng);
          x = x + score * (0.5 * eps) + Tensor::constant({n, 3}, std::move(xi)) * std::sqrt(eps);
        }
      }
    } catch (const DomainError& e) {
      out.truncated = true;
      out.reason = e.what();
      break;
    }
    for (double v : x.values())
      if (!std::isfinite(v)) {
        out.truncated = true;
        out.reason = "non-finite coordinates at transition " + std::to_string(k + 1);
        break;
      }
    if (!out.truncated) out.positions.push_back(geometry::to_vec3(x));
  }
  return out;
}

}  // namespace nmd::baselines
