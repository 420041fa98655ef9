#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "nmd/baselines/baselines.hpp"
#include "nmd/dynamics/integrators.hpp"
#include "nmd/model/bindingnet.hpp"
#include "nmd/tensor/optim.hpp"
#include "nmd/train/split.hpp"

namespace nmd::train {

enum class MethodKind { neuralmd_ode, neuralmd_sde, verletmd, gnnmd, denoisingld };

std::string to_string(MethodKind kind);
MethodKind parse_method(const std::string& name);
bool is_neuralmd(MethodKind kind);

/// Where the initial velocity of a rollout comes from. `automatic` uses the
/// recorded velocities when the record has them and the surrogate otherwise.
enum class VelocitySource { automatic, recorded, surrogate };

std::string to_string(VelocitySource source);
VelocitySource parse_velocity_source(const std::string& name);

struct TrainConfig {
  MethodKind method = MethodKind::neuralmd_ode;
  model::BindingNetConfig model;
  OptimizerConfig optimizer;
  std::size_t epochs = 100;
  // Snapshots predicted per training start time; 0 means up to the end of
  // the training window.
  std::size_t horizon = 5;
  std::size_t substeps = 4;
  dynamics::GradientMode gradient = dynamics::GradientMode::backprop;
  VelocitySource velocity = VelocitySource::automatic;

  // Langevin settings for neuralmd-sde. A negative temperature is replaced
  // by the kinetic temperature of the training snapshots.
  double gamma = 0.1;
  double temperature = -1.0;
  double kb = 1.0;
  bool train_noise = true;
  bool exact_friction = true;

  baselines::VerletMDOptions verletmd;
  double sigma_max = 1.0;
  double sigma_min = 0.01;
  std::size_t noise_levels = 10;
  std::size_t steps_per_level = 5;
  double step_scale = 2e-3;

  SplitKind split = SplitKind::single;
  double train_fraction = 0.8;
  std::array<double, 3> fractions{0.8, 0.1, 0.1};
  double stability_delta = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
  baselines::NoiseSchedule noise_schedule() const;
  dynamics::SolverConfig solver() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, TrainConfig& c);
TrainConfig load_train_config(const std::filesystem::path& path);

}  // namespace nmd::train
