#include "nmd/train/config.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

namespace nmd::train {

namespace {

constexpr std::array<std::pair<MethodKind, const char*>, 5> kMethods{{{MethodKind::neuralmd_ode, "neuralmd-ode"},
                                                                      {MethodKind::neuralmd_sde, "neuralmd-sde"},
                                                                      {MethodKind::verletmd, "verletmd"},
                                                                      {MethodKind::gnnmd, "gnnmd"},
                                                                      {MethodKind::denoisingld, "denoisingld"}}};

template <class Fn>
void for_keys(const nlohmann::json& j, const std::string& where, Fn&& fn) {
  if (!j.is_object()) throw std::invalid_argument(where + " must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (!fn(key, value)) throw std::invalid_argument("train config: unknown key '" + where + "." + key + "'");
}

}  // namespace

std::string to_string(MethodKind kind) {
  for (const auto& [k, name] : kMethods)
    if (k == kind) return name;
  return "unknown";
}

MethodKind parse_method(const std::string& name) {
  for (const auto& [k, n] : kMethods)
    if (name == n) return k;
  throw std::invalid_argument("unknown method '" + name +
                              "' (expected neuralmd-ode, neuralmd-sde, verletmd, gnnmd or denoisingld)");
}

bool is_neuralmd(MethodKind kind) { return kind == MethodKind::neuralmd_ode || kind == MethodKind::neuralmd_sde; }

std::string to_string(VelocitySource source) {
  switch (source) {
    case VelocitySource::recorded: return "recorded";
    case VelocitySource::surrogate: return "surrogate";
    default: return "auto";
  }
}

VelocitySource parse_velocity_source(const std::string& name) {
  if (name == "auto") return VelocitySource::automatic;
  if (name == "recorded") return VelocitySource::recorded;
  if (name == "surrogate") return VelocitySource::surrogate;
  throw std::invalid_argument("unknown velocity source '" + name + "' (expected auto, recorded or surrogate)");
}

void TrainConfig::validate() const {
  model.validate();
  if (!(optimizer.lr >= 0.0)) throw std::invalid_argument("learning rate must be non-negative");
  if (substeps == 0) throw std::invalid_argument("substeps must be at least 1");
  if (gradient == dynamics::GradientMode::adjoint && method != MethodKind::neuralmd_ode)
    throw std::invalid_argument("adjoint gradients are only available for neuralmd-ode");
  if (!(gamma >= 0.0) || !(kb > 0.0)) throw std::invalid_argument("gamma must be >= 0 and kb > 0");
  if (!std::isfinite(temperature)) throw std::invalid_argument("temperature must be finite");
  if (!(verletmd.fd_step > 0.0) || verletmd.substeps == 0) throw std::invalid_argument("invalid verletmd options");
  noise_schedule();
  if (!(stability_delta > 0.0)) throw std::invalid_argument("stability_delta must be positive");
}

baselines::NoiseSchedule TrainConfig::noise_schedule() const {
  if (!(sigma_max > 0.0) || !(sigma_min > 0.0) || noise_levels == 0 || (noise_levels > 1 && !(sigma_min < sigma_max)))
    throw std::invalid_argument("noise schedule needs 0 < sigma_min < sigma_max and at least one level");
  auto s = baselines::NoiseSchedule::geometric(sigma_max, sigma_min, noise_levels);
  s.steps_per_level = steps_per_level;
  s.step_scale = step_scale;
  s.validate();
  return s;
}

dynamics::SolverConfig TrainConfig::solver() const {
  return {method == MethodKind::neuralmd_sde ? dynamics::Method::euler_maruyama : dynamics::Method::euler, substeps,
          gradient};
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{
      {"method", to_string(c.method)},
      {"model",
       {{"hidden", c.model.hidden},
        {"layers", c.model.layers},
        {"cutoff", c.model.cutoff},
        {"rbf_count", c.model.rbf_count},
        {"orthogonalize_frames", c.model.orthogonalize_frames},
        {"zero_output_heads", c.model.zero_output_heads}}},
      {"optimizer", {{"kind", to_string(c.optimizer.kind)}, {"lr", c.optimizer.lr}}},
      {"epochs", c.epochs},
      {"horizon", c.horizon},
      {"substeps", c.substeps},
      {"gradient", c.gradient == dynamics::GradientMode::adjoint ? "adjoint" : "backprop"},
      {"velocity", to_string(c.velocity)},
      {"sde",
       {{"gamma", c.gamma},
        {"temperature", c.temperature},
        {"kb", c.kb},
        {"train_noise", c.train_noise},
        {"exact_friction", c.exact_friction}}},
      {"verletmd", {{"fd_step", c.verletmd.fd_step}, {"substeps", c.verletmd.substeps}}},
      {"denoisingld",
       {{"sigma_max", c.sigma_max},
        {"sigma_min", c.sigma_min},
        {"levels", c.noise_levels},
        {"steps_per_level", c.steps_per_level},
        {"step_scale", c.step_scale}}},
      {"split", {{"kind", to_string(c.split)}, {"train_fraction", c.train_fraction}, {"fractions", c.fractions}}},
      {"stability_delta", c.stability_delta},
      {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  for_keys(j, "config", [&](const std::string& key, const nlohmann::json& v) {
    if (key == "method") c.method = parse_method(v.get<std::string>());
    else if (key == "model")
      for_keys(v, "model", [&](const std::string& k, const nlohmann::json& x) {
        if (k == "hidden") c.model.hidden = x.get<std::size_t>();
        else if (k == "layers") c.model.layers = x.get<std::size_t>();
        else if (k == "cutoff") c.model.cutoff = x.get<double>();
        else if (k == "rbf_count") c.model.rbf_count = x.get<std::size_t>();
        else if (k == "orthogonalize_frames") c.model.orthogonalize_frames = x.get<bool>();
        else if (k == "zero_output_heads") c.model.zero_output_heads = x.get<bool>();
        else return false;
        return true;
      });
    else if (key == "optimizer")
      for_keys(v, "optimizer", [&](const std::string& k, const nlohmann::json& x) {
        if (k == "kind") c.optimizer.kind = parse_optimizer_kind(x.get<std::string>());
        else if (k == "lr") c.optimizer.lr = x.get<double>();
        else return false;
        return true;
      });
    else if (key == "epochs") c.epochs = v.get<std::size_t>();
    else if (key == "horizon") c.horizon = v.get<std::size_t>();
    else if (key == "substeps") c.substeps = v.get<std::size_t>();
    else if (key == "gradient") {
      const auto g = v.get<std::string>();
      if (g == "backprop") c.gradient = dynamics::GradientMode::backprop;
      else if (g == "adjoint") c.gradient = dynamics::GradientMode::adjoint;
      else throw std::invalid_argument("gradient must be backprop or adjoint");
    } else if (key == "velocity") c.velocity = parse_velocity_source(v.get<std::string>());
    else if (key == "sde")
      for_keys(v, "sde", [&](const std::string& k, const nlohmann::json& x) {
        if (k == "gamma") c.gamma = x.get<double>();
        else if (k == "temperature") c.temperature = x.get<double>();
        else if (k == "kb") c.kb = x.get<double>();
        else if (k == "train_noise") c.train_noise = x.get<bool>();
        else if (k == "exact_friction") c.exact_friction = x.get<bool>();
        else return false;
        return true;
      });
    else if (key == "verletmd")
      for_keys(v, "verletmd", [&](const std::string& k, const nlohmann::json& x) {
        if (k == "fd_step") c.verletmd.fd_step = x.get<double>();
        else if (k == "substeps") c.verletmd.substeps = x.get<std::size_t>();
        else return false;
        return true;
      });
    else if (key == "denoisingld")
      for_keys(v, "denoisingld", [&](const std::string& k, const nlohmann::json& x) {
        if (k == "sigma_max") c.sigma_max = x.get<double>();
        else if (k == "sigma_min") c.sigma_min = x.get<double>();
        else if (k == "levels") c.noise_levels = x.get<std::size_t>();
        else if (k == "steps_per_level") c.steps_per_level = x.get<std::size_t>();
        else if (k == "step_scale") c.step_scale = x.get<double>();
        else return false;
        return true;
      });
    else if (key == "split")
      for_keys(v, "split", [&](const std::string& k, const nlohmann::json& x) {
        if (k == "kind") c.split = parse_split_kind(x.get<std::string>());
        else if (k == "train_fraction") c.train_fraction = x.get<double>();
        else if (k == "fractions") c.fractions = x.get<std::array<double, 3>>();
        else return false;
        return true;
      });
    else if (key == "stability_delta") c.stability_delta = v.get<double>();
    else if (key == "seed") c.seed = v.get<std::uint64_t>();
    else return false;
    return true;
  });
  c.validate();
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open train config " + path.string());
  try {
    return nlohmann::json::parse(f).get<TrainConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

}  // namespace nmd::train
