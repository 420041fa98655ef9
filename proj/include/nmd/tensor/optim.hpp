#pragma once

#include <map>
#include <string>
#include <vector>

#include "nmd/tensor/params.hpp"

namespace nmd {

enum class OptimizerKind { sgd, adam };

OptimizerKind parse_optimizer_kind(const std::string& name);
std::string to_string(OptimizerKind kind);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// SGD or Adam over a ParamSet. Adam moments are keyed by parameter name, so
/// one optimizer instance must stay paired with one ParamSet layout.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config);

  // Applies one update from the populated gradients, then clears them.
  // Throws if no parameter received a gradient since the last clear.
  void step(ParamSet& params);

  const OptimizerConfig& config() const { return config_; }
  long steps_taken() const { return steps_; }

 private:
  struct Moments {
    std::vector<double> m;
    std::vector<double> v;
  };
  OptimizerConfig config_;
  long steps_ = 0;
  std::map<std::string, Moments> moments_;
};

}  // namespace nmd
