#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nmd/io/complex.hpp"
#include "nmd/model/bindingnet.hpp"
#include "nmd/tensor/optim.hpp"

namespace nmd::baselines {

using geometry::Vec3;
using Frame = std::vector<Vec3>;
using Frames = std::vector<Frame>;

/// Snapshots [begin, end) of one record used as supervision.
struct Segment {
  const io::ComplexRecord* record = nullptr;
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - begin; }
  void validate(std::size_t min_length) const;
};

/// Predicted snapshots t0+1, t0+2, ... A blow-up stops the rollout early; the
/// reason is kept for reporting.
struct RolloutResult {
  Frames positions;
  bool truncated = false;
  std::string reason;
};

/// Mean per-coordinate |pred - truth| over all frames. Shapes must match.
Tensor frames_mae(const std::vector<Tensor>& pred, std::span<const Frame> truth);

/// Derives an independent stream for (seed, a, b, c) so results do not depend
/// on the order in which work items are visited.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0);

/// BindingNet bound to the complex of a record.
model::BindingNet bind(const ParamSet& params, const model::BindingNetConfig& cfg, const io::ComplexRecord& record);

}  // namespace nmd::baselines
