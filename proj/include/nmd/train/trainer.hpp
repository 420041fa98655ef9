#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nmd/io/complex.hpp"
#include "nmd/train/config.hpp"
#include "nmd/train/metrics.hpp"

namespace nmd::train {

using baselines::RolloutResult;
using baselines::Segment;
using Dataset = std::vector<io::ComplexRecord>;

/// Fresh parameters for the configured method. The architecture, method and
/// full config are stored in the parameter metadata.
ParamSet init_method_params(const TrainConfig& cfg);
TrainConfig config_from_checkpoint(const ParamSet& params);

/// Mean kinetic energy per degree of freedom (m v^2 averaged over atoms,
/// axes and snapshots). Records without velocities use backward differences.
double kinetic_temperature(std::span<const Segment> segments);

/// Initial velocity at snapshot t. With the surrogate, the momentum term uses
/// x_{t+1} when `next_allowed` and t+1 < end, and x_{t-1} otherwise.
Tensor start_velocity(const model::BindingNet& net, const io::ComplexRecord& record, std::size_t t,
                      VelocitySource source, bool next_allowed, std::size_t end);

/// One pass of the trajectory loss over every start time in the segments.
/// kt is k_B·T for the SDE. Returns the mean loss over examples, or NaN when
/// every rollout blew up.
double neuralmd_epoch(const TrainConfig& cfg, ParamSet& params, std::span<const Segment> segments,
                      Optimizer* optimizer, std::size_t epoch, double kt);

/// Dispatches to the method's epoch. Without an optimizer no graph is kept.
double run_epoch(const TrainConfig& cfg, ParamSet& params, std::span<const Segment> segments, Optimizer* optimizer,
                 std::size_t epoch, double kt);

/// Index of the checkpoint epoch: lowest train loss for single-trajectory
/// runs, lowest val loss for multi-trajectory runs. The first minimum wins;
/// non-finite values never do.
std::size_t select_checkpoint(SplitKind kind, std::span<const double> train_curve, std::span<const double> val_curve);

struct TrainResult {
  ParamSet params;  // selected checkpoint
  Split split;
  double initial_loss = 0.0;  // before any update
  std::vector<double> train_curve;
  std::vector<double> val_curve;
  std::optional<std::size_t> best_epoch;
  bool aborted = false;
  std::string abort_reason;
  double kt = 0.0;
};

/// Builds the split from cfg, then trains. Each epoch visits the training
/// windows in order with one update per start time.
TrainResult train(const TrainConfig& cfg, const Dataset& dataset);

Split make_split(const TrainConfig& cfg, const Dataset& dataset);

/// Predicts `count` snapshots after snapshot t0 of the record.
using Predictor = std::function<RolloutResult(const io::ComplexRecord&, std::size_t t0, std::size_t count)>;

Predictor make_predictor(const TrainConfig& cfg, const ParamSet& params);
/// Constant-velocity extrapolation from the start velocity.
Predictor ballistic_predictor(VelocitySource source = VelocitySource::automatic);
Predictor ground_truth_predictor();

/// Rollout start for multi-trajectory evaluation: snapshot 0 when the start
/// velocity is recorded, otherwise snapshot 1 (the surrogate needs x_0).
std::size_t multi_start(const io::ComplexRecord& record, VelocitySource source);

/// Test-window metrics. Single: every record from the last training snapshot
/// over the test snapshots. Multi: every test record from its start to the
/// end. Truncated rollouts hold their last valid snapshot.
MetricReport evaluate(const Predictor& predict, const std::string& name, const Dataset& dataset, const Split& split,
                      const TrainConfig& cfg);

/// Stable 64-bit hash of a record id for seeding.
std::uint64_t id_hash(const std::string& id);

}  // namespace nmd::train
