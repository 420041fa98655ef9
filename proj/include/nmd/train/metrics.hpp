#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "nmd/baselines/common.hpp"

namespace nmd::train {

using baselines::Frame;
using baselines::Frames;

/// Mean over snapshots, atoms and coordinates of |pred - truth|.
Tensor loss_trajectory_mae(const std::vector<Tensor>& pred, const std::vector<Tensor>& truth);

struct Recovery {
  double mae = 0.0;
  double mse = 0.0;
};

/// Per-coordinate mean absolute and mean squared deviation.
Recovery metric_recovery(const Frames& pred, const Frames& truth);

/// Percentage of (ligand pair, snapshot) events whose predicted distance
/// differs from the true distance at that snapshot by more than `delta`.
/// Lower is better. Fewer than two atoms gives 0 and a warning.
double metric_stability(const Frames& pred, const Frames& truth, double delta = 0.5);

/// Snapshots per second.
double metric_fps(std::size_t snapshots, double seconds);

/// Runs `rollout` once and returns its snapshot rate; `rollout` reports how
/// many snapshots it emitted.
double metric_fps(const std::function<std::size_t()>& rollout);

struct TrajectoryMetrics {
  std::string id;
  std::size_t atoms = 0;
  std::size_t snapshots = 0;  // predicted snapshots scored
  double mae = 0.0;
  double mse = 0.0;
  double stability = 0.0;
  double fps = 0.0;
  bool truncated = false;
  std::string truncation_reason;

  bool operator==(const TrajectoryMetrics&) const = default;
};

struct MetricReport {
  std::string method;
  std::string split;
  double delta = 0.5;
  // Pooled over every scored coordinate, pair event and snapshot.
  double mae = 0.0;
  double mse = 0.0;
  double stability = 0.0;
  double fps = 0.0;
  std::size_t truncated = 0;
  std::vector<TrajectoryMetrics> trajectories;

  bool operator==(const MetricReport&) const = default;
  // Equality ignoring wall-clock rates.
  bool same_accuracy(const MetricReport& other) const;
};

/// Builds a report from per-trajectory results. MAE and MSE are weighted by
/// coordinate count, stability by pair events, and the rate is total
/// snapshots over total time.
MetricReport aggregate(std::string method, std::string split, double delta, std::vector<TrajectoryMetrics> trajectories);

void to_json(nlohmann::json& j, const TrajectoryMetrics& m);
void from_json(const nlohmann::json& j, TrajectoryMetrics& m);
void to_json(nlohmann::json& j, const MetricReport& r);
void from_json(const nlohmann::json& j, MetricReport& r);

/// One row per trajectory plus a final "all" row.
std::string to_csv(const MetricReport& r);
std::string summary(const MetricReport& r);

/// Writes `<path>` (JSON) and `<path>` with extension .csv.
void save_report(const MetricReport& r, const std::filesystem::path& path);
MetricReport load_report(const std::filesystem::path& path);

}  // namespace nmd::train
