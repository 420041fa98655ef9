#include "nmd/train/metrics.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "nmd/tensor/ops.hpp"

namespace nmd::train {

namespace {

void check_frames(const Frames& pred, const Frames& truth, const char* what) {
  if (pred.size() != truth.size())
    throw std::invalid_argument(std::string(what) + ": " + std::to_string(pred.size()) + " predicted vs " +
                                std::to_string(truth.size()) + " true snapshots");
  for (std::size_t k = 0; k < pred.size(); ++k)
    if (pred[k].size() != truth[k].size())
      throw std::invalid_argument(std::string(what) + ": snapshot " + std::to_string(k) + " has " +
                                  std::to_string(pred[k].size()) + " predicted vs " + std::to_string(truth[k].size()) +
                                  " true atoms");
}

std::string fixed(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

Tensor loss_trajectory_mae(const std::vector<Tensor>& pred, const std::vector<Tensor>& truth) {
  if (pred.size() != truth.size() || pred.empty())
    throw std::invalid_argument("trajectory loss: " + std::to_string(pred.size()) + " predicted vs " +
                                std::to_string(truth.size()) + " true snapshots");
  Tensor total = Tensor::scalar(0.0);
  for (std::size_t k = 0; k < pred.size(); ++k) {
    if (pred[k].shape() != truth[k].shape())
      throw std::invalid_argument("trajectory loss: shape " + shape_str(pred[k].shape()) + " vs " +
                                  shape_str(truth[k].shape()) + " at snapshot " + std::to_string(k));
    total = total + mean(abs(pred[k] - truth[k]));
  }
  return total * (1.0 / static_cast<double>(pred.size()));
}

Recovery metric_recovery(const Frames& pred, const Frames& truth) {
  check_frames(pred, truth, "recovery");
  double abs_sum = 0.0, sq_sum = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 0; k < pred.size(); ++k)
    for (std::size_t i = 0; i < pred[k].size(); ++i)
      for (int c = 0; c < 3; ++c, ++count) {
        const double d = pred[k][i][c] - truth[k][i][c];
        abs_sum += std::abs(d);
        sq_sum += d * d;
      }
  if (count == 0) return {};
  return {abs_sum / static_cast<double>(count), sq_sum / static_cast<double>(count)};
}

double metric_stability(const Frames& pred, const Frames& truth, double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("stability threshold must be positive");
  check_frames(pred, truth, "stability");
  if (pred.empty()) return 0.0;
  if (pred.front().size() < 2) {
    spdlog::warn("stability needs at least two ligand atoms; reporting 0");
    return 0.0;
  }
  std::size_t events = 0, violations = 0;
  for (std::size_t k = 0; k < pred.size(); ++k)
    for (std::size_t i = 0; i < pred[k].size(); ++i)
      for (std::size_t j = i + 1; j < pred[k].size(); ++j, ++events) {
        const double b = (truth[k][i] - truth[k][j]).norm();
        if (std::abs((pred[k][i] - pred[k][j]).norm() - b) > delta) ++violations;
      }
  return 100.0 * static_cast<double>(violations) / static_cast<double>(events);
}

double metric_fps(std::size_t snapshots, double seconds) {
  if (!(seconds > 0.0)) return 0.0;
  return static_cast<double>(snapshots) / seconds;
}

double metric_fps(const std::function<std::size_t()>& rollout) {
  const auto start = std::chrono::steady_clock::now();
  const std::size_t emitted = rollout();
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
  // A clock tick can be coarser than a tiny rollout.
  return metric_fps(emitted, std::max(elapsed.count(), 1e-9));
}

bool MetricReport::same_accuracy(const MetricReport& other) const {
  if (method != other.method || split != other.split || delta != other.delta || mae != other.mae ||
      mse != other.mse || stability != other.stability || truncated != other.truncated ||
      trajectories.size() != other.trajectories.size())
    return false;
  for (std::size_t k = 0; k < trajectories.size(); ++k) {
    auto a = trajectories[k], b = other.trajectories[k];
    a.fps = b.fps = 0.0;
    if (!(a == b)) return false;
  }
  return true;
}

MetricReport aggregate(std::string method, std::string split, double delta, std::vector<TrajectoryMetrics> trajectories) {
  MetricReport r;
  r.method = std::move(method);
  r.split = std::move(split);
  r.delta = delta;
  double coords = 0.0, events = 0.0, abs_sum = 0.0, sq_sum = 0.0, violations = 0.0, snaps = 0.0, seconds = 0.0;
  for (const auto& t : trajectories) {
    const double c = static_cast<double>(t.snapshots * t.atoms * 3);
    const double e = static_cast<double>(t.snapshots * (t.atoms < 2 ? 0 : t.atoms * (t.atoms - 1) / 2));
    coords += c;
    events += e;
    abs_sum += t.mae * c;
    sq_sum += t.mse * c;
    violations += t.stability * e;
    snaps += static_cast<double>(t.snapshots);
    if (t.fps > 0.0) seconds += static_cast<double>(t.snapshots) / t.fps;
    if (t.truncated) ++r.truncated;
  }
  if (coords > 0.0) {
    r.mae = abs_sum / coords;
    r.mse = sq_sum / coords;
  }
  if (events > 0.0) r.stability = violations / events;
  if (seconds > 0.0) r.fps = snaps / seconds;
  r.trajectories = std::move(trajectories);
  return r;
}

void to_json(nlohmann::json& j, const TrajectoryMetrics& m) {
  j = nlohmann::json{{"id", m.id},       {"atoms", m.atoms},         {"snapshots", m.snapshots},
                     {"mae", m.mae},     {"mse", m.mse},             {"stability", m.stability},
                     {"fps", m.fps},     {"truncated", m.truncated}, {"truncation_reason", m.truncation_reason}};
}

void from_json(const nlohmann::json& j, TrajectoryMetrics& m) {
  j.at("id").get_to(m.id);
  j.at("atoms").get_to(m.atoms);
  j.at("snapshots").get_to(m.snapshots);
  j.at("mae").get_to(m.mae);
  j.at("mse").get_to(m.mse);
  j.at("stability").get_to(m.stability);
  j.at("fps").get_to(m.fps);
  j.at("truncated").get_to(m.truncated);
  j.at("truncation_reason").get_to(m.truncation_reason);
}

void to_json(nlohmann::json& j, const MetricReport& r) {
  j = nlohmann::json{{"format", "nmd-metrics 1"},
                     {"method", r.method},
                     {"split", r.split},
                     {"delta", r.delta},
                     {"mae", r.mae},
                     {"mse", r.mse},
                     {"stability", r.stability},
                     {"fps", r.fps},
                     {"truncated", r.truncated},
                     {"trajectories", r.trajectories}};
}

void from_json(const nlohmann::json& j, MetricReport& r) {
  if (j.value("format", "") != "nmd-metrics 1") throw std::invalid_argument("not an nmd-metrics 1 report");
  j.at("method").get_to(r.method);
  j.at("split").get_to(r.split);
  j.at("delta").get_to(r.delta);
  j.at("mae").get_to(r.mae);
  j.at("mse").get_to(r.mse);
  j.at("stability").get_to(r.stability);
  j.at("fps").get_to(r.fps);
  j.at("truncated").get_to(r.truncated);
  j.at("trajectories").get_to(r.trajectories);
}

std::string to_csv(const MetricReport& r) {
  std::ostringstream os;
  os << "method,trajectory,atoms,snapshots,mae,mse,stability,fps,truncated\n";
  for (const auto& t : r.trajectories)
    os << r.method << ',' << t.id << ',' << t.atoms << ',' << t.snapshots << ',' << fixed(t.mae) << ','
       << fixed(t.mse) << ',' << fixed(t.stability) << ',' << fixed(t.fps) << ',' << (t.truncated ? 1 : 0) << '\n';
  std::size_t snaps = 0;
  for (const auto& t : r.trajectories) snaps += t.snapshots;
  os << r.method << ",all,," << snaps << ',' << fixed(r.mae) << ',' << fixed(r.mse) << ',' << fixed(r.stability)
     << ',' << fixed(r.fps) << ',' << r.truncated << '\n';
  return os.str();
}

std::string summary(const MetricReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-12s MAE %.4f A  MSE %.4f  stability %.2f%%  FPS %.1f  (%zu trajectories, %zu truncated)",
                r.method.c_str(), r.mae, r.mse, r.stability, r.fps, r.trajectories.size(), r.truncated);
  return buf;
}

void save_report(const MetricReport& r, const std::filesystem::path& path) {
  {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write report " + path.string());
    f << nlohmann::json(r).dump(2) << '\n';
  }
  auto csv = path;
  csv.replace_extension(".csv");
  std::ofstream f(csv);
  if (!f) throw std::runtime_error("cannot write report table " + csv.string());
  f << to_csv(r);
}

MetricReport load_report(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open report " + path.string());
  return nlohmann::json::parse(f).get<MetricReport>();
}

}  // namespace nmd::train
