#include "nmd/cli/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "nmd/io/synthetic.hpp"
#include "nmd/model/chem.hpp"
#include "nmd/train/trainer.hpp"

namespace nmd::cli {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::optional<std::uint64_t> seed;
  std::string log_level = "warn";

  std::string spec, out;
  bool binary = false;

  std::string method, data, split, config;
  std::optional<std::size_t> epochs;

  std::string ckpt, complex, report;
  std::size_t steps = 0;
  std::size_t start = 0;
};

ParamSet load_checkpoint(const std::string& path) {
  if (!fs::exists(path)) throw std::runtime_error("checkpoint not found: " + path);
  return ParamSet::load(path);
}

train::TrainConfig checkpoint_config(const ParamSet& params, const Options& o) {
  auto cfg = train::config_from_checkpoint(params);
  if (o.seed) cfg.seed = *o.seed;
  return cfg;
}

fs::path data_dir(const Options& o) { return o.data.empty() ? io::default_data_dir() : fs::path(o.data); }

int gen_synthetic(const Options& o, std::ostream& out) {
  auto spec = io::load_synthetic_spec(o.spec);
  if (o.seed) spec.seed = *o.seed;
  const auto rec = io::generate_synthetic(spec);
  io::save_complex(rec, o.out, o.binary ? io::Encoding::binary : io::Encoding::text);
  out << "wrote " << o.out << ": " << rec.atom_count() << " atoms, " << rec.residue_count() << " sites, "
      << rec.snapshot_count() << " snapshots (energy drift " << rec.metadata.at("energy_drift") << ")\n";
  return 0;
}

int train_cmd(const Options& o, std::ostream& out) {
  train::TrainConfig cfg;
  if (!o.config.empty()) cfg = train::load_train_config(o.config);
  if (!o.method.empty()) cfg.method = train::parse_method(o.method);
  if (!o.split.empty()) cfg.split = train::parse_split_kind(o.split);
  if (o.epochs) cfg.epochs = *o.epochs;
  if (o.seed) cfg.seed = *o.seed;
  cfg.validate();
  const auto dataset = io::load_dataset(data_dir(o));
  auto result = train::train(cfg, dataset);
  // Keep the effective config, so evaluate rebuilds the same split.
  result.params.meta()["train.config"] = nlohmann::json(cfg).dump();
  result.params.meta()["train.curve"] = nlohmann::json(result.train_curve).dump();
  if (!result.val_curve.empty()) result.params.meta()["train.val_curve"] = nlohmann::json(result.val_curve).dump();
  result.params.save(o.out);

  out << train::to_string(cfg.method) << " on " << dataset.size() << " complexes (" << train::to_string(cfg.split)
      << " split), " << result.train_curve.size() << " epochs\n";
  out << "initial train loss " << result.initial_loss << "\n";
  if (!result.train_curve.empty()) out << "final train loss   " << result.train_curve.back() << "\n";
  if (result.best_epoch)
    out << "checkpoint epoch   " << *result.best_epoch + 1 << " (lowest "
        << (cfg.split == train::SplitKind::single ? "train" : "val") << " loss)\n";
  if (result.aborted) out << "aborted: " << result.abort_reason << "\n";
  out << "wrote " << o.out << "\n";
  return result.aborted ? 1 : 0;
}

int simulate(const Options& o, std::ostream& out) {
  const auto params = load_checkpoint(o.ckpt);
  const auto cfg = checkpoint_config(params, o);
  const auto rec = io::load_complex(o.complex);
  if (o.start >= rec.snapshot_count())
    throw std::invalid_argument("--start " + std::to_string(o.start) + " is past the last snapshot of " + o.complex);
  const auto predict = train::make_predictor(cfg, params);
  const auto r = predict(rec, o.start, o.steps);

  io::ComplexRecord traj;
  traj.id = rec.id;
  traj.atomic_numbers = rec.atomic_numbers;
  traj.masses = rec.masses;
  traj.protein = rec.protein;
  traj.trajectory.push_back({rec.trajectory[o.start].positions, {}});
  for (const auto& f : r.positions) traj.trajectory.push_back({f, {}});
  traj.metadata["source"] = "simulate";
  traj.metadata["method"] = train::to_string(cfg.method);
  traj.metadata["start_snapshot"] = std::to_string(o.start);
  if (r.truncated) traj.metadata["truncated"] = r.reason;
  io::save_complex(traj, o.out);
  out << "wrote " << o.out << ": " << r.positions.size() << " predicted snapshots from snapshot " << o.start << "\n";
  if (r.truncated) out << "rollout stopped early: " << r.reason << "\n";
  return 0;
}

int evaluate_cmd(const Options& o, std::ostream& out) {
  const auto params = load_checkpoint(o.ckpt);
  const auto cfg = checkpoint_config(params, o);
  const auto dataset = io::load_dataset(data_dir(o));
  const auto split = train::make_split(cfg, dataset);
  const auto report = train::evaluate(train::make_predictor(cfg, params), train::to_string(cfg.method), dataset, split, cfg);
  const auto ballistic = train::evaluate(train::ballistic_predictor(cfg.velocity), "ballistic", dataset, split, cfg);
  train::save_report(report, o.report);
  out << train::summary(report) << "\n" << train::summary(ballistic) << "\n";
  out << "wrote " << o.report << " and " << fs::path(o.report).replace_extension(".csv").string() << "\n";
  return 0;
}

int inspect(const Options& o, std::ostream& out) {
  const auto rec = io::load_complex(o.complex);
  out << "id          " << rec.id << "\n";
  out << "atoms       " << rec.atom_count() << " (";
  std::map<int, int> counts;
  for (int z : rec.atomic_numbers) ++counts[z];
  bool first = true;
  for (const auto& [z, n] : counts) {
    out << (first ? "" : " ") << model::element_symbol(z) << n;
    first = false;
  }
  out << ")\n";
  out << "residues    " << rec.residue_count() << "\n";
  out << "snapshots   " << rec.snapshot_count() << "\n";
  out << "velocities  " << (rec.has_velocities() ? "yes" : "no") << "\n";

  double step_sum = 0.0, step_max = 0.0, rg_sum = 0.0;
  std::size_t steps = 0;
  for (std::size_t t = 0; t < rec.snapshot_count(); ++t) {
    const auto& x = rec.trajectory[t].positions;
    geometry::Vec3 c = geometry::Vec3::Zero();
    for (const auto& p : x) c += p;
    c /= static_cast<double>(x.size());
    double rg = 0.0;
    for (const auto& p : x) rg += (p - c).squaredNorm();
    rg_sum += std::sqrt(rg / static_cast<double>(x.size()));
    if (t == 0) continue;
    for (std::size_t i = 0; i < x.size(); ++i, ++steps) {
      const double d = (x[i] - rec.trajectory[t - 1].positions[i]).norm();
      step_sum += d;
      step_max = std::max(step_max, d);
    }
  }
  out << "mean radius of gyration " << rg_sum / static_cast<double>(rec.snapshot_count()) << " A\n";
  if (steps > 0)
    out << "per-snapshot displacement mean " << step_sum / static_cast<double>(steps) << " A, max " << step_max
        << " A\n";
  for (const auto& [k, v] : rec.metadata)
    if (k != "synthetic_spec") out << "meta " << k << " = " << v << "\n";
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Trajectory learning for protein-ligand binding dynamics", "nmd"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  app.add_option("--seed", o.seed, "Override the seed of a synthetic spec or training config");
  app.add_option("--log-level", o.log_level, "trace, debug, info, warn, error or off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  auto* gen = app.add_subcommand("gen-synthetic", "Generate a synthetic complex from a JSON spec");
  gen->add_option("--spec", o.spec, "Synthetic spec (JSON)")->required()->check(CLI::ExistingFile);
  gen->add_option("--out", o.out, "Output complex file")->required();
  gen->add_flag("--binary", o.binary, "Write the packed binary encoding");

  auto* tr = app.add_subcommand("train", "Train a method and write a checkpoint");
  tr->add_option("--method", o.method, "neuralmd-ode, neuralmd-sde, verletmd, gnnmd or denoisingld");
  tr->add_option("--data", o.data, "Directory of complex files (default: $NMD_DATA_DIR or ./data)");
  tr->add_option("--split", o.split, "single or multi")->check(CLI::IsMember({"single", "multi"}));
  tr->add_option("--config", o.config, "Training config (JSON)")->check(CLI::ExistingFile);
  tr->add_option("--epochs", o.epochs, "Override the epoch count");
  tr->add_option("--out", o.out, "Checkpoint to write")->required();

  auto* sim = app.add_subcommand("simulate", "Roll out a trained model from a snapshot of a complex");
  sim->add_option("--ckpt", o.ckpt, "Checkpoint")->required();
  sim->add_option("--complex", o.complex, "Complex file")->required()->check(CLI::ExistingFile);
  sim->add_option("--steps", o.steps, "Snapshots to predict")->required()->check(CLI::PositiveNumber);
  sim->add_option("--start", o.start, "Snapshot to start from");
  sim->add_option("--out", o.out, "Output trajectory (complex format)")->required();

  auto* ev = app.add_subcommand("evaluate", "Score a checkpoint on the test split of a dataset");
  ev->add_option("--ckpt", o.ckpt, "Checkpoint")->required();
  ev->add_option("--data", o.data, "Directory of complex files (default: $NMD_DATA_DIR or ./data)");
  ev->add_option("--report", o.report, "Report path (JSON; a .csv table is written next to it)")->required();

  auto* ins = app.add_subcommand("inspect", "Print counts and statistics of a complex file");
  ins->add_option("--complex", o.complex, "Complex file")->required()->check(CLI::ExistingFile);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    err << "\n" << app.help();
    return 2;
  }

  spdlog::set_level(spdlog::level::from_str(o.log_level));
  try {
    if (*gen) return gen_synthetic(o, out);
    if (*tr) return train_cmd(o, out);
    if (*sim) return simulate(o, out);
    if (*ev) return evaluate_cmd(o, out);
    if (*ins) return inspect(o, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace nmd::cli
