#include "nmd/io/synthetic.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include <nlohmann/json.hpp>

#include "nmd/model/chem.hpp"

namespace nmd::io {

std::string to_string(ForceFieldKind kind) {
  return kind == ForceFieldKind::harmonic_tether ? "harmonic-tether" : "lennard-jones-binding";
}

ForceFieldKind parse_force_field(const std::string& name) {
  if (name == "harmonic-tether") return ForceFieldKind::harmonic_tether;
  if (name == "lennard-jones-binding") return ForceFieldKind::lennard_jones_binding;
  throw std::invalid_argument("unknown force field '" + name + "' (expected harmonic-tether or lennard-jones-binding)");
}

void SyntheticSpec::validate() const {
  const auto fail = [](const std::string& what) { throw std::invalid_argument("synthetic spec: " + what); };
  if (atoms == 0) fail("atoms must be at least 1");
  if (sites == 0) fail("sites must be at least 1");
  if (snapshots < 2) fail("snapshots must be at least 2");
  if (elements.empty()) fail("elements must not be empty");
  for (int z : elements)
    if (!model::is_supported_element(z)) fail("unsupported element Z=" + std::to_string(z));
  for (auto [name, v] : {std::pair{"stiffness", stiffness}, {"bond_stiffness", bond_stiffness}, {"bond_length", bond_length},
                         {"well_depth", well_depth}, {"lj_sigma", lj_sigma}, {"site_radius", site_radius},
                         {"dt_fine", dt_fine}})
    if (!(v > 0.0) || !std::isfinite(v)) fail(std::string(name) + " must be positive");
  if (!(amplitude >= 0.0)) fail("amplitude must be non-negative");
  if (!(temperature >= 0.0)) fail("temperature must be non-negative");
  if (stride == 0) fail("stride must be at least 1");
  if (std::abs(dt_fine * static_cast<double>(stride) - 1.0) > 1e-9)
    fail("dt_fine * stride must equal one snapshot interval");
  if (id.empty() || id.find_first_of(" \t\r\n") != std::string::npos) fail("id must be a single token");
}

void to_json(nlohmann::json& j, const SyntheticSpec& s) {
  j = nlohmann::json{{"kind", to_string(s.kind)},
                     {"id", s.id},
                     {"atoms", s.atoms},
                     {"sites", s.sites},
                     {"snapshots", s.snapshots},
                     {"elements", s.elements},
                     {"stiffness", s.stiffness},
                     {"bond_stiffness", s.bond_stiffness},
                     {"bond_length", s.bond_length},
                     {"well_depth", s.well_depth},
                     {"lj_sigma", s.lj_sigma},
                     {"site_radius", s.site_radius},
                     {"amplitude", s.amplitude},
                     {"temperature", s.temperature},
                     {"dt_fine", s.dt_fine},
                     {"stride", s.stride},
                     {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, SyntheticSpec& s) {
  if (!j.is_object()) throw std::invalid_argument("synthetic spec must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "kind") s.kind = parse_force_field(value.get<std::string>());
    else if (key == "id") s.id = value.get<std::string>();
    else if (key == "atoms") s.atoms = value.get<std::size_t>();
    else if (key == "sites") s.sites = value.get<std::size_t>();
    else if (key == "snapshots") s.snapshots = value.get<std::size_t>();
    else if (key == "elements") s.elements = value.get<std::vector<int>>();
    else if (key == "stiffness") s.stiffness = value.get<double>();
    else if (key == "bond_stiffness") s.bond_stiffness = value.get<double>();
    else if (key == "bond_length") s.bond_length = value.get<double>();
    else if (key == "well_depth") s.well_depth = value.get<double>();
    else if (key == "lj_sigma") s.lj_sigma = value.get<double>();
    else if (key == "site_radius") s.site_radius = value.get<double>();
    else if (key == "amplitude") s.amplitude = value.get<double>();
    else if (key == "temperature") s.temperature = value.get<double>();
    else if (key == "dt_fine") s.dt_fine = value.get<double>();
    else if (key == "stride") s.stride = value.get<std::size_t>();
    else if (key == "seed") s.seed = value.get<std::uint64_t>();
    else throw std::invalid_argument("synthetic spec: unknown key '" + key + "'");
  }
  s.validate();
}

SyntheticSpec load_synthetic_spec(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open synthetic spec " + path.string());
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
  return j.get<SyntheticSpec>();
}

SyntheticField::SyntheticField(const SyntheticSpec& spec, const model::ProteinStructure& protein)
    : spec_(spec), sites_(protein.ca), anchor_(Vec3::Zero()) {
  if (sites_.empty()) throw std::invalid_argument("synthetic field needs at least one protein site");
  for (const auto& s : sites_) anchor_ += s;
  anchor_ /= static_cast<double>(sites_.size());
}

std::vector<Vec3> SyntheticField::forces(const std::vector<Vec3>& x) const {
  std::vector<Vec3> f(x.size(), Vec3::Zero());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (spec_.kind == ForceFieldKind::harmonic_tether) {
      f[i] -= spec_.stiffness * (x[i] - anchor_);
    } else {
      for (const auto& s : sites_) {
        const Vec3 r = x[i] - s;
        const double d2 = r.squaredNorm();
        const double sr6 = std::pow(spec_.lj_sigma * spec_.lj_sigma / d2, 3);
        // -dU/dr along r for U = 4ε(sr12 - sr6).
        f[i] += (24.0 * spec_.well_depth * (2.0 * sr6 * sr6 - sr6) / d2) * r;
      }
    }
  }
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    const Vec3 r = x[i + 1] - x[i];
    const double d = r.norm();
    const Vec3 pull = spec_.bond_stiffness * (d - spec_.bond_length) / d * r;
    f[i] += pull;
    f[i + 1] -= pull;
  }
  return f;
}

double SyntheticField::potential(const std::vector<Vec3>& x) const {
  double u = 0.0;
  for (const auto& xi : x) {
    if (spec_.kind == ForceFieldKind::harmonic_tether) {
      u += 0.5 * spec_.stiffness * (xi - anchor_).squaredNorm();
    } else {
      for (const auto& s : sites_) {
        const double sr6 = std::pow(spec_.lj_sigma * spec_.lj_sigma / (xi - s).squaredNorm(), 3);
        u += 4.0 * spec_.well_depth * (sr6 * sr6 - sr6);
      }
    }
  }
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    const double stretch = (x[i + 1] - x[i]).norm() - spec_.bond_length;
    u += 0.5 * spec_.bond_stiffness * stretch * stretch;
  }
  return u;
}

model::ProteinStructure synthetic_protein(const SyntheticSpec& spec) {
  spec.validate();
  // Separate stream so the protein does not shift when ligand options change.
  std::mt19937_64 rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> jitter(0.0, 0.05);
  const Vec3 n_off = Vec3(-0.55, 0.8, 1.0).normalized() * 1.46;
  const Vec3 c_off = Vec3(0.9, 0.35, 0.6).normalized() * 1.52;
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  model::ProteinStructure p;
  const double count = static_cast<double>(spec.sites);
  for (std::size_t k = 0; k < spec.sites; ++k) {
    const double z = 1.0 - 2.0 * (static_cast<double>(k) + 0.5) / count;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * static_cast<double>(k);
    Vec3 ca = spec.site_radius * Vec3(r * std::cos(phi), r * std::sin(phi), z);
    for (int a = 0; a < 3; ++a) ca[a] += jitter(rng);
    const auto rot = geometry::random_rotation(rng);
    p.residue_types.push_back(static_cast<int>(k % 20));
    p.ca.push_back(ca);
    p.n.push_back(ca + rot * n_off);
    p.c.push_back(ca + rot * c_off);
  }
  return p;
}

namespace {

std::string exact(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  while (true) {
    const Vec3 v(g(rng), g(rng), g(rng));
    if (v.norm() > 1e-6) return v.normalized();
  }
}

}  // namespace

ComplexRecord generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  ComplexRecord rec;
  rec.id = spec.id;
  rec.protein = synthetic_protein(spec);
  for (std::size_t i = 0; i < spec.atoms; ++i) {
    rec.atomic_numbers.push_back(spec.elements[i % spec.elements.size()]);
    rec.masses.push_back(model::atomic_mass(rec.atomic_numbers.back()));
  }
  const SyntheticField field(spec, rec.protein);

  std::mt19937_64 rng(spec.seed);
  const Vec3 axis = random_unit(rng);
  std::vector<Vec3> x(spec.atoms), v(spec.atoms, Vec3::Zero());
  for (std::size_t i = 0; i < spec.atoms; ++i) {
    const double slot = static_cast<double>(i) - 0.5 * static_cast<double>(spec.atoms - 1);
    x[i] = field.anchor() + slot * spec.bond_length * axis + spec.amplitude * random_unit(rng);
  }
  if (spec.temperature > 0.0) {
    std::normal_distribution<double> g(0.0, 1.0);
    for (std::size_t i = 0; i < spec.atoms; ++i)
      for (int a = 0; a < 3; ++a) v[i][a] = std::sqrt(spec.temperature / rec.masses[i]) * g(rng);
  }

  const auto energy = [&](const std::vector<Vec3>& xs, const std::vector<Vec3>& vs) {
    double e = field.potential(xs);
    for (std::size_t i = 0; i < xs.size(); ++i) e += 0.5 * rec.masses[i] * vs[i].squaredNorm();
    return e;
  };
  const double e0 = energy(x, v);
  double drift = 0.0;
  const double dt = spec.dt_fine;
  auto f = field.forces(x);
  rec.trajectory.push_back({x, v});
  const std::size_t total = (spec.snapshots - 1) * spec.stride;
  for (std::size_t step = 1; step <= total; ++step) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      v[i] += 0.5 * dt * f[i] / rec.masses[i];
      x[i] += dt * v[i];
    }
    f = field.forces(x);
    for (std::size_t i = 0; i < x.size(); ++i) v[i] += 0.5 * dt * f[i] / rec.masses[i];
    const double e = energy(x, v);
    if (!std::isfinite(e))
      throw std::runtime_error("synthetic integration blew up at fine step " + std::to_string(step) +
                               "; reduce dt_fine (and raise stride to keep dt_fine*stride = 1)");
    drift = std::max(drift, std::abs(e - e0) / std::max(std::abs(e0), 1e-12));
    if (step % spec.stride == 0) rec.trajectory.push_back({x, v});
  }

  nlohmann::json j = spec;
  rec.metadata["source"] = "synthetic";
  rec.metadata["synthetic_spec"] = j.dump();
  rec.metadata["timestep"] = "1 snapshot interval";
  rec.metadata["anchor"] = exact(field.anchor().x()) + " " + exact(field.anchor().y()) + " " + exact(field.anchor().z());
  rec.metadata["energy_drift"] = exact(drift);
  rec.validate();
  return rec;
}

}  // namespace nmd::io
