#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "nmd/io/complex.hpp"

namespace nmd::io {

enum class ForceFieldKind { harmonic_tether, lennard_jones_binding };

std::string to_string(ForceFieldKind kind);
ForceFieldKind parse_force_field(const std::string& name);

/// Recipe for a desk-scale ground-truth trajectory.
///
/// Protein sites sit on a sphere of radius `site_radius` around the origin.
/// harmonic-tether: every ligand atom is pulled toward the site centroid with
/// stiffness `stiffness`, and consecutive ligand atoms are joined by springs
/// (`bond_stiffness`, rest length `bond_length`).
/// lennard-jones-binding: each atom feels 12-6 potentials (`well_depth`,
/// `lj_sigma`) from every site plus the same bond springs.
struct SyntheticSpec {
  ForceFieldKind kind = ForceFieldKind::harmonic_tether;
  std::string id = "synthetic";
  std::size_t atoms = 2;
  std::size_t sites = 4;
  std::size_t snapshots = 100;
  // Ligand elements, cycled over the atoms.
  std::vector<int> elements{6, 7, 8};
  double stiffness = 1.0;
  double bond_stiffness = 1.0;
  double bond_length = 1.5;
  double well_depth = 1.0;
  double lj_sigma = 2.6;
  double site_radius = 3.0;
  // Initial displacement of every atom from its rest position, Å.
  double amplitude = 0.5;
  // Initial velocities are Gaussian with variance temperature/m (k_B = 1).
  double temperature = 0.0;
  double dt_fine = 0.01;
  std::size_t stride = 100;
  std::uint64_t seed = 0;

  void validate() const;
};

void to_json(nlohmann::json& j, const SyntheticSpec& spec);
// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, SyntheticSpec& spec);
SyntheticSpec load_synthetic_spec(const std::filesystem::path& path);

/// The analytic force field of a spec, bound to a set of protein sites.
class SyntheticField {
 public:
  SyntheticField(const SyntheticSpec& spec, const model::ProteinStructure& protein);

  std::vector<Vec3> forces(const std::vector<Vec3>& x) const;
  double potential(const std::vector<Vec3>& x) const;
  const Vec3& anchor() const { return anchor_; }

 private:
  SyntheticSpec spec_;
  std::vector<Vec3> sites_;
  Vec3 anchor_;
};

/// Protein sites with residue types cycling the 20 standard residues.
model::ProteinStructure synthetic_protein(const SyntheticSpec& spec);

/// Integrates the field with velocity Verlet at dt_fine and records every
/// stride-th state. Metadata carries the spec and the measured relative
/// energy drift of the fine integration ("energy_drift").
ComplexRecord generate_synthetic(const SyntheticSpec& spec);

}  // namespace nmd::io
