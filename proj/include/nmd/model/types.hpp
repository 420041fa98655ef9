#pragma once

#include <cstddef>
#include <vector>

#include "nmd/geometry/frames.hpp"

namespace nmd::model {

using geometry::Vec3;

/// Ligand atoms at one instant. Velocities may be empty when unknown.
struct LigandState {
  std::vector<int> atomic_numbers;
  std::vector<Vec3> positions;   // Å
  std::vector<Vec3> velocities;  // Å per snapshot interval
  std::vector<double> masses;    // u

  std::size_t size() const { return atomic_numbers.size(); }
  bool has_velocities() const { return !velocities.empty(); }
  void validate() const;

  // Masses filled in from the element table.
  static LigandState from_elements(std::vector<int> atomic_numbers, std::vector<Vec3> positions,
                                   std::vector<Vec3> velocities = {});
};

/// Rigid protein backbone: one N, Cα, C triple per residue.
struct ProteinStructure {
  std::vector<int> residue_types;
  std::vector<Vec3> n;
  std::vector<Vec3> ca;
  std::vector<Vec3> c;

  std::size_t size() const { return residue_types.size(); }
  void validate() const;

  // Flattened as N, Cα, C for residue 0, then residue 1, ...
  std::vector<Vec3> backbone_positions() const;
  std::vector<double> backbone_masses() const;
};

}  // namespace nmd::model
