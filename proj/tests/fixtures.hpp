#pragma once

#include <cmath>
#include <random>
#include <utility>

#include "nmd/geometry/frames.hpp"
#include "nmd/model/bindingnet.hpp"
#include "nmd/model/types.hpp"

namespace fixtures {

using nmd::geometry::Mat3;
using nmd::geometry::Vec3;

// Four residues on a slightly irregular ring with out-of-plane N/C atoms.
inline nmd::model::ProteinStructure ring_protein() {
  nmd::model::ProteinStructure p;
  const double angles[] = {0.0, 1.62, 3.1, 4.75};
  const double radii[] = {3.0, 3.2, 2.9, 3.1};
  for (int k = 0; k < 4; ++k) {
    const Vec3 ca(radii[k] * std::cos(angles[k]), radii[k] * std::sin(angles[k]), 0.1 * k);
    p.residue_types.push_back(k * 5);
    p.ca.push_back(ca);
    p.n.push_back(ca + Vec3(-0.55, 0.8, 1.0));
    p.c.push_back(ca + Vec3(0.9, 0.35, 0.6));
  }
  return p;
}

inline nmd::model::LigandState small_ligand() {
  return nmd::model::LigandState::from_elements({6, 7, 8}, {Vec3(0.6, 0.2, -0.3), Vec3(-0.5, 0.4, 0.1), Vec3(0.1, -0.7, 0.2)},
                                                {Vec3(0.05, 0.0, 0.01), Vec3(-0.02, 0.03, 0.0), Vec3(0.0, -0.01, 0.02)});
}

// Applies x -> R x + t to every coordinate.
inline void move(nmd::model::LigandState& l, nmd::model::ProteinStructure& p, const Mat3& r, const Vec3& t) {
  for (auto& x : l.positions) x = r * x + t;
  for (auto& v : l.velocities) v = r * v;
  for (auto* set : {&p.n, &p.ca, &p.c})
    for (auto& x : *set) x = r * x + t;
}

// Shifts ligand and protein so the joint mass-weighted centroid is the origin.
inline void centralize(nmd::model::LigandState& l, nmd::model::ProteinStructure& p) {
  auto pos = p.backbone_positions();
  auto m = p.backbone_masses();
  pos.insert(pos.end(), l.positions.begin(), l.positions.end());
  m.insert(m.end(), l.masses.begin(), l.masses.end());
  const Vec3 c = nmd::geometry::center_of_mass(pos, m);
  move(l, p, Mat3::Identity(), -c);
}

inline nmd::model::BindingNetConfig small_config(bool zero_heads = false) {
  nmd::model::BindingNetConfig cfg;
  cfg.hidden = 8;
  cfg.layers = 2;
  cfg.zero_output_heads = zero_heads;
  return cfg;
}

}  // namespace fixtures
