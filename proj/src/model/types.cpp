#include "nmd/model/types.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "nmd/model/chem.hpp"

namespace nmd::model {

namespace {

void require_finite(const std::vector<Vec3>& v, const char* what) {
  for (std::size_t i = 0; i < v.size(); ++i)
    if (!v[i].allFinite()) throw std::invalid_argument(std::string(what) + " " + std::to_string(i) + " is not finite");
}

}  // namespace

void LigandState::validate() const {
  const std::size_t n = atomic_numbers.size();
  if (positions.size() != n || masses.size() != n || (!velocities.empty() && velocities.size() != n)) {
    throw std::invalid_argument("ligand field lengths differ: " + std::to_string(n) + " atoms, " +
                                std::to_string(positions.size()) + " positions, " + std::to_string(masses.size()) +
                                " masses, " + std::to_string(velocities.size()) + " velocities");
  }
  for (std::size_t i = 0; i < n; ++i) {
    element_index(atomic_numbers[i]);
    if (!(masses[i] > 0.0)) throw std::invalid_argument("ligand atom " + std::to_string(i) + " has non-positive mass");
  }
  require_finite(positions, "ligand position");
  require_finite(velocities, "ligand velocity");
}

LigandState LigandState::from_elements(std::vector<int> atomic_numbers, std::vector<Vec3> positions,
                                       std::vector<Vec3> velocities) {
  LigandState s;
  s.masses.reserve(atomic_numbers.size());
  for (int z : atomic_numbers) s.masses.push_back(atomic_mass(z));
  s.atomic_numbers = std::move(atomic_numbers);
  s.positions = std::move(positions);
  s.velocities = std::move(velocities);
  s.validate();
  return s;
}

void ProteinStructure::validate() const {
  const std::size_t r = residue_types.size();
  if (n.size() != r || ca.size() != r || c.size() != r) {
    throw std::invalid_argument("protein field lengths differ: " + std::to_string(r) + " residues, " +
                                std::to_string(n.size()) + "/" + std::to_string(ca.size()) + "/" +
                                std::to_string(c.size()) + " N/CA/C coordinates");
  }
  for (std::size_t i = 0; i < r; ++i)
    if (residue_types[i] < 0 || residue_types[i] >= static_cast<int>(kResidueVocab))
      throw std::invalid_argument("residue " + std::to_string(i) + " has type " + std::to_string(residue_types[i]) +
                                  " outside the 21-entry vocabulary");
  require_finite(n, "backbone N");
  require_finite(ca, "backbone CA");
  require_finite(c, "backbone C");
}

std::vector<Vec3> ProteinStructure::backbone_positions() const {
  std::vector<Vec3> out;
  out.reserve(3 * size());
  for (std::size_t r = 0; r < size(); ++r) {
    out.push_back(n[r]);
    out.push_back(ca[r]);
    out.push_back(c[r]);
  }
  return out;
}

std::vector<double> ProteinStructure::backbone_masses() const {
  std::vector<double> out;
  out.reserve(3 * size());
  const double mn = atomic_mass(backbone_atomic_number(BackboneAtom::n));
  const double mc = atomic_mass(backbone_atomic_number(BackboneAtom::ca));
  for (std::size_t r = 0; r < size(); ++r) out.insert(out.end(), {mn, mc, mc});
  return out;
}

}  // namespace nmd::model
