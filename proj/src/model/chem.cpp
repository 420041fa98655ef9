#include "nmd/model/chem.hpp"

#include <array>
#include <stdexcept>
#include <string>

namespace nmd::model {

namespace {

struct Element {
  std::string_view symbol;
  double mass;
};

constexpr std::array<Element, kMaxAtomicNumber> kElements{{
    {"H", 1.008},     {"He", 4.0026},   {"Li", 6.94},     {"Be", 9.0122},   {"B", 10.81},     {"C", 12.011},
    {"N", 14.007},    {"O", 15.999},    {"F", 18.998},    {"Ne", 20.180},   {"Na", 22.990},   {"Mg", 24.305},
    {"Al", 26.982},   {"Si", 28.085},   {"P", 30.974},    {"S", 32.06},     {"Cl", 35.45},    {"Ar", 39.948},
    {"K", 39.098},    {"Ca", 40.078},   {"Sc", 44.956},   {"Ti", 47.867},   {"V", 50.942},    {"Cr", 51.996},
    {"Mn", 54.938},   {"Fe", 55.845},   {"Co", 58.933},   {"Ni", 58.693},   {"Cu", 63.546},   {"Zn", 65.38},
    {"Ga", 69.723},   {"Ge", 72.630},   {"As", 74.922},   {"Se", 78.971},   {"Br", 79.904},   {"Kr", 83.798},
    {"Rb", 85.468},   {"Sr", 87.62},    {"Y", 88.906},    {"Zr", 91.224},   {"Nb", 92.906},   {"Mo", 95.95},
    {"Tc", 97.907},   {"Ru", 101.07},   {"Rh", 102.91},   {"Pd", 106.42},   {"Ag", 107.87},   {"Cd", 112.41},
    {"In", 114.82},   {"Sn", 118.71},   {"Sb", 121.76},   {"Te", 127.60},   {"I", 126.90},    {"Xe", 131.29},
    {"Cs", 132.91},   {"Ba", 137.33},   {"La", 138.91},   {"Ce", 140.12},   {"Pr", 140.91},   {"Nd", 144.24},
    {"Pm", 144.91},   {"Sm", 150.36},   {"Eu", 151.96},   {"Gd", 157.25},   {"Tb", 158.93},   {"Dy", 162.50},
    {"Ho", 164.93},   {"Er", 167.26},   {"Tm", 168.93},   {"Yb", 173.05},   {"Lu", 174.97},   {"Hf", 178.49},
    {"Ta", 180.95},   {"W", 183.84},    {"Re", 186.21},   {"Os", 190.23},   {"Ir", 192.22},   {"Pt", 195.08},
    {"Au", 196.97},   {"Hg", 200.59},   {"Tl", 204.38},   {"Pb", 207.2},    {"Bi", 208.98},   {"Po", 208.98},
    {"At", 209.99},   {"Rn", 222.02},
}};

constexpr std::array<std::string_view, kResidueVocab> kResidues{
    "ALA", "ARG", "ASN", "ASP", "CYS", "GLN", "GLU", "GLY", "HIS", "ILE", "LEU",
    "LYS", "MET", "PHE", "PRO", "SER", "THR", "TRP", "TYR", "VAL", "UNK"};

}  // namespace

bool is_supported_element(int atomic_number) { return atomic_number >= 1 && atomic_number <= kMaxAtomicNumber; }

std::size_t element_index(int atomic_number) {
  if (!is_supported_element(atomic_number)) {
    throw UnknownElementError("unsupported element with atomic number " + std::to_string(atomic_number) +
                              " (supported: 1..86, H..Rn)");
  }
  return static_cast<std::size_t>(atomic_number - 1);
}

int atomic_number_from_index(std::size_t index) {
  if (index >= kElementVocab) throw UnknownElementError("element index out of range: " + std::to_string(index));
  return static_cast<int>(index) + 1;
}

std::string_view element_symbol(int atomic_number) { return kElements[element_index(atomic_number)].symbol; }

int atomic_number_from_symbol(std::string_view symbol) {
  for (std::size_t i = 0; i < kElements.size(); ++i)
    if (kElements[i].symbol == symbol) return static_cast<int>(i) + 1;
  throw UnknownElementError("unknown element symbol '" + std::string(symbol) + "'");
}

double atomic_mass(int atomic_number) { return kElements[element_index(atomic_number)].mass; }

std::string_view residue_name(int type) {
  if (type < 0 || type >= static_cast<int>(kResidueVocab)) return kResidues[kUnknownResidue];
  return kResidues[static_cast<std::size_t>(type)];
}

int residue_type(std::string_view three_letter) {
  for (std::size_t i = 0; i < kResidues.size(); ++i)
    if (kResidues[i] == three_letter) return static_cast<int>(i);
  return kUnknownResidue;
}

int backbone_atomic_number(BackboneAtom atom) { return atom == BackboneAtom::n ? 7 : 6; }

}  // namespace nmd::model
