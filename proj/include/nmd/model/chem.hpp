#pragma once

#include <cstddef>
#include <string>
#include <stdexcept>
#include <string_view>

namespace nmd::model {

// Elements H (Z=1) through Rn (Z=86).
inline constexpr int kMaxAtomicNumber = 86;
inline constexpr std::size_t kElementVocab = kMaxAtomicNumber;

// The 20 standard residues in alphabetical three-letter order, then UNK.
inline constexpr std::size_t kResidueVocab = 21;
inline constexpr int kUnknownResidue = 20;

enum class BackboneAtom : int { n = 0, ca = 1, c = 2 };
inline constexpr std::size_t kBackboneVocab = 3;

class UnknownElementError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

bool is_supported_element(int atomic_number);
// Embedding row for an element; throws UnknownElementError.
std::size_t element_index(int atomic_number);
int atomic_number_from_index(std::size_t index);
std::string_view element_symbol(int atomic_number);
int atomic_number_from_symbol(std::string_view symbol);
// Standard atomic weight in unified atomic mass units.
double atomic_mass(int atomic_number);

std::string_view residue_name(int type);
// Three-letter code lookup (case-sensitive, upper case); unknown codes map to UNK.
int residue_type(std::string_view three_letter);

int backbone_atomic_number(BackboneAtom atom);

}  // namespace nmd::model
