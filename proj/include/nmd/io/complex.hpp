#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "nmd/model/types.hpp"

namespace nmd::io {

using geometry::Vec3;

/// Ligand coordinates at one snapshot; velocities are empty when the source
/// has none.
struct Snapshot {
  std::vector<Vec3> positions;
  std::vector<Vec3> velocities;

  bool operator==(const Snapshot&) const = default;
};

/// One protein–ligand complex with its ligand trajectory. Snapshot 0 is the
/// initial ligand state; time is measured in snapshot intervals.
struct ComplexRecord {
  std::string id;
  std::vector<int> atomic_numbers;
  std::vector<double> masses;
  model::ProteinStructure protein;
  std::vector<Snapshot> trajectory;
  std::map<std::string, std::string> metadata;

  std::size_t atom_count() const { return atomic_numbers.size(); }
  std::size_t residue_count() const { return protein.size(); }
  std::size_t snapshot_count() const { return trajectory.size(); }
  bool has_velocities() const;

  model::LigandState state_at(std::size_t t) const;
  model::LigandState initial_state() const { return state_at(0); }

  // Counts agree everywhere; velocities present in all snapshots or none.
  void validate() const;

  bool operator==(const ComplexRecord& other) const;
};

/// Raised for malformed or truncated files. The message names the source and
/// the line (text) or byte offset (binary) where parsing stopped.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Encoding { text, binary };

inline constexpr int kComplexFormatVersion = 1;

// Text container, one complex per file:
//
//   nmd-complex <version>
//   id <string>
//   units length=angstrom time=snapshot-interval
//   atoms <n>
//   residues <R>
//   snapshots <S>
//   velocities <0|1>
//   meta <count>             then <count> lines "<key>\t<value>"
//   ligand                   then n lines "<Z> <mass>"
//   protein                  then R lines "<RES> Nx Ny Nz CAx CAy CAz Cx Cy Cz"
//   snapshot <k>             S blocks of n lines "x y z [vx vy vz]"
//   end
//
// Numbers use the shortest round-trip decimal form, so values load exactly.
std::string to_text(const ComplexRecord& record);
ComplexRecord parse_text(std::string_view text, const std::string& source = "<memory>");

// Packed little-endian variant with the same content, starting with the
// 8-byte magic "NMDCBIN\0" and a u32 version.
std::string to_binary(const ComplexRecord& record);
ComplexRecord parse_binary(std::string_view bytes, const std::string& source = "<memory>");

void save_complex(const ComplexRecord& record, const std::filesystem::path& path, Encoding encoding = Encoding::text);
// Detects the encoding from the leading bytes.
ComplexRecord load_complex(const std::filesystem::path& path);

inline constexpr std::string_view kTextExtension = ".nmdc";
inline constexpr std::string_view kBinaryExtension = ".nmdb";

/// Every complex file in `dir`, ordered by file name.
std::vector<ComplexRecord> load_dataset(const std::filesystem::path& dir);

/// $NMD_DATA_DIR when set, otherwise "./data".
std::filesystem::path default_data_dir();

}  // namespace nmd::io
