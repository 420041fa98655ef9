#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace nmd::train {

enum class SplitKind { single, multi };

std::string to_string(SplitKind kind);
SplitKind parse_split_kind(const std::string& name);

/// Single-trajectory splits index snapshots (every record is cut at the
/// same place); multi-trajectory splits index records.
struct Split {
  SplitKind kind = SplitKind::single;
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;

  // Disjoint, covering [0, total), no val set for single.
  void validate(std::size_t total) const;
};

/// Temporal prefix/suffix split; both sides need at least two snapshots.
Split split_single(std::size_t snapshots, double train_fraction);

/// Seeded shuffle of record indices, then contiguous train/val/test slices.
Split split_multi(std::size_t records, const std::array<double, 3>& fractions, std::uint64_t seed);

}  // namespace nmd::train
