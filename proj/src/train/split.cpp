#include "nmd/train/split.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace nmd::train {

std::string to_string(SplitKind kind) { return kind == SplitKind::single ? "single" : "multi"; }

SplitKind parse_split_kind(const std::string& name) {
  if (name == "single") return SplitKind::single;
  if (name == "multi") return SplitKind::multi;
  throw std::invalid_argument("unknown split '" + name + "' (expected single or multi)");
}

void Split::validate(std::size_t total) const {
  if (kind == SplitKind::single && !val.empty()) throw std::invalid_argument("single-trajectory split has a val set");
  std::vector<int> seen(total, 0);
  for (const auto* part : {&train, &val, &test})
    for (std::size_t i : *part) {
      if (i >= total) throw std::invalid_argument("split index " + std::to_string(i) + " out of range");
      if (seen[i]++) throw std::invalid_argument("split index " + std::to_string(i) + " used twice");
    }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) throw std::invalid_argument("split does not cover all items");
}

Split split_single(std::size_t snapshots, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw std::invalid_argument("train fraction must lie in (0, 1)");
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(snapshots)));
  if (n_train < 2 || snapshots - std::min(n_train, snapshots) < 2)
    throw std::invalid_argument("split of " + std::to_string(snapshots) + " snapshots at " +
                                std::to_string(train_fraction) + " leaves fewer than 2 snapshots on one side");
  Split s;
  s.kind = SplitKind::single;
  s.train.resize(n_train);
  std::iota(s.train.begin(), s.train.end(), 0);
  s.test.resize(snapshots - n_train);
  std::iota(s.test.begin(), s.test.end(), n_train);
  return s;
}

Split split_multi(std::size_t records, const std::array<double, 3>& fractions, std::uint64_t seed) {
  for (double f : fractions)
    if (!(f >= 0.0)) throw std::invalid_argument("split fractions must be non-negative");
  if (std::abs(fractions[0] + fractions[1] + fractions[2] - 1.0) > 1e-9)
    throw std::invalid_argument("split fractions must sum to 1");
  const double n = static_cast<double>(records);
  const auto n_train = static_cast<std::size_t>(std::llround(fractions[0] * n));
  const auto n_val = std::min(records - std::min(n_train, records),
                              static_cast<std::size_t>(std::llround(fractions[1] * n)));
  if (n_train == 0 || n_val == 0 || n_train + n_val >= records)
    throw std::invalid_argument("multi-trajectory split of " + std::to_string(records) +
                                " records leaves an empty train, val or test set");
  std::vector<std::size_t> ids(records);
  std::iota(ids.begin(), ids.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  Split s;
  s.kind = SplitKind::multi;
  s.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train),
               ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), ids.end());
  return s;
}

}  // namespace nmd::train
