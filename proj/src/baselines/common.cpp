#include "nmd/baselines/common.hpp"

#include "nmd/tensor/ops.hpp"

namespace nmd::baselines {

void Segment::validate(std::size_t min_length) const {
  if (!record) throw std::invalid_argument("segment has no record");
  if (begin >= end || end > record->snapshot_count())
    throw std::invalid_argument("segment [" + std::to_string(begin) + ", " + std::to_string(end) + ") outside " +
                                record->id + " (" + std::to_string(record->snapshot_count()) + " snapshots)");
  if (length() < min_length)
    throw std::invalid_argument("segment of " + record->id + " has " + std::to_string(length()) +
                                " snapshots; at least " + std::to_string(min_length) + " are needed");
}

Tensor frames_mae(const std::vector<Tensor>& pred, std::span<const Frame> truth) {
  if (pred.size() != truth.size() || pred.empty())
    throw std::invalid_argument("trajectory loss: " + std::to_string(pred.size()) + " predicted vs " +
                                std::to_string(truth.size()) + " true snapshots");
  Tensor total = Tensor::scalar(0.0);
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const Tensor t = geometry::from_vec3(truth[k]);
    if (pred[k].shape() != t.shape())
      throw std::invalid_argument("trajectory loss: shape " + shape_str(pred[k].shape()) + " vs " + shape_str(t.shape()) +
                                  " at snapshot " + std::to_string(k));
    total = total + mean(abs(pred[k] - t));
  }
  return total * (1.0 / static_cast<double>(pred.size()));
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  // splitmix64 finalizer folded over the inputs.
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t h = mix(seed);
  for (std::uint64_t v : {a, b, c}) h = mix(h ^ v);
  return h;
}

model::BindingNet bind(const ParamSet& params, const model::BindingNetConfig& cfg, const io::ComplexRecord& record) {
  return model::BindingNet(params, cfg, record.atomic_numbers, record.masses, record.protein);
}

}  // namespace nmd::baselines
