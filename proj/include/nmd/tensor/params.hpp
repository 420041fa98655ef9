#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "nmd/tensor/tensor.hpp"

namespace nmd {

/// Named collection of trainable leaves plus free-form string metadata.
///
/// Iteration order is the lexical order of names, which fixes the layout of
/// checkpoints and of flattened gradient vectors.
class ParamSet {
 public:
  explicit ParamSet(std::uint64_t seed = 0);

  Tensor& add(const std::string& name, Shape shape, std::vector<double> values);
  bool contains(const std::string& name) const;
  const Tensor& at(const std::string& name) const;
  Tensor& at(const std::string& name);

  std::vector<std::string> names() const;
  std::size_t size() const { return tensors_.size(); }
  std::size_t scalar_count() const;
  std::uint64_t seed() const { return seed_; }

  std::map<std::string, std::string>& meta() { return meta_; }
  const std::map<std::string, std::string>& meta() const { return meta_; }

  const std::map<std::string, Tensor>& tensors() const { return tensors_; }

  void zero_grad();
  // Deep copy into fresh leaves; gradients are not copied.
  ParamSet clone() const;
  // Overwrites values (not gradients) from a set with identical layout.
  void assign_values(const ParamSet& other);
  // Sets every value to zero, or only those whose name starts with `prefix`.
  void zero_values(std::string_view prefix = {});

  std::vector<double> flat_values() const;
  std::vector<double> flat_grads() const;

  // Checkpoint container:
  //   nmd-params <version>
  //   seed <u64>
  //   meta <count>            then <count> lines "<key>\t<value>"
  //   tensors <count>         then <count> lines "<name> <rank> <d0> ..."
  //   payload <bytes>
  // followed by the raw little-endian float64 payload in header order.
  std::string serialize() const;
  static ParamSet deserialize(std::string_view bytes);
  void save(const std::filesystem::path& path) const;
  static ParamSet load(const std::filesystem::path& path);

  static constexpr int kFormatVersion = 1;

 private:
  std::uint64_t seed_;
  std::map<std::string, Tensor> tensors_;
  std::map<std::string, std::string> meta_;
};

/// Weights uniform in ±sqrt(1/fan_in), biases zero. With `zero` set, the
/// weights are zero as well.
void add_linear(ParamSet& params, const std::string& prefix, std::size_t in, std::size_t out, std::mt19937_64& rng,
                bool zero = false);

/// Registers `<prefix>.<k>.W` / `<prefix>.<k>.b` for consecutive extents in
/// `dims`. `zero_last` zeroes the final layer.
void add_mlp(ParamSet& params, const std::string& prefix, const std::vector<std::size_t>& dims,
             std::mt19937_64& rng, bool zero_last = false);

/// Alternating affine and SiLU layers; the last layer is affine only.
Tensor mlp(const ParamSet& params, const std::string& prefix, const Tensor& x);

}  // namespace nmd
