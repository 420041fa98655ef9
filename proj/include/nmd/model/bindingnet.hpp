#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "nmd/errors.hpp"
#include "nmd/geometry/frames.hpp"
#include "nmd/model/types.hpp"
#include "nmd/tensor/params.hpp"
#include "nmd/tensor/tensor.hpp"

namespace nmd::model {

struct BindingNetConfig {
  std::size_t hidden = 64;
  std::size_t layers = 5;
  double cutoff = 5.0;  // Å
  std::size_t rbf_count = 16;
  bool orthogonalize_frames = false;
  // Final layers of the vector and energy heads start at zero, so an
  // untrained model predicts zero force.
  bool zero_output_heads = true;
  // Registers the separate ligand tower used for surrogate velocities.
  bool surrogate_tower = true;

  void validate() const;
};

/// Raised when the geometry leaves the model's domain (no usable ligand pair,
/// no valid residue). Rollouts treat it like a numerical blow-up.
class ModelDomainError : public DomainError {
 public:
  using DomainError::DomainError;
};

ParamSet init_bindingnet(const BindingNetConfig& cfg, std::uint64_t seed);
// Round trip of the architecture through checkpoint metadata.
void store_config(const BindingNetConfig& cfg, ParamSet& params);
BindingNetConfig load_config(const ParamSet& params);

struct TowerOutput {
  Tensor h;    // [n,d] invariant
  Tensor vec;  // [n,3] equivariant
};

struct ComplexOutput {
  Tensor force;             // [n,3]
  Tensor pair_h;            // [P,d]; undefined when there are no interactions
  std::size_t pair_count = 0;
};

/// Gaussian expansion of distances [E,1] -> [E,count]; centers evenly spaced
/// on [0, cutoff], width (cutoff/count)².
Tensor rbf_expand(const Tensor& dist, double cutoff, std::size_t count);

Tensor embed_atoms(const ParamSet& params, const std::string& table, std::span<const std::size_t> rows);

/// z ⊙ (1 + mean over neighbors of rbf(d_ij)·W); atoms without neighbors keep
/// their embedding.
Tensor rbf_weight(const ParamSet& params, const std::string& mix, const Tensor& z, const Tensor& x,
                  const geometry::PairList& pairs, double cutoff, std::size_t count);

std::vector<std::size_t> element_rows(std::span<const int> atomic_numbers);

/// `x` holds centralized ligand coordinates [n,3]. Optional invariant
/// per-atom features [n,k] are concatenated onto the embedding and mixed back
/// to width d by `<prefix>.cond` (see add_condition_input).
TowerOutput ligand_tower(const ParamSet& params, const BindingNetConfig& cfg, std::span<const std::size_t> elements,
                         const Tensor& x, std::string_view prefix = "lig", const Tensor* features = nullptr);

/// Registers the `lig.cond` mixing layer for `count` extra atom features.
void add_condition_input(ParamSet& params, const BindingNetConfig& cfg, std::size_t count, std::mt19937_64& rng);

/// Per-residue representation [R,d]; invariant under rigid motions.
Tensor protein_tower(const ParamSet& params, const BindingNetConfig& cfg, const ProteinStructure& protein);

/// `x` and `ca` are centralized ligand and Cα coordinates.
ComplexOutput complex_tower(const ParamSet& params, const BindingNetConfig& cfg, const TowerOutput& ligand,
                            const Tensor& x, const Tensor& protein_h, const Tensor& ca);

/// BindingNet bound to one complex. The protein representation is computed
/// once at construction; `params` must outlive this object.
class BindingNet {
 public:
  BindingNet(const ParamSet& params, BindingNetConfig cfg, std::span<const int> atomic_numbers,
             std::span<const double> masses, const ProteinStructure& protein);

  struct Centered {
    Tensor ligand;  // [n,3]
    Tensor ca;      // [R,3]
  };
  // Subtracts the mass-weighted centroid of ligand plus backbone atoms; the
  // shift is differentiable in the ligand coordinates.
  Centered centralize(const Tensor& x) const;

  // Ligand coordinates may be in any frame; they are re-centralized first.
  Tensor force(const Tensor& x) const;
  // Force with extra invariant atom features fed to the ligand tower.
  Tensor force(const Tensor& x, const Tensor& features) const;
  Tensor energy(const Tensor& x) const;
  // Learned part of the surrogate velocity (vec of the surrogate tower).
  Tensor surrogate_term(const Tensor& x) const;

  TowerOutput ligand(const Tensor& centered_x, const Tensor* features = nullptr) const;
  ComplexOutput complex(const Tensor& x, const Tensor* features = nullptr) const;

  const Tensor& protein_h() const { return protein_h_; }
  const BindingNetConfig& config() const { return cfg_; }
  const ParamSet& params() const { return params_; }
  std::span<const double> masses() const { return masses_; }
  std::size_t atom_count() const { return elements_.size(); }

 private:
  const ParamSet& params_;
  BindingNetConfig cfg_;
  std::vector<std::size_t> elements_;
  std::vector<double> masses_;
  Tensor mass_column_;  // [n,1]
  Tensor ca_;           // [R,3] as given
  Eigen::Vector3d backbone_moment_;
  double total_mass_ = 0.0;
  Tensor protein_h_;
};

/// Force on already-centralized inputs; throws if the centroid of ligand plus
/// backbone is farther than 1e-6 Å from the origin.
std::vector<geometry::Vec3> predict_force(const ParamSet& params, const BindingNetConfig& cfg,
                                          const LigandState& ligand, const ProteinStructure& protein);
double predict_energy(const ParamSet& params, const BindingNetConfig& cfg, const LigandState& ligand,
                      const ProteinStructure& protein);

}  // namespace nmd::model
