#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cstddef>
#include <random>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "nmd/tensor/tensor.hpp"

namespace nmd::geometry {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Any normalization below this norm is treated as a degenerate frame.
inline constexpr double kDegenerateTolerance = 1e-10;

class DegenerateFrameError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Ordered direction triple used for scalarization and vectorization.
struct FrameBasis {
  Vec3 e1 = Vec3::UnitX();
  Vec3 e2 = Vec3::UnitY();
  Vec3 e3 = Vec3::UnitZ();

  const Vec3& operator[](std::size_t k) const { return k == 0 ? e1 : (k == 1 ? e2 : e3); }
  // Applies `r` to each basis vector.
  FrameBasis rotated(const Mat3& r) const { return {r * e1, r * e2, r * e3}; }
};

struct PairList {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  double cutoff = 0.0;
};

struct Centralized {
  std::vector<Vec3> positions;
  Vec3 center = Vec3::Zero();
};

Vec3 center_of_mass(std::span<const Vec3> positions, std::span<const double> masses);

/// Shifts the system so its mass-weighted centroid is the origin.
Centralized centralize(std::span<const Vec3> positions, std::span<const double> masses);

/// All pairs within `cutoff` (inclusive), emitted in both directions, sorted
/// by (i, j).
PairList neighbor_pairs(std::span<const Vec3> positions, double cutoff);

/// Pairs (i in `a`, j in `b`) with ‖a_i − b_j‖ ≤ cutoff, sorted by (i, j).
PairList cross_pairs(std::span<const Vec3> a, std::span<const Vec3> b, double cutoff);

Vec3 normalized(const Vec3& v);

FrameBasis gram_schmidt(const Vec3& v1, const Vec3& v2, const Vec3& v3);
// Gram–Schmidt pass over an existing frame's own vectors.
FrameBasis orthogonalize(const FrameBasis& frame);

/// Ligand atom-pair frame on centralized coordinates:
/// e1 = (xi − xj)/‖·‖, e2 = (xi × xj)/‖·‖, e3 = e1 × e2.
FrameBasis atom_frame(const Vec3& xi, const Vec3& xj);

/// Residue backbone frame: e1 = (xN − xCα)/‖·‖, e2 = (xCα − xC)/‖·‖,
/// e3 = normalize(e1 × e2). e1 and e2 are not orthogonalized.
FrameBasis backbone_frame(const Vec3& x_n, const Vec3& x_ca, const Vec3& x_c);

/// Residue-pair frame for consecutive pocket residues; same construction as
/// atom_frame applied to Cα coordinates.
FrameBasis complex_frame(const Vec3& xp_i, const Vec3& xp_next);

/// Component k is v · e_k.
Vec3 scalarize(const Vec3& v, const FrameBasis& frame);
/// Row-wise scalarization of a d×3 block.
Eigen::MatrixX3d scalarize_block(const Eigen::MatrixX3d& rows, const FrameBasis& frame);
Vec3 vectorize(const Vec3& s, const FrameBasis& frame);

/// Residues whose Cα lies within `cutoff` of any ligand atom, ascending.
std::vector<std::size_t> pocket_residues(std::span<const Vec3> ligand, std::span<const Vec3> ca, double cutoff);

/// For each pocket member, the residue pair its complex frame is built from:
/// (k, next member), or (previous member, k) for the last one. Empty when the
/// pocket has fewer than two members.
std::vector<std::pair<std::size_t, std::size_t>> pocket_frame_pairs(std::span<const std::size_t> pocket);

/// Uniformly distributed rotation (random unit quaternion).
Mat3 random_rotation(std::mt19937_64& rng);

// Differentiable batched counterparts. Inputs are [m,3] tensors; results are
// [m,3,3] with F[e,k,:] = e_k of row e. Degeneracy is the caller's concern.
Tensor atom_frames(const Tensor& xi, const Tensor& xj, bool orthogonalize_frames = false);
Tensor backbone_frames(const Tensor& x_n, const Tensor& x_ca, const Tensor& x_c, bool orthogonalize_frames = false);
Tensor orthogonalize_frames(const Tensor& frames);
// [m,3,p] block scalarized on [m,3,3] frames -> [m,3,p].
Tensor scalarize_rows(const Tensor& frames, const Tensor& block);

std::vector<Vec3> to_vec3(const Tensor& rows);
Tensor from_vec3(std::span<const Vec3> rows);

}  // namespace nmd::geometry
