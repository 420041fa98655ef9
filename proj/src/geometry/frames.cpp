#include "nmd/geometry/frames.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <string>

#include "nmd/tensor/ops.hpp"

namespace nmd::geometry {

Vec3 center_of_mass(std::span<const Vec3> positions, std::span<const double> masses) {
  if (positions.empty()) throw std::invalid_argument("center of mass of an empty system");
  if (positions.size() != masses.size()) {
    throw std::invalid_argument("centralize: " + std::to_string(positions.size()) + " positions but " +
                                std::to_string(masses.size()) + " masses");
  }
  Vec3 acc = Vec3::Zero();
  double total = 0.0;
  for (std::size_t i = 0; i < positions.size(); ++i) {
    if (!(masses[i] > 0.0)) throw std::invalid_argument("centralize: non-positive mass at index " + std::to_string(i));
    acc += masses[i] * positions[i];
    total += masses[i];
  }
  return acc / total;
}

Centralized centralize(std::span<const Vec3> positions, std::span<const double> masses) {
  Centralized out;
  out.center = center_of_mass(positions, masses);
  out.positions.reserve(positions.size());
  for (const auto& p : positions) out.positions.push_back(p - out.center);
  return out;
}

PairList neighbor_pairs(std::span<const Vec3> positions, double cutoff) {
  PairList out;
  out.cutoff = cutoff;
  const double c2 = cutoff * cutoff;
  for (std::size_t i = 0; i < positions.size(); ++i)
    for (std::size_t j = 0; j < positions.size(); ++j)
      if (i != j && (positions[i] - positions[j]).squaredNorm() <= c2) out.pairs.emplace_back(i, j);
  return out;
}

PairList cross_pairs(std::span<const Vec3> a, std::span<const Vec3> b, double cutoff) {
  PairList out;
  out.cutoff = cutoff;
  const double c2 = cutoff * cutoff;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j)
      if ((a[i] - b[j]).squaredNorm() <= c2) out.pairs.emplace_back(i, j);
  return out;
}

Vec3 normalized(const Vec3& v) {
  const double n = v.norm();
  if (!(n >= kDegenerateTolerance)) throw DegenerateFrameError("cannot normalize vector of norm " + std::to_string(n));
  return v / n;
}

FrameBasis gram_schmidt(const Vec3& v1, const Vec3& v2, const Vec3& v3) {
  FrameBasis f;
  f.e1 = normalized(v1);
  f.e2 = normalized(v2 - v2.dot(f.e1) * f.e1);
  f.e3 = normalized(v3 - v3.dot(f.e1) * f.e1 - v3.dot(f.e2) * f.e2);
  return f;
}

FrameBasis orthogonalize(const FrameBasis& frame) { return gram_schmidt(frame.e1, frame.e2, frame.e3); }

FrameBasis atom_frame(const Vec3& xi, const Vec3& xj) {
  FrameBasis f;
  f.e1 = normalized(xi - xj);
  f.e2 = normalized(xi.cross(xj));
  f.e3 = f.e1.cross(f.e2);
  return f;
}

FrameBasis backbone_frame(const Vec3& x_n, const Vec3& x_ca, const Vec3& x_c) {
  FrameBasis f;
  f.e1 = normalized(x_n - x_ca);
  f.e2 = normalized(x_ca - x_c);
  f.e3 = normalized(f.e1.cross(f.e2));
  return f;
}

FrameBasis complex_frame(const Vec3& xp_i, const Vec3& xp_next) { return atom_frame(xp_i, xp_next); }

Vec3 scalarize(const Vec3& v, const FrameBasis& frame) { return {v.dot(frame.e1), v.dot(frame.e2), v.dot(frame.e3)}; }

Eigen::MatrixX3d scalarize_block(const Eigen::MatrixX3d& rows, const FrameBasis& frame) {
  Mat3 basis;
  basis.col(0) = frame.e1;
  basis.col(1) = frame.e2;
  basis.col(2) = frame.e3;
  return rows * basis;
}

Vec3 vectorize(const Vec3& s, const FrameBasis& frame) { return s[0] * frame.e1 + s[1] * frame.e2 + s[2] * frame.e3; }

std::vector<std::size_t> pocket_residues(std::span<const Vec3> ligand, std::span<const Vec3> ca, double cutoff) {
  std::vector<std::size_t> out;
  const double c2 = cutoff * cutoff;
  for (std::size_t r = 0; r < ca.size(); ++r) {
    const bool near = std::any_of(ligand.begin(), ligand.end(), [&](const Vec3& x) { return (x - ca[r]).squaredNorm() <= c2; });
    if (near) out.push_back(r);
  }
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> pocket_frame_pairs(std::span<const std::size_t> pocket) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  if (pocket.size() < 2) return out;
  for (std::size_t k = 0; k + 1 < pocket.size(); ++k) out.emplace_back(pocket[k], pocket[k + 1]);
  out.emplace_back(pocket[pocket.size() - 2], pocket.back());
  return out;
}

Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return q.toRotationMatrix();
}

namespace {

Tensor row_dot(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.dim(0);
  return reshape(bmm(reshape(a, {m, 1, 3}), reshape(b, {m, 3, 1})), {m, 1});
}

}  // namespace

Tensor orthogonalize_frames(const Tensor& frames) {
  const std::size_t m = frames.dim(0);
  auto axis = [&](std::size_t k) {
    std::vector<std::size_t> idx;
    // Rows of the flattened [m*3,3] view that hold axis k.
    for (std::size_t e = 0; e < m; ++e) idx.push_back(e * 3 + k);
    return gather_rows(reshape(frames, {m * 3, 3}), idx);
  };
  const Tensor v1 = axis(0), v2 = axis(1), v3 = axis(2);
  const Tensor u1 = normalize_rows(v1);
  const Tensor u2 = normalize_rows(v2 - scale_rows(u1, row_dot(v2, u1)));
  const Tensor u3 = normalize_rows(v3 - scale_rows(u1, row_dot(v3, u1)) - scale_rows(u2, row_dot(v3, u2)));
  return stack_axis1({u1, u2, u3});
}

Tensor atom_frames(const Tensor& xi, const Tensor& xj, bool orthogonalize_frames_flag) {
  const Tensor e1 = normalize_rows(xi - xj);
  const Tensor e2 = normalize_rows(cross_rows(xi, xj));
  const Tensor e3 = cross_rows(e1, e2);
  Tensor f = stack_axis1({e1, e2, e3});
  return orthogonalize_frames_flag ? orthogonalize_frames(f) : f;
}

Tensor backbone_frames(const Tensor& x_n, const Tensor& x_ca, const Tensor& x_c, bool orthogonalize_frames_flag) {
  const Tensor e1 = normalize_rows(x_n - x_ca);
  const Tensor e2 = normalize_rows(x_ca - x_c);
  const Tensor e3 = normalize_rows(cross_rows(e1, e2));
  Tensor f = stack_axis1({e1, e2, e3});
  return orthogonalize_frames_flag ? orthogonalize_frames(f) : f;
}

Tensor scalarize_rows(const Tensor& frames, const Tensor& block) { return bmm(frames, block); }

std::vector<Vec3> to_vec3(const Tensor& rows) {
  if (rows.rank() != 2 || rows.dim(1) != 3) throw TensorError("to_vec3 expects [m,3], got " + shape_str(rows.shape()));
  std::vector<Vec3> out(rows.dim(0));
  const auto v = rows.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = Vec3(v[3 * i], v[3 * i + 1], v[3 * i + 2]);
  return out;
}

Tensor from_vec3(std::span<const Vec3> rows) {
  std::vector<double> v;
  v.reserve(rows.size() * 3);
  for (const auto& r : rows) v.insert(v.end(), {r.x(), r.y(), r.z()});
  return Tensor::constant({rows.size(), 3}, std::move(v));
}

}  // namespace nmd::geometry
