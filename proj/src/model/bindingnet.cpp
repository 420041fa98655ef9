#include "nmd/model/bindingnet.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <cstdio>
#include <random>
#include <string>

#include "nmd/model/chem.hpp"
#include "nmd/tensor/ops.hpp"

namespace nmd::model {

using geometry::kDegenerateTolerance;
using geometry::Vec3;

void BindingNetConfig::validate() const {
  if (hidden == 0) throw std::invalid_argument("hidden width must be positive");
  if (layers == 0) throw std::invalid_argument("layer count must be positive");
  if (!(cutoff > 0.0)) throw std::invalid_argument("cutoff must be positive");
  if (rbf_count < 2) throw std::invalid_argument("rbf_count must be at least 2");
}

namespace {

void add_table(ParamSet& params, const std::string& name, std::size_t rows, std::size_t cols, double scale,
               std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<double> v(rows * cols);
  for (auto& x : v) x = u(rng);
  params.add(name, {rows, cols}, std::move(v));
}

void add_ligand_tower(ParamSet& p, const BindingNetConfig& cfg, const std::string& prefix, std::mt19937_64& rng) {
  const std::size_t d = cfg.hidden;
  add_table(p, prefix + ".embed", kElementVocab, d, 1.0, rng);
  add_table(p, prefix + ".rbf", cfg.rbf_count, d, 1.0 / std::sqrt(static_cast<double>(cfg.rbf_count)), rng);
  add_mlp(p, prefix + ".pair", {2 * d, d, d}, rng);
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const std::string layer = prefix + ".L" + std::to_string(l);
    add_mlp(p, layer + ".vec", {d, d, 2}, rng, cfg.zero_output_heads);
    add_mlp(p, layer + ".h", {d, d, d}, rng);
  }
}

std::vector<std::vector<std::size_t>> group_by_first(const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                                                     std::size_t n) {
  std::vector<std::vector<std::size_t>> groups(n);
  for (std::size_t e = 0; e < pairs.size(); ++e) groups[pairs[e].first].push_back(e);
  return groups;
}

// [m,3] ⊗ [m,d] -> [m,3,d]
Tensor outer_rows(const Tensor& r, const Tensor& z) {
  const std::size_t m = r.dim(0), d = z.dim(1);
  return bmm(reshape(r, {m, 3, 1}), reshape(z, {m, 1, d}));
}

// Rows of two [n,3,d] blocks (stored flat as [n,3d]) joined along the
// feature axis -> [m,3,2d].
Tensor pair_block(const Tensor& flat, std::size_t d, std::span<const std::size_t> a, std::span<const std::size_t> b) {
  const std::size_t m = a.size();
  const Tensor left = reshape(gather_rows(flat, a), {3 * m, d});
  const Tensor right = reshape(gather_rows(flat, b), {3 * m, d});
  return reshape(concat_cols(left, right), {m, 3, 2 * d});
}

Tensor broadcast_row(const Tensor& row3, std::size_t m) {
  return matmul(Tensor::constant({m, 1}, std::vector<double>(m, 1.0)), reshape(row3, {1, 3}));
}

bool atom_frame_ok(const Vec3& xi, const Vec3& xj) {
  return (xi - xj).norm() >= kDegenerateTolerance && xi.cross(xj).norm() >= kDegenerateTolerance;
}

bool backbone_frame_ok(const Vec3& n, const Vec3& ca, const Vec3& c) {
  const double a = (n - ca).norm(), b = (ca - c).norm();
  if (a < kDegenerateTolerance || b < kDegenerateTolerance) return false;
  return ((n - ca) / a).cross((ca - c) / b).norm() >= kDegenerateTolerance;
}

}  // namespace

void add_condition_input(ParamSet& params, const BindingNetConfig& cfg, std::size_t count, std::mt19937_64& rng) {
  add_mlp(params, "lig.cond", {cfg.hidden + count, cfg.hidden}, rng);
}

ParamSet init_bindingnet(const BindingNetConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ParamSet p(seed);
  std::mt19937_64 rng(seed);
  const std::size_t d = cfg.hidden;
  add_ligand_tower(p, cfg, "lig", rng);
  add_table(p, "prot.embed", kBackboneVocab, d, 1.0, rng);
  add_table(p, "prot.rbf", cfg.rbf_count, d, 1.0 / std::sqrt(static_cast<double>(cfg.rbf_count)), rng);
  add_table(p, "prot.restype", kResidueVocab, d, 1.0, rng);
  add_mlp(p, "prot.pair", {2 * d, d, d}, rng);
  add_mlp(p, "cplx.pair", {d, d, d}, rng);
  add_mlp(p, "cplx.vec", {d, d, 2}, rng, cfg.zero_output_heads);
  add_mlp(p, "energy", {2 * d, d, 1}, rng, cfg.zero_output_heads);
  if (cfg.surrogate_tower) add_ligand_tower(p, cfg, "surr", rng);
  store_config(cfg, p);
  return p;
}

void store_config(const BindingNetConfig& cfg, ParamSet& params) {
  auto& m = params.meta();
  m["model.hidden"] = std::to_string(cfg.hidden);
  m["model.layers"] = std::to_string(cfg.layers);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", cfg.cutoff);
  m["model.cutoff"] = buf;
  m["model.rbf_count"] = std::to_string(cfg.rbf_count);
  m["model.orthogonalize_frames"] = cfg.orthogonalize_frames ? "1" : "0";
  m["model.zero_output_heads"] = cfg.zero_output_heads ? "1" : "0";
  m["model.surrogate_tower"] = cfg.surrogate_tower ? "1" : "0";
}

BindingNetConfig load_config(const ParamSet& params) {
  const auto& m = params.meta();
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = m.find(key);
    if (it == m.end()) throw std::invalid_argument("checkpoint metadata lacks '" + key + "'");
    return it->second;
  };
  BindingNetConfig cfg;
  cfg.hidden = std::stoul(get("model.hidden"));
  cfg.layers = std::stoul(get("model.layers"));
  cfg.cutoff = std::stod(get("model.cutoff"));
  cfg.rbf_count = std::stoul(get("model.rbf_count"));
  cfg.orthogonalize_frames = get("model.orthogonalize_frames") == "1";
  cfg.zero_output_heads = get("model.zero_output_heads") == "1";
  cfg.surrogate_tower = get("model.surrogate_tower") == "1";
  cfg.validate();
  return cfg;
}

Tensor rbf_expand(const Tensor& dist, double cutoff, std::size_t count) {
  const std::size_t m = dist.dim(0);
  std::vector<double> centers(m * count);
  for (std::size_t e = 0; e < m; ++e)
    for (std::size_t k = 0; k < count; ++k)
      centers[e * count + k] = cutoff * static_cast<double>(k) / static_cast<double>(count - 1);
  const double width = (cutoff / static_cast<double>(count)) * (cutoff / static_cast<double>(count));
  const Tensor spread = matmul(reshape(dist, {m, 1}), Tensor::constant({1, count}, std::vector<double>(count, 1.0)));
  return exp(square(spread - Tensor::constant({m, count}, std::move(centers))) * (-1.0 / width));
}

Tensor embed_atoms(const ParamSet& params, const std::string& table, std::span<const std::size_t> rows) {
  return gather_rows(params.at(table), rows);
}

Tensor rbf_weight(const ParamSet& params, const std::string& mix, const Tensor& z, const Tensor& x,
                  const geometry::PairList& pairs, double cutoff, std::size_t count) {
  if (pairs.pairs.empty()) return z;
  std::vector<std::size_t> a, b;
  for (auto [i, j] : pairs.pairs) {
    a.push_back(i);
    b.push_back(j);
  }
  const Tensor dist = norm_rows(gather_rows(x, a) - gather_rows(x, b));
  const Tensor mixed = matmul(rbf_expand(dist, cutoff, count), params.at(mix));
  return z * (mean_agg(mixed, group_by_first(pairs.pairs, z.dim(0))) + 1.0);
}

std::vector<std::size_t> element_rows(std::span<const int> atomic_numbers) {
  std::vector<std::size_t> rows;
  rows.reserve(atomic_numbers.size());
  for (int z : atomic_numbers) rows.push_back(element_index(z));
  return rows;
}

TowerOutput ligand_tower(const ParamSet& params, const BindingNetConfig& cfg, std::span<const std::size_t> elements,
                         const Tensor& x, std::string_view prefix_view, const Tensor* features) {
  const std::string prefix(prefix_view);
  const std::size_t n = x.dim(0), d = cfg.hidden;
  if (elements.size() != n) throw std::invalid_argument("ligand tower: element and coordinate counts differ");
  const auto pos = geometry::to_vec3(x);
  const auto pairs = geometry::neighbor_pairs(pos, cfg.cutoff);

  Tensor z = embed_atoms(params, prefix + ".embed", elements);
  z = rbf_weight(params, prefix + ".rbf", z, x, pairs, cfg.cutoff, cfg.rbf_count);
  if (features) {
    if (features->rank() != 2 || features->dim(0) != n)
      throw std::invalid_argument("ligand tower: condition features must be [n,k]");
    z = mlp(params, prefix + ".cond", concat_cols(z, *features));
  }

  std::vector<std::size_t> src, dst;
  for (auto [i, j] : pairs.pairs) {
    src.push_back(i);
    dst.push_back(j);
  }
  if (pairs.pairs.empty()) throw ModelDomainError("ligand has no atom pair within the cutoff");
  const Tensor rel = gather_rows(x, src) - gather_rows(x, dst);
  const Tensor heq = reshape(outer_rows(mean_agg(rel, group_by_first(pairs.pairs, n)), z), {n, 3 * d});

  std::vector<std::size_t> vi, vj, ve;
  std::vector<std::pair<std::size_t, std::size_t>> valid;
  for (std::size_t e = 0; e < pairs.pairs.size(); ++e) {
    auto [i, j] = pairs.pairs[e];
    if (!atom_frame_ok(pos[i], pos[j])) continue;
    vi.push_back(i);
    vj.push_back(j);
    ve.push_back(e);
    valid.emplace_back(i, j);
  }
  if (valid.empty()) throw ModelDomainError("every ligand pair within the cutoff has a degenerate frame");

  const Tensor frames = geometry::atom_frames(gather_rows(x, vi), gather_rows(x, vj), cfg.orthogonalize_frames);
  const Tensor pooled = sum_axis1(geometry::scalarize_rows(frames, pair_block(heq, d, vi, vj)));
  const Tensor hij = mlp(params, prefix + ".pair", pooled);
  const Tensor rel_valid = gather_rows(rel, ve);
  const auto groups = group_by_first(valid, n);

  TowerOutput out{z, Tensor::zeros({n, 3})};
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const std::string layer = prefix + ".L" + std::to_string(l);
    const Tensor ab = mlp(params, layer + ".vec", hij);
    const Tensor msg =
        scale_rows(gather_rows(out.vec, vi), slice_cols(ab, 0, 1)) + scale_rows(rel_valid, slice_cols(ab, 1, 2));
    out.vec = out.vec + mean_agg(msg, groups);
    out.h = out.h + mean_agg(mlp(params, layer + ".h", hij), groups);
  }
  return out;
}

Tensor protein_tower(const ParamSet& params, const BindingNetConfig& cfg, const ProteinStructure& protein) {
  protein.validate();
  const std::size_t r = protein.size(), d = cfg.hidden;
  if (r == 0) throw ModelDomainError("protein has no residues");
  const auto bb = protein.backbone_positions();
  const Tensor x = geometry::from_vec3(bb);
  const auto pairs = geometry::neighbor_pairs(bb, cfg.cutoff);

  std::vector<std::size_t> kinds(3 * r);
  for (std::size_t k = 0; k < kinds.size(); ++k) kinds[k] = k % 3;
  Tensor z = embed_atoms(params, "prot.embed", kinds);
  z = rbf_weight(params, "prot.rbf", z, x, pairs, cfg.cutoff, cfg.rbf_count);

  std::vector<std::size_t> src, dst;
  for (auto [i, j] : pairs.pairs) {
    src.push_back(i);
    dst.push_back(j);
  }
  Tensor mean_rel = Tensor::zeros({3 * r, 3});
  if (!src.empty())
    mean_rel = mean_agg(gather_rows(x, src) - gather_rows(x, dst), group_by_first(pairs.pairs, 3 * r));
  const Tensor heq = reshape(outer_rows(mean_rel, z), {3 * r, 3 * d});

  std::vector<std::size_t> valid, an, aca, ac;
  std::vector<std::vector<std::size_t>> slot(r);
  for (std::size_t k = 0; k < r; ++k) {
    if (!backbone_frame_ok(protein.n[k], protein.ca[k], protein.c[k])) {
      spdlog::warn("residue {} has a degenerate backbone; using its type embedding only", k);
      continue;
    }
    slot[k].push_back(valid.size());
    valid.push_back(k);
    an.push_back(3 * k);
    aca.push_back(3 * k + 1);
    ac.push_back(3 * k + 2);
  }
  if (valid.empty()) throw ModelDomainError("every residue has a degenerate backbone");

  const Tensor frames =
      geometry::backbone_frames(gather_rows(x, an), gather_rows(x, aca), gather_rows(x, ac), cfg.orthogonalize_frames);
  const Tensor h_nca = mlp(params, "prot.pair", sum_axis1(geometry::scalarize_rows(frames, pair_block(heq, d, an, aca))));
  const Tensor h_cac = mlp(params, "prot.pair", sum_axis1(geometry::scalarize_rows(frames, pair_block(heq, d, aca, ac))));

  std::vector<std::size_t> types(protein.residue_types.begin(), protein.residue_types.end());
  const Tensor type_h = gather_rows(params.at("prot.restype"), types);
  return type_h + mean_agg((h_nca + h_cac) * 0.5, slot);
}

ComplexOutput complex_tower(const ParamSet& params, const BindingNetConfig& cfg, const TowerOutput& ligand,
                            const Tensor& x, const Tensor& protein_h, const Tensor& ca) {
  const std::size_t n = x.dim(0);
  ComplexOutput out{ligand.vec, Tensor{}, 0};
  const auto lig = geometry::to_vec3(x);
  const auto cav = geometry::to_vec3(ca);
  const auto pocket = geometry::pocket_residues(lig, cav, cfg.cutoff);
  const auto frame_pairs = geometry::pocket_frame_pairs(pocket);
  if (frame_pairs.empty()) return out;

  // Frame row per residue, or npos when the residue has no usable frame.
  constexpr auto npos = static_cast<std::size_t>(-1);
  std::vector<std::size_t> frame_row(cav.size(), npos), fa, fb;
  for (std::size_t k = 0; k < pocket.size(); ++k) {
    auto [a, b] = frame_pairs[k];
    if (!atom_frame_ok(cav[a], cav[b])) continue;
    frame_row[pocket[k]] = fa.size();
    fa.push_back(a);
    fb.push_back(b);
  }
  std::vector<std::size_t> pi, pr, pf;
  std::vector<std::pair<std::size_t, std::size_t>> inter;
  for (auto [i, r] : geometry::cross_pairs(lig, cav, cfg.cutoff).pairs) {
    if (frame_row[r] == npos) continue;
    pi.push_back(i);
    pr.push_back(r);
    pf.push_back(frame_row[r]);
    inter.emplace_back(i, r);
  }
  if (inter.empty()) return out;
  const std::size_t p = inter.size();

  const Tensor member_frames =
      reshape(geometry::atom_frames(gather_rows(ca, fa), gather_rows(ca, fb), cfg.orthogonalize_frames),
              {fa.size(), 9});
  const Tensor frames = reshape(gather_rows(member_frames, pf), {p, 3, 3});
  const Tensor rel = gather_rows(x, pi) - gather_rows(ca, pr);
  const Tensor hsum = gather_rows(ligand.h, pi) + gather_rows(protein_h, pr);
  const Tensor pooled = sum_axis1(geometry::scalarize_rows(frames, outer_rows(rel, hsum)));
  out.pair_h = mlp(params, "cplx.pair", pooled);
  out.pair_count = p;

  const Tensor ab = mlp(params, "cplx.vec", out.pair_h);
  const Tensor vpl =
      scale_rows(gather_rows(ligand.vec, pi), slice_cols(ab, 0, 1)) + scale_rows(rel, slice_cols(ab, 1, 2));
  out.force = ligand.vec + mean_agg(vpl, group_by_first(inter, n));
  return out;
}

BindingNet::BindingNet(const ParamSet& params, BindingNetConfig cfg, std::span<const int> atomic_numbers,
                       std::span<const double> masses, const ProteinStructure& protein)
    : params_(params),
      cfg_(cfg),
      elements_(element_rows(atomic_numbers)),
      masses_(masses.begin(), masses.end()),
      ca_(geometry::from_vec3(protein.ca)) {
  cfg_.validate();
  if (masses_.size() != elements_.size()) throw std::invalid_argument("BindingNet: mass and element counts differ");
  mass_column_ = Tensor::constant({masses_.size(), 1}, masses_);
  backbone_moment_.setZero();
  const auto bb = protein.backbone_positions();
  const auto bm = protein.backbone_masses();
  for (std::size_t k = 0; k < bb.size(); ++k) {
    backbone_moment_ += bm[k] * bb[k];
    total_mass_ += bm[k];
  }
  for (double m : masses_) total_mass_ += m;
  protein_h_ = protein_tower(params_, cfg_, protein);
}

BindingNet::Centered BindingNet::centralize(const Tensor& x) const {
  const std::size_t n = x.dim(0);
  if (n != elements_.size()) throw std::invalid_argument("BindingNet: coordinate count differs from atom count");
  const Tensor moment = sum_rows(scale_rows(x, mass_column_)) +
                        Tensor::constant({3}, {backbone_moment_.x(), backbone_moment_.y(), backbone_moment_.z()});
  const Tensor center = moment * (1.0 / total_mass_);
  return {x - broadcast_row(center, n), ca_ - broadcast_row(center, ca_.dim(0))};
}

TowerOutput BindingNet::ligand(const Tensor& centered_x, const Tensor* features) const {
  return ligand_tower(params_, cfg_, elements_, centered_x, "lig", features);
}

ComplexOutput BindingNet::complex(const Tensor& x, const Tensor* features) const {
  const auto c = centralize(x);
  return complex_tower(params_, cfg_, ligand(c.ligand, features), c.ligand, protein_h_, c.ca);
}

Tensor BindingNet::force(const Tensor& x) const { return complex(x).force; }

Tensor BindingNet::force(const Tensor& x, const Tensor& features) const { return complex(x, &features).force; }

Tensor BindingNet::energy(const Tensor& x) const {
  const auto c = centralize(x);
  const TowerOutput lig = ligand(c.ligand);
  const auto cx = complex_tower(params_, cfg_, lig, c.ligand, protein_h_, c.ca);
  const std::size_t d = cfg_.hidden;
  const Tensor atoms = reshape(sum_rows(lig.h), {1, d});
  const Tensor inter = cx.pair_count > 0 ? reshape(sum_rows(cx.pair_h), {1, d}) : Tensor::zeros({1, d});
  return reshape(mlp(params_, "energy", concat_cols(atoms, inter)), {});
}

Tensor BindingNet::surrogate_term(const Tensor& x) const {
  if (!cfg_.surrogate_tower) throw std::logic_error("model was built without a surrogate tower");
  return ligand_tower(params_, cfg_, elements_, centralize(x).ligand, "surr").vec;
}

namespace {

void require_centralized(const LigandState& ligand, const ProteinStructure& protein) {
  auto pos = protein.backbone_positions();
  auto m = protein.backbone_masses();
  pos.insert(pos.end(), ligand.positions.begin(), ligand.positions.end());
  m.insert(m.end(), ligand.masses.begin(), ligand.masses.end());
  const double off = geometry::center_of_mass(pos, m).norm();
  if (!(off < 1e-6))
    throw std::invalid_argument("inputs are not centralized: centroid is " + std::to_string(off) + " Å from the origin");
}

}  // namespace

std::vector<Vec3> predict_force(const ParamSet& params, const BindingNetConfig& cfg, const LigandState& ligand,
                                const ProteinStructure& protein) {
  ligand.validate();
  require_centralized(ligand, protein);
  BindingNet net(params, cfg, ligand.atomic_numbers, ligand.masses, protein);
  return geometry::to_vec3(net.force(geometry::from_vec3(ligand.positions)));
}

double predict_energy(const ParamSet& params, const BindingNetConfig& cfg, const LigandState& ligand,
                      const ProteinStructure& protein) {
  ligand.validate();
  require_centralized(ligand, protein);
  BindingNet net(params, cfg, ligand.atomic_numbers, ligand.masses, protein);
  return net.energy(geometry::from_vec3(ligand.positions)).item();
}

}  // namespace nmd::model
