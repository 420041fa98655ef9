#include "nmd/tensor/params.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "nmd/tensor/ops.hpp"

namespace nmd {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint payload assumes a little-endian host");

void check_name(const std::string& name) {
  if (name.empty() || name.find_first_of(" \t\n\r") != std::string::npos) {
    throw TensorError("invalid parameter name '" + name + "'");
  }
}

}  // namespace

ParamSet::ParamSet(std::uint64_t seed) : seed_(seed) {}

Tensor& ParamSet::add(const std::string& name, Shape shape, std::vector<double> values) {
  check_name(name);
  if (tensors_.count(name)) throw TensorError("duplicate parameter name '" + name + "'");
  return tensors_.emplace(name, Tensor::parameter(std::move(shape), std::move(values))).first->second;
}

bool ParamSet::contains(const std::string& name) const { return tensors_.count(name) > 0; }

const Tensor& ParamSet::at(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw TensorError("unknown parameter '" + name + "'");
  return it->second;
}

Tensor& ParamSet::at(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw TensorError("unknown parameter '" + name + "'");
  return it->second;
}

std::vector<std::string> ParamSet::names() const {
  std::vector<std::string> out;
  out.reserve(tensors_.size());
  for (const auto& [k, _] : tensors_) out.push_back(k);
  return out;
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, t] : tensors_) n += t.numel();
  return n;
}

void ParamSet::zero_grad() {
  for (auto& [_, t] : tensors_) t.zero_grad();
}

ParamSet ParamSet::clone() const {
  ParamSet out(seed_);
  out.meta_ = meta_;
  for (const auto& [k, t] : tensors_) out.add(k, t.shape(), {t.values().begin(), t.values().end()});
  return out;
}

void ParamSet::assign_values(const ParamSet& other) {
  if (other.tensors_.size() != tensors_.size()) throw TensorError("assign_values: parameter layouts differ");
  for (auto& [k, t] : tensors_) {
    const Tensor& src = other.at(k);
    if (src.shape() != t.shape()) {
      throw TensorError("assign_values: '" + k + "' has shape " + shape_str(src.shape()) + ", expected " +
                        shape_str(t.shape()));
    }
    std::copy(src.values().begin(), src.values().end(), t.mutable_values().begin());
  }
}

void ParamSet::zero_values(std::string_view prefix) {
  for (auto& [k, t] : tensors_) {
    if (k.rfind(prefix, 0) != 0) continue;
    for (double& v : t.mutable_values()) v = 0.0;
  }
}

std::vector<double> ParamSet::flat_values() const {
  std::vector<double> out;
  out.reserve(scalar_count());
  for (const auto& [_, t] : tensors_) out.insert(out.end(), t.values().begin(), t.values().end());
  return out;
}

std::vector<double> ParamSet::flat_grads() const {
  std::vector<double> out;
  out.reserve(scalar_count());
  for (const auto& [_, t] : tensors_) {
    auto g = t.grad();
    if (g.size() == t.numel()) {
      out.insert(out.end(), g.begin(), g.end());
    } else {
      out.insert(out.end(), t.numel(), 0.0);
    }
  }
  return out;
}

std::string ParamSet::serialize() const {
  std::ostringstream head;
  head << "nmd-params " << kFormatVersion << "\n";
  head << "seed " << seed_ << "\n";
  head << "meta " << meta_.size() << "\n";
  for (const auto& [k, v] : meta_) {
    if (k.find_first_of("\t\n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw TensorError("metadata entry '" + k + "' contains a tab or newline");
    }
    head << k << "\t" << v << "\n";
  }
  head << "tensors " << tensors_.size() << "\n";
  std::size_t payload = 0;
  for (const auto& [k, t] : tensors_) {
    head << k << " " << t.rank();
    for (std::size_t d : t.shape()) head << " " << d;
    head << "\n";
    payload += t.numel() * sizeof(double);
  }
  head << "payload " << payload << "\n";
  std::string out = head.str();
  const std::size_t offset = out.size();
  out.resize(offset + payload);
  char* dst = out.data() + offset;
  for (const auto& [_, t] : tensors_) {
    std::memcpy(dst, t.values().data(), t.numel() * sizeof(double));
    dst += t.numel() * sizeof(double);
  }
  return out;
}

ParamSet ParamSet::deserialize(std::string_view bytes) {
  std::size_t pos = 0;
  auto next_line = [&](const char* what) {
    const std::size_t end = bytes.find('\n', pos);
    if (end == std::string_view::npos) {
      throw TensorError(std::string("checkpoint truncated while reading ") + what + " at byte " +
                        std::to_string(pos));
    }
    std::string line(bytes.substr(pos, end - pos));
    pos = end + 1;
    return line;
  };
  auto expect_key = [&](const std::string& line, const std::string& key) {
    std::istringstream in(line);
    std::string k;
    std::uint64_t v = 0;
    if (!(in >> k >> v) || k != key) throw TensorError("checkpoint: expected '" + key + "', got '" + line + "'");
    return v;
  };

  const std::string magic = next_line("magic");
  {
    std::istringstream in(magic);
    std::string tag;
    int version = 0;
    in >> tag >> version;
    if (tag != "nmd-params") throw TensorError("not a parameter checkpoint (magic '" + magic + "')");
    if (version != kFormatVersion) {
      throw TensorError("unsupported checkpoint format version " + std::to_string(version));
    }
  }
  ParamSet out(expect_key(next_line("seed"), "seed"));
  const std::uint64_t n_meta = expect_key(next_line("meta"), "meta");
  for (std::uint64_t i = 0; i < n_meta; ++i) {
    const std::string line = next_line("metadata");
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw TensorError("checkpoint: malformed metadata line '" + line + "'");
    out.meta_[line.substr(0, tab)] = line.substr(tab + 1);
  }
  const std::uint64_t n_tensors = expect_key(next_line("tensors"), "tensors");
  std::vector<std::pair<std::string, Shape>> layout;
  for (std::uint64_t i = 0; i < n_tensors; ++i) {
    std::istringstream in(next_line("tensor header"));
    std::string name;
    std::size_t rank = 0;
    if (!(in >> name >> rank)) throw TensorError("checkpoint: malformed tensor header " + std::to_string(i));
    Shape shape(rank);
    for (auto& d : shape) {
      if (!(in >> d)) throw TensorError("checkpoint: malformed shape for '" + name + "'");
    }
    layout.emplace_back(name, shape);
  }
  const std::uint64_t payload = expect_key(next_line("payload"), "payload");
  if (bytes.size() - pos != payload) {
    throw TensorError("checkpoint payload is " + std::to_string(bytes.size() - pos) + " bytes, header declares " +
                      std::to_string(payload));
  }
  for (auto& [name, shape] : layout) {
    const std::size_t n = numel(shape);
    if ((pos + n * sizeof(double)) > bytes.size()) throw TensorError("checkpoint payload too short for '" + name + "'");
    std::vector<double> v(n);
    std::memcpy(v.data(), bytes.data() + pos, n * sizeof(double));
    pos += n * sizeof(double);
    out.add(name, shape, std::move(v));
  }
  return out;
}

void ParamSet::save(const std::filesystem::path& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw TensorError("cannot write checkpoint " + path.string());
  const std::string bytes = serialize();
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw TensorError("failed writing checkpoint " + path.string());
}

ParamSet ParamSet::load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw TensorError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return deserialize(ss.str());
}

void add_linear(ParamSet& params, const std::string& prefix, std::size_t in, std::size_t out, std::mt19937_64& rng,
                bool zero) {
  const double bound = std::sqrt(1.0 / static_cast<double>(in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> w(in * out, 0.0);
  if (!zero) {
    for (double& v : w) v = dist(rng);
  }
  params.add(prefix + ".W", {in, out}, std::move(w));
  params.add(prefix + ".b", {out}, std::vector<double>(out, 0.0));
}

void add_mlp(ParamSet& params, const std::string& prefix, const std::vector<std::size_t>& dims, std::mt19937_64& rng,
             bool zero_last) {
  if (dims.size() < 2) throw TensorError("mlp '" + prefix + "' needs at least two extents");
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    const bool last = k + 2 == dims.size();
    add_linear(params, prefix + "." + std::to_string(k), dims[k], dims[k + 1], rng, last && zero_last);
  }
}

Tensor mlp(const ParamSet& params, const std::string& prefix, const Tensor& x) {
  Tensor h = x;
  std::size_t k = 0;
  while (params.contains(prefix + "." + std::to_string(k) + ".W")) ++k;
  if (k == 0) throw TensorError("no layers registered under '" + prefix + "'");
  for (std::size_t i = 0; i < k; ++i) {
    const std::string layer = prefix + "." + std::to_string(i);
    const Tensor& w = params.at(layer + ".W");
    if (h.rank() != 2 || h.dim(1) != w.dim(0)) {
      throw TensorError("mlp '" + prefix + "' layer " + std::to_string(i) + " expects input width " +
                        std::to_string(w.dim(0)) + ", got " + shape_str(h.shape()));
    }
    h = linear(h, w, params.at(layer + ".b"));
    if (i + 1 < k) h = silu(h);
  }
  return h;
}

}  // namespace nmd
