#include "nmd/tensor/ops.hpp"

#include <Eigen/Core>
#include <cmath>
#include <string>

namespace nmd {

using detail::Node;

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

Node& parent(Node& n, std::size_t i) { return *n.parents[i]; }

std::vector<double> copy_values(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

std::size_t row_size(const Tensor& x) {
  if (x.rank() == 0) throw TensorError("row-wise operation on rank-0 tensor");
  return x.numel() / x.dim(0);
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw TensorError(std::string(op) + " expects rank " + std::to_string(rank) + ", got " +
                      shape_str(t.shape()));
  }
}

void require_rows3(const Tensor& t, const char* op) {
  if (t.rank() != 2 || t.dim(1) != 3) {
    throw TensorError(std::string(op) + " expects [m,3], got " + shape_str(t.shape()));
  }
}

template <typename F, typename D>
Tensor unary(const Tensor& a, F f, D dfdx) {
  const auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i]);
  return Tensor::from_op(a.shape(), std::move(out), {a}, [dfdx](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i] * dfdx(p.value[i], self.value[i]);
  });
}

}  // namespace

Tensor elementwise(BinaryKind kind, const Tensor& a, const Tensor& b) {
  const bool same = a.shape() == b.shape();
  const bool a_scalar = a.numel() == 1;
  const bool b_scalar = b.numel() == 1;
  if (!same && !a_scalar && !b_scalar) {
    throw TensorError("elementwise shape mismatch: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  const Shape out_shape = same ? a.shape() : (b_scalar ? a.shape() : b.shape());
  const std::size_t n = numel(out_shape);
  const auto av = a.values();
  const auto bv = b.values();
  const std::size_t sa = a_scalar && !same ? 0 : 1;
  const std::size_t sb = b_scalar && !same ? 0 : 1;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = av[i * sa];
    const double y = bv[i * sb];
    switch (kind) {
      case BinaryKind::add: out[i] = x + y; break;
      case BinaryKind::sub: out[i] = x - y; break;
      case BinaryKind::mul: out[i] = x * y; break;
      case BinaryKind::div: out[i] = x / y; break;
    }
  }
  return Tensor::from_op(out_shape, std::move(out), {a, b}, [kind, sa, sb](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const double g = self.grad[i];
      const double x = pa.value[i * sa];
      const double y = pb.value[i * sb];
      double ga = 0.0, gb = 0.0;
      switch (kind) {
        case BinaryKind::add: ga = g; gb = g; break;
        case BinaryKind::sub: ga = g; gb = -g; break;
        case BinaryKind::mul: ga = g * y; gb = g * x; break;
        case BinaryKind::div: ga = g / y; gb = -g * x / (y * y); break;
      }
      if (pa.requires_grad) pa.grad[i * sa] += ga;
      if (pb.requires_grad) pb.grad[i * sb] += gb;
    }
  });
}

Tensor elementwise(BinaryKind kind, const Tensor& a, double b) { return elementwise(kind, a, Tensor::scalar(b)); }

Tensor add(const Tensor& a, const Tensor& b) { return elementwise(BinaryKind::add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(BinaryKind::sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(BinaryKind::mul, a, b); }
Tensor div(const Tensor& a, const Tensor& b) { return elementwise(BinaryKind::div, a, b); }

Tensor neg(const Tensor& a) {
  return unary(a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Tensor abs(const Tensor& a) {
  return unary(
      a, [](double x) { return std::abs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor exp(const Tensor& a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor square(const Tensor& a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); }, [](double, double y) { return y * (1.0 - y); });
}

Tensor silu(const Tensor& a) {
  return unary(
      a, [](double x) { return x / (1.0 + std::exp(-x)); },
      [](double x, double) {
        const double s = 1.0 / (1.0 + std::exp(-x));
        return s * (1.0 + x * (1.0 - s));
      });
}

Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
Tensor operator+(const Tensor& a, double b) { return elementwise(BinaryKind::add, a, b); }
Tensor operator-(const Tensor& a, double b) { return elementwise(BinaryKind::sub, a, b); }
Tensor operator*(const Tensor& a, double b) { return elementwise(BinaryKind::mul, a, b); }
Tensor operator/(const Tensor& a, double b) { return elementwise(BinaryKind::div, a, b); }
Tensor operator*(double a, const Tensor& b) { return elementwise(BinaryKind::mul, b, a); }
Tensor operator-(const Tensor& a) { return neg(a); }

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  return Tensor::from_op({}, {s}, {x}, [](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    for (double& g : p.grad) g += self.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw TensorError("mean of empty tensor");
  const double inv = 1.0 / static_cast<double>(x.numel());
  double s = 0.0;
  for (double v : x.values()) s += v;
  return Tensor::from_op({}, {s * inv}, {x}, [inv](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    for (double& g : p.grad) g += self.grad[0] * inv;
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw TensorError("matmul inner extent mismatch: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  std::vector<double> out(m * n);
  Map(out.data(), m, n).noalias() = MapC(a.values().data(), m, k) * MapC(b.values().data(), k, n);
  return Tensor::from_op({m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    MapC g(self.grad.data(), m, n);
    if (pa.requires_grad) Map(pa.grad.data(), m, k).noalias() += g * MapC(pb.value.data(), k, n).transpose();
    if (pb.requires_grad) Map(pb.grad.data(), k, n).noalias() += MapC(pa.value.data(), m, k).transpose() * g;
  });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_rank(x, 2, "linear");
  require_rank(weight, 2, "linear");
  const std::size_t m = x.dim(0), k = x.dim(1), n = weight.dim(1);
  if (weight.dim(0) != k || bias.numel() != n) {
    throw TensorError("linear extent mismatch: x " + shape_str(x.shape()) + ", W " + shape_str(weight.shape()) +
                      ", b " + shape_str(bias.shape()));
  }
  std::vector<double> out(m * n);
  Map o(out.data(), m, n);
  o.noalias() = MapC(x.values().data(), m, k) * MapC(weight.values().data(), k, n);
  o.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias.values().data(), static_cast<Eigen::Index>(n));
  return Tensor::from_op({m, n}, std::move(out), {x, weight, bias}, [m, k, n](Node& self) {
    Node& px = parent(self, 0);
    Node& pw = parent(self, 1);
    Node& pb = parent(self, 2);
    MapC g(self.grad.data(), m, n);
    if (px.requires_grad) Map(px.grad.data(), m, k).noalias() += g * MapC(pw.value.data(), k, n).transpose();
    if (pw.requires_grad) Map(pw.grad.data(), k, n).noalias() += MapC(px.value.data(), m, k).transpose() * g;
    if (pb.requires_grad) Map(pb.grad.data(), 1, n) += g.colwise().sum();
  });
}

Tensor bmm(const Tensor& a, const Tensor& b) {
  require_rank(a, 3, "bmm");
  require_rank(b, 3, "bmm");
  const std::size_t B = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(2);
  if (b.dim(0) != B || b.dim(1) != k) {
    throw TensorError("bmm extent mismatch: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  std::vector<double> out(B * m * n);
  const double* av = a.values().data();
  const double* bv = b.values().data();
  for (std::size_t e = 0; e < B; ++e) {
    Map(out.data() + e * m * n, m, n).noalias() = MapC(av + e * m * k, m, k) * MapC(bv + e * k * n, k, n);
  }
  return Tensor::from_op({B, m, n}, std::move(out), {a, b}, [B, m, k, n](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    for (std::size_t e = 0; e < B; ++e) {
      MapC g(self.grad.data() + e * m * n, m, n);
      if (pa.requires_grad) {
        Map(pa.grad.data() + e * m * k, m, k).noalias() += g * MapC(pb.value.data() + e * k * n, k, n).transpose();
      }
      if (pb.requires_grad) {
        Map(pb.grad.data() + e * k * n, k, n).noalias() += MapC(pa.value.data() + e * m * k, m, k).transpose() * g;
      }
    }
  });
}

Tensor sum_axis1(const Tensor& x) {
  require_rank(x, 3, "sum_axis1");
  const std::size_t B = x.dim(0), m = x.dim(1), n = x.dim(2);
  const auto xv = x.values();
  std::vector<double> out(B * n, 0.0);
  for (std::size_t e = 0; e < B; ++e)
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) out[e * n + j] += xv[(e * m + i) * n + j];
  return Tensor::from_op({B, n}, std::move(out), {x}, [B, m, n](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    for (std::size_t e = 0; e < B; ++e)
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) p.grad[(e * m + i) * n + j] += self.grad[e * n + j];
  });
}

Tensor sum_rows(const Tensor& x) {
  require_rank(x, 2, "sum_rows");
  const std::size_t m = x.dim(0), k = x.dim(1);
  const auto xv = x.values();
  std::vector<double> out(k, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < k; ++j) out[j] += xv[i * k + j];
  return Tensor::from_op({k}, std::move(out), {x}, [m, k](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < k; ++j) p.grad[i * k + j] += self.grad[j];
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.numel()) {
    throw TensorError("reshape from " + shape_str(x.shape()) + " to " + shape_str(shape));
  }
  return Tensor::from_op(std::move(shape), copy_values(x), {x}, [](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
  });
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> index) {
  const std::size_t rows = x.dim(0);
  const std::size_t w = row_size(x);
  const auto xv = x.values();
  std::vector<double> out(index.size() * w);
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] >= rows) {
      throw TensorError("gather index " + std::to_string(index[r]) + " out of range for " + shape_str(x.shape()));
    }
    std::copy_n(xv.begin() + static_cast<std::ptrdiff_t>(index[r] * w), w, out.begin() + static_cast<std::ptrdiff_t>(r * w));
  }
  Shape shape = x.shape();
  shape[0] = index.size();
  std::vector<std::size_t> idx(index.begin(), index.end());
  return Tensor::from_op(std::move(shape), std::move(out), {x}, [idx = std::move(idx), w](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t j = 0; j < w; ++j) p.grad[idx[r] * w + j] += self.grad[r * w + j];
  });
}

Tensor mean_agg(const Tensor& values, const std::vector<std::vector<std::size_t>>& groups) {
  const std::size_t rows = values.dim(0);
  const std::size_t w = row_size(values);
  const auto xv = values.values();
  std::vector<double> out(groups.size() * w, 0.0);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].empty()) continue;
    const double inv = 1.0 / static_cast<double>(groups[g].size());
    for (std::size_t r : groups[g]) {
      if (r >= rows) {
        throw TensorError("mean_agg index " + std::to_string(r) + " out of range for " +
                          shape_str(values.shape()));
      }
      for (std::size_t j = 0; j < w; ++j) out[g * w + j] += xv[r * w + j];
    }
    for (std::size_t j = 0; j < w; ++j) out[g * w + j] *= inv;
  }
  Shape shape = values.shape();
  shape[0] = groups.size();
  return Tensor::from_op(std::move(shape), std::move(out), {values}, [groups, w](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      if (groups[g].empty()) continue;
      const double inv = 1.0 / static_cast<double>(groups[g].size());
      for (std::size_t r : groups[g])
        for (std::size_t j = 0; j < w; ++j) p.grad[r * w + j] += self.grad[g * w + j] * inv;
    }
  });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "concat_cols");
  require_rank(b, 2, "concat_cols");
  const std::size_t m = a.dim(0), p = a.dim(1), q = b.dim(1);
  if (b.dim(0) != m) {
    throw TensorError("concat_cols row mismatch: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(m * (p + q));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < p; ++j) out[i * (p + q) + j] = av[i * p + j];
    for (std::size_t j = 0; j < q; ++j) out[i * (p + q) + p + j] = bv[i * q + j];
  }
  return Tensor::from_op({m, p + q}, std::move(out), {a, b}, [m, p, q](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    for (std::size_t i = 0; i < m; ++i) {
      if (pa.requires_grad)
        for (std::size_t j = 0; j < p; ++j) pa.grad[i * p + j] += self.grad[i * (p + q) + j];
      if (pb.requires_grad)
        for (std::size_t j = 0; j < q; ++j) pb.grad[i * q + j] += self.grad[i * (p + q) + p + j];
    }
  });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
  require_rank(x, 2, "slice_cols");
  const std::size_t m = x.dim(0), k = x.dim(1);
  if (begin > end || end > k) {
    throw TensorError("slice_cols [" + std::to_string(begin) + "," + std::to_string(end) + ") out of range for " +
                      shape_str(x.shape()));
  }
  const std::size_t w = end - begin;
  const auto xv = x.values();
  std::vector<double> out(m * w);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < w; ++j) out[i * w + j] = xv[i * k + begin + j];
  return Tensor::from_op({m, w}, std::move(out), {x}, [m, k, w, begin](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w; ++j) p.grad[i * k + begin + j] += self.grad[i * w + j];
  });
}

Tensor stack_axis1(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw TensorError("stack_axis1 of zero tensors");
  require_rank(parts[0], 2, "stack_axis1");
  const std::size_t m = parts[0].dim(0), c = parts[0].dim(1), K = parts.size();
  for (const auto& t : parts) {
    if (t.shape() != parts[0].shape()) {
      throw TensorError("stack_axis1 shape mismatch: " + shape_str(parts[0].shape()) + " vs " + shape_str(t.shape()));
    }
  }
  std::vector<double> out(m * K * c);
  for (std::size_t k = 0; k < K; ++k) {
    const auto v = parts[k].values();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < c; ++j) out[(i * K + k) * c + j] = v[i * c + j];
  }
  return Tensor::from_op({m, K, c}, std::move(out), parts, [m, K, c](Node& self) {
    for (std::size_t k = 0; k < K; ++k) {
      Node& p = parent(self, k);
      if (!p.requires_grad) continue;
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < c; ++j) p.grad[i * c + j] += self.grad[(i * K + k) * c + j];
    }
  });
}

Tensor scale_rows(const Tensor& x, const Tensor& s) {
  const std::size_t m = x.dim(0);
  if (s.numel() != m) {
    throw TensorError("scale_rows needs one scale per row: " + shape_str(x.shape()) + " vs " + shape_str(s.shape()));
  }
  const std::size_t w = row_size(x);
  const auto xv = x.values();
  const auto sv = s.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < w; ++j) out[i * w + j] = xv[i * w + j] * sv[i];
  return Tensor::from_op(x.shape(), std::move(out), {x, s}, [m, w](Node& self) {
    Node& px = parent(self, 0);
    Node& ps = parent(self, 1);
    for (std::size_t i = 0; i < m; ++i) {
      double gs = 0.0;
      for (std::size_t j = 0; j < w; ++j) {
        const double g = self.grad[i * w + j];
        if (px.requires_grad) px.grad[i * w + j] += g * ps.value[i];
        gs += g * px.value[i * w + j];
      }
      if (ps.requires_grad) ps.grad[i] += gs;
    }
  });
}

Tensor cross_rows(const Tensor& a, const Tensor& b) {
  require_rows3(a, "cross_rows");
  require_rows3(b, "cross_rows");
  if (a.dim(0) != b.dim(0)) {
    throw TensorError("cross_rows row mismatch: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0);
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(3 * m);
  for (std::size_t i = 0; i < m; ++i) {
    const double* x = av.data() + 3 * i;
    const double* y = bv.data() + 3 * i;
    out[3 * i + 0] = x[1] * y[2] - x[2] * y[1];
    out[3 * i + 1] = x[2] * y[0] - x[0] * y[2];
    out[3 * i + 2] = x[0] * y[1] - x[1] * y[0];
  }
  return Tensor::from_op({m, 3}, std::move(out), {a, b}, [m](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    for (std::size_t i = 0; i < m; ++i) {
      const double* g = self.grad.data() + 3 * i;
      const double* x = pa.value.data() + 3 * i;
      const double* y = pb.value.data() + 3 * i;
      // d(x×y)ᵀg: w.r.t. x is y×g, w.r.t. y is g×x.
      if (pa.requires_grad) {
        pa.grad[3 * i + 0] += y[1] * g[2] - y[2] * g[1];
        pa.grad[3 * i + 1] += y[2] * g[0] - y[0] * g[2];
        pa.grad[3 * i + 2] += y[0] * g[1] - y[1] * g[0];
      }
      if (pb.requires_grad) {
        pb.grad[3 * i + 0] += g[1] * x[2] - g[2] * x[1];
        pb.grad[3 * i + 1] += g[2] * x[0] - g[0] * x[2];
        pb.grad[3 * i + 2] += g[0] * x[1] - g[1] * x[0];
      }
    }
  });
}

Tensor norm_rows(const Tensor& v) {
  require_rows3(v, "norm_rows");
  const std::size_t m = v.dim(0);
  const auto vv = v.values();
  std::vector<double> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double* x = vv.data() + 3 * i;
    out[i] = std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
  }
  return Tensor::from_op({m, 1}, std::move(out), {v}, [m](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    for (std::size_t i = 0; i < m; ++i) {
      const double r = self.value[i];
      if (r == 0.0) continue;
      for (std::size_t c = 0; c < 3; ++c) p.grad[3 * i + c] += self.grad[i] * p.value[3 * i + c] / r;
    }
  });
}

Tensor normalize_rows(const Tensor& v) {
  require_rows3(v, "normalize_rows");
  const std::size_t m = v.dim(0);
  const auto vv = v.values();
  std::vector<double> out(3 * m);
  std::vector<double> norms(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double* x = vv.data() + 3 * i;
    const double r = std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
    norms[i] = r;
    for (std::size_t c = 0; c < 3; ++c) out[3 * i + c] = x[c] / r;
  }
  return Tensor::from_op({m, 3}, std::move(out), {v}, [m, norms = std::move(norms)](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    for (std::size_t i = 0; i < m; ++i) {
      const double* u = self.value.data() + 3 * i;
      const double* g = self.grad.data() + 3 * i;
      const double ug = u[0] * g[0] + u[1] * g[1] + u[2] * g[2];
      // d(v/|v|) = (I - u uᵀ)/|v|
      for (std::size_t c = 0; c < 3; ++c) p.grad[3 * i + c] += (g[c] - u[c] * ug) / norms[i];
    }
  });
}

}  // namespace nmd
