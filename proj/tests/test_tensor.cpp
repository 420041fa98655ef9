#include <cmath>
#include <random>

#include "doctest.h"
#include "nmd/tensor/grad_check.hpp"
#include "nmd/tensor/ops.hpp"
#include "nmd/tensor/optim.hpp"
#include "nmd/tensor/params.hpp"

using namespace nmd;

namespace {

std::vector<double> vals(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

std::vector<double> random_values(std::size_t n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

}  // namespace

TEST_CASE("elementwise examples") {
  auto a = Tensor::constant({2}, {1, 2});
  auto b = Tensor::constant({2}, {3, 4});
  CHECK(vals(a + b) == std::vector<double>{4, 6});
  CHECK(vals(Tensor::constant({2}, {2, 3}) * 0.0) == std::vector<double>{0, 0});
  CHECK(vals(abs(Tensor::constant({2}, {-1.5, 2}))) == std::vector<double>{1.5, 2});
  CHECK(vals(b - a) == std::vector<double>{2, 2});
  CHECK(vals(b / a) == std::vector<double>{3, 2});
  CHECK(vals(-a) == std::vector<double>{-1, -2});
}

TEST_CASE("elementwise shape mismatch names both shapes") {
  auto a = Tensor::zeros({2, 3});
  auto b = Tensor::zeros({3, 2});
  try {
    (void)(a + b);
    FAIL("expected throw");
  } catch (const TensorError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
    CHECK(msg.find("[3x2]") != std::string::npos);
  }
}

TEST_CASE("matmul") {
  auto eye = Tensor::constant({2, 2}, {1, 0, 0, 1});
  auto m = Tensor::constant({2, 2}, {1, 2, 3, 4});
  CHECK(vals(matmul(eye, m)) == vals(m));
  CHECK(vals(matmul(Tensor::constant({1, 2}, {1, 0}), Tensor::constant({2, 1}, {2, 5}))) == std::vector<double>{2});
  CHECK_THROWS_AS(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), TensorError);

  std::mt19937_64 rng(7);
  auto av = random_values(12, rng);
  auto bv = random_values(8, rng);
  auto c = matmul(Tensor::constant({3, 4}, av), Tensor::constant({4, 2}, bv));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j) {
      double s = 0;
      for (int k = 0; k < 4; ++k) s += av[i * 4 + k] * bv[k * 2 + j];
      CHECK(c.value(i * 2 + j) == doctest::Approx(s).epsilon(1e-15));
    }
}

TEST_CASE("mlp") {
  std::mt19937_64 rng(3);
  SUBCASE("zero network") {
    ParamSet p;
    add_mlp(p, "net", {3, 5, 2}, rng);
    p.zero_values();
    auto y = mlp(p, "net", Tensor::constant({1, 3}, {0.3, -2, 7}));
    CHECK(vals(y) == std::vector<double>{0, 0});
  }
  SUBCASE("identity layer") {
    ParamSet p;
    p.add("id.0.W", {3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    p.add("id.0.b", {3}, {0, 0, 0});
    auto x = Tensor::constant({1, 3}, {0.3, -2, 7});
    CHECK(vals(mlp(p, "id", x)) == vals(x));
  }
  SUBCASE("scripted forward pass") {
    ParamSet p;
    add_mlp(p, "net", {4, 6, 3}, rng);
    for (double& b : p.at("net.0.b").mutable_values()) b = 0.1;
    const auto x = random_values(8, rng);
    auto y = mlp(p, "net", Tensor::constant({2, 4}, x));
    auto W0 = p.at("net.0.W").values(), b0 = p.at("net.0.b").values();
    auto W1 = p.at("net.1.W").values(), b1 = p.at("net.1.b").values();
    for (int r = 0; r < 2; ++r) {
      double hidden[6];
      for (int j = 0; j < 6; ++j) {
        double s = b0[j];
        for (int k = 0; k < 4; ++k) s += x[r * 4 + k] * W0[k * 6 + j];
        hidden[j] = s / (1.0 + std::exp(-s));
      }
      for (int j = 0; j < 3; ++j) {
        double s = b1[j];
        for (int k = 0; k < 6; ++k) s += hidden[k] * W1[k * 3 + j];
        CHECK(std::abs(y.value(r * 3 + j) - s) < 1e-12);
      }
    }
  }
  SUBCASE("extent chain mismatch") {
    ParamSet p;
    add_mlp(p, "net", {4, 6, 3}, rng);
    CHECK_THROWS_AS(mlp(p, "net", Tensor::zeros({1, 5})), TensorError);
  }
}

TEST_CASE("mean_agg") {
  auto v = Tensor::constant({2, 1}, {2, 4});
  CHECK(vals(mean_agg(v, {{0, 1}})) == std::vector<double>{3});
  CHECK(vals(mean_agg(v, {{1}})) == std::vector<double>{4});
  CHECK(vals(mean_agg(v, {{}})) == std::vector<double>{0});
  CHECK_THROWS_AS(mean_agg(v, {{0, 2}}), TensorError);

  std::mt19937_64 rng(11);
  auto big = Tensor::constant({6, 3}, random_values(18, rng));
  std::vector<std::size_t> members{0, 2, 3, 5};
  auto ref = mean_agg(big, {members});
  for (int trial = 0; trial < 10; ++trial) {
    std::shuffle(members.begin(), members.end(), rng);
    auto perm = mean_agg(big, {members});
    for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(perm.value(i) - ref.value(i)) < 1e-15);
  }
}

TEST_CASE("backward examples") {
  auto x = Tensor::parameter({}, {3.0});
  backward(square(x));
  CHECK(x.grad()[0] == 6.0);

  SUBCASE("sum of W x gives outer-product gradient") {
    auto W = Tensor::parameter({2, 3}, {1, 2, 3, 4, 5, 6});
    auto v = Tensor::constant({3, 1}, {0.5, -1, 2});
    backward(sum(matmul(W, v)));
    // d/dW_ij sum_k (W v)_k = v_j
    const std::vector<double> expect{0.5, -1, 2, 0.5, -1, 2};
    CHECK(vals(W) == std::vector<double>{1, 2, 3, 4, 5, 6});
    CHECK(std::vector<double>(W.grad().begin(), W.grad().end()) == expect);
  }
  SUBCASE("disconnected parameter gets exactly zero") {
    auto used = Tensor::parameter({2}, {1, 2});
    auto unused = Tensor::parameter({2}, {3, 4});
    backward(sum(used * used));
    CHECK(unused.grad()[0] == 0.0);
    CHECK(unused.grad()[1] == 0.0);
  }
  SUBCASE("non-scalar loss rejected") { CHECK_THROWS_AS(backward(Tensor::parameter({2}, {1, 2}) * 2.0), TensorError); }
  SUBCASE("constants never accumulate") {
    auto c = Tensor::constant({2}, {1, 2});
    auto p = Tensor::parameter({2}, {1, 1});
    backward(sum(c * p));
    CHECK(c.grad().empty());
    CHECK(!c.requires_grad());
  }
}

TEST_CASE("chained Jacobians on 2x2") {
  // loss = sum(B · silu(A · x)) with hand-chained Jacobians.
  const std::vector<double> a{0.3, -0.7, 1.1, 0.4}, b{0.9, 0.2, -0.5, 1.3}, xv{0.6, -0.2};
  auto A = Tensor::parameter({2, 2}, a);
  auto B = Tensor::constant({2, 2}, b);
  auto x = Tensor::parameter({2, 1}, xv);
  backward(sum(matmul(B, silu(matmul(A, x)))));
  double u[2], du[2];
  for (int i = 0; i < 2; ++i) {
    u[i] = a[i * 2] * xv[0] + a[i * 2 + 1] * xv[1];
    const double s = 1.0 / (1.0 + std::exp(-u[i]));
    du[i] = s * (1 + u[i] * (1 - s));
  }
  // dL/dh_i = sum_k B_ki
  const double dh[2] = {b[0] + b[2], b[1] + b[3]};
  for (int j = 0; j < 2; ++j) {
    const double expect = dh[0] * du[0] * a[j] + dh[1] * du[1] * a[2 + j];
    CHECK(std::abs(x.grad()[j] - expect) < 1e-12);
  }
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) CHECK(std::abs(A.grad()[i * 2 + j] - dh[i] * du[i] * xv[j]) < 1e-12);
}

TEST_CASE("grad_check examples") {
  auto x = Tensor::constant({4}, {0.5, -1.2, 2.0, 0.1});
  CHECK(grad_check([](const Tensor& t) { return sum(square(t)); }, x, 1e-5) < 1e-6);
  CHECK(grad_check([](const Tensor&) { return Tensor::scalar(2.5); }, x, 1e-5) == 0.0);

  std::mt19937_64 rng(5);
  ParamSet p;
  add_mlp(p, "net", {3, 8, 2}, rng);
  for (double& b : p.at("net.0.b").mutable_values()) b = 0.05;
  auto input = Tensor::constant({4, 3}, random_values(12, rng));
  auto err = grad_check([&] { return sum(square(mlp(p, "net", input))); }, p, 1e-5);
  CHECK(err < 1e-4);
}

TEST_CASE("grad_check over every differentiable op") {
  std::mt19937_64 rng(19);
  const double h = 1e-5;
  auto r = [&](Shape s, double lo = -1.0, double hi = 1.0) {
    return Tensor::constant(s, random_values(numel(s), rng, lo, hi));
  };
  auto w = r({2, 3});
  auto pos = r({2, 3}, 0.5, 2.0);
  auto m33 = r({3, 3});
  auto v3 = r({4, 3});
  auto u3 = r({4, 3});
  auto col = r({4, 1});
  struct Case {
    const char* name;
    std::function<Tensor(const Tensor&)> f;
    Tensor x;
  };
  std::vector<Case> cases{
      {"add", [&](const Tensor& t) { return sum((t + w) * w); }, r({2, 3})},
      {"sub", [&](const Tensor& t) { return sum((w - t) * w); }, r({2, 3})},
      {"mul", [&](const Tensor& t) { return sum(t * t * w); }, r({2, 3})},
      {"div", [&](const Tensor& t) { return sum(w / t); }, r({2, 3}, 0.5, 2.0)},
      {"div-scalar-broadcast", [&](const Tensor& t) { return sum(t / sum(pos)); }, r({2, 3})},
      {"neg", [&](const Tensor& t) { return sum(-t * w); }, r({2, 3})},
      {"abs", [&](const Tensor& t) { return sum(abs(t) * w); }, r({2, 3}, 0.2, 1.0)},
      {"exp", [&](const Tensor& t) { return sum(exp(t) * w); }, r({2, 3})},
      {"sigmoid", [&](const Tensor& t) { return sum(sigmoid(t) * w); }, r({2, 3})},
      {"silu", [&](const Tensor& t) { return sum(silu(t) * w); }, r({2, 3})},
      {"mean", [&](const Tensor& t) { return mean(t * t); }, r({2, 3})},
      {"matmul", [&](const Tensor& t) { return sum(square(matmul(t, m33))); }, r({2, 3})},
      {"linear", [&](const Tensor& t) { return sum(square(linear(t, m33, sum_rows(w)))); }, r({2, 3})},
      {"bmm", [&](const Tensor& t) { return sum(square(bmm(reshape(t, {2, 3, 1}), reshape(w, {2, 1, 3})))); },
       r({2, 3})},
      {"sum_axis1", [&](const Tensor& t) { return sum(square(sum_axis1(reshape(t, {2, 1, 3})))); }, r({2, 3})},
      {"gather_rows", [&](const Tensor& t) {
         std::vector<std::size_t> idx{1, 0, 1};
         return sum(square(gather_rows(t, idx)));
       }, r({2, 3})},
      {"mean_agg", [&](const Tensor& t) { return sum(square(mean_agg(t, {{0, 1}, {1}, {}}))); }, r({2, 3})},
      {"concat/slice", [&](const Tensor& t) { return sum(square(slice_cols(concat_cols(t, w), 2, 5))); }, r({2, 3})},
      {"stack_axis1", [&](const Tensor& t) { return sum(square(stack_axis1({t, w * t}))); }, r({2, 3})},
      {"scale_rows", [&](const Tensor& t) { return sum(square(scale_rows(u3, t))); }, col},
      {"cross_rows", [&](const Tensor& t) { return sum(cross_rows(t, u3) * v3); }, r({4, 3})},
      {"norm_rows", [&](const Tensor& t) { return sum(norm_rows(t) * col); }, r({4, 3})},
      {"normalize_rows", [&](const Tensor& t) { return sum(normalize_rows(t) * v3); }, r({4, 3})},
  };
  for (const auto& c : cases) {
    INFO(c.name);
    CHECK(grad_check(c.f, c.x, h) < 1e-4);
  }
}

TEST_CASE("optimizer") {
  SUBCASE("single SGD step") {
    ParamSet p;
    p.add("w", {}, {1.0});
    Optimizer opt({OptimizerKind::sgd, 0.1});
    backward(p.at("w") * 2.0);
    opt.step(p);
    CHECK(std::abs(p.at("w").item() - 0.8) < 1e-15);
    CHECK(p.at("w").grad()[0] == 0.0);
  }
  SUBCASE("zero gradient is a fixed point") {
    ParamSet p;
    p.add("w", {2}, {1.5, -2.0});
    Optimizer opt({OptimizerKind::adam, 0.1});
    backward(sum(p.at("w") * 0.0));
    opt.step(p);
    CHECK(vals(p.at("w")) == std::vector<double>{1.5, -2.0});
  }
  SUBCASE("missing gradients") {
    ParamSet p;
    p.add("w", {}, {1.0});
    Optimizer opt({OptimizerKind::sgd, 0.1});
    CHECK_THROWS_AS(opt.step(p), TensorError);
  }
  SUBCASE("Adam against a scripted update") {
    ParamSet p;
    p.add("w", {3}, {1.0, -1.0, 0.5});
    Optimizer opt({OptimizerKind::adam, 1e-2});
    double w[3] = {1.0, -1.0, 0.5}, m[3] = {}, v[3] = {};
    for (int step = 1; step <= 3; ++step) {
      auto t = p.at("w");
      backward(sum(t * t * t));
      opt.step(p);
      for (int i = 0; i < 3; ++i) {
        const double g = 3 * w[i] * w[i];
        m[i] = 0.9 * m[i] + 0.1 * g;
        v[i] = 0.999 * v[i] + 0.001 * g * g;
        const double mh = m[i] / (1 - std::pow(0.9, step));
        const double vh = v[i] / (1 - std::pow(0.999, step));
        w[i] -= 1e-2 * mh / (std::sqrt(vh) + 1e-8);
      }
      for (int i = 0; i < 3; ++i) CHECK(std::abs(p.at("w").value(i) - w[i]) < 1e-14);
    }
    // First Adam step moves each coordinate by about lr against the gradient sign.
  }
}

TEST_CASE("ParamSet serialization") {
  std::mt19937_64 rng(23);
  ParamSet p(23);
  add_mlp(p, "a", {3, 4, 2}, rng);
  p.add("emb", {5, 4}, random_values(20, rng));
  p.meta()["method"] = "neuralmd-ode";
  p.meta()["hidden"] = "4";
  const std::string once = p.serialize();
  const ParamSet q = ParamSet::deserialize(once);
  CHECK(q.serialize() == once);
  CHECK(q.seed() == 23);
  CHECK(q.meta().at("method") == "neuralmd-ode");
  CHECK(q.flat_values() == p.flat_values());

  CHECK_THROWS_AS(ParamSet::deserialize(once.substr(0, once.size() - 3)), TensorError);
  CHECK_THROWS_AS(ParamSet::deserialize("nmd-params 99\n"), TensorError);
  CHECK_THROWS_AS(p.add("emb", {1}, {0.0}), TensorError);
}

TEST_CASE("no-grad mode builds constants") {
  auto p = Tensor::parameter({2}, {1, 2});
  NoGradGuard guard;
  auto y = p * p;
  CHECK(!y.requires_grad());
}
