#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "hoikit/core/grad_check.hpp"
#include "hoikit/core/ops.hpp"
#include "hoikit/core/rng.hpp"
#include "hoikit/core/tensor.hpp"

using namespace hoikit;

namespace {

Tensor<double> random_tensor(std::vector<int> shape, Rng& rng, bool requires_grad = false) {
  Tensor<double> t = Tensor<double>::zeros(std::move(shape), requires_grad);
  for (auto& v : *t.data) v = rng.gaussian();
  return t;
}

}  // namespace

TEST_CASE("elementwise ops compute and differentiate") {
  Rng rng(11);
  Tensor<double> x = random_tensor({3, 4}, rng, true);
  Tensor<double> y = random_tensor({3, 4}, rng);

  auto f = [&](Tensor<double>& v) { return mean_all(mul(add(v, y), sub(v, y))); };
  auto rep = grad_check([&](Tensor<double>& v) { return f(v); }, x);
  REQUIRE(rep.max_rel_err < 1e-7);

  Tensor<double> s = add(x, y);
  for (int i = 0; i < 12; ++i) REQUIRE(s.at(i) == x.at(i) + y.at(i));
}

TEST_CASE("matmul matches a straight triple loop") {
  Rng rng(5);
  Tensor<double> a = random_tensor({3, 4}, rng);
  Tensor<double> b = random_tensor({4, 5}, rng);
  Tensor<double> c = matmul(a, b);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 5; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 4; ++k) acc += a.at(i, k) * b.at(k, j);
      REQUIRE(c.at(i, j) == Catch::Approx(acc).margin(1e-12));
    }
  REQUIRE_THROWS_AS(matmul(a, a), ShapeError);
}

TEST_CASE("matmul and matmul_nt gradients pass finite differences") {
  Rng rng(7);
  Tensor<double> a = random_tensor({3, 4}, rng, true);
  Tensor<double> b = random_tensor({4, 2}, rng, true);
  Tensor<double> bt = random_tensor({2, 4}, rng, true);

  auto ra = grad_check([&](Tensor<double>& v) { return mean_all(matmul(v, b)); }, a);
  REQUIRE(ra.max_rel_err < 1e-7);
  auto rb = grad_check([&](Tensor<double>& v) { return mean_all(matmul(a, v)); }, b);
  REQUIRE(rb.max_rel_err < 1e-7);
  auto rt = grad_check([&](Tensor<double>& v) { return mean_all(matmul_nt(a, v)); }, bt);
  REQUIRE(rt.max_rel_err < 1e-7);
}

TEST_CASE("affine works on vectors and row matrices") {
  Rng rng(9);
  Tensor<double> W = random_tensor({4, 3}, rng, true);
  Tensor<double> b = random_tensor({3}, rng, true);
  Tensor<double> x1 = random_tensor({4}, rng, true);
  Tensor<double> x2 = random_tensor({5, 4}, rng, true);

  Tensor<double> y1 = affine(x1, W, b);
  REQUIRE(y1.shape == std::vector<int>{3});
  for (int j = 0; j < 3; ++j) {
    double acc = b.at(j);
    for (int i = 0; i < 4; ++i) acc += x1.at(i) * W.at(i, j);
    REQUIRE(y1.at(j) == Catch::Approx(acc).margin(1e-12));
  }
  REQUIRE(affine(x2, W, b).shape == std::vector<int>{5, 3});

  auto rx = grad_check([&](Tensor<double>& v) { return mean_all(affine(v, W, b)); }, x2);
  REQUIRE(rx.max_rel_err < 1e-7);
  auto rw = grad_check([&](Tensor<double>& v) { return mean_all(affine(x2, v, b)); }, W);
  REQUIRE(rw.max_rel_err < 1e-7);
  auto rbias = grad_check([&](Tensor<double>& v) { return mean_all(affine(x2, W, v)); }, b);
  REQUIRE(rbias.max_rel_err < 1e-7);
}

TEST_CASE("relu and sigmoid gradients pass finite differences") {
  Rng rng(13);
  Tensor<double> x = random_tensor({3, 3}, rng, true);
  for (auto& v : *x.data) v += (v >= 0 ? 0.5 : -0.5);  // keep probes away from the kink

  auto rr = grad_check([&](Tensor<double>& v) { return mean_all(relu(v)); }, x);
  REQUIRE(rr.max_rel_err < 1e-7);
  auto rs = grad_check([&](Tensor<double>& v) { return mean_all(sigmoid_op(v)); }, x);
  REQUIRE(rs.max_rel_err < 1e-7);
}

TEST_CASE("softmax rows sum to one and differentiate") {
  Rng rng(17);
  Tensor<double> x = random_tensor({4, 6}, rng, true);
  Tensor<double> w = softmax_rows(x);
  for (int i = 0; i < 4; ++i) {
    double s = 0.0;
    for (int j = 0; j < 6; ++j) {
      s += w.at(i, j);
      REQUIRE(w.at(i, j) > 0.0);
    }
    REQUIRE(s == Catch::Approx(1.0).margin(1e-9));
  }
  Tensor<double> coef = random_tensor({4, 6}, rng);
  auto rep = grad_check(
      [&](Tensor<double>& v) { return mean_all(mul(coef, softmax_rows(v))); }, x);
  REQUIRE(rep.max_rel_err < 1e-7);
}

TEST_CASE("softmax rows are permutation equivariant") {
  Rng rng(19);
  Tensor<double> x = random_tensor({5, 4}, rng);
  Tensor<double> w = softmax_rows(x);
  const std::vector<int> perm{3, 0, 4, 1, 2};
  Tensor<double> xp = select_rows(x, perm);
  Tensor<double> wp = softmax_rows(xp);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 4; ++j) REQUIRE(wp.at(i, j) == w.at(perm[std::size_t(i)], j));
}

TEST_CASE("attention equals a per-row loop oracle") {
  Rng rng(23);
  for (int trial = 0; trial < 25; ++trial) {
    const int nq = rng.uniform_int(1, 6), nk = rng.uniform_int(1, 6);
    const int d = rng.uniform_int(1, 8), dv = rng.uniform_int(1, 8);
    Tensor<double> q = random_tensor({nq, d}, rng);
    Tensor<double> k = random_tensor({nk, d}, rng);
    Tensor<double> v = random_tensor({nk, dv}, rng);

    Tensor<double> w = attention_weights(q, k);
    Tensor<double> out = attention(q, k, v);

    const double inv = 1.0 / std::sqrt(double(d));
    for (int i = 0; i < nq; ++i) {
      std::vector<double> logits(static_cast<std::size_t>(nk));
      double mx = -1e300;
      for (int j = 0; j < nk; ++j) {
        double s = 0.0;
        for (int e = 0; e < d; ++e) s += q.at(i, e) * k.at(j, e);
        logits[std::size_t(j)] = s * inv;
        mx = std::max(mx, logits[std::size_t(j)]);
      }
      double z = 0.0;
      for (int j = 0; j < nk; ++j) {
        logits[std::size_t(j)] = std::exp(logits[std::size_t(j)] - mx);
        z += logits[std::size_t(j)];
      }
      double row_sum = 0.0;
      for (int j = 0; j < nk; ++j) {
        const double wij = logits[std::size_t(j)] / z;
        REQUIRE(w.at(i, j) == Catch::Approx(wij).margin(1e-12));
        row_sum += w.at(i, j);
      }
      REQUIRE(row_sum == Catch::Approx(1.0).margin(1e-9));
      for (int e = 0; e < dv; ++e) {
        double acc = 0.0;
        for (int j = 0; j < nk; ++j) acc += (logits[std::size_t(j)] / z) * v.at(j, e);
        REQUIRE(out.at(i, e) == Catch::Approx(acc).margin(1e-12));
      }
    }
  }
}

TEST_CASE("attention gradients pass finite differences") {
  Rng rng(29);
  Tensor<double> q = random_tensor({3, 4}, rng, true);
  Tensor<double> k = random_tensor({5, 4}, rng, true);
  Tensor<double> v = random_tensor({5, 2}, rng, true);

  auto rq = grad_check([&](Tensor<double>& t) { return mean_all(attention(t, k, v)); }, q);
  REQUIRE(rq.max_rel_err < 1e-6);
  auto rk = grad_check([&](Tensor<double>& t) { return mean_all(attention(q, t, v)); }, k);
  REQUIRE(rk.max_rel_err < 1e-6);
  auto rv = grad_check([&](Tensor<double>& t) { return mean_all(attention(q, k, t)); }, v);
  REQUIRE(rv.max_rel_err < 1e-6);
}

TEST_CASE("focal term matches the frozen reference value") {
  // independently derived: -(1 - 0.5)^0.2 * log(0.5)
  Tensor<double> p = Tensor<double>::scalar(0.5);
  Tensor<double> f = focal_elem(p, 0.2);
  REQUIRE(f.value() == Catch::Approx(0.6034196684835806).margin(1e-15));

  Tensor<double> edge = Tensor<double>::scalar(1.0);
  REQUIRE(focal_elem(edge, 0.2).value() == 0.0);

  REQUIRE_THROWS_AS(focal_elem(Tensor<double>::scalar(0.0), 0.2), DomainError);
  REQUIRE_THROWS_AS(focal_elem(Tensor<double>::scalar(1.5), 0.2), DomainError);
  REQUIRE_THROWS_AS(focal_elem(p, -0.1), DomainError);
}

TEST_CASE("focal gradient passes finite differences") {
  Tensor<double> p = Tensor<double>::from({3}, {0.2, 0.5, 0.9}, true);
  auto rep = grad_check([&](Tensor<double>& v) { return mean_all(focal_elem(v, 0.2)); }, p);
  REQUIRE(rep.max_rel_err < 1e-6);
  auto rep0 = grad_check([&](Tensor<double>& v) { return mean_all(focal_elem(v, 0.0)); }, p);
  REQUIRE(rep0.max_rel_err < 1e-6);
}

TEST_CASE("l1 mean equals the hand value") {
  Tensor<double> a = Tensor<double>::from({2}, {1.0, 2.0});
  Tensor<double> b = Tensor<double>::from({2}, {0.0, 0.0});
  REQUIRE(l1_mean(a, b).value() == 1.5);
}

TEST_CASE("diamond graphs accumulate gradient once per path") {
  Tensor<double> x = Tensor<double>::scalar(1.5, true);
  Tensor<double> y = add(x, x);
  Tensor<double> loss = mul(y, y);  // (2x)^2, d/dx = 8x = 12
  backward(loss);
  REQUIRE((*x.grad)[0] == Catch::Approx(12.0).margin(1e-12));
}

TEST_CASE("masked mean reads and propagates through selected cells only") {
  Rng rng(31);
  Tensor<double> x = random_tensor({4, 4, 3}, rng, true);
  std::vector<std::uint8_t> mask(16, 0);
  mask[1] = mask[5] = mask[6] = mask[10] = 1;

  Tensor<double> pooled = mean_all(masked_mean_cells(x, mask));
  const double before = pooled.value();
  backward(pooled);
  for (int cell = 0; cell < 16; ++cell)
    for (int ch = 0; ch < 3; ++ch) {
      const double g = (*x.grad)[std::size_t(cell) * 3 + ch];
      if (mask[std::size_t(cell)])
        REQUIRE(g != 0.0);
      else
        REQUIRE(g == 0.0);
    }

  // perturbing an unselected cell leaves the value bit-identical
  x.at(0, 0, 0) += 100.0;
  x.at(3, 3, 2) -= 7.0;
  REQUIRE(mean_all(masked_mean_cells(x, mask)).value() == before);

  REQUIRE_THROWS_AS(masked_mean_cells(x, std::vector<std::uint8_t>(16, 0)),
                    DegenerateRegionError);
  REQUIRE_THROWS_AS(masked_mean_cells(x, std::vector<std::uint8_t>(7, 1)), ShapeError);
}

TEST_CASE("gap equals masked mean with a full mask") {
  Rng rng(37);
  Tensor<double> x = random_tensor({3, 5, 2}, rng);
  Tensor<double> g = gap(x);
  Tensor<double> m = masked_mean_cells(x, std::vector<std::uint8_t>(15, 1));
  for (int c = 0; c < 2; ++c) REQUIRE(g.at(c) == m.at(c));
}

TEST_CASE("row selection gathers and scatter-adds") {
  Rng rng(41);
  Tensor<double> x = random_tensor({4, 3}, rng, true);
  Tensor<double> sel = select_rows(x, {2, 0, 2});
  for (int j = 0; j < 3; ++j) {
    REQUIRE(sel.at(0, j) == x.at(2, j));
    REQUIRE(sel.at(1, j) == x.at(0, j));
  }
  Tensor<double> loss = sum_all(sel);
  backward(loss);
  for (int j = 0; j < 3; ++j) {
    REQUIRE((*x.grad)[std::size_t(0) * 3 + j] == 1.0);
    REQUIRE((*x.grad)[std::size_t(1) * 3 + j] == 0.0);
    REQUIRE((*x.grad)[std::size_t(2) * 3 + j] == 2.0);  // selected twice
  }
  REQUIRE_THROWS_AS(select_rows(x, {4}), ShapeError);
}

TEST_CASE("stack, concat and reshape round values through") {
  Tensor<double> a = Tensor<double>::from({2}, {1.0, 2.0});
  Tensor<double> b = Tensor<double>::from({2}, {3.0, 4.0});
  Tensor<double> s = stack_rows<double>({a, b});
  REQUIRE(s.shape == std::vector<int>{2, 2});
  REQUIRE(s.at(1, 0) == 3.0);

  Tensor<double> c = concat_vec<double>({a, b});
  REQUIRE(c.shape == std::vector<int>{4});
  REQUIRE(c.at(3) == 4.0);

  Tensor<double> r = reshape(c, {2, 2});
  REQUIRE(r.at(0, 1) == 2.0);
  REQUIRE_THROWS_AS(reshape(c, {3, 2}), ShapeError);
}

TEST_CASE("empty reductions and non-scalar backward are rejected") {
  Tensor<double> empty = Tensor<double>::zeros({0, 3});
  REQUIRE_THROWS_AS(sum_all(empty), ShapeError);
  REQUIRE_THROWS_AS(mean_all(empty), ShapeError);
  REQUIRE_THROWS_AS(softmax_rows(Tensor<double>::zeros({2, 0})), ShapeError);

  Tensor<double> x = Tensor<double>::zeros({2}, true);
  REQUIRE_THROWS_AS(backward(x), ShapeError);
}

TEST_CASE("no-grad mode and detached tensors build no graph") {
  Tensor<double> x = Tensor<double>::scalar(2.0, true);
  {
    NoGradGuard guard;
    Tensor<double> y = mul(x, x);
    REQUIRE(y.node == nullptr);
    REQUIRE_FALSE(y.requires_grad);
  }
  Tensor<double> d = x.detached();
  Tensor<double> z = mul(d, d);
  REQUIRE(z.node == nullptr);

  Tensor<double> live = mul(x, x);
  REQUIRE(live.node != nullptr);
}
