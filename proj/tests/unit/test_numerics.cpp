#include <cmath>
#include <random>

#include "doctest.h"
#include "mdat/numerics/grad_check.hpp"
#include "mdat/numerics/graph.hpp"
#include "support.hpp"

using namespace mdat::numerics;
using T64 = Tensor<double>;

namespace {

// Weighted sum with fixed random weights, so every output entry matters to
// the loss and no gradient vanishes by symmetry.
Var<double> probe_loss(Var<double> y, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto w = testing::random_tensor(rng, y.shape());
  return sum_all(mul(y, y.graph->constant(std::move(w))));
}

double check_unary(const std::function<Var<double>(Graph<double>&, Var<double>)>& op, T64 x) {
  ParamSet<double> params;
  params.add("x", std::move(x));
  LossBuilder<double> loss = [&](Graph<double>& g, const ParamSet<double>& p) {
    return probe_loss(op(g, g.parameter(p, "x")), 99);
  };
  return grad_check(loss, params, 1e-4).max_rel_error;
}

double check_binary(const std::function<Var<double>(Var<double>, Var<double>)>& op, T64 a, T64 b) {
  ParamSet<double> params;
  params.add("a", std::move(a));
  params.add("b", std::move(b));
  LossBuilder<double> loss = [&](Graph<double>& g, const ParamSet<double>& p) {
    return probe_loss(op(g.parameter(p, "a"), g.parameter(p, "b")), 7);
  };
  return grad_check(loss, params, 1e-4).max_rel_error;
}

}  // namespace

TEST_CASE("tensor rejects bad shapes") {
  CHECK_THROWS_AS(T64({0, 3}), ShapeError);
  CHECK_THROWS_AS(T64({2, 2, 2}), ShapeError);
  CHECK_THROWS_AS(T64({2, 2}, {1.0, 2.0}), ShapeError);
  T64 v = T64::vector({1, 2, 3});
  CHECK(v.rows() == 1);
  CHECK(v.cols() == 3);
}

TEST_CASE("matmul hand values and identity") {
  Graph<double> g;
  auto a = g.constant(T64::from_rows({{1, 2}, {3, 4}}));
  auto b = g.constant(T64::from_rows({{5, 6}, {7, 8}}));
  CHECK(matmul(a, b).value() == T64::from_rows({{19, 22}, {43, 50}}));
  CHECK(matmul(a, g.constant(T64::identity(2))).value() == a.value());

  auto c = g.constant(T64({3, 2}));
  try {
    matmul(a, c);
    FAIL("expected a shape error");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x2]") != std::string::npos);
    CHECK(msg.find("[3x2]") != std::string::npos);
  }
}

TEST_CASE("affine hand values") {
  Graph<double> g;
  auto x = g.constant(T64::from_rows({{1, 2}}));
  auto w = g.constant(T64::from_rows({{1}, {1}}));
  auto b = g.constant(T64::vector({0.5}));
  CHECK(affine(x, w, b).value()[0] == doctest::Approx(3.5));

  auto x2 = g.constant(T64::from_rows({{1, 2}, {3, 4}}));
  auto zero = g.constant(T64({2, 3}));
  auto bias = g.constant(T64::vector({1, -2, 3}));
  auto out = affine(x2, zero, bias).value();
  for (std::size_t r = 0; r < 2; ++r) {
    CHECK(out.at(r, 0) == 1);
    CHECK(out.at(r, 1) == -2);
    CHECK(out.at(r, 2) == 3);
  }
  CHECK(affine(x2, g.constant(T64::identity(2)), g.constant(T64({2}))).value() == x2.value());
  CHECK_THROWS_AS(affine(x2, zero, g.constant(T64({2}))), ShapeError);
}

TEST_CASE("softmax values and invariants") {
  auto s = softmax_rows(T64::from_rows({{0.0, std::log(2.0)}, {5, 5}}));
  CHECK(s.at(0, 0) == doctest::Approx(1.0 / 3));
  CHECK(s.at(0, 1) == doctest::Approx(2.0 / 3));
  CHECK(s.at(1, 0) == doctest::Approx(0.5));

  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    auto x = testing::random_tensor<float>(rng, {3, 5}, -30, 30);
    auto y = softmax_rows(x);
    for (std::size_t r = 0; r < 3; ++r) {
      double sum = 0;
      for (auto v : y.row(r)) {
        CHECK(v >= 0.0f);
        sum += v;
      }
      CHECK(std::abs(sum - 1.0) < 1e-5);
    }
  }

  auto x = testing::random_tensor(rng, {2, 4});
  auto shifted = x;
  for (std::size_t c = 0; c < 4; ++c) {
    shifted.at(0, c) += 3.5;
    shifted.at(1, c) -= 100.0;
  }
  CHECK(max_abs_diff(softmax_rows(x), softmax_rows(shifted)) < 1e-12);
}

TEST_CASE("leaky relu") {
  Graph<double> g;
  auto x = g.constant(T64::vector({3, -2, 0}));
  auto y = leaky_relu(x, 0.2).value();
  CHECK(y[0] == 3);
  CHECK(y[1] == doctest::Approx(-0.4));
  CHECK(y[2] == 0);
  CHECK(leaky_relu(x, 1.0).value() == x.value());
  CHECK_THROWS(leaky_relu(x, 0.0));
  CHECK_THROWS(leaky_relu(x, 1.5));
}

TEST_CASE("layer norm") {
  Graph<double> g;
  auto gamma = g.constant(T64::filled({2}, 1.0));
  auto beta = g.constant(T64({2}));
  auto constant_row = layer_norm(g.constant(T64::from_rows({{4, 4}})), gamma, beta, 1e-5).value();
  CHECK(constant_row[0] == 0);
  CHECK(constant_row[1] == 0);
  auto pm = layer_norm(g.constant(T64::from_rows({{1, -1}})), gamma, beta, 1e-12).value();
  CHECK(pm[0] == doctest::Approx(1.0));
  CHECK(pm[1] == doctest::Approx(-1.0));

  std::mt19937_64 rng(5);
  auto x = testing::random_tensor<float>(rng, {4, 6}, -10, 10);
  Graph<float> gf;
  auto y = layer_norm(gf.constant(x), gf.constant(Tensor<float>::filled({6}, 1.0f)),
                      gf.constant(Tensor<float>({6})), 1e-5f)
               .value();
  for (std::size_t r = 0; r < 4; ++r) {
    double mean = 0;
    for (auto v : y.row(r)) mean += v;
    CHECK(std::abs(mean / 6) < 1e-6);
  }
}

TEST_CASE("cross entropy") {
  Graph<double> g;
  CHECK(cross_entropy(g.constant(T64({1, 4})), 2).value()[0] == doctest::Approx(std::log(4.0)));
  CHECK(cross_entropy_from_probs(T64::vector({0, 1, 0}), 1) == 0.0);
  CHECK(cross_entropy_from_probs(T64::vector({0.25, 0.25, 0.25, 0.25}), 0) ==
        doctest::Approx(1.386294));
  CHECK_THROWS_AS(cross_entropy(g.constant(T64({1, 4})), 4), std::out_of_range);

  std::mt19937_64 rng(11);
  auto z = testing::random_tensor(rng, {1, 5}, -3, 3);
  ParamSet<double> params;
  params.add("z", z);
  LossBuilder<double> loss = [](Graph<double>& g, const ParamSet<double>& p) {
    return cross_entropy(g.parameter(p, "z"), 3);
  };
  auto grad = analytic_gradient(loss, params).get("z");
  auto probs = softmax_rows(z);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(grad[i] == doctest::Approx(probs[i] - (i == 3 ? 1.0 : 0.0)).epsilon(1e-12));
  }
  CHECK(grad_check(loss, params, 1e-4).max_rel_error < 1e-5);
}

TEST_CASE("backward basics") {
  ParamSet<double> params;
  params.add("x", T64::vector({3}));
  params.add("unused", T64::vector({1, 2}));
  Graph<double> g;
  auto x = g.parameter(params, "x");
  auto loss = mul(x, x);
  g.backward(loss);
  auto grads = g.gradients(params);
  CHECK(grads.get("x")[0] == 6.0);
  CHECK(grads.get("unused")[0] == 0.0);
  CHECK(grads.get("unused")[1] == 0.0);

  Graph<double> g2;
  auto v = g2.parameter(params, "unused");
  CHECK_THROWS(g2.backward(v));
}

TEST_CASE("non-finite forward results are errors") {
  Graph<double> g;
  auto big = g.constant(T64::vector({1e300}));
  CHECK_THROWS_AS(mul(big, big), NumericError);
}

TEST_CASE("every op passes the 64-bit gradient check") {
  std::mt19937_64 rng(17);
  auto r = [&](Shape s) { return testing::random_tensor(rng, std::move(s)); };
  auto nz = [&](Shape s) { return testing::away_from_zero(rng, std::move(s)); };
  const double tol = 1e-5;

  CHECK(check_binary([](auto a, auto b) { return matmul(a, b); }, r({3, 4}), r({4, 2})) < tol);
  CHECK(check_binary([](auto a, auto b) { return add(a, b); }, r({3, 4}), r({3, 4})) < tol);
  CHECK(check_binary([](auto a, auto b) { return mul(a, b); }, r({3, 4}), r({3, 4})) < tol);
  CHECK(check_binary([](auto a, auto b) { return concat_rows(a, b); }, r({2, 3}), r({4, 3})) < tol);
  CHECK(check_binary([](auto a, auto b) { return concat_cols(a, b); }, r({2, 3}), r({2, 1})) < tol);
  CHECK(check_unary([](auto&, auto x) { return scale(x, 0.7); }, r({3, 3})) < tol);
  CHECK(check_unary([](auto&, auto x) { return transpose(x); }, r({2, 5})) < tol);
  CHECK(check_unary([](auto&, auto x) { return softmax_rows(x); }, r({3, 4})) < tol);
  CHECK(check_unary([](auto&, auto x) { return leaky_relu(x, 0.2); }, nz({3, 4})) < tol);
  CHECK(check_unary([](auto&, auto x) { return relu(x); }, nz({3, 4})) < tol);
  CHECK(check_unary([](auto&, auto x) { return tanh(x); }, r({3, 4})) < tol);
  CHECK(check_unary([](auto&, auto x) { return sigmoid(x); }, r({3, 4})) < tol);
  CHECK(check_unary([](auto&, auto x) { return slice_rows(x, 1, 2); }, r({4, 3})) < tol);
  CHECK(check_unary([](auto&, auto x) { return slice_cols(x, 1, 2); }, r({4, 3})) < tol);
  CHECK(check_unary([](auto&, auto x) { return mean_rows(x); }, r({4, 3})) < tol);
  CHECK(check_unary([](auto&, auto x) { return sum_all(x); }, r({4, 3})) < tol);
  CHECK(check_unary([](auto&, auto x) { return dropout(x, 0.5, false, nullptr); }, r({2, 2})) < tol);

  ParamSet<double> params;
  params.add("x", r({3, 5}));
  params.add("w", r({5, 2}));
  params.add("b", r({2}));
  params.add("gamma", r({5}));
  params.add("beta", r({5}));
  LossBuilder<double> affine_loss = [](Graph<double>& g, const ParamSet<double>& p) {
    return probe_loss(affine(g.parameter(p, "x"), g.parameter(p, "w"), g.parameter(p, "b")), 1);
  };
  LossBuilder<double> ln_loss = [](Graph<double>& g, const ParamSet<double>& p) {
    return probe_loss(
        layer_norm(g.parameter(p, "x"), g.parameter(p, "gamma"), g.parameter(p, "beta"), 1e-5), 2);
  };
  CHECK(grad_check(affine_loss, params, 1e-4).max_rel_error < tol);
  CHECK(grad_check(ln_loss, params, 1e-4).max_rel_error < tol);
}

TEST_CASE("dropout") {
  std::mt19937_64 rng(1);
  Graph<double> g;
  auto x = g.constant(T64::filled({50, 40}, 1.0));
  auto y = dropout(x, 0.25, true, &rng).value();
  std::size_t kept = 0;
  for (auto v : y.data()) {
    CHECK((v == 0.0 || v == doctest::Approx(1.0 / 0.75)));
    kept += v != 0.0;
  }
  CHECK(std::abs(double(kept) / 2000.0 - 0.75) < 0.05);
  CHECK(dropout(x, 0.25, false, nullptr).value() == x.value());
  CHECK_THROWS(dropout(x, 1.0, true, &rng));
  CHECK_THROWS(dropout(x, 0.5, true, nullptr));

  std::mt19937_64 a(9), b(9);
  Graph<double> g2;
  auto x2 = g2.constant(T64::filled({4, 4}, 2.0));
  CHECK(dropout(x2, 0.5, true, &a).value() == dropout(x2, 0.5, true, &b).value());
}

TEST_CASE("grad_check sanity and sensitivity") {
  std::mt19937_64 rng(23);
  ParamSet<double> params;
  params.add("x", testing::random_tensor(rng, {2, 3}));
  LossBuilder<double> linear = [](Graph<double>& g, const ParamSet<double>& p) {
    return probe_loss(g.parameter(p, "x"), 4);
  };
  CHECK(grad_check(linear, params, 1e-4).max_rel_error < 1e-6);

  // An op whose backward doubles the true gradient.
  LossBuilder<double> corrupted = [](Graph<double>& g, const ParamSet<double>& p) {
    auto x = g.parameter(p, "x");
    const std::size_t ix = x.id;
    auto y = g.record("bad_identity", x.value(), {ix},
                      [ix](Graph<double>& gr, const T64&, const T64& dy) {
                        T64 d = dy;
                        for (auto& v : d.data()) v *= 2.0;
                        gr.accumulate(ix, d);
                      });
    return probe_loss(y, 4);
  };
  const auto bad = grad_check(corrupted, params, 1e-4);
  CHECK(bad.max_rel_error > 1e-1);
  CHECK(bad.max_tensor_rel_error == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
  CHECK(bad.worst_tensor == "x");

  ParamSet<double> logits;
  logits.add("z", testing::random_tensor(rng, {1, 6}, -2, 2));
  LossBuilder<double> head = [](Graph<double>& g, const ParamSet<double>& p) {
    return cross_entropy(g.parameter(p, "z"), 1);
  };
  CHECK(grad_check(head, logits, 1e-4).max_rel_error < 1e-5);
}

TEST_CASE("differences straddling a relu kink are skipped") {
  ParamSet<double> params;
  params.add("x", T64({1, 3}, {0.5, 3e-5, -0.7}));
  LossBuilder<double> loss = [](Graph<double>& g, const ParamSet<double>& p) {
    return sum_all(relu(g.parameter(p, "x")));
  };
  const auto r = grad_check(loss, params, 1e-4);
  CHECK(r.kinks_skipped == 1);
  CHECK(r.entries_checked == 2);
  CHECK(r.max_rel_error < 1e-9);

  Graph<double> g;
  relu(g.constant(T64({1, 2}, {-1.0, 2.0})));
  leaky_relu(g.constant(T64({1, 1}, {0.0})), 0.2);
  CHECK(g.branch_pattern() == std::vector<bool>{false, true, true});
}

TEST_CASE("matmul associativity in 32-bit") {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 50; ++trial) {
    Graph<float> g;
    auto a = g.constant(testing::random_tensor<float>(rng, {3, 4}));
    auto b = g.constant(testing::random_tensor<float>(rng, {4, 5}));
    auto c = g.constant(testing::random_tensor<float>(rng, {5, 2}));
    CHECK(max_abs_diff(matmul(matmul(a, b), c).value(), matmul(a, matmul(b, c)).value()) < 1e-4);
  }
}

TEST_CASE("forward ops are pure") {
  std::mt19937_64 rng(31);
  auto x = testing::random_tensor<float>(rng, {4, 6});
  auto run = [&] {
    Graph<float> g;
    auto v = g.constant(x);
    return softmax_rows(matmul(tanh(v), transpose(v))).value();
  };
  CHECK(run() == run());
}
