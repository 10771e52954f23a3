#include <random>

#include "doctest.h"
#include "mdat/experiments/metrics.hpp"

using namespace mdat::experiments;

namespace {

ConfusionMatrix from_lists(const std::vector<std::size_t>& truth, const std::vector<std::size_t>& pred,
                           std::size_t n) {
  ConfusionMatrix m(n);
  for (std::size_t i = 0; i < truth.size(); ++i) m.add(truth[i], pred[i]);
  return m;
}

// Recall computed straight from the label lists, without the matrix.
double oracle_ua(const std::vector<std::size_t>& truth, const std::vector<std::size_t>& pred,
                 std::size_t n) {
  double sum = 0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t hits = 0, total = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (truth[i] != c) continue;
      ++total;
      hits += pred[i] == c;
    }
    if (total == 0) continue;
    sum += double(hits) / double(total);
    ++present;
  }
  return sum / double(present);
}

}  // namespace

TEST_CASE("hand cases") {
  CHECK(unweighted_accuracy(from_lists({0, 1, 2, 3}, {0, 1, 2, 3}, 4)) == 1.0);
  CHECK(unweighted_accuracy(from_lists({0, 0, 1, 1}, {0, 1, 1, 1}, 2)) == 0.75);
  CHECK(unweighted_accuracy(from_lists({0, 0, 0, 1}, {1, 1, 1, 0}, 2)) == 0.0);
  // An absent class does not count against UA.
  CHECK(unweighted_accuracy(from_lists({0, 0, 2}, {0, 1, 2}, 3)) == 0.75);
  CHECK_THROWS(unweighted_accuracy(ConfusionMatrix(3)));
}

TEST_CASE("UA matches an independent recall computation") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 7)(rng);
    const std::size_t count = std::uniform_int_distribution<std::size_t>(1, 60)(rng);
    std::uniform_int_distribution<std::size_t> cls(0, n - 1);
    std::vector<std::size_t> truth(count), pred(count);
    for (std::size_t i = 0; i < count; ++i) {
      truth[i] = cls(rng);
      pred[i] = cls(rng);
    }
    const auto report = make_report(from_lists(truth, pred, n));
    REQUIRE(std::abs(report.ua - oracle_ua(truth, pred, n)) <= 1e-12);
    REQUIRE(report.count == count);
  }
}

TEST_CASE("UA invariants") {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 4;
    ConfusionMatrix m(n);
    std::uniform_int_distribution<std::size_t> cell(0, 20);
    for (std::size_t t = 0; t < n; ++t)
      for (std::size_t p = 0; p < n; ++p) m.at(t, p) = cell(rng);
    if (m.total() == 0) continue;
    const double ua = unweighted_accuracy(m);
    CHECK(ua >= 0.0);
    CHECK(ua <= 1.0);

    // Scaling one class's row leaves UA unchanged (class-size invariance).
    ConfusionMatrix scaled = m;
    for (std::size_t p = 0; p < n; ++p) scaled.at(1, p) *= 3;
    CHECK(unweighted_accuracy(scaled) == doctest::Approx(ua).epsilon(1e-12));

    // Relabeling the classes consistently leaves UA unchanged.
    const std::vector<std::size_t> perm{2, 0, 3, 1};
    ConfusionMatrix permuted(n);
    for (std::size_t t = 0; t < n; ++t)
      for (std::size_t p = 0; p < n; ++p) permuted.at(perm[t], perm[p]) = m.at(t, p);
    CHECK(unweighted_accuracy(permuted) == doctest::Approx(ua).epsilon(1e-12));
  }
}

TEST_CASE("confusion bookkeeping") {
  ConfusionMatrix m(3);
  m.add(0, 1);
  m.add(0, 1);
  m.add(2, 2);
  CHECK(m.total() == 3);
  CHECK(m.row_total(0) == 2);
  CHECK(m.at(0, 1) == 2);
  CHECK_THROWS(m.add(3, 0));
  const auto r = make_report(m);
  CHECK(r.recall == std::vector<double>{0.0, 0.0, 1.0});
  nlohmann::json j = r;
  CHECK(j["confusion"][0][1] == 2);
  CHECK(j["ua"] == 0.5);
}
