#include "support.hpp"

#include <mvseg/errors.hpp>
#include <mvseg/objective.hpp>

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

using namespace mvseg;
using doctest::Approx;

namespace {

using Labels = std::vector<std::int32_t>;

// Lovász extension of the Jaccard set function, evaluated as the threshold integral
// of F({i : e_i >= t}) with F tabulated on every subset.
double lovasz_extension_oracle(const std::vector<double>& errors, const std::vector<bool>& fg) {
  const int n = static_cast<int>(errors.size());
  int gts = 0;
  for (bool f : fg) gts += f;
  std::vector<double> table(std::size_t{1} << n);
  for (std::size_t mask = 0; mask < table.size(); ++mask) {
    int wrong = 0, uni = gts;
    for (int i = 0; i < n; ++i)
      if (mask >> i & 1) {
        ++wrong;
        if (!fg[static_cast<std::size_t>(i)]) ++uni;
      }
    table[mask] = uni == 0 ? 0.0 : static_cast<double>(wrong) / uni;
  }
  std::set<double, std::greater<>> levels(errors.begin(), errors.end());
  levels.insert(0.0);
  double total = 0.0;
  for (auto it = levels.begin(); std::next(it) != levels.end(); ++it) {
    std::size_t mask = 0;
    for (int i = 0; i < n; ++i)
      if (errors[static_cast<std::size_t>(i)] >= *it) mask |= std::size_t{1} << i;
    total += (*it - *std::next(it)) * table[mask];
  }
  return total;
}

double lovasz_softmax_oracle(const RowMatrix<double>& p, const Labels& labels) {
  double sum = 0.0;
  int present = 0;
  for (Eigen::Index c = 0; c < p.cols(); ++c) {
    std::vector<double> e;
    std::vector<bool> fg;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      const bool f = labels[static_cast<std::size_t>(i)] == c;
      fg.push_back(f);
      e.push_back(f ? 1.0 - p(i, c) : p(i, c));
    }
    if (std::find(fg.begin(), fg.end(), true) == fg.end()) continue;
    sum += lovasz_extension_oracle(e, fg);
    ++present;
  }
  return sum / present;
}

}  // namespace

TEST_CASE("cross entropy closed forms") {
  for (int c = 1; c <= 8; ++c) {
    const RowMatrix<double> uniform = RowMatrix<double>::Constant(5, c, 1.0 / c);
    const Labels l(5, c - 1);
    CHECK(std::abs(cross_entropy(uniform, l, 255) - std::log(static_cast<double>(c))) <= 1e-9);
    RowMatrix<double> onehot = RowMatrix<double>::Zero(5, c);
    onehot.col(c - 1).setOnes();
    CHECK(std::abs(cross_entropy(onehot, l, 255)) <= 1e-9);
  }
  RowMatrix<double> p(2, 2);
  p << 0.5, 0.5, 0.1, 0.9;
  CHECK(cross_entropy(p, Labels{0, 1}, 255) == Approx(0.39925384810888576).epsilon(1e-15));
}

TEST_CASE("cross entropy ignores rows and floors zero probabilities") {
  RowMatrix<double> p(3, 2);
  p << 0.5, 0.5, 1.0, 0.0, 0.2, 0.8;
  CHECK(cross_entropy(p, Labels{0, 255, 1}, 255) == Approx(-(std::log(0.5) + std::log(0.8)) / 2));
  CHECK(cross_entropy(p, Labels{1, 255, 255}, 255) == Approx(std::log(2.0)));
  CHECK(cross_entropy(p.middleRows(1, 1), Labels{1}, 255) == Approx(-std::log(1e-12)));
  CHECK_THROWS_AS(cross_entropy(p, Labels{255, 255, 255}, 255), UndefinedValue);
}

TEST_CASE("loss inputs are validated") {
  RowMatrix<double> p(2, 2);
  p << 0.5, 0.5, 0.6, 0.6;
  CHECK_THROWS_AS(cross_entropy(p, Labels{0, 1}, 255), MalformedInput);
  CHECK(cross_entropy(p, Labels{0, 255}, 255) == Approx(std::log(2.0)));  // ignored rows are not checked
  p.row(1) << 0.4, 0.6;
  CHECK_THROWS_AS(cross_entropy(p, Labels{0, 2}, 255), MalformedInput);
  CHECK_THROWS_AS(cross_entropy(p, Labels{0}, 255), ShapeMismatch);
  CHECK_THROWS_AS(lovasz_softmax(p, Labels{-1, 0}, 255), MalformedInput);
}

TEST_CASE("moving mass toward the true class lowers cross entropy") {
  testing::Gen g(71);
  for (int trial = 0; trial < 200; ++trial) {
    const int c = g.integer(2, 6);
    auto p = testing::random_probs(g, 1, c);
    const Labels l{g.integer(0, c - 1)};
    int other = g.integer(0, c - 2);
    if (other >= l[0]) ++other;
    auto q = p;
    const double shift = p(0, other) * g.uniform(0.05, 1.0);
    q(0, other) -= shift;
    q(0, l[0]) += shift;
    REQUIRE(cross_entropy(q, l, 255) < cross_entropy(p, l, 255));
  }
}

TEST_CASE("Lovász on a four-pixel binary case") {
  RowMatrix<double> p(4, 2);
  p << 0.9, 0.1, 0.4, 0.6, 0.3, 0.7, 0.8, 0.2;
  const Labels l{0, 0, 1, 1};
  CHECK(lovasz_softmax(p, l, 255) == Approx(lovasz_softmax_oracle(p, l)).epsilon(1e-12));
  // perfect one-hot prediction costs nothing
  RowMatrix<double> perfect(4, 2);
  perfect << 1, 0, 1, 0, 0, 1, 0, 1;
  CHECK(lovasz_softmax(perfect, l, 255) == 0.0);
}

TEST_CASE("Lovász matches the set-function oracle on every small labeling") {
  testing::Gen g(72);
  long instances = 0;
  for (int c = 1; c <= 3; ++c)
    for (int n = 1; n <= 6; ++n) {
      int combos = 1;
      for (int i = 0; i < n; ++i) combos *= c;
      for (int code = 0; code < combos; ++code) {
        Labels l(static_cast<std::size_t>(n));
        for (int i = 0, x = code; i < n; ++i, x /= c) l[static_cast<std::size_t>(i)] = x % c;
        const auto p = testing::random_probs(g, n, c);
        const double got = lovasz_softmax(p, l, 255);
        REQUIRE(std::abs(got - lovasz_softmax_oracle(p, l)) <= 1e-12);
        REQUIRE(got >= 0.0);
        REQUIRE(got <= 1.0);
        ++instances;
      }
    }
  CHECK(instances == 1 + 1 + 1 + 1 + 1 + 1 + 2 + 4 + 8 + 16 + 32 + 64 + 3 + 9 + 27 + 81 + 243 + 729);
}

TEST_CASE("Lovász averages only over present classes and skips ignored rows") {
  RowMatrix<double> p(3, 3);
  p << 0.7, 0.2, 0.1, 0.1, 0.8, 0.1, 0.3, 0.3, 0.4;
  const double with_ignore = lovasz_softmax(p, Labels{0, 1, 255}, 255);
  CHECK(with_ignore == Approx(lovasz_softmax(p.topRows(2), Labels{0, 1}, 255)).epsilon(1e-15));
  CHECK_THROWS_AS(lovasz_softmax(p, Labels{255, 255, 255}, 255), UndefinedValue);
}

TEST_CASE("CL is CE plus Lovász") {
  testing::Gen g(73);
  const auto p = testing::random_probs(g, 20, 4);
  Labels l(20);
  for (auto& x : l) x = g.integer(0, 3);
  CHECK(loss_cl(p, l, 255) == cross_entropy(p, l, 255) + lovasz_softmax(p, l, 255));
}

TEST_CASE("composite with unit constituents") {
  const LossTerms ones{1, 1, 1, 1, 1};
  const auto b = combine_losses(ones, LossWeights{});
  CHECK(b.total == 8.0);
  CHECK(b.loss_3d == 4.0);
  CHECK(b.loss_2d == 2.0);
  CHECK(combine_losses(ones, LossWeights{0, 0, 0, 0, 0}).total == 0.0);
  CHECK_THROWS_AS(combine_losses(ones, LossWeights{-1, 0, 0, 0, 0}), ConfigError);
}

TEST_CASE("total loss is linear in the weights") {
  testing::Gen g(74);
  const int h = 4, w = 5, n = 30, c = 3;
  const auto m_r = testing::random_probs(g, h * w, c), m_b = testing::random_probs(g, h * w, c);
  const auto f_r = testing::random_probs(g, n, c), f_b = testing::random_probs(g, n, c), f_f = testing::random_probs(g, n, c);
  Labels q_r(h * w), q_b(h * w), q(n);
  for (auto* v : {&q_r, &q_b, &q})
    for (auto& x : *v) x = g.chance(0.1) ? 255 : g.integer(0, c - 1);
  LossInputs<double> in{&m_r, q_r, &m_b, q_b, &f_r, &f_b, &f_f, q, 255};
  const auto base = loss_total(in, LossWeights{});
  const auto& t = base.terms;
  CHECK(t.ce_fused == cross_entropy(f_f, q, 255));
  CHECK(t.cl_bev == loss_cl(m_b, q_b, 255));

  // each unit weight vector picks out one term
  CHECK(loss_total(in, LossWeights{1, 0, 0, 0, 0}).total == t.ce_fused);
  CHECK(loss_total(in, LossWeights{0, 1, 0, 0, 0}).total == t.ce_rv);
  CHECK(loss_total(in, LossWeights{0, 0, 1, 0, 0}).total == t.ce_bev);
  CHECK(loss_total(in, LossWeights{0, 0, 0, 1, 0}).total == t.cl_rv);
  CHECK(loss_total(in, LossWeights{0, 0, 0, 0, 1}).total == t.cl_bev);

  // power-of-two scaling is exact in floating point
  for (double s : {0.25, 0.5, 2.0, 8.0}) CHECK(loss_total(in, LossWeights{}.scaled(s)).total == s * base.total);
  for (int trial = 0; trial < 20; ++trial) {
    const LossWeights a{g.uniform(0, 3), g.uniform(0, 3), g.uniform(0, 3), g.uniform(0, 3), g.uniform(0, 3)};
    const LossWeights b{g.uniform(0, 3), g.uniform(0, 3), g.uniform(0, 3), g.uniform(0, 3), g.uniform(0, 3)};
    const LossWeights sum{a.alpha + b.alpha, a.beta + b.beta, a.gamma + b.gamma, a.rho + b.rho, a.sigma + b.sigma};
    CHECK(loss_total(in, sum).total ==
          Approx(loss_total(in, a).total + loss_total(in, b).total).epsilon(1e-13));
  }
}

TEST_CASE("losses are invariant to a joint row permutation") {
  testing::Gen g(75);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = g.integer(2, 40), c = g.integer(2, 5);
    const auto p = testing::random_probs(g, n, c);
    Labels l(static_cast<std::size_t>(n));
    for (auto& x : l) x = g.integer(0, c - 1);
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), g.engine());
    RowMatrix<double> pp(n, c);
    Labels pl(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      pp.row(i) = p.row(perm[static_cast<std::size_t>(i)]);
      pl[static_cast<std::size_t>(i)] = l[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
    }
    CHECK(cross_entropy(pp, pl, 255) == Approx(cross_entropy(p, l, 255)).epsilon(1e-13));
    CHECK(lovasz_softmax(pp, pl, 255) == Approx(lovasz_softmax(p, l, 255)).epsilon(1e-13));
  }
}
