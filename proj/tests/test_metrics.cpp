#include "support.hpp"

#include <mvseg/errors.hpp>
#include <mvseg/metrics.hpp>

#include <doctest.h>

#include <algorithm>
#include <numeric>

using namespace mvseg;
using doctest::Approx;

namespace {

using Labels = std::vector<std::int32_t>;

ConfusionMatrix from(std::initializer_list<std::initializer_list<std::int64_t>> rows) {
  ConfusionMatrix::Counts m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.size()));
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    Eigen::Index j = 0;
    for (auto v : r) m(i, j++) = v;
    ++i;
  }
  return ConfusionMatrix(m);
}

}  // namespace

TEST_CASE("toy confusion matrix") {
  const auto cm = from({{1, 0}, {1, 2}});
  const auto iou = miou(cm);
  CHECK(*iou.per_class[0] == 0.5);
  CHECK(*iou.per_class[1] == Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(iou.mean == Approx(0.5833333333333333).epsilon(1e-15));
  CHECK(accuracy(cm) == 0.75);
  CHECK(fwiou(cm) == Approx(0.625).epsilon(1e-15));
}

TEST_CASE("accumulate counts rows as ground truth") {
  ConfusionMatrix cm(3);
  cm.accumulate(Labels{0, 1, 2, 2, 1}, Labels{0, 1, 1, 255, 2}, 255);
  CHECK(cm.counts()(0, 0) == 1);
  CHECK(cm.counts()(1, 1) == 1);
  CHECK(cm.counts()(1, 2) == 1);
  CHECK(cm.counts()(2, 1) == 1);
  CHECK(cm.total() == 4);
}

TEST_CASE("undefined classes are left out of the mean") {
  const auto cm = from({{3, 0, 0}, {0, 0, 0}, {1, 0, 2}});
  const auto iou = miou(cm);
  CHECK_FALSE(iou.per_class[1]);
  CHECK(iou.mean == Approx((0.75 + 2.0 / 3.0) / 2));
  CHECK_THROWS_AS(miou(ConfusionMatrix(2)), UndefinedValue);
  CHECK_THROWS_AS(accuracy(ConfusionMatrix(2)), UndefinedValue);
  CHECK_THROWS_AS(fwiou(ConfusionMatrix(2)), UndefinedValue);
}

TEST_CASE("out-of-range ids are rejected with their index") {
  ConfusionMatrix cm(2);
  try {
    cm.accumulate(Labels{0, 5}, Labels{0, 1}, 255);
    FAIL("expected MalformedInput");
  } catch (const MalformedInput& e) {
    CHECK(std::string(e.what()).find("index 1") != std::string::npos);
  }
  CHECK_THROWS_AS(cm.accumulate(Labels{0}, Labels{0, 1}, 255), ShapeMismatch);
  CHECK_THROWS_AS(ConfusionMatrix(0), ConfigError);
}

TEST_CASE("every two-class labeling of length at most six") {
  long instances = 0;
  for (int n = 1; n <= 6; ++n)
    for (int gt_code = 0; gt_code < (1 << n); ++gt_code)
      for (int pr_code = 0; pr_code < (1 << n); ++pr_code) {
        Labels gt(static_cast<std::size_t>(n)), pr(static_cast<std::size_t>(n));
        std::int64_t tp[2] = {0, 0}, fp[2] = {0, 0}, fn[2] = {0, 0}, count[2] = {0, 0};
        for (int i = 0; i < n; ++i) {
          const int a = gt_code >> i & 1, b = pr_code >> i & 1;
          gt[static_cast<std::size_t>(i)] = a;
          pr[static_cast<std::size_t>(i)] = b;
          ++count[a];
          if (a == b) {
            ++tp[a];
          } else {
            ++fn[a];
            ++fp[b];
          }
        }
        ConfusionMatrix cm(2);
        cm.accumulate(pr, gt, 255);
        REQUIRE(cm.counts()(0, 0) == tp[0]);
        REQUIRE(cm.counts()(1, 1) == tp[1]);
        REQUIRE(cm.counts()(0, 1) == fn[0]);
        REQUIRE(cm.counts()(1, 0) == fn[1]);

        const auto iou = miou(cm);
        double sum = 0.0, fw = 0.0;
        int defined = 0;
        for (int c = 0; c < 2; ++c) {
          const auto denom = tp[c] + fp[c] + fn[c];
          if (denom == 0) {
            REQUIRE_FALSE(iou.per_class[static_cast<std::size_t>(c)]);
            continue;
          }
          const double v = static_cast<double>(tp[c]) / static_cast<double>(denom);
          REQUIRE(*iou.per_class[static_cast<std::size_t>(c)] == v);
          sum += v;
          fw += static_cast<double>(count[c]) * v;
          ++defined;
        }
        REQUIRE(iou.mean == sum / defined);
        REQUIRE(accuracy(cm) == static_cast<double>(tp[0] + tp[1]) / n);
        REQUIRE(fwiou(cm) == fw / n);
        if (gt_code == pr_code) {
          REQUIRE(iou.mean == 1.0);
          REQUIRE(accuracy(cm) == 1.0);
          REQUIRE(fwiou(cm) == 1.0);
        }
        ++instances;
      }
  CHECK(instances == 4 + 16 + 64 + 256 + 1024 + 4096);
}

TEST_CASE("perfect predictions score exactly one") {
  testing::Gen g(81);
  for (int trial = 0; trial < 50; ++trial) {
    const int c = g.integer(1, 20);
    Labels l(static_cast<std::size_t>(g.integer(1, 500)));
    for (auto& x : l) x = g.integer(0, c - 1);
    ConfusionMatrix cm(c);
    cm.accumulate(l, l, 255);
    REQUIRE(miou(cm).mean == 1.0);
    REQUIRE(accuracy(cm) == 1.0);
    REQUIRE(fwiou(cm) == 1.0);
  }
}

TEST_CASE("merging is associative and order-free") {
  testing::Gen g(82);
  const int c = 5;
  std::vector<ConfusionMatrix> parts;
  ConfusionMatrix all(c);
  for (int s = 0; s < 6; ++s) {
    Labels gt(100), pr(100);
    for (std::size_t i = 0; i < 100; ++i) {
      gt[i] = g.chance(0.1) ? 255 : g.integer(0, c - 1);
      pr[i] = g.integer(0, c - 1);
    }
    ConfusionMatrix cm(c);
    cm.accumulate(pr, gt, 255);
    all.accumulate(pr, gt, 255);
    parts.push_back(cm);
  }
  ConfusionMatrix left(c), right(c);
  for (const auto& p : parts) left += p;
  std::reverse(parts.begin(), parts.end());
  for (const auto& p : parts) right += p;
  CHECK(left.counts() == all.counts());
  CHECK(right.counts() == all.counts());
  CHECK_THROWS_AS(left += ConfusionMatrix(4), ShapeMismatch);
}

TEST_CASE("relabeling classes permutes per-class IoU") {
  testing::Gen g(83);
  const int c = 4;
  Labels gt(300), pr(300);
  for (std::size_t i = 0; i < 300; ++i) {
    gt[i] = g.integer(0, c - 1);
    pr[i] = g.chance(0.6) ? gt[i] : g.integer(0, c - 1);
  }
  std::vector<int> perm(c);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), g.engine());
  Labels pg(300), pp(300);
  for (std::size_t i = 0; i < 300; ++i) {
    pg[i] = perm[static_cast<std::size_t>(gt[i])];
    pp[i] = perm[static_cast<std::size_t>(pr[i])];
  }
  ConfusionMatrix a(c), b(c);
  a.accumulate(pr, gt, 255);
  b.accumulate(pp, pg, 255);
  const auto ia = miou(a), ib = miou(b);
  for (int k = 0; k < c; ++k)
    CHECK(*ia.per_class[static_cast<std::size_t>(k)] == *ib.per_class[static_cast<std::size_t>(perm[static_cast<std::size_t>(k)])]);
  CHECK(accuracy(a) == accuracy(b));
  CHECK(fwiou(a) == Approx(fwiou(b)).epsilon(1e-15));
  CHECK(ia.mean == Approx(ib.mean).epsilon(1e-15));
}
