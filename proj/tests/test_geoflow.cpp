#include "support.hpp"

#include <mvseg/correspondence.hpp>
#include <mvseg/errors.hpp>
#include <mvseg/geoflow.hpp>
#include <mvseg/parallel.hpp>

#include <doctest.h>

#include <cmath>
#include <optional>

using namespace mvseg;
using doctest::Approx;

TEST_CASE("composition through point indices") {
  testing::Gen g(41);
  const RvSensorConfig rc{16, 128, 0.1, -0.5};
  const BevGridConfig bc{40, 36, 8, 3.0, 50.0, -3.0, 1.5};
  for (int trial = 0; trial < 15; ++trial) {
    const auto cloud = testing::clustered_cloud(g, g.integer(1, 2500));
    const auto rv = project_rv_original(cloud, rc);
    const auto bev = project_bev(cloud, bc);
    const auto r2b = compose_r2b(rv, bev);
    const auto b2r = compose_b2r(bev, rv);
    const auto brute = testing::brute_views(cloud, rc, bc);
    for (int i = 0; i < rc.height; ++i)
      for (int j = 0; j < rc.width; ++j) {
        const auto k = brute.rv_kept[static_cast<std::size_t>(i * rc.width + j)];
        const std::pair<int, int> want = k < 0 ? std::pair{-1, -1} : brute.bev_of[static_cast<std::size_t>(k)];
        REQUIRE(std::pair<int, int>{r2b.coords(r2b.index(i, j), 0), r2b.coords(r2b.index(i, j), 1)} == want);
      }
    for (int u = 0; u < bc.radial_bins; ++u)
      for (int v = 0; v < bc.angular_bins; ++v) {
        const auto k = brute.bev_kept[static_cast<std::size_t>(u * bc.angular_bins + v)];
        const std::pair<int, int> want = k < 0 ? std::pair{-1, -1} : brute.rv_of[static_cast<std::size_t>(k)];
        REQUIRE(std::pair<int, int>{b2r.coords(b2r.index(u, v), 0), b2r.coords(b2r.index(u, v), 1)} == want);
      }
    r2b.check();
    b2r.check();
  }
}

TEST_CASE("composition refuses views of different clouds") {
  testing::Gen g(42);
  const auto a = testing::random_cloud(g, 50), b = testing::random_cloud(g, 50);
  const auto rv = project_rv_original(a, RvSensorConfig{});
  const auto bev = project_bev(b, BevGridConfig{});
  CHECK_THROWS_AS(compose_r2b(rv, bev), SourceMismatch);
  CHECK_THROWS_AS(compose_b2r(bev, rv), SourceMismatch);
}

TEST_CASE("scaling by one is the identity") {
  testing::Gen g(43);
  const auto c = testing::random_correspondence(g, 12, 20, 9, 7);
  const auto s = scale_correspondence(c, 12, 20, 9, 7);
  CHECK(s.coords == c.coords);
}

TEST_CASE("halving floors both the grid and the coordinates") {
  Correspondence c(4, 4, 4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) c.coords.row(c.index(i, j)) << 3 - i, j;
  c.coords.row(c.index(2, 2)) << -1, -1;
  const auto s = scale_correspondence(c, 2, 2, 2, 2);
  // target (i, j) reads full-resolution (2i, 2j)
  CHECK(s.coords.row(s.index(0, 0)) == Eigen::RowVector2i(1, 0));
  CHECK(s.coords.row(s.index(0, 1)) == Eigen::RowVector2i(1, 1));
  CHECK(s.coords.row(s.index(1, 0)) == Eigen::RowVector2i(0, 0));
  CHECK_FALSE(s.valid(1, 1));

  testing::Gen g(44);
  for (int trial = 0; trial < 20; ++trial) {
    const int th = g.integer(2, 40), tw = g.integer(2, 40), sh = g.integer(2, 40), sw = g.integer(2, 40);
    const auto full = testing::random_correspondence(g, th, tw, sh, sw);
    const int h2 = std::max(1, th / 2), w2 = std::max(1, tw / 2), sh2 = std::max(1, sh / 2), sw2 = std::max(1, sw / 2);
    const auto half = scale_correspondence(full, h2, w2, sh2, sw2);
    half.check();
  }
}

TEST_CASE("scaled pixel maps keep sentinels") {
  PointPixelMap p;
  p.height = 64;
  p.width = 2048;
  p.coords.resize(3, 2);
  p.coords << 63, 2047, -1, -1, 10, 11;
  const auto s = scale_pixel_map(p, 8, 256);
  CHECK(s.coords.row(0) == Eigen::RowVector2i(7, 255));
  CHECK_FALSE(s.valid(1));
  CHECK(s.coords.row(2) == Eigen::RowVector2i(1, 1));
  CHECK_THROWS_AS(scale_pixel_map(p, 0, 4), ConfigError);
}

TEST_CASE("align is a pixel gather") {
  testing::Gen g(45);
  for (int trial = 0; trial < 30; ++trial) {
    const int th = g.integer(1, 64), tw = g.integer(1, 64), sh = g.integer(1, 64), sw = g.integer(1, 64);
    const int ch = g.integer(1, 8);
    const auto src = testing::random_map<float>(g, sh, sw, ch);
    const auto c = testing::random_correspondence(g, th, tw, sh, sw);
    const auto out = align(src, c);
    REQUIRE(out.height == th);
    REQUIRE(out.width == tw);
    for (int i = 0; i < th; ++i)
      for (int j = 0; j < tw; ++j) {
        const auto k = c.index(i, j);
        if (c.coords(k, 0) < 0)
          REQUIRE(out.pixel(i, j).isZero());
        else
          REQUIRE(out.pixel(i, j) == src.pixel(c.coords(k, 0), c.coords(k, 1)));
      }
  }
}

TEST_CASE("align examples and errors") {
  FeatureMap<double> src(1, 2, 1);
  src(0, 0, 0) = 5.0;
  src(0, 1, 0) = 7.0;
  Correspondence c(1, 3, 1, 2);
  c.coords << 0, 1, -1, -1, 0, 0;
  const auto out = align(src, c);
  CHECK(out(0, 0, 0) == 7.0);
  CHECK(out(0, 1, 0) == 0.0);
  CHECK(out(0, 2, 0) == 5.0);

  c.coords(0, 1) = 2;
  CHECK_THROWS_AS(align(src, c), ShapeMismatch);
  CHECK_THROWS_AS(align(FeatureMap<double>(2, 2, 1), Correspondence(1, 1, 1, 2)), ShapeMismatch);
}

TEST_CASE("softmax attention weights are distributions") {
  testing::Gen g(46);
  for (int trial = 0; trial < 10; ++trial) {
    const int h = g.integer(1, 12), w = g.integer(1, 12), ct = g.integer(1, 6), cs = g.integer(1, 6);
    const auto p = AttentionParams<double>::random(ct, cs, static_cast<std::uint64_t>(trial));
    const auto t = attention_fuse_traced(testing::random_map<double>(g, h, w, ct),
                                         testing::random_map<double>(g, h, w, cs), p);
    for (Eigen::Index r = 0; r < t.weights.data.rows(); ++r) {
      REQUIRE(std::abs(t.weights.data.row(r).sum() - 1.0) <= 1e-6);
      REQUIRE((t.weights.data.row(r).array() >= 0.0).all());
    }
    REQUIRE((t.mu.data.array() >= 0.0).all());
  }
}

TEST_CASE("zero attention leaves the target untouched") {
  testing::Gen g(47);
  for (int trial = 0; trial < 10; ++trial) {
    const int h = g.integer(1, 20), w = g.integer(1, 20), ct = g.integer(1, 5), cs = g.integer(1, 5);
    const auto target = testing::random_map<float>(g, h, w, ct);
    const auto fused = attention_fuse(target, testing::random_map<float>(g, h, w, cs),
                                      AttentionParams<float>::zero(ct, cs));
    REQUIRE(fused.data == target.data);
  }
}

TEST_CASE("fused map is target plus mu times weights") {
  testing::Gen g(48);
  const auto p = AttentionParams<double>::random(4, 3, 5);
  const auto target = testing::random_map<double>(g, 7, 9, 4);
  const auto t = attention_fuse_traced(target, testing::random_map<double>(g, 7, 9, 3), p);
  const RowMatrix<double> expected = target.data.array() + t.mu.data.array() * t.weights.data.array();
  CHECK(t.fused.data == expected);
}

TEST_CASE("equal logits spread softmax weight evenly") {
  auto p = AttentionParams<double>::zero(4, 2);
  p.theta.beta.setConstant(0.7);
  testing::Gen g(49);
  const auto t = attention_fuse_traced(testing::random_map<double>(g, 3, 3, 4), testing::random_map<double>(g, 3, 3, 2), p);
  CHECK((t.weights.data.array() - 0.25).abs().maxCoeff() <= 1e-15);
}

TEST_CASE("1x1 scalar path") {
  for (auto gate : {AttentionGate::Softmax, AttentionGate::Sigmoid}) {
    auto p = AttentionParams<double>::zero(1, 1, 3);
    p.gate = gate;
    // centre tap rows: (1 * 3 + 1) * in + c
    p.mu.weight(4 * 2 + 0, 0) = 0.8;
    p.mu.weight(4 * 2 + 1, 0) = -0.3;
    p.mu.gamma << 1.2;
    p.mu.beta << 0.1;
    p.mu.mean << 0.05;
    p.mu.var << 0.9;
    p.theta.weight(4, 0) = 1.7;
    p.theta.gamma << 0.6;
    p.theta.beta << -0.2;
    p.theta.mean << 0.3;
    p.theta.var << 1.4;
    FeatureMap<double> t(1, 1, 1), s(1, 1, 1);
    t(0, 0, 0) = 1.5;
    s(0, 0, 0) = -2.0;

    const double pre = 0.8 * 1.5 + -0.3 * -2.0;
    const double mu = std::max(0.0, 1.2 * (pre - 0.05) / std::sqrt(0.9 + 1e-5) + 0.1);
    const double logit = 0.6 * (1.7 * mu - 0.3) / std::sqrt(1.4 + 1e-5) - 0.2;
    const double weight = gate == AttentionGate::Softmax ? 1.0 : 1.0 / (1.0 + std::exp(-logit));
    const double want = 1.5 + mu * weight;
    CHECK(attention_fuse(t, s, p)(0, 0, 0) == Approx(want).epsilon(1e-9));
  }
}

TEST_CASE("the two flow directions read only pre-fusion maps") {
  testing::Gen g(50);
  const auto m_r = testing::random_map<double>(g, 6, 10, 3);
  const auto m_b = testing::random_map<double>(g, 5, 4, 3);
  const auto r2b = testing::random_correspondence(g, 6, 10, 5, 4);
  const auto b2r = testing::random_correspondence(g, 5, 4, 6, 10);
  const auto p_r = AttentionParams<double>::random(3, 3, 1);
  const auto p_b = AttentionParams<double>::random(3, 3, 2);
  const auto [f_r, f_b] = gfm_forward(m_r, m_b, r2b, b2r, p_r, p_b);
  CHECK(f_r.data == attention_fuse(m_r, align(m_b, r2b), p_r).data);
  CHECK(f_b.data == attention_fuse(m_b, align(m_r, b2r), p_b).data);
  CHECK_THROWS_AS(gfm_forward(m_r, m_b, b2r, r2b, p_r, p_b), ShapeMismatch);
}

TEST_CASE("attention rejects bad shapes and parameters") {
  testing::Gen g(51);
  const auto t = testing::random_map<double>(g, 3, 3, 2);
  const auto s = testing::random_map<double>(g, 3, 3, 2);
  CHECK_THROWS_AS(attention_fuse(t, testing::random_map<double>(g, 3, 4, 2), AttentionParams<double>::zero(2, 2)),
                  ShapeMismatch);
  CHECK_THROWS_AS(attention_fuse(t, s, AttentionParams<double>::zero(3, 2)), ShapeMismatch);
  auto p = AttentionParams<double>::zero(2, 2);
  p.mu.var(0) = 0.0;
  CHECK_THROWS_AS(attention_fuse(t, s, p), ConfigError);
  p = AttentionParams<double>::zero(2, 2);
  p.theta.weight(0, 0) = std::nan("");
  CHECK_THROWS_AS(attention_fuse(t, s, p), ConfigError);
}

TEST_CASE("fusion does not depend on the worker count") {
  testing::Gen g(52);
  const auto t = testing::random_map<float>(g, 40, 70, 8);
  const auto s = testing::random_map<float>(g, 40, 70, 8);
  const auto p = AttentionParams<float>::random(8, 8, 3);
  set_num_jobs(1);
  const auto a = attention_fuse(t, s, p);
  set_num_jobs(4);
  const auto b = attention_fuse(t, s, p);
  set_num_jobs(1);
  CHECK(a.data == b.data);
}
