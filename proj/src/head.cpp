#include "mvseg/head.hpp"

#include "mvseg/neighbors.hpp"
#include "mvseg/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace mvseg {

namespace {

NeighborIndex::Points xyz_matrix(const PointCloud& cloud) {
  return cloud.points.leftCols<3>().cast<double>();
}

}  // namespace

void KpconvParams::check() const {
  const int k = num_kernel_points();
  if (k < 1) throw ConfigError("kpconv: need at least one kernel point");
  if (static_cast<int>(weights.size()) != k) throw ShapeMismatch("kpconv: one weight matrix per kernel point");
  for (const auto& w : weights)
    if (w.rows() != weights.front().rows() || w.cols() != weights.front().cols())
      throw ShapeMismatch("kpconv: weight matrices differ in shape");
  if (!(sigma > 0.0)) throw ConfigError("kpconv: sigma must be positive");
  if (!(radius > 0.0)) throw ConfigError("kpconv: radius must be positive");
}

Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor> KpconvParams::disposition(int k, double sigma) {
  if (k < 1) throw ConfigError("kpconv: need at least one kernel point");
  Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor> pts = decltype(pts)::Zero(k, 3);
  const int m = k - 1;
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  const double r = 0.6 * sigma;
  for (int i = 0; i < m; ++i) {
    const double y = 1.0 - 2.0 * (i + 0.5) / m;
    const double ring = std::sqrt(std::max(0.0, 1.0 - y * y));
    const double a = golden * i;
    pts.row(i + 1) << r * ring * std::cos(a), r * y, r * ring * std::sin(a);
  }
  return pts;
}

KpconvParams KpconvParams::uniform(const RowMatrix<double>& w, int k, double radius, double sigma) {
  KpconvParams p;
  p.kernel_points = disposition(k, sigma);
  p.weights.assign(static_cast<std::size_t>(k), w);
  p.sigma = sigma;
  p.radius = radius;
  return p;
}

KpconvParams KpconvParams::random(int in, int out, std::uint64_t seed, int k, double radius, double sigma) {
  std::mt19937_64 rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  KpconvParams p = uniform(RowMatrix<double>::Zero(in, out), k, radius, sigma);
  for (auto& w : p.weights)
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c)
        w(r, c) = -bound + 2.0 * bound * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
  return p;
}

PointScores<double> kpconv_forward(const PointCloud& cloud, const PointScores<double>& feats, const KpconvParams& p) {
  p.check();
  const auto n = cloud.size();
  if (feats.rows() != n) throw_shape("kpconv: feature rows", n, feats.rows());
  if (feats.cols() != p.in_channels()) throw_shape("kpconv: feature channels", p.in_channels(), feats.cols());

  const int k_count = p.num_kernel_points();
  const Eigen::Index c_in = feats.cols();
  Eigen::Index center = 0;
  p.kernel_points.rowwise().squaredNorm().minCoeff(&center);

  const NeighborIndex index(xyz_matrix(cloud), p.radius);
  PointScores<double> out(n, p.out_channels());

  parallel_for(static_cast<std::size_t>(n), 512, [&](std::size_t begin, std::size_t end) {
    std::vector<std::int32_t> nbrs;
    struct Neighbor {
      Eigen::Vector3d offset;
      std::int32_t j;
    };
    std::vector<Neighbor> ordered;
    RowMatrix<double> gathered(k_count, c_in);
    Eigen::VectorXd h(k_count);

    for (auto i = static_cast<Eigen::Index>(begin); i < static_cast<Eigen::Index>(end); ++i) {
      const Eigen::Vector3d xi = index.points().row(i).transpose();
      index.radius(xi, p.radius, nbrs);
      ordered.clear();
      for (auto j : nbrs) ordered.push_back({index.points().row(j).transpose() - xi, j});
      std::sort(ordered.begin(), ordered.end(), [&](const Neighbor& a, const Neighbor& b) {
        for (int d = 0; d < 3; ++d)
          if (a.offset[d] != b.offset[d]) return a.offset[d] < b.offset[d];
        for (Eigen::Index c = 0; c < c_in; ++c)
          if (feats(a.j, c) != feats(b.j, c)) return feats(a.j, c) < feats(b.j, c);
        return false;
      });

      gathered.setZero();
      int contributing = 0;
      for (const auto& nb : ordered) {
        double total = 0.0;
        for (int k = 0; k < k_count; ++k) {
          const double d = (nb.offset - p.kernel_points.row(k).transpose()).norm();
          h[k] = std::max(0.0, 1.0 - d / p.sigma);
          total += h[k];
        }
        if (total == 0.0) continue;
        ++contributing;
        for (int k = 0; k < k_count; ++k)
          if (h[k] > 0.0) gathered.row(k) += (h[k] / total) * feats.row(nb.j);
      }

      if (contributing == 0) {
        out.row(i) = feats.row(i) * p.weights[static_cast<std::size_t>(center)];
        continue;
      }
      Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(p.out_channels());
      for (int k = 0; k < k_count; ++k) acc += gathered.row(k) * p.weights[static_cast<std::size_t>(k)];
      out.row(i) = acc / static_cast<double>(contributing);
    }
  });
  return out;
}

PointScores<double> fuse_predictions(const PointScores<double>& f_r, const PointScores<double>& f_b,
                                     const PointCloud& cloud, const KpconvParams& p) {
  if (f_r.rows() != f_b.rows()) throw_shape("fuse_predictions: BEV rows", f_r.rows(), f_b.rows());
  PointScores<double> cat(f_r.rows(), f_r.cols() + f_b.cols());
  cat << f_r, f_b;
  return kpconv_forward(cloud, cat, p);
}

std::vector<double> point_ranges(const PointCloud& cloud) {
  std::vector<double> r(static_cast<std::size_t>(cloud.size()));
  for (Eigen::Index i = 0; i < cloud.size(); ++i) r[static_cast<std::size_t>(i)] = cloud.xyz(i).norm();
  return r;
}

std::vector<std::int32_t> knn_postprocess(const PointCloud& cloud, const std::vector<std::int32_t>& labels,
                                          const std::vector<double>& ranges, int k, double cutoff) {
  const auto n = static_cast<std::size_t>(cloud.size());
  if (k < 1) throw ConfigError("knn_postprocess: k must be >= 1");
  if (labels.size() != n) throw_shape("knn_postprocess: labels", static_cast<long>(n), static_cast<long>(labels.size()));
  if (ranges.size() != n) throw_shape("knn_postprocess: ranges", static_cast<long>(n), static_cast<long>(ranges.size()));

  const NeighborIndex index(xyz_matrix(cloud), 0.3);
  std::vector<std::int32_t> out(n);
  parallel_for(n, 1024, [&](std::size_t begin, std::size_t end) {
    std::vector<std::int32_t> nbrs, votes;
    for (std::size_t i = begin; i < end; ++i) {
      const double ri = ranges[i];
      index.knn(index.points().row(static_cast<Eigen::Index>(i)).transpose(), k,
                [&](std::int32_t j) { return std::abs(ranges[static_cast<std::size_t>(j)] - ri) <= cutoff; }, nbrs);
      votes.clear();
      for (auto j : nbrs) votes.push_back(labels[static_cast<std::size_t>(j)]);
      std::sort(votes.begin(), votes.end());
      std::int32_t best = labels[i];
      std::size_t best_count = 0;
      bool tied = false;
      for (std::size_t a = 0; a < votes.size();) {
        std::size_t b = a;
        while (b < votes.size() && votes[b] == votes[a]) ++b;
        if (b - a > best_count) {
          best_count = b - a;
          best = votes[a];
          tied = false;
        } else if (b - a == best_count) {
          tied = true;
        }
        a = b;
      }
      out[i] = tied ? labels[i] : best;
    }
  });
  return out;
}

}  // namespace mvseg
