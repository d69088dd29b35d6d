#pragma once

// Forward-only segmentation losses over N x C probability rows.

#include "mvseg/errors.hpp"
#include "mvseg/types.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

namespace mvseg {

inline constexpr double kProbabilityFloor = 1e-12;

namespace detail {

template <typename Derived>
void check_probabilities(const Eigen::MatrixBase<Derived>& probs, std::span<const std::int32_t> labels, int ignore_id) {
  if (static_cast<Eigen::Index>(labels.size()) != probs.rows())
    throw_shape("loss: label count", probs.rows(), static_cast<long>(labels.size()));
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    const auto l = labels[static_cast<std::size_t>(r)];
    if (l == ignore_id) continue;
    if (l < 0 || l >= probs.cols())
      throw MalformedInput("loss: label " + std::to_string(l) + " out of range at row " + std::to_string(r));
    const double s = static_cast<double>(probs.row(r).sum());
    if (!(std::abs(s - 1.0) <= 1e-4) || (probs.row(r).array() < 0).any())
      throw MalformedInput("loss: row " + std::to_string(r) + " is not a probability distribution");
  }
}

}  // namespace detail

/// Mean of -log p[label] over non-ignored rows, p clamped to [1e-12, 1].
template <typename Derived>
double cross_entropy(const Eigen::MatrixBase<Derived>& probs, std::span<const std::int32_t> labels, int ignore_id) {
  detail::check_probabilities(probs, labels, ignore_id);
  double sum = 0.0;
  std::size_t count = 0;
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    const auto l = labels[static_cast<std::size_t>(r)];
    if (l == ignore_id) continue;
    const double p = std::clamp(static_cast<double>(probs(r, l)), kProbabilityFloor, 1.0);
    sum -= std::log(p);
    ++count;
  }
  if (count == 0) throw UndefinedValue("cross entropy over zero labeled rows");
  return sum / static_cast<double>(count);
}

/// Lovász hinge of the Jaccard loss for one class, given per-row errors and foreground mask.
inline double lovasz_class(std::vector<double> errors, std::vector<unsigned char> fg) {
  const std::size_t n = errors.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return errors[a] > errors[b]; });
  double gts = 0.0;
  for (auto f : fg) gts += f;
  double cum_fg = 0.0, cum_bg = 0.0, prev = 0.0, loss = 0.0;
  for (std::size_t m = 0; m < n; ++m) {
    const std::size_t i = order[m];
    cum_fg += fg[i];
    cum_bg += 1 - fg[i];
    const double jaccard = 1.0 - (gts - cum_fg) / (gts + cum_bg);
    loss += errors[i] * (jaccard - prev);
    prev = jaccard;
  }
  return loss;
}

/// Lovász-Softmax averaged over the classes present in the non-ignored labels.
template <typename Derived>
double lovasz_softmax(const Eigen::MatrixBase<Derived>& probs, std::span<const std::int32_t> labels, int ignore_id) {
  detail::check_probabilities(probs, labels, ignore_id);
  std::vector<Eigen::Index> rows;
  for (Eigen::Index r = 0; r < probs.rows(); ++r)
    if (labels[static_cast<std::size_t>(r)] != ignore_id) rows.push_back(r);
  if (rows.empty()) throw UndefinedValue("Lovász-Softmax over zero labeled rows");

  double total = 0.0;
  int present = 0;
  std::vector<double> errors(rows.size());
  std::vector<unsigned char> fg(rows.size());
  for (Eigen::Index c = 0; c < probs.cols(); ++c) {
    bool any = false;
    for (std::size_t m = 0; m < rows.size(); ++m) {
      fg[m] = labels[static_cast<std::size_t>(rows[m])] == c;
      any = any || fg[m];
      errors[m] = std::abs(static_cast<double>(fg[m]) - static_cast<double>(probs(rows[m], c)));
    }
    if (!any) continue;
    total += lovasz_class(errors, fg);
    ++present;
  }
  return total / present;
}

/// Cross entropy plus Lovász-Softmax with unit weights.
template <typename Derived>
double loss_cl(const Eigen::MatrixBase<Derived>& probs, std::span<const std::int32_t> labels, int ignore_id) {
  return cross_entropy(probs, labels, ignore_id) + lovasz_softmax(probs, labels, ignore_id);
}

/// Weights of the five loss terms: fused 3D CE, RV 3D CE, BEV 3D CE, RV 2D, BEV 2D.
struct LossWeights {
  double alpha = 2.0;
  double beta = 2.0;
  double gamma = 2.0;
  double rho = 1.0;
  double sigma = 1.0;

  void check() const {
    for (double w : {alpha, beta, gamma, rho, sigma})
      if (!(std::isfinite(w) && w >= 0.0)) throw ConfigError("loss weights must be finite and non-negative");
  }
  LossWeights scaled(double t) const { return {alpha * t, beta * t, gamma * t, rho * t, sigma * t}; }
};

/// Unweighted constituent losses.
struct LossTerms {
  double ce_fused = 0.0;  // CE(F_f, Q)
  double ce_rv = 0.0;     // CE(F_r, Q)
  double ce_bev = 0.0;    // CE(F_b, Q)
  double cl_rv = 0.0;     // CL(M_r, Q_r)
  double cl_bev = 0.0;    // CL(M_b, Q_b)
};

struct LossBreakdown {
  LossTerms terms;
  double loss_2d = 0.0;
  double loss_3d = 0.0;
  double total = 0.0;
};

inline LossBreakdown combine_losses(const LossTerms& t, const LossWeights& w) {
  w.check();
  LossBreakdown b;
  b.terms = t;
  b.loss_2d = w.rho * t.cl_rv + w.sigma * t.cl_bev;
  b.loss_3d = w.beta * t.ce_rv + w.gamma * t.ce_bev;
  b.total = w.alpha * t.ce_fused + b.loss_3d + b.loss_2d;
  return b;
}

/// Image-space probabilities (H*W x C rows) with their label rasters, and per-point
/// probabilities with the point labels.
template <typename Scalar>
struct LossInputs {
  const RowMatrix<Scalar>* m_r = nullptr;
  std::span<const std::int32_t> q_r;
  const RowMatrix<Scalar>* m_b = nullptr;
  std::span<const std::int32_t> q_b;
  const RowMatrix<Scalar>* f_r = nullptr;
  const RowMatrix<Scalar>* f_b = nullptr;
  const RowMatrix<Scalar>* f_f = nullptr;
  std::span<const std::int32_t> q;
  int ignore_id = 255;
};

template <typename Scalar>
LossBreakdown loss_total(const LossInputs<Scalar>& in, const LossWeights& w) {
  LossTerms t;
  t.ce_fused = cross_entropy(*in.f_f, in.q, in.ignore_id);
  t.ce_rv = cross_entropy(*in.f_r, in.q, in.ignore_id);
  t.ce_bev = cross_entropy(*in.f_b, in.q, in.ignore_id);
  t.cl_rv = loss_cl(*in.m_r, in.q_r, in.ignore_id);
  t.cl_bev = loss_cl(*in.m_b, in.q_b, in.ignore_id);
  return combine_losses(t, w);
}

}  // namespace mvseg
