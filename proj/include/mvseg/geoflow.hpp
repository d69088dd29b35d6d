#pragma once

// Geometric flow between views: gather features through a correspondence, then
// fuse them into the target view with a gated residual.

#include "mvseg/correspondence.hpp"
#include "mvseg/errors.hpp"
#include "mvseg/parallel.hpp"
#include "mvseg/types.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>

namespace mvseg {

/// Gathers source[u, v, :] into every target pixel whose correspondence is (u, v);
/// sentinel pixels stay zero.
template <typename Scalar>
FeatureMap<Scalar> align(const FeatureMap<Scalar>& source, const Correspondence& c) {
  if (source.height != c.source_height || source.width != c.source_width)
    throw ShapeMismatch("align: source map is " + std::to_string(source.height) + "x" + std::to_string(source.width) +
                        " but the correspondence expects " + std::to_string(c.source_height) + "x" +
                        std::to_string(c.source_width));
  if (c.coords.rows() != Eigen::Index(c.target_height) * c.target_width)
    throw_shape("align: correspondence rows", Eigen::Index(c.target_height) * c.target_width, c.coords.rows());
  FeatureMap<Scalar> out(c.target_height, c.target_width, source.channels());
  parallel_for(static_cast<std::size_t>(out.pixels()), 8192, [&](std::size_t begin, std::size_t end) {
    for (auto k = static_cast<Eigen::Index>(begin); k < static_cast<Eigen::Index>(end); ++k) {
      const std::int32_t u = c.coords(k, 0), v = c.coords(k, 1);
      if (u < 0) continue;
      if (u >= source.height || v < 0 || v >= source.width)
        throw ShapeMismatch("align: correspondence entry outside the source map");
      out.data.row(k) = source.data.row(source.index(u, v));
    }
  });
  return out;
}

enum class AttentionGate { Softmax, Sigmoid };

/// Convolution (same padding, stride 1, no bias) followed by inference-mode batchnorm.
/// Weight rows are tap-major: row (dy * kernel + dx) * in_channels + c.
template <typename Scalar>
struct ConvBn {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  int kernel = 3;
  RowMatrix<Scalar> weight;  // (kernel^2 * in) x out
  Vector gamma, beta, mean, var;
  Scalar eps = Scalar(1e-5);

  int in_channels() const { return kernel > 0 ? static_cast<int>(weight.rows()) / (kernel * kernel) : 0; }
  int out_channels() const { return static_cast<int>(weight.cols()); }

  void check(const char* name) const {
    const std::string who(name);
    if (kernel < 1 || kernel % 2 == 0) throw ConfigError(who + ": kernel size must be odd");
    if (weight.rows() % (kernel * kernel) != 0) throw ShapeMismatch(who + ": weight rows not a multiple of kernel^2");
    const auto out = weight.cols();
    if (gamma.size() != out || beta.size() != out || mean.size() != out || var.size() != out)
      throw ShapeMismatch(who + ": batchnorm parameters do not match the output channels");
    if (!weight.allFinite() || !gamma.allFinite() || !beta.allFinite() || !mean.allFinite() || !var.allFinite() ||
        !std::isfinite(eps))
      throw ConfigError(who + ": non-finite parameter");
    if ((var.array() <= Scalar(0)).any()) throw ConfigError(who + ": batchnorm variance must be positive");
  }

  static ConvBn zero(int in, int out, int kernel) {
    ConvBn p;
    p.kernel = kernel;
    p.weight = RowMatrix<Scalar>::Zero(Eigen::Index(kernel) * kernel * in, out);
    p.gamma = Vector::Ones(out);
    p.beta = Vector::Zero(out);
    p.mean = Vector::Zero(out);
    p.var = Vector::Ones(out);
    return p;
  }

  /// Weights uniform in +-1/sqrt(fan_in), batchnorm statistics near identity.
  static ConvBn random(int in, int out, int kernel, std::mt19937_64& rng) {
    auto uni = [&rng](double lo, double hi) {
      return static_cast<Scalar>(lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53));
    };
    ConvBn p = zero(in, out, kernel);
    const double bound = 1.0 / std::sqrt(static_cast<double>(kernel * kernel * in));
    for (Eigen::Index r = 0; r < p.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < p.weight.cols(); ++c) p.weight(r, c) = uni(-bound, bound);
    for (int c = 0; c < out; ++c) {
      p.gamma(c) = uni(0.5, 1.5);
      p.beta(c) = uni(-0.2, 0.2);
      p.mean(c) = uni(-0.1, 0.1);
      p.var(c) = uni(0.5, 2.0);
    }
    return p;
  }
};

/// mu: Conv-BN-ReLU over [target | aligned]; theta: Conv-BN-gate over mu's output.
template <typename Scalar>
struct AttentionParams {
  ConvBn<Scalar> mu;
  ConvBn<Scalar> theta;
  AttentionGate gate = AttentionGate::Softmax;

  int target_channels() const { return mu.out_channels(); }
  int source_channels() const { return mu.in_channels() - mu.out_channels(); }

  void check() const {
    mu.check("mu");
    theta.check("theta");
    if (mu.in_channels() <= mu.out_channels())
      throw ShapeMismatch("mu must read target plus aligned channels");
    if (theta.in_channels() != mu.out_channels() || theta.out_channels() != mu.out_channels())
      throw ShapeMismatch("theta must map the target channel count to itself");
  }

  /// mu weights and shift all zero, so the attention term vanishes.
  static AttentionParams zero(int target_channels, int source_channels, int kernel = 3) {
    AttentionParams p;
    p.mu = ConvBn<Scalar>::zero(target_channels + source_channels, target_channels, kernel);
    p.theta = ConvBn<Scalar>::zero(target_channels, target_channels, kernel);
    return p;
  }

  static AttentionParams random(int target_channels, int source_channels, std::uint64_t seed, int kernel = 3) {
    std::mt19937_64 rng(seed);
    AttentionParams p;
    p.mu = ConvBn<Scalar>::random(target_channels + source_channels, target_channels, kernel, rng);
    p.theta = ConvBn<Scalar>::random(target_channels, target_channels, kernel, rng);
    return p;
  }
};

namespace detail {

/// conv + batchnorm over the channel concatenation of `parts` (all the same spatial shape).
template <typename Scalar>
FeatureMap<Scalar> conv_bn(std::initializer_list<const FeatureMap<Scalar>*> parts, const ConvBn<Scalar>& p) {
  const FeatureMap<Scalar>& first = **parts.begin();
  const int h = first.height, w = first.width;
  int in = 0;
  for (const auto* part : parts) in += part->channels();
  if (in != p.in_channels()) throw_shape("conv input channels", p.in_channels(), in);

  const int k = p.kernel, pad = k / 2, out_c = p.out_channels();
  // fold batchnorm into the convolution
  const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> scale =
      (p.gamma.array() / (p.var.array() + p.eps).sqrt()).matrix().transpose();
  const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> shift = p.beta.transpose() - p.mean.transpose().cwiseProduct(scale);
  const RowMatrix<Scalar> weight = p.weight * scale.asDiagonal();

  FeatureMap<Scalar> out(h, w, out_c);
  const Eigen::Index patch = Eigen::Index(k) * k * in;
  parallel_for(static_cast<std::size_t>(out.pixels()), 256, [&](std::size_t begin, std::size_t end) {
    const auto rows = static_cast<Eigen::Index>(end - begin);
    RowMatrix<Scalar> cols = RowMatrix<Scalar>::Zero(rows, patch);
    for (Eigen::Index r = 0; r < rows; ++r) {
      const auto px = static_cast<Eigen::Index>(begin) + r;
      const int i = static_cast<int>(px / w), j = static_cast<int>(px % w);
      for (int dy = 0; dy < k; ++dy) {
        const int y = i + dy - pad;
        if (y < 0 || y >= h) continue;
        for (int dx = 0; dx < k; ++dx) {
          const int x = j + dx - pad;
          if (x < 0 || x >= w) continue;
          Eigen::Index col = Eigen::Index(dy * k + dx) * in;
          for (const auto* part : parts) {
            const int c = part->channels();
            cols.row(r).segment(col, c) = part->data.row(part->index(y, x));
            col += c;
          }
        }
      }
    }
    auto block = out.data.middleRows(static_cast<Eigen::Index>(begin), rows);
    block.noalias() = cols * weight;
    block.rowwise() += shift;
  });
  return out;
}

}  // namespace detail

/// Intermediate tensors of one attention fusion, for inspection.
template <typename Scalar>
struct AttentionTrace {
  FeatureMap<Scalar> mu;       // Conv-BN-ReLU output
  FeatureMap<Scalar> weights;  // gate output
  FeatureMap<Scalar> fused;    // target + mu * weights
};

template <typename Scalar>
AttentionTrace<Scalar> attention_fuse_traced(const FeatureMap<Scalar>& target, const FeatureMap<Scalar>& aligned,
                                             const AttentionParams<Scalar>& p) {
  p.check();
  if (target.height != aligned.height || target.width != aligned.width)
    throw ShapeMismatch("attention_fuse: target and aligned maps differ in spatial shape");
  if (target.channels() != p.target_channels())
    throw_shape("attention_fuse: target channels", p.target_channels(), target.channels());
  if (aligned.channels() != p.source_channels())
    throw_shape("attention_fuse: aligned channels", p.source_channels(), aligned.channels());

  AttentionTrace<Scalar> t;
  t.mu = detail::conv_bn<Scalar>({&target, &aligned}, p.mu);
  t.mu.data = t.mu.data.cwiseMax(Scalar(0));
  t.weights = detail::conv_bn<Scalar>({&t.mu}, p.theta);

  auto& wts = t.weights.data;
  parallel_for(static_cast<std::size_t>(wts.rows()), 4096, [&](std::size_t begin, std::size_t end) {
    for (auto r = static_cast<Eigen::Index>(begin); r < static_cast<Eigen::Index>(end); ++r) {
      auto row = wts.row(r);
      if (p.gate == AttentionGate::Softmax) {
        row.array() = (row.array() - row.maxCoeff()).exp();
        row /= row.sum();
      } else {
        row.array() = Scalar(1) / (Scalar(1) + (-row.array()).exp());
      }
    }
  });

  t.fused = target;
  t.fused.data.array() += t.mu.data.array() * wts.array();
  return t;
}

template <typename Scalar>
FeatureMap<Scalar> attention_fuse(const FeatureMap<Scalar>& target, const FeatureMap<Scalar>& aligned,
                                  const AttentionParams<Scalar>& p) {
  return attention_fuse_traced(target, aligned, p).fused;
}

/// One bidirectional flow step. r2b maps RV pixels to BEV pixels (RV is its target),
/// b2r the reverse. Both directions read the pre-fusion maps.
template <typename Scalar>
std::pair<FeatureMap<Scalar>, FeatureMap<Scalar>> gfm_forward(const FeatureMap<Scalar>& m_r,
                                                              const FeatureMap<Scalar>& m_b,
                                                              const Correspondence& r2b, const Correspondence& b2r,
                                                              const AttentionParams<Scalar>& p_r,
                                                              const AttentionParams<Scalar>& p_b) {
  if (r2b.target_height != m_r.height || r2b.target_width != m_r.width)
    throw ShapeMismatch("gfm_forward: RV->BEV correspondence does not match the RV map");
  if (b2r.target_height != m_b.height || b2r.target_width != m_b.width)
    throw ShapeMismatch("gfm_forward: BEV->RV correspondence does not match the BEV map");
  auto fused_r = attention_fuse(m_r, align(m_b, r2b), p_r);
  auto fused_b = attention_fuse(m_b, align(m_r, b2r), p_b);
  return {std::move(fused_r), std::move(fused_b)};
}

}  // namespace mvseg
