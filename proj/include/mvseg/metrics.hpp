#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace mvseg {

/// C x C counts, rows = ground truth, columns = prediction.
class ConfusionMatrix {
 public:
  using Counts = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  explicit ConfusionMatrix(int num_classes);
  explicit ConfusionMatrix(Counts counts);

  int num_classes() const { return static_cast<int>(counts_.rows()); }
  const Counts& counts() const { return counts_; }
  std::int64_t total() const { return counts_.sum(); }

  /// Adds one count per position whose ground truth is not ignore_id.
  /// Throws MalformedInput naming the index of an out-of-range id.
  void accumulate(std::span<const std::int32_t> pred, std::span<const std::int32_t> gt, int ignore_id);

  ConfusionMatrix& operator+=(const ConfusionMatrix& other);

 private:
  Counts counts_;
};

struct IouResult {
  std::vector<std::optional<double>> per_class;  // nullopt when TP + FP + FN = 0
  double mean = 0.0;                             // over defined classes
};

/// Throws UndefinedValue when no class is defined.
IouResult miou(const ConfusionMatrix& cm);

/// trace / total; throws UndefinedValue on an empty matrix.
double accuracy(const ConfusionMatrix& cm);

/// Sum over defined classes of (ground-truth count) * IoU, divided by the total count.
double fwiou(const ConfusionMatrix& cm);

}  // namespace mvseg
