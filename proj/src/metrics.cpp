#include "mvseg/metrics.hpp"

#include "mvseg/errors.hpp"

namespace mvseg {

ConfusionMatrix::ConfusionMatrix(int num_classes) {
  if (num_classes < 1) throw ConfigError("confusion matrix needs at least one class");
  counts_ = Counts::Zero(num_classes, num_classes);
}

ConfusionMatrix::ConfusionMatrix(Counts counts) : counts_(std::move(counts)) {
  if (counts_.rows() != counts_.cols() || counts_.rows() < 1) throw ShapeMismatch("confusion matrix must be square");
  if ((counts_.array() < 0).any()) throw MalformedInput("confusion matrix counts must be non-negative");
}

void ConfusionMatrix::accumulate(std::span<const std::int32_t> pred, std::span<const std::int32_t> gt, int ignore_id) {
  if (pred.size() != gt.size())
    throw_shape("accumulate: prediction count", static_cast<long>(gt.size()), static_cast<long>(pred.size()));
  const int c = num_classes();
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] == ignore_id) continue;
    if (gt[i] < 0 || gt[i] >= c)
      throw MalformedInput("ground-truth class " + std::to_string(gt[i]) + " out of range at index " + std::to_string(i));
    if (pred[i] < 0 || pred[i] >= c)
      throw MalformedInput("predicted class " + std::to_string(pred[i]) + " out of range at index " +
                           std::to_string(i));
    ++counts_(gt[i], pred[i]);
  }
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.num_classes() != num_classes()) throw_shape("merge: class count", num_classes(), other.num_classes());
  counts_ += other.counts_;
  return *this;
}

IouResult miou(const ConfusionMatrix& cm) {
  const auto& m = cm.counts();
  IouResult r;
  r.per_class.resize(static_cast<std::size_t>(cm.num_classes()));
  double sum = 0.0;
  int defined = 0;
  for (int c = 0; c < cm.num_classes(); ++c) {
    const std::int64_t tp = m(c, c);
    const std::int64_t fn = m.row(c).sum() - tp;
    const std::int64_t fp = m.col(c).sum() - tp;
    const std::int64_t denom = tp + fp + fn;
    if (denom == 0) continue;
    const double iou = static_cast<double>(tp) / static_cast<double>(denom);
    r.per_class[static_cast<std::size_t>(c)] = iou;
    sum += iou;
    ++defined;
  }
  if (defined == 0) throw UndefinedValue("mIoU: no class occurs in ground truth or predictions");
  r.mean = sum / defined;
  return r;
}

double accuracy(const ConfusionMatrix& cm) {
  const auto total = cm.total();
  if (total == 0) throw UndefinedValue("accuracy of an empty confusion matrix");
  return static_cast<double>(cm.counts().trace()) / static_cast<double>(total);
}

double fwiou(const ConfusionMatrix& cm) {
  const auto total = cm.total();
  if (total == 0) throw UndefinedValue("FW IoU of an empty confusion matrix");
  const auto iou = miou(cm);
  double sum = 0.0;
  for (int c = 0; c < cm.num_classes(); ++c) {
    const auto& v = iou.per_class[static_cast<std::size_t>(c)];
    if (!v) continue;
    sum += static_cast<double>(cm.counts().row(c).sum()) * *v;
  }
  return sum / static_cast<double>(total);
}

}  // namespace mvseg
