#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "pcmeta/error.hpp"

namespace pcmeta {

/// m x m point counts indexed (true class, predicted class). Matrices form a
/// monoid under `+`, so per-worker matrices can be merged in any order.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::size_t classes) : classes_(classes), counts_(classes * classes, 0) {}

  [[nodiscard]] std::size_t classes() const noexcept { return classes_; }
  [[nodiscard]] std::uint64_t at(std::size_t truth, std::size_t predicted) const {
    return counts_.at(truth * classes_ + predicted);
  }
  [[nodiscard]] std::uint64_t total() const noexcept {
    std::uint64_t t = 0;
    for (auto v : counts_) t += v;
    return t;
  }

  /// Points whose true class is i (row sum).
  [[nodiscard]] std::uint64_t n(std::size_t i) const {
    std::uint64_t s = 0;
    for (std::size_t j = 0; j < classes_; ++j) s += at(i, j);
    return s;
  }
  /// Correct predictions of class i.
  [[nodiscard]] std::uint64_t c(std::size_t i) const { return at(i, i); }
  /// Points wrongly predicted as class i (column sum minus diagonal).
  [[nodiscard]] std::uint64_t w(std::size_t i) const {
    std::uint64_t s = 0;
    for (std::size_t j = 0; j < classes_; ++j) s += at(j, i);
    return s - at(i, i);
  }

  ConfusionMatrix& operator+=(const ConfusionMatrix& other) {
    if (other.classes_ != classes_) throw DimensionError("cannot merge confusion matrices of different sizes");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
    return *this;
  }
  friend ConfusionMatrix operator+(ConfusionMatrix a, const ConfusionMatrix& b) { return a += b; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  friend ConfusionMatrix accumulate(ConfusionMatrix, std::span<const int>, std::span<const int>);

  std::size_t classes_ = 0;
  std::vector<std::uint64_t> counts_;
};

/// Returns `cm` with one count added per (truth, predicted) pair; the argument
/// is taken by value and never modified in place.
inline ConfusionMatrix accumulate(ConfusionMatrix cm, std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) {
    throw DimensionError("accumulate: " + std::to_string(predicted.size()) + " predictions for " +
                         std::to_string(truth.size()) + " labels");
  }
  const auto m = static_cast<int>(cm.classes_);
  for (std::size_t p = 0; p < truth.size(); ++p) {
    if (truth[p] < 0 || truth[p] >= m || predicted[p] < 0 || predicted[p] >= m) {
      throw ValidationError("accumulate: label pair (" + std::to_string(truth[p]) + ", " +
                            std::to_string(predicted[p]) + ") at point " + std::to_string(p) +
                            " outside [0, " + std::to_string(m) + ")");
    }
    ++cm.counts_[static_cast<std::size_t>(truth[p]) * cm.classes_ + static_cast<std::size_t>(predicted[p])];
  }
  return cm;
}

struct SegMetrics {
  double oacc = 0.0;
  double macc = 0.0;
  double miou = 0.0;
  /// Per class; NaN for excluded classes.
  std::vector<double> class_accuracy;
  std::vector<double> class_iou;
  /// Classes with n_i + w_i = 0: absent from both truth and predictions, left
  /// out of the mAcc / mIoU means.
  std::vector<std::size_t> excluded;
};

/// oAcc = sum c_i / sum n_i, mAcc = mean c_i / n_i, mIoU = mean c_i / (n_i + w_i),
/// with means taken over present classes only. A class that is predicted but
/// never true contributes 0 to both means.
inline SegMetrics compute_metrics(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw EmptyInputError("compute_metrics on an empty confusion matrix");
  SegMetrics out;
  const std::size_t m = cm.classes();
  out.class_accuracy.assign(m, std::numeric_limits<double>::quiet_NaN());
  out.class_iou.assign(m, std::numeric_limits<double>::quiet_NaN());
  std::uint64_t correct = 0, total = 0;
  double acc_sum = 0.0, iou_sum = 0.0;
  std::size_t present = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const auto n = cm.n(i), c = cm.c(i), w = cm.w(i);
    correct += c;
    total += n;
    if (n + w == 0) {
      out.excluded.push_back(i);
      continue;
    }
    out.class_accuracy[i] = n == 0 ? 0.0 : static_cast<double>(c) / static_cast<double>(n);
    out.class_iou[i] = static_cast<double>(c) / static_cast<double>(n + w);
    acc_sum += out.class_accuracy[i];
    iou_sum += out.class_iou[i];
    ++present;
  }
  out.oacc = static_cast<double>(correct) / static_cast<double>(total);
  out.macc = acc_sum / static_cast<double>(present);
  out.miou = iou_sum / static_cast<double>(present);
  return out;
}

/// Per-class rows (class, n_i, c_i, w_i, acc, IoU) followed by one summary
/// row carrying totals and oAcc, mAcc, mIoU.
inline void write_metrics_csv(std::ostream& out, const ConfusionMatrix& cm, const SegMetrics& metrics,
                              std::span<const std::string> class_names) {
  fmt::print(out, "class,n_i,c_i,w_i,acc,iou,oAcc,mAcc,mIoU\n");
  std::uint64_t n_total = 0, c_total = 0, w_total = 0;
  for (std::size_t i = 0; i < cm.classes(); ++i) {
    const std::string name = i < class_names.size() ? class_names[i] : std::to_string(i);
    n_total += cm.n(i);
    c_total += cm.c(i);
    w_total += cm.w(i);
    if (std::isnan(metrics.class_accuracy[i])) {
      fmt::print(out, "{},{},{},{},excluded,excluded,,,\n", name, cm.n(i), cm.c(i), cm.w(i));
    } else {
      fmt::print(out, "{},{},{},{},{:.6f},{:.6f},,,\n", name, cm.n(i), cm.c(i), cm.w(i),
                 metrics.class_accuracy[i], metrics.class_iou[i]);
    }
  }
  fmt::print(out, "summary,{},{},{},,,{:.6f},{:.6f},{:.6f}\n", n_total, c_total, w_total, metrics.oacc,
             metrics.macc, metrics.miou);
}

}  // namespace pcmeta
