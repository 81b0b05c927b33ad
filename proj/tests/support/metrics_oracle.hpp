#pragma once

// Point-by-point recount of the segmentation statistics, independent of
// ConfusionMatrix. Used to cross-check compute_metrics.

#include <cstddef>
#include <span>
#include <vector>

namespace pcmeta::testing {

struct OracleMetrics {
  std::size_t correct = 0;
  std::size_t total = 0;
  double macc = 0.0;
  double miou = 0.0;
  std::size_t present = 0;
};

inline OracleMetrics brute_force_metrics(std::span<const int> predicted, std::span<const int> truth,
                                         int classes) {
  OracleMetrics out;
  out.total = truth.size();
  for (std::size_t p = 0; p < truth.size(); ++p) out.correct += predicted[p] == truth[p] ? 1 : 0;
  double acc = 0.0, iou = 0.0;
  for (int k = 0; k < classes; ++k) {
    std::size_t in_truth = 0, hit = 0, false_pos = 0;
    for (std::size_t p = 0; p < truth.size(); ++p) {
      if (truth[p] == k) {
        ++in_truth;
        if (predicted[p] == k) ++hit;
      } else if (predicted[p] == k) {
        ++false_pos;
      }
    }
    if (in_truth + false_pos == 0) continue;
    ++out.present;
    acc += in_truth == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(in_truth);
    iou += static_cast<double>(hit) / static_cast<double>(in_truth + false_pos);
  }
  out.macc = acc / static_cast<double>(out.present);
  out.miou = iou / static_cast<double>(out.present);
  return out;
}

}  // namespace pcmeta::testing
