#pragma once

#include <optional>
#include <string>
#include <vector>

#include "damext/raster.hpp"

namespace damext {

/// Which classes enter the per-image mean.
enum class ClassSelection {
  Water,           // 2-class, water only
  WaterLand,       // 2-class mIoU
  Dam,             // 3-class, dam only
  DamNatural,      // 3-class, dam + natural
  DamNaturalLand,  // 3-class, all
};

struct MetricsReport {
  std::optional<double> iou_water, miou, iou_d, miou_dn, miou_dnb, accuracy;
  int n = 0;
  // true when some image lacked a selected class on both sides (counted as 1)
  bool empty_class_used = false;

  std::string to_json() const;
};

/// |pred=c ∧ gt=c| / |pred=c ∨ gt=c|; 1.0 when both sides lack the class,
/// 0.0 when exactly one does.
double iou(const LabelMask& pred, const LabelMask& gt, int class_id,
           bool* empty_class_used = nullptr);

/// Per-image per-class IoU, mean over selected classes per image, then mean
/// over images.
MetricsReport report(const std::vector<LabelMask>& preds, const std::vector<LabelMask>& gts,
                     ClassSelection selection);

double accuracy(const std::vector<int>& pred_labels, const std::vector<int>& gt_labels);

}  // namespace damext
