#include "damext/metrics.hpp"

#include <json.hpp>

#include "damext/common.hpp"

namespace damext {
namespace {

std::vector<int> selected_classes(ClassSelection sel) {
  switch (sel) {
    case ClassSelection::Water: return {1};
    case ClassSelection::WaterLand: return {1, 0};
    case ClassSelection::Dam: return {2};
    case ClassSelection::DamNatural: return {2, 1};
    case ClassSelection::DamNaturalLand: return {2, 1, 0};
  }
  throw ConfigError("report: unknown class selection");
}

nlohmann::ordered_json opt_json(const std::optional<double>& v) {
  if (v) return *v;
  return nullptr;
}

}  // namespace

std::string MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["iou_water"] = opt_json(iou_water);
  j["miou"] = opt_json(miou);
  j["iou_d"] = opt_json(iou_d);
  j["miou_dn"] = opt_json(miou_dn);
  j["miou_dnb"] = opt_json(miou_dnb);
  j["accuracy"] = opt_json(accuracy);
  j["n"] = n;
  j["empty_class_used"] = empty_class_used;
  return j.dump(2);
}

double iou(const LabelMask& pred, const LabelMask& gt, int class_id, bool* empty_class_used) {
  if (pred.width != gt.width || pred.height != gt.height)
    throw ShapeError("iou: mask dimensions differ");
  long inter = 0, uni = 0;
  for (Eigen::Index i = 0; i < pred.values.size(); ++i) {
    const bool a = pred.values[i] == class_id;
    const bool b = gt.values[i] == class_id;
    inter += a && b;
    uni += a || b;
  }
  if (uni == 0) {
    if (empty_class_used) *empty_class_used = true;
    return 1.0;
  }
  return static_cast<double>(inter) / static_cast<double>(uni);
}

MetricsReport report(const std::vector<LabelMask>& preds, const std::vector<LabelMask>& gts,
                     ClassSelection selection) {
  if (preds.empty()) throw DataError("report: empty prediction list");
  if (preds.size() != gts.size())
    throw DataError("report: prediction/ground-truth length mismatch");

  const std::vector<int> classes = selected_classes(selection);
  MetricsReport rep;
  rep.n = static_cast<int>(preds.size());

  double mean_over_images = 0.0;
  std::vector<double> class_means(classes.size(), 0.0);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    double image_mean = 0.0;
    for (std::size_t ci = 0; ci < classes.size(); ++ci) {
      const double v = iou(preds[i], gts[i], classes[ci], &rep.empty_class_used);
      image_mean += v;
      class_means[ci] += v;
    }
    mean_over_images += image_mean / static_cast<double>(classes.size());
  }
  mean_over_images /= static_cast<double>(preds.size());
  for (auto& v : class_means) v /= static_cast<double>(preds.size());

  switch (selection) {
    case ClassSelection::Water:
      rep.iou_water = mean_over_images;
      break;
    case ClassSelection::WaterLand:
      rep.miou = mean_over_images;
      rep.iou_water = class_means[0];
      break;
    case ClassSelection::Dam:
      rep.iou_d = mean_over_images;
      break;
    case ClassSelection::DamNatural:
      rep.miou_dn = mean_over_images;
      rep.iou_d = class_means[0];
      break;
    case ClassSelection::DamNaturalLand:
      rep.miou_dnb = mean_over_images;
      rep.iou_d = class_means[0];
      break;
  }
  return rep;
}

double accuracy(const std::vector<int>& pred_labels, const std::vector<int>& gt_labels) {
  if (pred_labels.empty()) throw DataError("accuracy: empty input");
  if (pred_labels.size() != gt_labels.size())
    throw DataError("accuracy: length mismatch");
  long correct = 0;
  for (std::size_t i = 0; i < pred_labels.size(); ++i)
    correct += pred_labels[i] == gt_labels[i];
  return static_cast<double>(correct) / static_cast<double>(pred_labels.size());
}

}  // namespace damext
