#include "damext/pipeline.hpp"

namespace damext {

ExtractionMap run_pipeline(const Raster& raster, const Network<double>& seg_model,
                           const Network<double>& cls_model, const Gallery& gallery,
                           const PipelineConfig& cfg) {
  if (gallery.size() == 0) throw DataError("run_pipeline: empty gallery");
  const LabelMask pred = predict_mask(seg_model, raster, cfg.seg_threshold);
  const auto classify = [&](const Raster& patch) {
    return nn_infer(patch, cls_model, gallery, cfg.knn_k).label;
  };
  return assemble_extraction(pred, raster, classify, cfg.min_area, cfg.bbox_factor);
}

}  // namespace damext
