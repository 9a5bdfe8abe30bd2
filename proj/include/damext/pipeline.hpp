#pragma once

#include "damext/clsmodel.hpp"
#include "damext/extract.hpp"
#include "damext/segmodel.hpp"

namespace damext {

struct PipelineConfig {
  double seg_threshold = 0.5;
  int min_area = 20;
  double bbox_factor = 2.0;
  int knn_k = 1;
};

/// Full chain: predict_mask -> connected components -> area filter -> per
/// segment bbox expansion, crop, and nearest-neighbour classification.
ExtractionMap run_pipeline(const Raster& raster, const Network<double>& seg_model,
                           const Network<double>& cls_model, const Gallery& gallery,
                           const PipelineConfig& cfg = {});

}  // namespace damext
