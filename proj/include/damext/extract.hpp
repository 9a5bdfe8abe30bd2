#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "damext/raster.hpp"

namespace damext {

enum class WaterClass : int { Natural = 0, Dam = 1 };

struct BBox {
  int r0 = 0, c0 = 0, r1 = 0, c1 = 0;  // inclusive
  int height() const { return r1 - r0 + 1; }
  int width() const { return c1 - c0 + 1; }
  bool contains(const BBox& other) const {
    return r0 <= other.r0 && c0 <= other.c0 && r1 >= other.r1 && c1 >= other.c1;
  }
};

/// One 8-connected water region of a binary mask.
struct Segment {
  std::vector<std::pair<int, int>> pixels;  // row-major order
  int area = 0;
  BBox tight_bbox;
  BBox expanded_bbox;
  std::optional<WaterClass> predicted_class;
};

/// Three-class map plus the classified segments it was assembled from.
struct ExtractionMap {
  LabelMask mask;  // arity 3: 0 land, 1 natural, 2 dam
  std::vector<Segment> segments;
};

/// Partition the water pixels of an arity-2 mask into maximal 8-connected
/// components. Segments come back ordered by (min row, min col) of their
/// pixel sets.
std::vector<Segment> connected_components(const LabelMask& mask);

/// Drop segments whose area is strictly below min_area.
std::vector<Segment> filter_segments(std::vector<Segment> segments, int min_area = 20);

/// Scale a tight box about its center, rounding outward, then clamp to the
/// image. factor 1 is the identity.
BBox expand_bbox(const BBox& tight, double factor, int image_height, int image_width);

/// Segment classifier: crop patch in, class out.
using ClassifyFn = std::function<WaterClass(const Raster& patch)>;

/// Core of the extraction stage: binary mask -> components -> area filter ->
/// per-segment crop of the x2-expanded box -> classify -> 3-class map.
/// Pixels the segmentor called land stay 0.
ExtractionMap assemble_extraction(const LabelMask& pred_mask, const Raster& raster,
                                  const ClassifyFn& classify, int min_area = 20,
                                  double bbox_factor = 2.0);

void write_segments_csv(const ExtractionMap& map, const std::filesystem::path& path);

}  // namespace damext
