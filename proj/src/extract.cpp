#include "damext/extract.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace damext {

std::vector<Segment> connected_components(const LabelMask& mask) {
  if (mask.arity != 2) throw DataError("connected_components expects an arity-2 mask");
  const int w = mask.width, h = mask.height;
  const int n = w * h;

  // Union-find over water pixels; the flood-fill oracle in the tests is the
  // independent cross-check.
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  auto unite = [&](int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  };

  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (!mask.at(r, c)) continue;
      const int idx = r * w + c;
      // previously scanned half of the 8-neighborhood
      const int offs[4][2] = {{0, -1}, {-1, -1}, {-1, 0}, {-1, 1}};
      for (const auto& o : offs) {
        const int rr = r + o[0], cc = c + o[1];
        if (rr < 0 || cc < 0 || cc >= w) continue;
        if (mask.at(rr, cc)) unite(idx, rr * w + cc);
      }
    }
  }

  std::vector<int> root_to_seg(n, -1);
  std::vector<Segment> segments;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (!mask.at(r, c)) continue;
      const int root = find(r * w + c);
      int si = root_to_seg[root];
      if (si < 0) {
        si = static_cast<int>(segments.size());
        root_to_seg[root] = si;
        segments.emplace_back();
        segments[si].tight_bbox = {r, c, r, c};
      }
      Segment& s = segments[si];
      s.pixels.emplace_back(r, c);
      s.tight_bbox.r0 = std::min(s.tight_bbox.r0, r);
      s.tight_bbox.c0 = std::min(s.tight_bbox.c0, c);
      s.tight_bbox.r1 = std::max(s.tight_bbox.r1, r);
      s.tight_bbox.c1 = std::max(s.tight_bbox.c1, c);
    }
  }
  for (auto& s : segments) s.area = static_cast<int>(s.pixels.size());

  // (min row, min col) of the pixel set is exactly the tight bbox corner.
  std::stable_sort(segments.begin(), segments.end(), [](const Segment& a, const Segment& b) {
    if (a.tight_bbox.r0 != b.tight_bbox.r0) return a.tight_bbox.r0 < b.tight_bbox.r0;
    return a.tight_bbox.c0 < b.tight_bbox.c0;
  });
  return segments;
}

std::vector<Segment> filter_segments(std::vector<Segment> segments, int min_area) {
  std::erase_if(segments, [min_area](const Segment& s) { return s.area < min_area; });
  return segments;
}

BBox expand_bbox(const BBox& tight, double factor, int image_height, int image_width) {
  const double cr = (tight.r0 + tight.r1) / 2.0;
  const double cc = (tight.c0 + tight.c1) / 2.0;
  BBox out;
  out.r0 = std::max(0, static_cast<int>(std::floor(cr + (tight.r0 - cr) * factor)));
  out.c0 = std::max(0, static_cast<int>(std::floor(cc + (tight.c0 - cc) * factor)));
  out.r1 = std::min(image_height - 1, static_cast<int>(std::ceil(cr + (tight.r1 - cr) * factor)));
  out.c1 = std::min(image_width - 1, static_cast<int>(std::ceil(cc + (tight.c1 - cc) * factor)));
  return out;
}

ExtractionMap assemble_extraction(const LabelMask& pred_mask, const Raster& raster,
                                  const ClassifyFn& classify, int min_area,
                                  double bbox_factor) {
  if (pred_mask.width != raster.width || pred_mask.height != raster.height) {
    throw DataError("extraction: mask and raster dimensions differ");
  }
  ExtractionMap out;
  out.mask = LabelMask(pred_mask.width, pred_mask.height, 3);
  out.segments = filter_segments(connected_components(pred_mask), min_area);
  for (auto& seg : out.segments) {
    seg.expanded_bbox =
        expand_bbox(seg.tight_bbox, bbox_factor, pred_mask.height, pred_mask.width);
    const Raster patch = crop(raster, seg.expanded_bbox.r0, seg.expanded_bbox.c0,
                              seg.expanded_bbox.r1, seg.expanded_bbox.c1);
    seg.predicted_class = classify(patch);
    const std::uint8_t label = seg.predicted_class == WaterClass::Dam ? 2 : 1;
    for (auto [r, c] : seg.pixels) out.mask.at(r, c) = label;
  }
  return out;
}

void write_segments_csv(const ExtractionMap& map, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out << "segment_id,area,r0,c0,r1,c1,class\n";
  for (std::size_t i = 0; i < map.segments.size(); ++i) {
    const Segment& s = map.segments[i];
    const int cls = s.predicted_class == WaterClass::Dam ? 2 : 1;
    out << i << "," << s.area << "," << s.tight_bbox.r0 << "," << s.tight_bbox.c0 << ","
        << s.tight_bbox.r1 << "," << s.tight_bbox.c1 << "," << cls << "\n";
  }
}

}  // namespace damext
