#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <string>

#include "damext/common.hpp"

namespace damext {

/// Multi-channel image with interleaved row-major samples in [0, 1].
/// Storage matches the on-disk pixmap layout: ((r * width) + c) * channels + ch.
struct Raster {
  int width = 0;
  int height = 0;
  int channels = 3;
  Eigen::ArrayXd data;

  Raster() = default;
  Raster(int w, int h, int ch)
      : width(w), height(h), channels(ch),
        data(Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(w) * h * ch)) {}

  double& at(int r, int c, int ch) {
    return data[(static_cast<Eigen::Index>(r) * width + c) * channels + ch];
  }
  double at(int r, int c, int ch) const {
    return data[(static_cast<Eigen::Index>(r) * width + c) * channels + ch];
  }
  Eigen::Index size() const { return data.size(); }
};

/// Per-pixel label map. arity 2 encodes {land=0, water=1},
/// arity 3 encodes {land=0, natural=1, dam=2}.
struct LabelMask {
  int width = 0;
  int height = 0;
  int arity = 2;
  Eigen::Array<std::uint8_t, Eigen::Dynamic, 1> values;

  LabelMask() = default;
  LabelMask(int w, int h, int a)
      : width(w), height(h), arity(a),
        values(Eigen::Array<std::uint8_t, Eigen::Dynamic, 1>::Zero(
            static_cast<Eigen::Index>(w) * h)) {}

  std::uint8_t& at(int r, int c) { return values[static_cast<Eigen::Index>(r) * width + c]; }
  std::uint8_t at(int r, int c) const {
    return values[static_cast<Eigen::Index>(r) * width + c];
  }
  Eigen::Index size() const { return values.size(); }

  /// Collapse a 3-class mask to the water/land view used by the segmentor.
  LabelMask binarized() const {
    LabelMask out(width, height, 2);
    out.values = (values > std::uint8_t{0}).cast<std::uint8_t>();
    return out;
  }
};

bool operator==(const Raster& a, const Raster& b);
bool operator==(const LabelMask& a, const LabelMask& b);

// Binary portable pixmap (P6, maxval 255); raster values are quantized
// with round(v * 255) on write. Masks are binary portable graymaps (P5)
// with maxval = arity - 1, so the arity survives the round trip.
void write_raster(const Raster& r, const std::filesystem::path& path);
Raster read_raster(const std::filesystem::path& path);
void write_mask(const LabelMask& m, const std::filesystem::path& path);
LabelMask read_mask(const std::filesystem::path& path);

/// Snap all samples onto the 1/255 grid the file format can represent.
void quantize(Raster& r);

/// Crop the inclusive pixel window [r0, r1] x [c0, c1].
Raster crop(const Raster& r, int r0, int c0, int r1, int c1);

/// Bilinear resize with half-pixel-centered sampling.
Raster resize_bilinear(const Raster& r, int out_w, int out_h);

}  // namespace damext
