#pragma once

#include <Eigen/Dense>
#include <vector>

#include "damext/common.hpp"
#include "damext/raster.hpp"

namespace damext {

template <class S>
using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

template <class S>
using Vector = Eigen::Matrix<S, Eigen::Dynamic, 1>;

/// Batch tensor in sample-major planar layout: ((n·C + c)·H + y)·W + x.
/// One sample's channels are contiguous, so a sample doubles as a flat
/// feature vector for dense layers and l2-normalize.
template <class S>
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  Eigen::Array<S, Eigen::Dynamic, 1> data;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_),
        data(Eigen::Array<S, Eigen::Dynamic, 1>::Zero(
            static_cast<Eigen::Index>(n_) * c_ * h_ * w_)) {}

  Eigen::Index size() const { return data.size(); }
  bool empty() const { return data.size() == 0; }
  int plane_size() const { return h * w; }
  int sample_size() const { return c * h * w; }

  S& at(int ni, int ci, int y, int x) {
    return data[((static_cast<Eigen::Index>(ni) * c + ci) * h + y) * w + x];
  }
  S at(int ni, int ci, int y, int x) const {
    return data[((static_cast<Eigen::Index>(ni) * c + ci) * h + y) * w + x];
  }

  S* plane(int ni, int ci) {
    return data.data() + (static_cast<Eigen::Index>(ni) * c + ci) * plane_size();
  }
  const S* plane(int ni, int ci) const {
    return data.data() + (static_cast<Eigen::Index>(ni) * c + ci) * plane_size();
  }

  S* sample(int ni) {
    return data.data() + static_cast<Eigen::Index>(ni) * sample_size();
  }
  const S* sample(int ni) const {
    return data.data() + static_cast<Eigen::Index>(ni) * sample_size();
  }

  bool same_shape(const Tensor& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }
};

template <class S>
Tensor<S> rasters_to_tensor(const std::vector<Raster>& batch) {
  if (batch.empty()) throw DataError("rasters_to_tensor: empty batch");
  const Raster& first = batch.front();
  Tensor<S> t(static_cast<int>(batch.size()), first.channels, first.height, first.width);
  for (int ni = 0; ni < t.n; ++ni) {
    const Raster& r = batch[ni];
    if (r.width != first.width || r.height != first.height || r.channels != first.channels)
      throw ShapeError("rasters_to_tensor: mixed raster shapes in batch");
    for (int ci = 0; ci < t.c; ++ci)
      for (int y = 0; y < t.h; ++y)
        for (int x = 0; x < t.w; ++x)
          t.at(ni, ci, y, x) = static_cast<S>(r.at(y, x, ci));
  }
  return t;
}

}  // namespace damext
