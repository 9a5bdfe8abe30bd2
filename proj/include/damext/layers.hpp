#pragma once

#include <cmath>
#include <string>

#include "damext/tensor.hpp"

namespace damext {

enum class LayerKind {
  Conv3x3,
  Relu,
  Stride2Downsample,
  BilinearUpsample2,
  GlobalAvgPool,
  Dense,
  L2Normalize,
};

inline const char* layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Conv3x3: return "conv3x3";
    case LayerKind::Relu: return "relu";
    case LayerKind::Stride2Downsample: return "stride2-downsample";
    case LayerKind::BilinearUpsample2: return "bilinear-upsample2";
    case LayerKind::GlobalAvgPool: return "global-avg-pool";
    case LayerKind::Dense: return "dense";
    case LayerKind::L2Normalize: return "l2-normalize";
  }
  return "?";
}

struct LayerSpec {
  LayerKind kind;
  int in_channels = 0;
  int out_channels = 0;
  bool has_bias = true;

  bool learnable() const { return kind == LayerKind::Conv3x3 || kind == LayerKind::Dense; }
};

inline constexpr double kL2NormEps = 1e-12;

namespace detail {

/// Column matrix for 3x3 zero-padded convolution: row (ci·9 + ky·3 + kx),
/// column (y·W + x). Weight rows follow the same (ci, ky, kx) order.
template <class S>
void im2col3x3(const Tensor<S>& x, int ni, Matrix<S>& cols) {
  cols.setZero();
  for (int ci = 0; ci < x.c; ++ci) {
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const int row = ci * 9 + ky * 3 + kx;
        for (int y = 0; y < x.h; ++y) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= x.h) continue;
          for (int xx = 0; xx < x.w; ++xx) {
            const int sx = xx + kx - 1;
            if (sx < 0 || sx >= x.w) continue;
            cols(row, y * x.w + xx) = x.at(ni, ci, sy, sx);
          }
        }
      }
    }
  }
}

template <class S>
void col2im3x3_add(const Matrix<S>& cols, int ni, Tensor<S>& dx) {
  for (int ci = 0; ci < dx.c; ++ci) {
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const int row = ci * 9 + ky * 3 + kx;
        for (int y = 0; y < dx.h; ++y) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= dx.h) continue;
          for (int xx = 0; xx < dx.w; ++xx) {
            const int sx = xx + kx - 1;
            if (sx < 0 || sx >= dx.w) continue;
            dx.at(ni, ci, sy, sx) += cols(row, y * dx.w + xx);
          }
        }
      }
    }
  }
}

/// Source taps for 2x bilinear upsampling with half-pixel centers:
/// src = (dst + 0.5)/2 - 0.5, clamped to the valid range.
struct BilinearAxis {
  std::vector<int> i0, i1;
  std::vector<double> frac;
};

inline BilinearAxis bilinear_axis(int in_len, int out_len) {
  BilinearAxis ax;
  ax.i0.resize(out_len);
  ax.i1.resize(out_len);
  ax.frac.resize(out_len);
  for (int o = 0; o < out_len; ++o) {
    double s = (o + 0.5) / 2.0 - 0.5;
    if (s < 0.0) s = 0.0;
    if (s > in_len - 1) s = in_len - 1;
    const int lo = static_cast<int>(std::floor(s));
    ax.i0[o] = lo;
    ax.i1[o] = std::min(lo + 1, in_len - 1);
    ax.frac[o] = s - lo;
  }
  return ax;
}

}  // namespace detail

template <class S>
Tensor<S> conv3x3_forward(const Tensor<S>& x, const Matrix<S>& weight, const Matrix<S>* bias) {
  const int out_c = static_cast<int>(weight.rows());
  if (weight.cols() != static_cast<Eigen::Index>(x.c) * 9)
    throw ShapeError("conv3x3: weight expects " + std::to_string(weight.cols() / 9) +
                     " input channels, got " + std::to_string(x.c));
  Tensor<S> y(x.n, out_c, x.h, x.w);
  Matrix<S> cols(x.c * 9, x.plane_size());
  using RowMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  for (int ni = 0; ni < x.n; ++ni) {
    detail::im2col3x3(x, ni, cols);
    Eigen::Map<RowMat> out(y.plane(ni, 0), out_c, y.plane_size());
    out.noalias() = weight * cols;
    if (bias) out.colwise() += bias->col(0);
  }
  return y;
}

template <class S>
Tensor<S> conv3x3_backward(const Tensor<S>& x, const Matrix<S>& weight, const Tensor<S>& dy,
                           Matrix<S>& dweight, Matrix<S>* dbias) {
  Tensor<S> dx(x.n, x.c, x.h, x.w);
  Matrix<S> cols(x.c * 9, x.plane_size());
  Matrix<S> dcols;
  using RowMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  for (int ni = 0; ni < x.n; ++ni) {
    detail::im2col3x3(x, ni, cols);
    Eigen::Map<const RowMat> dym(dy.plane(ni, 0), dy.c, dy.plane_size());
    dweight.noalias() += dym * cols.transpose();
    if (dbias) dbias->noalias() += dym.rowwise().sum();
    dcols.noalias() = weight.transpose() * dym;
    detail::col2im3x3_add(dcols, ni, dx);
  }
  return dx;
}

template <class S>
Tensor<S> relu_forward(const Tensor<S>& x) {
  Tensor<S> y(x.n, x.c, x.h, x.w);
  y.data = x.data.max(S(0));
  return y;
}

template <class S>
Tensor<S> relu_backward(const Tensor<S>& x, const Tensor<S>& dy) {
  Tensor<S> dx(x.n, x.c, x.h, x.w);
  dx.data = (x.data > S(0)).select(dy.data, S(0));
  return dx;
}

/// 2x2 average pool, stride 2; odd edges pool over the pixels that exist.
template <class S>
Tensor<S> downsample2_forward(const Tensor<S>& x) {
  const int oh = (x.h + 1) / 2, ow = (x.w + 1) / 2;
  Tensor<S> y(x.n, x.c, oh, ow);
  for (int ni = 0; ni < x.n; ++ni)
    for (int ci = 0; ci < x.c; ++ci)
      for (int y0 = 0; y0 < oh; ++y0)
        for (int x0 = 0; x0 < ow; ++x0) {
          S sum = 0;
          int count = 0;
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
              const int sy = 2 * y0 + dy, sx = 2 * x0 + dx;
              if (sy < x.h && sx < x.w) {
                sum += x.at(ni, ci, sy, sx);
                ++count;
              }
            }
          y.at(ni, ci, y0, x0) = sum / static_cast<S>(count);
        }
  return y;
}

template <class S>
Tensor<S> downsample2_backward(const Tensor<S>& x, const Tensor<S>& dy) {
  Tensor<S> dx(x.n, x.c, x.h, x.w);
  for (int ni = 0; ni < x.n; ++ni)
    for (int ci = 0; ci < x.c; ++ci)
      for (int y0 = 0; y0 < dy.h; ++y0)
        for (int x0 = 0; x0 < dy.w; ++x0) {
          int count = 0;
          for (int d = 0; d < 4; ++d) {
            const int sy = 2 * y0 + d / 2, sx = 2 * x0 + d % 2;
            if (sy < x.h && sx < x.w) ++count;
          }
          const S g = dy.at(ni, ci, y0, x0) / static_cast<S>(count);
          for (int d = 0; d < 4; ++d) {
            const int sy = 2 * y0 + d / 2, sx = 2 * x0 + d % 2;
            if (sy < x.h && sx < x.w) dx.at(ni, ci, sy, sx) += g;
          }
        }
  return dx;
}

template <class S>
Tensor<S> upsample2_forward(const Tensor<S>& x) {
  const auto ay = detail::bilinear_axis(x.h, 2 * x.h);
  const auto ax = detail::bilinear_axis(x.w, 2 * x.w);
  Tensor<S> y(x.n, x.c, 2 * x.h, 2 * x.w);
  for (int ni = 0; ni < x.n; ++ni)
    for (int ci = 0; ci < x.c; ++ci)
      for (int oy = 0; oy < y.h; ++oy) {
        const S fy = static_cast<S>(ay.frac[oy]);
        for (int ox = 0; ox < y.w; ++ox) {
          const S fx = static_cast<S>(ax.frac[ox]);
          const S v00 = x.at(ni, ci, ay.i0[oy], ax.i0[ox]);
          const S v01 = x.at(ni, ci, ay.i0[oy], ax.i1[ox]);
          const S v10 = x.at(ni, ci, ay.i1[oy], ax.i0[ox]);
          const S v11 = x.at(ni, ci, ay.i1[oy], ax.i1[ox]);
          y.at(ni, ci, oy, ox) = (1 - fy) * ((1 - fx) * v00 + fx * v01) +
                                 fy * ((1 - fx) * v10 + fx * v11);
        }
      }
  return y;
}

template <class S>
Tensor<S> upsample2_backward(const Tensor<S>& x, const Tensor<S>& dy) {
  const auto ay = detail::bilinear_axis(x.h, 2 * x.h);
  const auto ax = detail::bilinear_axis(x.w, 2 * x.w);
  Tensor<S> dx(x.n, x.c, x.h, x.w);
  for (int ni = 0; ni < x.n; ++ni)
    for (int ci = 0; ci < x.c; ++ci)
      for (int oy = 0; oy < dy.h; ++oy) {
        const S fy = static_cast<S>(ay.frac[oy]);
        for (int ox = 0; ox < dy.w; ++ox) {
          const S fx = static_cast<S>(ax.frac[ox]);
          const S g = dy.at(ni, ci, oy, ox);
          dx.at(ni, ci, ay.i0[oy], ax.i0[ox]) += (1 - fy) * (1 - fx) * g;
          dx.at(ni, ci, ay.i0[oy], ax.i1[ox]) += (1 - fy) * fx * g;
          dx.at(ni, ci, ay.i1[oy], ax.i0[ox]) += fy * (1 - fx) * g;
          dx.at(ni, ci, ay.i1[oy], ax.i1[ox]) += fy * fx * g;
        }
      }
  return dx;
}

template <class S>
Tensor<S> global_avg_pool_forward(const Tensor<S>& x) {
  Tensor<S> y(x.n, x.c, 1, 1);
  for (int ni = 0; ni < x.n; ++ni)
    for (int ci = 0; ci < x.c; ++ci) {
      Eigen::Map<const Eigen::Array<S, Eigen::Dynamic, 1>> plane(x.plane(ni, ci),
                                                                 x.plane_size());
      y.at(ni, ci, 0, 0) = plane.mean();
    }
  return y;
}

template <class S>
Tensor<S> global_avg_pool_backward(const Tensor<S>& x, const Tensor<S>& dy) {
  Tensor<S> dx(x.n, x.c, x.h, x.w);
  const S scale = S(1) / static_cast<S>(x.plane_size());
  for (int ni = 0; ni < x.n; ++ni)
    for (int ci = 0; ci < x.c; ++ci) {
      Eigen::Map<Eigen::Array<S, Eigen::Dynamic, 1>> plane(dx.plane(ni, ci), dx.plane_size());
      plane = dy.at(ni, ci, 0, 0) * scale;
    }
  return dx;
}

template <class S>
Tensor<S> dense_forward(const Tensor<S>& x, const Matrix<S>& weight, const Matrix<S>* bias) {
  const int features = x.sample_size();
  if (weight.cols() != features)
    throw ShapeError("dense: weight expects " + std::to_string(weight.cols()) +
                     " input features, got " + std::to_string(features));
  Tensor<S> y(x.n, static_cast<int>(weight.rows()), 1, 1);
  Eigen::Map<const Matrix<S>> xm(x.data.data(), features, x.n);
  Eigen::Map<Matrix<S>> ym(y.data.data(), weight.rows(), y.n);
  ym.noalias() = weight * xm;
  if (bias) ym.colwise() += bias->col(0);
  return y;
}

template <class S>
Tensor<S> dense_backward(const Tensor<S>& x, const Matrix<S>& weight, const Tensor<S>& dy,
                         Matrix<S>& dweight, Matrix<S>* dbias) {
  const int features = x.sample_size();
  Tensor<S> dx(x.n, x.c, x.h, x.w);
  Eigen::Map<const Matrix<S>> xm(x.data.data(), features, x.n);
  Eigen::Map<const Matrix<S>> dym(dy.data.data(), dy.c, dy.n);
  Eigen::Map<Matrix<S>> dxm(dx.data.data(), features, dx.n);
  dweight.noalias() += dym * xm.transpose();
  if (dbias) dbias->noalias() += dym.rowwise().sum();
  dxm.noalias() = weight.transpose() * dym;
  return dx;
}

/// Per-sample l2 normalization over the flattened feature vector. A (near-)
/// zero vector maps to the zero vector; the caller is told via zero_flag.
template <class S>
Tensor<S> l2normalize_forward(const Tensor<S>& x, bool* zero_flag = nullptr) {
  Tensor<S> y(x.n, x.c, x.h, x.w);
  const int features = x.sample_size();
  for (int ni = 0; ni < x.n; ++ni) {
    Eigen::Map<const Vector<S>> xv(x.sample(ni), features);
    Eigen::Map<Vector<S>> yv(y.sample(ni), features);
    const S norm = xv.norm();
    if (norm < static_cast<S>(kL2NormEps)) {
      yv.setZero();
      if (zero_flag) *zero_flag = true;
    } else {
      yv = xv / norm;
    }
  }
  return y;
}

template <class S>
Tensor<S> l2normalize_backward(const Tensor<S>& x, const Tensor<S>& dy) {
  Tensor<S> dx(x.n, x.c, x.h, x.w);
  const int features = x.sample_size();
  for (int ni = 0; ni < x.n; ++ni) {
    Eigen::Map<const Vector<S>> xv(x.sample(ni), features);
    Eigen::Map<const Vector<S>> gv(dy.sample(ni), features);
    Eigen::Map<Vector<S>> dv(dx.sample(ni), features);
    const S norm = xv.norm();
    if (norm < static_cast<S>(kL2NormEps)) {
      dv.setZero();
    } else {
      const Vector<S> yv = xv / norm;
      dv = (gv - yv * yv.dot(gv)) / norm;
    }
  }
  return dx;
}

}  // namespace damext
