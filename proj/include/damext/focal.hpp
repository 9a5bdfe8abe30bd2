#pragma once

#include <cmath>
#include <vector>

#include "damext/raster.hpp"
#include "damext/signature.hpp"
#include "damext/tensor.hpp"

namespace damext {

struct FocalConfig {
  double alpha = 0.25;
  double gamma = 2.0;
};

inline constexpr double kProbClampEps = 1e-7;

template <class S>
struct FocalPixel {
  S loss = 0;
  S dp = 0;  // d loss / d raw probability (zero where the clamp is active)
  bool clamp_lo = false, clamp_hi = false;
};

/// Per-pixel focal term. y=1: -alpha (1-p)^gamma ln p;
/// y=0: -(1-alpha) p^gamma ln(1-p). p is clamped away from {0,1} first.
template <class S>
FocalPixel<S> focal_pixel(int y, S p, const FocalConfig& cfg) {
  FocalPixel<S> out;
  S pc = p;
  if (pc < static_cast<S>(kProbClampEps)) {
    pc = static_cast<S>(kProbClampEps);
    out.clamp_lo = true;
  } else if (pc > static_cast<S>(1.0 - kProbClampEps)) {
    pc = static_cast<S>(1.0 - kProbClampEps);
    out.clamp_hi = true;
  }
  const S alpha = static_cast<S>(cfg.alpha);
  const S gamma = static_cast<S>(cfg.gamma);
  if (y == 1) {
    const S u = S(1) - pc;
    const S mod = std::pow(u, gamma);
    out.loss = -alpha * mod * std::log(pc);
    S d = -alpha * mod / pc;
    if (gamma != S(0)) d += alpha * gamma * std::pow(u, gamma - S(1)) * std::log(pc);
    out.dp = d;
  } else {
    const S mod = std::pow(pc, gamma);
    out.loss = -(S(1) - alpha) * mod * std::log(S(1) - pc);
    S d = (S(1) - alpha) * mod / (S(1) - pc);
    if (gamma != S(0))
      d += -(S(1) - alpha) * gamma * std::pow(pc, gamma - S(1)) * std::log(S(1) - pc);
    out.dp = d;
  }
  if (out.clamp_lo || out.clamp_hi) out.dp = 0;
  return out;
}

template <class S>
struct FocalBatch {
  S value = 0;
  Tensor<S> grad;  // d value / d probability, same shape as the input
  std::uint64_t signature = sig_init();
};

/// Mean over images of the per-pixel mean. prob is (B, 1, H, W); gts are the
/// matching 2-class masks.
template <class S>
FocalBatch<S> focal_loss(const Tensor<S>& prob, const std::vector<LabelMask>& gts,
                         const FocalConfig& cfg) {
  if (prob.c != 1) throw ShapeError("focal_loss: probability map must have one channel");
  if (static_cast<std::size_t>(prob.n) != gts.size())
    throw ShapeError("focal_loss: batch size does not match mask count");
  FocalBatch<S> out;
  out.grad = Tensor<S>(prob.n, 1, prob.h, prob.w);
  const S scale = S(1) / (static_cast<S>(prob.n) * static_cast<S>(prob.plane_size()));
  for (int b = 0; b < prob.n; ++b) {
    const LabelMask& gt = gts[b];
    if (gt.arity != 2) throw DataError("focal_loss: ground truth must be 2-class");
    if (gt.width != prob.w || gt.height != prob.h)
      throw ShapeError("focal_loss: mask dimensions do not match probability map");
    for (int y = 0; y < prob.h; ++y)
      for (int x = 0; x < prob.w; ++x) {
        const S p = prob.at(b, 0, y, x);
        if (!std::isfinite(static_cast<double>(p)))
          throw NumericError("focal_loss: non-finite probability");
        const FocalPixel<S> px = focal_pixel(gt.at(y, x), p, cfg);
        out.value += px.loss * scale;
        out.grad.at(b, 0, y, x) = px.dp * scale;
        out.signature = sig_push(out.signature, px.clamp_lo);
        out.signature = sig_push(out.signature, px.clamp_hi);
      }
  }
  return out;
}

}  // namespace damext
