#pragma once

#include <string>
#include <utility>
#include <vector>

#include "damext/raster.hpp"
#include "damext/rng.hpp"
#include "damext/signature.hpp"
#include "damext/tensor.hpp"

namespace damext {

struct PixelRef {
  int image = 0, row = 0, col = 0;
  bool operator==(const PixelRef&) const = default;
};

struct PointTriplet {
  PixelRef anchor, positive, negative;
};

/// Per-image pixel pools, in row-major scan order:
/// anchors = true-positive water, hard_positives = false negatives,
/// hard_negatives = false positives.
struct TripletPools {
  std::vector<std::pair<int, int>> anchors;
  std::vector<std::pair<int, int>> hard_positives;
  std::vector<std::pair<int, int>> hard_negatives;
};

TripletPools build_pools(const LabelMask& pred, const LabelMask& gt);

enum class MiningStrategy { CrossImageRandom, WithinImage, FeatureHard };

const char* mining_strategy_name(MiningStrategy s);
MiningStrategy parse_mining_strategy(const std::string& name);

inline constexpr int kFeatureStride = 4;

/// Feature cell a pixel reads on the 1/4-resolution point-feature map.
inline std::pair<int, int> feature_cell(int row, int col, int stride = kFeatureStride) {
  return {row / stride, col / stride};
}

template <class S>
Vector<S> point_feature(const Tensor<S>& features, const PixelRef& p,
                        int stride = kFeatureStride) {
  const auto [cy, cx] = feature_cell(p.row, p.col, stride);
  Vector<S> v(features.c);
  for (int ci = 0; ci < features.c; ++ci) v[ci] = features.at(p.image, ci, cy, cx);
  return v;
}

/// Up to K anchors per image (without replacement); positives/negatives drawn
/// from pools merged over the batch (cross-image-random, with replacement),
/// from the anchor's own image (within-image), or chosen as farthest positive
/// / nearest negative in point-feature space (feature-hard). Anchors whose
/// required pool is empty are skipped.
template <class S = double>
std::vector<PointTriplet> mine_triplets(const std::vector<TripletPools>& pools, int K,
                                        MiningStrategy strategy, Rng& rng,
                                        const Tensor<S>* features = nullptr,
                                        int stride = kFeatureStride) {
  if (K < 1) throw ConfigError("mine_triplets: K must be >= 1");
  if (strategy == MiningStrategy::FeatureHard && features == nullptr)
    throw ConfigError("mine_triplets: feature-hard mining needs the point-feature map");

  std::vector<PixelRef> merged_pos, merged_neg;
  for (std::size_t b = 0; b < pools.size(); ++b) {
    for (const auto& [r, c] : pools[b].hard_positives)
      merged_pos.push_back({static_cast<int>(b), r, c});
    for (const auto& [r, c] : pools[b].hard_negatives)
      merged_neg.push_back({static_cast<int>(b), r, c});
  }

  std::vector<PointTriplet> out;
  for (std::size_t b = 0; b < pools.size(); ++b) {
    const auto& anchors = pools[b].anchors;
    std::vector<int> picked(anchors.size());
    for (std::size_t i = 0; i < anchors.size(); ++i) picked[i] = static_cast<int>(i);
    if (static_cast<int>(anchors.size()) > K) {
      // partial Fisher-Yates: first K entries are a uniform sample
      for (int i = 0; i < K; ++i) {
        const std::size_t j = i + rng.index(picked.size() - i);
        std::swap(picked[i], picked[j]);
      }
      picked.resize(K);
    }

    for (int ai : picked) {
      const PixelRef anchor{static_cast<int>(b), anchors[ai].first, anchors[ai].second};
      PixelRef pos, neg;
      switch (strategy) {
        case MiningStrategy::CrossImageRandom: {
          if (merged_pos.empty() || merged_neg.empty()) continue;
          pos = merged_pos[rng.index(merged_pos.size())];
          neg = merged_neg[rng.index(merged_neg.size())];
          break;
        }
        case MiningStrategy::WithinImage: {
          const auto& own = pools[b];
          if (own.hard_positives.empty() || own.hard_negatives.empty()) continue;
          const auto& p = own.hard_positives[rng.index(own.hard_positives.size())];
          const auto& n = own.hard_negatives[rng.index(own.hard_negatives.size())];
          pos = {static_cast<int>(b), p.first, p.second};
          neg = {static_cast<int>(b), n.first, n.second};
          break;
        }
        case MiningStrategy::FeatureHard: {
          if (merged_pos.empty() || merged_neg.empty()) continue;
          const Vector<S> fa = point_feature(*features, anchor, stride);
          S best_pos = -1;
          std::size_t pos_at = 0;
          for (std::size_t i = 0; i < merged_pos.size(); ++i) {
            const S d2 = (point_feature(*features, merged_pos[i], stride) - fa).squaredNorm();
            if (d2 > best_pos) {
              best_pos = d2;
              pos_at = i;
            }
          }
          S best_neg = -1;
          std::size_t neg_at = 0;
          for (std::size_t i = 0; i < merged_neg.size(); ++i) {
            const S d2 = (point_feature(*features, merged_neg[i], stride) - fa).squaredNorm();
            if (best_neg < 0 || d2 < best_neg) {
              best_neg = d2;
              neg_at = i;
            }
          }
          pos = merged_pos[pos_at];
          neg = merged_neg[neg_at];
          break;
        }
      }
      out.push_back({anchor, pos, neg});
    }
  }
  return out;
}

template <class S>
struct PlmlResult {
  S value = 0;
  Tensor<S> grad;  // d value / d point features
  std::uint64_t signature = sig_init();
};

/// Eq. over a batch: mean over images of the mean over that image's triplets
/// of max(d(a,p) - d(a,n) + beta, 0); Euclidean d on point features.
/// Gradients flow through anchor, positive, and negative features.
template <class S>
PlmlResult<S> plml_loss(const Tensor<S>& features, const std::vector<PointTriplet>& triplets,
                        double beta, int stride = kFeatureStride) {
  PlmlResult<S> out;
  out.grad = Tensor<S>(features.n, features.c, features.h, features.w);
  if (triplets.empty()) return out;

  std::vector<int> per_image(features.n, 0);
  for (const auto& t : triplets) {
    if (t.anchor.image < 0 || t.anchor.image >= features.n)
      throw DataError("plml_loss: triplet anchor image out of range");
    ++per_image[t.anchor.image];
  }

  constexpr S kTiny = static_cast<S>(1e-12);
  auto add_cell = [&](const PixelRef& p, const Vector<S>& g) {
    const auto [cy, cx] = feature_cell(p.row, p.col, stride);
    for (int ci = 0; ci < features.c; ++ci) out.grad.at(p.image, ci, cy, cx) += g[ci];
  };

  const S inv_b = S(1) / static_cast<S>(features.n);
  for (const auto& t : triplets) {
    const Vector<S> fa = point_feature(features, t.anchor, stride);
    const Vector<S> fp = point_feature(features, t.positive, stride);
    const Vector<S> fn = point_feature(features, t.negative, stride);
    const S dap = (fa - fp).norm();
    const S dan = (fa - fn).norm();
    const S margin = dap - dan + static_cast<S>(beta);
    const bool active = margin > S(0);
    out.signature = sig_push(out.signature, active);
    out.signature = sig_push(out.signature, dap < kTiny);
    out.signature = sig_push(out.signature, dan < kTiny);
    if (!active) continue;

    const S w = inv_b / static_cast<S>(per_image[t.anchor.image]);
    out.value += w * margin;
    if (dap >= kTiny) {
      const Vector<S> dir = (fa - fp) * (w / dap);
      add_cell(t.anchor, dir);
      add_cell(t.positive, -dir);
    }
    if (dan >= kTiny) {
      const Vector<S> dir = (fa - fn) * (w / dan);
      add_cell(t.anchor, -dir);
      add_cell(t.negative, dir);
    }
  }
  return out;
}

inline double seg_total_loss(double focal, double plml, double sigma) {
  return focal + sigma * plml;
}

}  // namespace damext
