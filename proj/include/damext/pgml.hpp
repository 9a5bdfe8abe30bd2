#pragma once

#include <vector>

#include "damext/signature.hpp"
#include "damext/tensor.hpp"

namespace damext {

struct ImageTriplet {
  int anchor = 0, positive = 0, negative = 0;
};

namespace detail {

/// Every sample anchors one triplet: positive = same class (optionally same
/// cluster) at maximum distance, negative = different class at minimum
/// distance; ties go to the lowest index. Anchors lacking either are skipped.
template <class S>
std::vector<ImageTriplet> mine_image_triplets(const Matrix<S>& emb,
                                              const std::vector<int>& labels,
                                              const std::vector<int>* clusters) {
  const Eigen::Index n = emb.rows();
  if (static_cast<Eigen::Index>(labels.size()) != n)
    throw DataError("mine_pgml: label count mismatch");
  if (clusters && static_cast<Eigen::Index>(clusters->size()) != n)
    throw DataError("mine_pgml: cluster count mismatch");

  std::vector<ImageTriplet> out;
  for (Eigen::Index a = 0; a < n; ++a) {
    S best_pos = -1, best_neg = -1;
    Eigen::Index pos = -1, neg = -1;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == a) continue;
      const S d2 = (emb.row(a) - emb.row(j)).squaredNorm();
      if (labels[j] == labels[a]) {
        if (clusters && (*clusters)[j] != (*clusters)[a]) continue;
        if (d2 > best_pos) {
          best_pos = d2;
          pos = j;
        }
      } else {
        if (neg < 0 || d2 < best_neg) {
          best_neg = d2;
          neg = j;
        }
      }
    }
    if (pos < 0 || neg < 0) continue;
    out.push_back({static_cast<int>(a), static_cast<int>(pos), static_cast<int>(neg)});
  }
  return out;
}

}  // namespace detail

template <class S>
std::vector<ImageTriplet> mine_pgml(const Matrix<S>& emb, const std::vector<int>& labels,
                                    const std::vector<int>& clusters) {
  return detail::mine_image_triplets(emb, labels, &clusters);
}

/// Feature-based variant: hard positive/negative by distance alone, no
/// cluster constraint.
template <class S>
std::vector<ImageTriplet> mine_fbml(const Matrix<S>& emb, const std::vector<int>& labels) {
  return detail::mine_image_triplets<S>(emb, labels, nullptr);
}

template <class S>
struct PgmlResult {
  S value = 0;
  Matrix<S> grad;  // d value / d embeddings, N x D
  std::uint64_t signature = sig_init();
};

/// Mean over the mined triplets of max(d(b,p) - d(b,n) + epsilon, 0) with
/// Euclidean d; an empty list scores 0.
template <class S>
PgmlResult<S> pgml_loss(const Matrix<S>& emb, const std::vector<ImageTriplet>& triplets,
                        double epsilon) {
  PgmlResult<S> out;
  out.grad = Matrix<S>::Zero(emb.rows(), emb.cols());
  if (triplets.empty()) return out;

  constexpr S kTiny = static_cast<S>(1e-12);
  const S w = S(1) / static_cast<S>(triplets.size());
  for (const auto& t : triplets) {
    const auto ea = emb.row(t.anchor);
    const auto ep = emb.row(t.positive);
    const auto en = emb.row(t.negative);
    const S dp = (ea - ep).norm();
    const S dn = (ea - en).norm();
    const S margin = dp - dn + static_cast<S>(epsilon);
    const bool active = margin > S(0);
    out.signature = sig_push(out.signature, active);
    out.signature = sig_push(out.signature, dp < kTiny);
    out.signature = sig_push(out.signature, dn < kTiny);
    if (!active) continue;

    out.value += w * margin;
    using RowVec = Eigen::Matrix<S, 1, Eigen::Dynamic>;
    if (dp >= kTiny) {
      const RowVec dir = (ea - ep) * (w / dp);
      out.grad.row(t.anchor) += dir;
      out.grad.row(t.positive) -= dir;
    }
    if (dn >= kTiny) {
      const RowVec dir = (ea - en) * (w / dn);
      out.grad.row(t.anchor) -= dir;
      out.grad.row(t.negative) += dir;
    }
  }
  return out;
}

}  // namespace damext
