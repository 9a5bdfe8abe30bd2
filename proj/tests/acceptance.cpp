// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any
// fail. Expects the CLI binary path as argv[1] for the determinism checks.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "damext/clsmodel.hpp"
#include "damext/dataset.hpp"
#include "damext/extract.hpp"
#include "damext/gradsuite.hpp"
#include "damext/kmeans.hpp"
#include "damext/metrics.hpp"
#include "damext/pgml.hpp"
#include "damext/pipeline.hpp"
#include "damext/segmodel.hpp"
#include "oracles.hpp"

using namespace damext;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

struct Outcome {
  bool ok = false;
  std::string detail;
};

int g_failures = 0;

void announce(int index, const std::string& name, const Outcome& o) {
  std::cout << (o.ok ? "PASS" : "FAIL") << " " << index << ". " << name;
  if (!o.detail.empty()) std::cout << " — " << o.detail;
  std::cout << "\n";
  std::cout.flush();
  if (!o.ok) ++g_failures;
}

LabelMask random_mask(int w, int h, double fill, Rng& rng) {
  LabelMask m(w, h, 2);
  for (Eigen::Index i = 0; i < m.values.size(); ++i)
    m.values[i] = rng.bernoulli(fill) ? 1 : 0;
  return m;
}

LabelMask blobby_mask(int w, int h, Rng& rng) {
  LabelMask m(w, h, 2);
  const int rects = 4 + static_cast<int>(rng.index(14));
  for (int k = 0; k < rects; ++k) {
    const int r0 = static_cast<int>(rng.index(h));
    const int c0 = static_cast<int>(rng.index(w));
    const int r1 = std::min(h - 1, r0 + static_cast<int>(rng.index(10)));
    const int c1 = std::min(w - 1, c0 + static_cast<int>(rng.index(10)));
    for (int r = r0; r <= r1; ++r)
      for (int c = c0; c <= c1; ++c) m.at(r, c) = 1;
  }
  for (Eigen::Index i = 0; i < m.values.size(); ++i)
    if (rng.bernoulli(0.02)) m.values[i] ^= 1;
  return m;
}

std::vector<std::vector<std::pair<int, int>>> normalized_partition(
    const std::vector<Segment>& segments) {
  std::vector<std::vector<std::pair<int, int>>> sets(segments.size());
  for (std::size_t i = 0; i < segments.size(); ++i) {
    sets[i] = segments[i].pixels;
    std::sort(sets[i].begin(), sets[i].end());
  }
  std::sort(sets.begin(), sets.end());
  return sets;
}

std::vector<std::vector<double>> to_rows(const Matrix<double>& m) {
  std::vector<std::vector<double>> rows(m.rows());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    rows[i].resize(m.cols());
    for (Eigen::Index j = 0; j < m.cols(); ++j) rows[i][j] = m(i, j);
  }
  return rows;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return "<unreadable:" + p.string() + ">";
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// ------------------------------------------------------------------ criteria

Outcome check_gradients() {
  const auto start = Clock::now();
  const GradSuiteResult r = run_gradcheck_suite(20, 1e-4);
  const double elapsed = seconds_since(start);
  Outcome o;
  o.ok = r.passed && elapsed < 60.0;
  o.detail = std::to_string(r.cases.size()) + " cases, max rel err " + fmt(r.max_rel_err) +
             ", " + std::to_string(r.checked) + " partials (" + std::to_string(r.excluded) +
             " excluded), " + fmt(elapsed) + " s";
  return o;
}

Outcome check_focal_oracle() {
  const double ps[] = {1e-9, 1e-8, 1e-7, 1e-4, 0.01, 0.1, 0.25, 0.5,
                       0.75, 0.9,  0.99, 0.9999, 1.0 - 1e-8};
  const FocalConfig cfgs[] = {{0.25, 2.0}, {0.5, 0.0}};
  int cases = 0;
  double worst = 0;
  for (const auto& cfg : cfgs)
    for (const int y : {0, 1})
      for (const double p : ps) {
        const double got = focal_pixel<double>(y, p, cfg).loss;
        const double want = static_cast<double>(
            oracles::focal_reference(y, static_cast<long double>(p),
                                     static_cast<long double>(cfg.alpha),
                                     static_cast<long double>(cfg.gamma)));
        worst = std::max(worst, std::abs(got - want));
        ++cases;
      }

  // well-classified pixel at p = 0.9: the gamma=2 modulator scales the
  // cross-entropy term by (1 - 0.9)^2 = 1/100
  const double f2 = focal_pixel<double>(1, 0.9, {0.25, 2.0}).loss;
  const double f0 = focal_pixel<double>(1, 0.9, {0.25, 0.0}).loss;
  const double ratio = f2 / f0;
  const bool ratio_ok = std::abs(ratio - 0.01) <= 1e-12;

  Outcome o;
  o.ok = cases >= 50 && worst <= 1e-9 && ratio_ok;
  o.detail = std::to_string(cases) + " grid cases, max abs err " + fmt(worst) +
             ", p=0.9 damping ratio " + fmt(ratio);
  return o;
}

Outcome check_plml_mining() {
  int pool_trials = 0, mining_trials = 0;
  bool edge_zero_anchor = false, edge_missing_pool = false;
  for (int trial = 0; trial < 500; ++trial) {
    Rng rng(900 + trial);
    const LabelMask pred = random_mask(8, 8, 0.1 + 0.08 * (trial % 10), rng);
    const LabelMask gt = random_mask(8, 8, 0.1 + 0.08 * ((trial + 3) % 10), rng);

    const TripletPools pools = build_pools(pred, gt);
    const oracles::PoolsRef ref = oracles::pools_reference(pred, gt);
    auto as_set = [](const std::vector<std::pair<int, int>>& v) {
      return std::set<std::pair<int, int>>(v.begin(), v.end());
    };
    if (as_set(pools.anchors) != ref.anchors) return {false, "anchor pool mismatch"};
    if (as_set(pools.hard_positives) != ref.positives)
      return {false, "hard-positive pool mismatch"};
    if (as_set(pools.hard_negatives) != ref.negatives)
      return {false, "hard-negative pool mismatch"};
    if (!std::is_sorted(pools.anchors.begin(), pools.anchors.end()))
      return {false, "anchor pool not in scan order"};
    ++pool_trials;

    // batch of 2-3 mask pairs; cross-image membership and edge rules
    std::vector<TripletPools> batch{pools};
    const int extra = 1 + static_cast<int>(rng.index(2));
    for (int e = 0; e < extra; ++e) {
      const LabelMask p2 = random_mask(8, 8, 0.3, rng);
      const LabelMask g2 = random_mask(8, 8, 0.3, rng);
      batch.push_back(build_pools(p2, g2));
    }
    std::set<std::tuple<int, int, int>> anchor_set, pos_set, neg_set;
    bool any_pos = false, any_neg = false;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      for (const auto& [r, c] : batch[b].anchors) anchor_set.insert({(int)b, r, c});
      for (const auto& [r, c] : batch[b].hard_positives) pos_set.insert({(int)b, r, c});
      for (const auto& [r, c] : batch[b].hard_negatives) neg_set.insert({(int)b, r, c});
      any_pos |= !batch[b].hard_positives.empty();
      any_neg |= !batch[b].hard_negatives.empty();
    }
    const int K = 1 + static_cast<int>(rng.index(8));
    Rng mine_rng(1700 + trial);
    const auto triplets =
        mine_triplets<double>(batch, K, MiningStrategy::CrossImageRandom, mine_rng);
    if (!any_pos || !any_neg) {
      if (!triplets.empty()) return {false, "triplets mined from a missing pool"};
      edge_missing_pool = true;
    }
    std::vector<int> per_image(batch.size(), 0);
    for (const auto& t : triplets) {
      if (!anchor_set.count({t.anchor.image, t.anchor.row, t.anchor.col}))
        return {false, "anchor outside its pool"};
      if (!pos_set.count({t.positive.image, t.positive.row, t.positive.col}))
        return {false, "positive outside the merged pool"};
      if (!neg_set.count({t.negative.image, t.negative.row, t.negative.col}))
        return {false, "negative outside the merged pool"};
      ++per_image[t.anchor.image];
    }
    for (std::size_t b = 0; b < batch.size(); ++b) {
      if (per_image[b] > K) return {false, "more than K anchors used in one image"};
      if (batch[b].anchors.empty() && per_image[b] != 0)
        return {false, "triplet anchored in an image without anchors"};
      if (batch[b].anchors.empty()) edge_zero_anchor = true;
    }
    ++mining_trials;
  }

  // Deterministic edge constructions: the random masks above are dense
  // enough that empty pools essentially never occur.
  auto mask_of = [](std::initializer_list<std::pair<int, int>> px) {
    LabelMask m(8, 8, 2);
    for (const auto& [r, c] : px) m.at(r, c) = 1;
    return m;
  };
  const LabelMask blank = mask_of({});

  // zero anchors in every image -> no triplets -> loss exactly zero
  {
    std::vector<TripletPools> batch{build_pools(blank, mask_of({{1, 1}, {2, 2}})),
                                    build_pools(mask_of({{3, 3}}), blank)};
    Rng r(11);
    const auto t = mine_triplets<double>(batch, 8, MiningStrategy::CrossImageRandom, r);
    if (!t.empty()) return {false, "zero-anchor batch still mined triplets"};
    Tensor<double> feats(2, 3, 2, 2);
    feats.data.setConstant(0.5);
    const PlmlResult<double> pl = plml_loss(feats, t, 0.01);
    if (pl.value != 0.0 || pl.grad.data.abs().maxCoeff() != 0.0)
      return {false, "zero-anchor batch does not score zero"};
    edge_zero_anchor = true;
  }

  // anchors exist but the merged negative pool is empty -> all skipped;
  // same for a missing positive pool
  {
    std::vector<TripletPools> neg_missing{
        build_pools(mask_of({{1, 1}}), mask_of({{1, 1}, {1, 2}})),
        build_pools(mask_of({{4, 4}}), mask_of({{4, 4}}))};
    Rng r1(12);
    if (!mine_triplets<double>(neg_missing, 8, MiningStrategy::CrossImageRandom, r1).empty())
      return {false, "anchor with no negative pool was not skipped"};
    std::vector<TripletPools> pos_missing{
        build_pools(mask_of({{1, 1}, {2, 5}}), mask_of({{1, 1}}))};
    Rng r2(13);
    if (!mine_triplets<double>(pos_missing, 8, MiningStrategy::CrossImageRandom, r2).empty())
      return {false, "anchor with no positive pool was not skipped"};
    edge_missing_pool = true;
  }

  // anchors only in image 0, pools only in image 1: the single triplet must
  // be cross-image by construction
  {
    std::vector<TripletPools> batch{build_pools(mask_of({{2, 2}}), mask_of({{2, 2}})),
                                    build_pools(mask_of({{5, 5}}), mask_of({{6, 6}}))};
    Rng r(14);
    const auto t = mine_triplets<double>(batch, 4, MiningStrategy::CrossImageRandom, r);
    if (t.size() != 1) return {false, "forced cross-image batch did not yield one triplet"};
    const auto& tr = t[0];
    if (tr.anchor.image != 0 || tr.anchor.row != 2 || tr.anchor.col != 2 ||
        tr.positive.image != 1 || tr.positive.row != 6 || tr.positive.col != 6 ||
        tr.negative.image != 1 || tr.negative.row != 5 || tr.negative.col != 5)
      return {false, "forced cross-image triplet has wrong members"};
  }

  Outcome o;
  o.ok = pool_trials == 500 && mining_trials == 500 && edge_zero_anchor && edge_missing_pool;
  o.detail = std::to_string(pool_trials) + " pool oracles, " + std::to_string(mining_trials) +
             " mining batches, edge rules exercised";
  return o;
}

Outcome check_pgml_mining() {
  int trials = 0, tie_trials = 0;
  for (int trial = 0; trial < 500; ++trial) {
    Rng rng(3100 + trial);
    const int B = 2 + static_cast<int>(rng.index(63));
    const int D = 1 + static_cast<int>(rng.index(16));
    Matrix<double> emb(B, D);
    for (Eigen::Index i = 0; i < emb.size(); ++i) emb.data()[i] = rng.uniform(-1, 1);
    if (trial % 3 == 0 && B >= 4) {
      emb.row(1) = emb.row(3);  // force exact distance ties
      emb.row(0) = emb.row(2);
      ++tie_trials;
    }
    std::vector<int> labels(B), clusters(B);
    const int Z = 2 + static_cast<int>(rng.index(4));
    for (int i = 0; i < B; ++i) {
      labels[i] = static_cast<int>(rng.index(2));
      clusters[i] = static_cast<int>(rng.index(Z));
    }

    const auto rows = to_rows(emb);
    const auto got = mine_pgml(emb, labels, clusters);
    const auto want = oracles::image_triplets_reference(rows, labels, &clusters);
    if (got.size() != want.size()) return {false, "triplet count mismatch (clustered)"};
    for (std::size_t i = 0; i < want.size(); ++i)
      if (got[i].anchor != want[i].anchor || got[i].positive != want[i].positive ||
          got[i].negative != want[i].negative)
        return {false, "triplet mismatch (clustered)"};

    const auto got_fb = mine_fbml(emb, labels);
    const auto want_fb = oracles::image_triplets_reference(rows, labels, nullptr);
    if (got_fb.size() != want_fb.size()) return {false, "triplet count mismatch (feature)"};
    for (std::size_t i = 0; i < want_fb.size(); ++i)
      if (got_fb[i].anchor != want_fb[i].anchor || got_fb[i].positive != want_fb[i].positive ||
          got_fb[i].negative != want_fb[i].negative)
        return {false, "triplet mismatch (feature)"};
    ++trials;
  }
  return {true, std::to_string(trials) + " batches (" + std::to_string(tie_trials) +
                    " with injected ties), clustered and feature-hard variants"};
}

Outcome check_connected_components() {
  int trials = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    Rng rng(4700 + trial);
    const LabelMask mask = trial % 2 == 0
                               ? random_mask(64, 64, 0.05 + 0.09 * (trial % 10), rng)
                               : blobby_mask(64, 64, rng);
    const auto got = connected_components(mask);
    const auto want = oracles::flood_components(mask);
    if (got.size() != want.size()) return {false, "component count mismatch"};
    auto got_sets = normalized_partition(got);
    std::vector<std::vector<std::pair<int, int>>> want_sets(want.size());
    for (std::size_t i = 0; i < want.size(); ++i) {
      for (const auto& p : want[i]) want_sets[i].emplace_back(p.first, p.second);
      std::sort(want_sets[i].begin(), want_sets[i].end());
    }
    std::sort(want_sets.begin(), want_sets.end());
    if (got_sets != want_sets) return {false, "partition mismatch"};
    ++trials;
  }

  // boundary cases: connectivity, the area filter, and box expansion
  {
    LabelMask m(3, 3, 2);
    m.at(0, 0) = 1;
    m.at(1, 1) = 1;
    if (connected_components(m).size() != 1) return {false, "diagonal pixels did not join"};
    LabelMask g(3, 3, 2);
    g.at(0, 0) = 1;
    g.at(0, 2) = 1;
    if (connected_components(g).size() != 2) return {false, "gap did not separate"};
    if (!connected_components(LabelMask(4, 4, 2)).empty())
      return {false, "empty mask produced segments"};

    LabelMask f(32, 8, 2);
    for (int c = 0; c < 15; ++c) f.at(0, c) = 1;
    for (int c = 0; c < 20; ++c) f.at(4, c) = 1;
    const auto kept = filter_segments(connected_components(f), 20);
    if (kept.size() != 1 || kept[0].area != 20)
      return {false, "area-20 filter kept the wrong segments"};

    const BBox e = expand_bbox({10, 10, 19, 19}, 2.0, 100, 100);
    if (e.r0 != 5 || e.c0 != 5 || e.r1 != 24 || e.c1 != 24)
      return {false, "x2 expansion of (10,10)-(19,19) is off"};
    const BBox corner = expand_bbox({0, 0, 9, 9}, 2.0, 100, 100);
    if (corner.r0 != 0 || corner.c0 != 0 || corner.r1 != 14 || corner.c1 != 14)
      return {false, "corner expansion did not clamp"};
    const BBox same = expand_bbox({3, 7, 11, 20}, 1.0, 64, 64);
    if (same.r0 != 3 || same.c0 != 7 || same.r1 != 11 || same.c1 != 20)
      return {false, "factor-1 expansion is not the identity"};
  }
  return {true, std::to_string(trials) + " random masks plus boundary cases"};
}

Outcome check_metrics_oracle() {
  int trials = 0;
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Rng rng(6200 + trial);
    const int w = 4 + static_cast<int>(rng.index(28));
    const int h = 4 + static_cast<int>(rng.index(28));
    LabelMask a(w, h, 3), b(w, h, 3);
    for (Eigen::Index i = 0; i < a.values.size(); ++i) {
      a.values[i] = static_cast<std::uint8_t>(rng.index(3));
      b.values[i] = static_cast<std::uint8_t>(rng.index(3));
    }
    for (int cls = 0; cls < 3; ++cls)
      worst = std::max(worst, std::abs(iou(a, b, cls) - oracles::iou_reference(a, b, cls)));
    ++trials;
  }
  if (worst > 1e-9) return {false, "iou deviates from counting by " + fmt(worst)};

  // per-image averaging: IoUs 2/5 and 6/10 must mean to exactly 0.5,
  // not the pooled 8/15
  auto row_mask = [](std::initializer_list<int> vals) {
    LabelMask m(static_cast<int>(vals.size()), 1, 2);
    int i = 0;
    for (int v : vals) m.values[i++] = static_cast<std::uint8_t>(v);
    return m;
  };
  const LabelMask pa = row_mask({1, 1, 1, 0, 0});
  const LabelMask ga = row_mask({0, 1, 1, 1, 1});
  const LabelMask pb = row_mask({1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0});
  const LabelMask gb = row_mask({0, 0, 1, 1, 1, 1, 1, 1, 1, 1, 0, 0});
  const MetricsReport rep = report({pa, pb}, {ga, gb}, ClassSelection::Water);
  if (!rep.iou_water || std::abs(*rep.iou_water - 0.5) > 1e-12)
    return {false, "0.4/0.6 did not average to 0.5 per image"};

  bool flag = false;
  LabelMask e1(4, 1, 3), e2(4, 1, 3);
  if (iou(e1, e2, 2, &flag) != 1.0 || !flag)
    return {false, "both-empty class did not score 1 with the flag"};

  return {true, std::to_string(trials) + " random 3-class pairs, max err " + fmt(worst) +
                    ", averaging-order case exact"};
}

Outcome check_kmeans_silhouette() {
  int runs = 0, silhouettes = 0;
  double worst = 0;
  for (int trial = 0; trial < 60; ++trial) {
    Rng data_rng(7800 + trial);
    const int n = 8 + static_cast<int>(data_rng.index(48));
    const int d = 2 + static_cast<int>(data_rng.index(8));
    const int z = 2 + static_cast<int>(data_rng.index(4));
    if (n < z) continue;
    Matrix<double> pts(n, d);
    for (Eigen::Index i = 0; i < pts.size(); ++i) pts.data()[i] = data_rng.uniform(-2, 2);

    Rng rng(510 + trial);
    const ClusterAssignment<double> km = kmeans(pts, z, 12, rng);
    for (std::size_t i = 1; i < km.objective.size(); ++i)
      if (km.objective[i] > km.objective[i - 1] + 1e-12)
        return {false, "objective increased on run " + std::to_string(trial)};
    ++runs;

    std::vector<int> counts(z, 0);
    for (int l : km.labels) ++counts[l];
    int nonempty = 0;
    for (int c : counts) nonempty += c > 0;
    if (nonempty < 2) continue;

    const SilhouetteReport<double> sc = silhouette(pts, km.labels);
    const auto want = oracles::silhouette_reference(to_rows(pts), km.labels, z);
    for (int i = 0; i < n; ++i) {
      worst = std::max(worst, std::abs(sc.per_sample[i] - want[i]));
      if (sc.per_sample[i] < -1.0 || sc.per_sample[i] > 1.0)
        return {false, "silhouette out of [-1,1]"};
    }
    ++silhouettes;
  }
  Outcome o;
  o.ok = worst <= 1e-9 && runs >= 50 && silhouettes >= 40;
  o.detail = std::to_string(runs) + " clustering runs monotone, " +
             std::to_string(silhouettes) + " silhouette oracles, max err " + fmt(worst);
  return o;
}

struct SmokeModels {
  SegTrainResult seg;
  ClsTrainResult cls;
  fs::path data;
  bool trained = false;
};

double seg_test_iou(const DatasetManifest& manifest, const Network<double>& net) {
  const auto entries = manifest.split("test");
  std::vector<LabelMask> preds, gts;
  for (const auto& e : entries) {
    preds.push_back(predict_mask(net, read_raster(manifest.resolve(e.raster_path)), 0.5));
    gts.push_back(read_mask(manifest.resolve(e.mask_path)).binarized());
  }
  return *report(preds, gts, ClassSelection::Water).iou_water;
}

double cls_test_accuracy(const fs::path& root, const Network<double>& net,
                         const Gallery& gallery, bool ce) {
  const auto crops = read_crop_labels(crop_labels_path(root, "test"));
  std::vector<int> pred, gt;
  for (const auto& e : crops) {
    const Raster raster = read_raster(root / "crops" / e.path);
    int label;
    if (ce) {
      Raster in = raster;
      if (net.input_size > 0 && (in.width != net.input_size || in.height != net.input_size))
        in = resize_bilinear(in, net.input_size, net.input_size);
      const Tape<double> tape = forward(net, rasters_to_tensor<double>({in}));
      label = tape.output().data[1] > tape.output().data[0] ? 1 : 0;
    } else {
      label = nn_infer(raster, net, gallery, 1).label == WaterClass::Dam ? 1 : 0;
    }
    pred.push_back(label);
    gt.push_back(e.label);
  }
  return accuracy(pred, gt);
}

double extraction_iou_d(const DatasetManifest& manifest, const Network<double>& seg,
                        const Network<double>& cls, const Gallery& gallery) {
  const auto entries = manifest.split("test");
  std::vector<LabelMask> preds, gts;
  PipelineConfig cfg;
  for (const auto& e : entries) {
    const Raster raster = read_raster(manifest.resolve(e.raster_path));
    preds.push_back(run_pipeline(raster, seg, cls, gallery, cfg).mask);
    gts.push_back(read_mask(manifest.resolve(e.mask_path)));
  }
  return *report(preds, gts, ClassSelection::Dam).iou_d;
}

Outcome check_smoke(const fs::path& work, SmokeModels& models) {
  const fs::path data = work / "smoke";
  const SceneSpec spec;
  const DatasetManifest manifest = build_dataset(spec, SplitCounts{}, 7, data);
  models.data = data;

  const auto seg_start = Clock::now();
  SegTrainConfig seg_cfg;
  models.seg = train_seg(manifest, seg_cfg, 7);
  const double seg_time = seconds_since(seg_start);
  const double water_iou = seg_test_iou(manifest, models.seg.net);

  ClsTrainConfig cls_cfg;
  models.cls = train_cls(data, cls_cfg, 7);
  const double acc = cls_test_accuracy(data, models.cls.net, models.cls.gallery, false);

  const double iou_d =
      extraction_iou_d(manifest, models.seg.net, models.cls.net, models.cls.gallery);
  models.trained = true;

  Outcome o;
  o.ok = water_iou >= 0.60 && seg_time < 600.0 && acc >= 0.90 && iou_d >= 0.50;
  o.detail = "water IoU " + fmt(water_iou) + " (target 0.60) in " + fmt(seg_time) +
             " s, 1-NN accuracy " + fmt(acc) + " (target 0.90), extracted dam IoU " +
             fmt(iou_d) + " (target 0.50)";
  return o;
}

Outcome check_ablation(const fs::path& work) {
  const std::uint64_t seeds[] = {101, 102, 103, 104, 105};
  double cross_sum = 0, within_sum = 0, pgml_sum = 0, ce_sum = 0;
  std::string per_seed;
  for (const std::uint64_t s : seeds) {
    const fs::path data = work / ("ablation_" + std::to_string(s));
    const SceneSpec spec;
    const DatasetManifest manifest = build_dataset(spec, {24, 8, 8}, s, data);

    SegTrainConfig seg_cfg;
    seg_cfg.epochs = 6;
    seg_cfg.loss_weight_sigma = 0.2;  // make the triplet term material to the comparison
    seg_cfg.mining_strategy = MiningStrategy::CrossImageRandom;
    const double cross = seg_test_iou(manifest, train_seg(manifest, seg_cfg, s).net);
    seg_cfg.mining_strategy = MiningStrategy::WithinImage;
    const double within = seg_test_iou(manifest, train_seg(manifest, seg_cfg, s).net);
    cross_sum += cross;
    within_sum += within;

    ClsTrainConfig cls_cfg;
    cls_cfg.epochs = 10;
    cls_cfg.batch_size = 32;
    cls_cfg.objective = ClsObjective::Pgml;
    const ClsTrainResult pg = train_cls(data, cls_cfg, s);
    const double pg_acc = cls_test_accuracy(data, pg.net, pg.gallery, false);
    cls_cfg.objective = ClsObjective::CrossEntropy;
    const ClsTrainResult ce = train_cls(data, cls_cfg, s);
    const double ce_acc = cls_test_accuracy(data, ce.net, ce.gallery, true);
    pgml_sum += pg_acc;
    ce_sum += ce_acc;
    per_seed += " [" + std::to_string(s) + ": " + fmt(cross) + "/" + fmt(within) + " " +
                fmt(pg_acc) + "/" + fmt(ce_acc) + "]";
  }
  const double n = 5.0;
  Outcome o;
  o.ok = cross_sum / n >= within_sum / n && pgml_sum / n >= ce_sum / n;
  o.detail = "mean IoU cross " + fmt(cross_sum / n) + " vs within " + fmt(within_sum / n) +
             "; mean accuracy clustered-triplet " + fmt(pgml_sum / n) + " vs cross-entropy " +
             fmt(ce_sum / n) + ";" + per_seed;
  return o;
}

// -------------------------------------------------------------- determinism

int run_cli(const std::string& cli, const std::string& args, const fs::path& stdout_file) {
  const std::string cmd = "\"" + cli + "\" " + args + " > \"" + stdout_file.string() +
                          "\" 2> \"" + stdout_file.string() + ".err\"";
  const int rc = std::system(cmd.c_str());
  if (rc == -1) return -1;
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

bool trees_identical(const fs::path& a, const fs::path& b, std::string* why) {
  std::vector<fs::path> rel_a, rel_b;
  for (const auto& p : fs::recursive_directory_iterator(a))
    if (p.is_regular_file()) rel_a.push_back(fs::relative(p.path(), a));
  for (const auto& p : fs::recursive_directory_iterator(b))
    if (p.is_regular_file()) rel_b.push_back(fs::relative(p.path(), b));
  std::sort(rel_a.begin(), rel_a.end());
  std::sort(rel_b.begin(), rel_b.end());
  if (rel_a != rel_b) {
    *why = "file lists differ";
    return false;
  }
  for (const auto& rel : rel_a)
    if (read_bytes(a / rel) != read_bytes(b / rel)) {
      *why = "content differs: " + rel.string();
      return false;
    }
  return true;
}

Outcome check_determinism(const std::string& cli, const fs::path& work) {
  if (cli.empty()) return {false, "CLI binary path not supplied"};
  const fs::path dir = work / "determinism";
  fs::create_directories(dir);
  auto q = [](const fs::path& p) { return "\"" + p.string() + "\""; };

  // dataset generation: two runs, identical trees
  const std::string gen_args = "gen-data --seed 3 --train 4 --val 2 --test 2 --out ";
  if (run_cli(cli, gen_args + q(dir / "dataA"), dir / "genA.json") != 0)
    return {false, "gen-data run failed"};
  if (run_cli(cli, gen_args + q(dir / "dataB"), dir / "genB.json") != 0)
    return {false, "gen-data rerun failed"};
  std::string why;
  if (!trees_identical(dir / "dataA", dir / "dataB", &why))
    return {false, "gen-data not reproducible: " + why};
  if (read_bytes(dir / "genA.json").empty())
    return {false, "gen-data produced no report"};
  {
    const std::string ra = read_bytes(dir / "genA.json"), rb = read_bytes(dir / "genB.json");
    // reports mention their own --out path; strip it before comparing
    auto scrub = [](std::string s, const std::string& from) {
      for (std::size_t at; (at = s.find(from)) != std::string::npos;) s.erase(at, from.size());
      return s;
    };
    if (scrub(ra, "dataA") != scrub(rb, "dataB"))
      return {false, "gen-data reports differ beyond the output path"};
  }

  // segmentation training: identical checkpoint, history, and report
  const std::string seg_common =
      " --seed 11 --epochs 2 --K 10 --feat-channels 8 --batch 2 --data " + q(dir / "dataA");
  if (run_cli(cli,
              "train-seg" + seg_common + " --out " + q(dir / "segA.ckpt") + " --history " +
                  q(dir / "segA.csv"),
              dir / "segA.json") != 0)
    return {false, "train-seg run failed"};
  if (run_cli(cli,
              "train-seg" + seg_common + " --out " + q(dir / "segB.ckpt") + " --history " +
                  q(dir / "segB.csv"),
              dir / "segB.json") != 0)
    return {false, "train-seg rerun failed"};
  if (read_bytes(dir / "segA.ckpt") != read_bytes(dir / "segB.ckpt"))
    return {false, "train-seg checkpoints differ"};
  if (read_bytes(dir / "segA.csv") != read_bytes(dir / "segB.csv"))
    return {false, "train-seg histories differ"};

  // classifier training: identical checkpoint and gallery
  const std::string cls_common =
      " --seed 11 --epochs 2 --Z 2 --batch 8 --embed-dim 8 --input-size 16 --data " +
      q(dir / "dataA");
  if (run_cli(cli,
              "train-cls" + cls_common + " --out " + q(dir / "clsA.ckpt") + " --gallery " +
                  q(dir / "clsA.gal"),
              dir / "clsA.json") != 0)
    return {false, "train-cls run failed"};
  if (run_cli(cli,
              "train-cls" + cls_common + " --out " + q(dir / "clsB.ckpt") + " --gallery " +
                  q(dir / "clsB.gal"),
              dir / "clsB.json") != 0)
    return {false, "train-cls rerun failed"};
  if (read_bytes(dir / "clsA.ckpt") != read_bytes(dir / "clsB.ckpt"))
    return {false, "train-cls checkpoints differ"};
  if (read_bytes(dir / "clsA.gal") != read_bytes(dir / "clsB.gal"))
    return {false, "train-cls galleries differ"};

  // extraction over the test split: identical mask and segment files
  const std::string ext_common = " --seed 5 --data " + q(dir / "dataA") + " --seg " +
                                 q(dir / "segA.ckpt") + " --cls " + q(dir / "clsA.ckpt") +
                                 " --gallery " + q(dir / "clsA.gal") + " --out ";
  if (run_cli(cli, "extract" + ext_common + q(dir / "extA"), dir / "extA.json") != 0)
    return {false, "extract run failed"};
  if (run_cli(cli, "extract" + ext_common + q(dir / "extB"), dir / "extB.json") != 0)
    return {false, "extract rerun failed"};
  if (!trees_identical(dir / "extA", dir / "extB", &why))
    return {false, "extract not reproducible: " + why};

  // gradient check: identical stdout
  if (run_cli(cli, "gradcheck --seeds 2", dir / "gcA.json") != 0)
    return {false, "gradcheck run failed"};
  if (run_cli(cli, "gradcheck --seeds 2", dir / "gcB.json") != 0)
    return {false, "gradcheck rerun failed"};
  if (read_bytes(dir / "gcA.json") != read_bytes(dir / "gcB.json"))
    return {false, "gradcheck reports differ"};

  return {true, "gen-data, train-seg, train-cls, extract, gradcheck all bit-identical"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : "";
  const fs::path work = fs::absolute("acceptance_work");
  fs::remove_all(work);
  fs::create_directories(work);

  announce(1, "analytic gradients vs finite differences", check_gradients());
  announce(2, "focal loss scalar oracle", check_focal_oracle());
  announce(3, "point-triplet pools and cross-image mining", check_plml_mining());
  announce(4, "image-triplet mining oracle", check_pgml_mining());
  announce(5, "connected components, area filter, box expansion",
           check_connected_components());
  announce(6, "segmentation metrics oracle", check_metrics_oracle());
  announce(7, "k-means objective and silhouette", check_kmeans_silhouette());

  SmokeModels models;
  try {
    announce(8, "end-to-end synthetic smoke", check_smoke(work, models));
  } catch (const std::exception& e) {
    announce(8, "end-to-end synthetic smoke", {false, std::string("exception: ") + e.what()});
  }
  try {
    announce(9, "ablation direction (mining strategy, training objective)",
             check_ablation(work));
  } catch (const std::exception& e) {
    announce(9, "ablation direction (mining strategy, training objective)",
             {false, std::string("exception: ") + e.what()});
  }
  announce(10, "bit-identical reruns", check_determinism(cli, work));

  if (g_failures > 0) {
    std::cout << g_failures << " criteria failed\n";
    return 1;
  }
  std::cout << "all criteria passed\n";
  return 0;
}
