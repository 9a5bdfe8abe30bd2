#pragma once

#include <cmath>
#include <filesystem>
#include <vector>

#include "damext/augment.hpp"
#include "damext/dataset.hpp"
#include "damext/focal.hpp"
#include "damext/network.hpp"
#include "damext/plml.hpp"

namespace damext {

struct SegTrainConfig {
  int anchors_per_image = 50;  // K
  double margin_beta = 0.01;
  double loss_weight_sigma = 0.01;
  int batch_size = 4;
  int epochs = 20;
  double learning_rate = 3e-4;
  MiningStrategy mining_strategy = MiningStrategy::CrossImageRandom;
  double threshold = 0.5;
  int feat_channels = 32;  // C_feat of the point-feature map
  FocalConfig focal;
  bool augment_enabled = true;
  AugmentConfig augment;

  void validate() const {
    if (anchors_per_image < 1) throw ConfigError("seg config: K must be >= 1");
    if (margin_beta <= 0) throw ConfigError("seg config: margin beta must be > 0");
    if (loss_weight_sigma < 0) throw ConfigError("seg config: sigma must be >= 0");
    if (batch_size < 1) throw ConfigError("seg config: batch size must be >= 1");
    if (epochs < 0) throw ConfigError("seg config: epochs must be >= 0");
    if (learning_rate <= 0) throw ConfigError("seg config: learning rate must be > 0");
    if (threshold < 0 || threshold > 1) throw ConfigError("seg config: threshold in [0,1]");
    if (feat_channels < 1) throw ConfigError("seg config: feat_channels must be >= 1");
    if (focal.alpha <= 0 || focal.alpha >= 1) throw ConfigError("seg config: alpha in (0,1)");
    if (focal.gamma < 0) throw ConfigError("seg config: gamma must be >= 0");
  }
};

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Encoder to a 1/4-resolution point-feature map (tapped), decoder back to a
/// full-resolution single-logit map.
template <class S>
Network<S> make_seg_net(int feat_channels = 32) {
  std::vector<LayerSpec> layers = {
      {LayerKind::Conv3x3, 3, 16, true},
      {LayerKind::Relu},
      {LayerKind::Stride2Downsample},
      {LayerKind::Conv3x3, 16, 32, true},
      {LayerKind::Relu},
      {LayerKind::Stride2Downsample},
      {LayerKind::Conv3x3, 32, feat_channels, true},
      {LayerKind::Relu},  // point-feature map, ceil(input/4)
      {LayerKind::BilinearUpsample2},
      {LayerKind::Conv3x3, feat_channels, 16, true},
      {LayerKind::Relu},
      {LayerKind::BilinearUpsample2},
      {LayerKind::Conv3x3, 16, 8, true},
      {LayerKind::Relu},
      {LayerKind::Conv3x3, 8, 1, true},
  };
  return make_network<S>(std::move(layers), 3, /*tap=*/7);
}

struct SegEpochStats {
  int epoch = 0;
  double focal_loss = 0, triplet_loss = 0, val_iou = 0;
};

struct SegTrainResult {
  Network<double> net;  // best-validation-IoU weights
  std::vector<SegEpochStats> history;
  double best_val_iou = 0;
  int best_epoch = -1;
};

SegTrainResult train_seg(const DatasetManifest& manifest, const SegTrainConfig& cfg,
                         std::uint64_t seed);

LabelMask predict_mask(const Network<double>& model, const Raster& raster,
                       double threshold = 0.5);

void write_seg_history(const std::filesystem::path& path,
                       const std::vector<SegEpochStats>& history);

}  // namespace damext
