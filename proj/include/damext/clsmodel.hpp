#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "damext/extract.hpp"
#include "damext/kmeans.hpp"
#include "damext/network.hpp"
#include "damext/pgml.hpp"

namespace damext {

enum class ClsObjective { Pgml, FeatureHard, CrossEntropy };

const char* cls_objective_name(ClsObjective o);
ClsObjective parse_cls_objective(const std::string& name);

struct ClsTrainConfig {
  int num_clusters = 4;  // Z
  double margin_epsilon = 0.01;
  int batch_size = 64;
  int epochs = 30;
  double learning_rate = 1e-4;
  int kmeans_iters = 20;
  int embed_dim = 64;  // D
  int input_size = 32;
  int knn_k = 1;
  ClsObjective objective = ClsObjective::Pgml;

  void validate() const {
    if (num_clusters < 2) throw ConfigError("cls config: Z must be >= 2");
    if (margin_epsilon <= 0) throw ConfigError("cls config: epsilon must be > 0");
    if (batch_size <= num_clusters) throw ConfigError("cls config: batch size must exceed Z");
    if (epochs < 0) throw ConfigError("cls config: epochs must be >= 0");
    if (learning_rate <= 0) throw ConfigError("cls config: learning rate must be > 0");
    if (kmeans_iters < 1) throw ConfigError("cls config: kmeans_iters must be >= 1");
    if (embed_dim < 2) throw ConfigError("cls config: embed_dim must be >= 2");
    if (input_size < 8) throw ConfigError("cls config: input_size must be >= 8");
    if (knn_k < 1) throw ConfigError("cls config: knn_k must be >= 1");
  }
};

/// Conv stack + global-avg-pool + dense to D + l2-normalize. The
/// cross-entropy baseline swaps the normalized head for a 2-logit one.
template <class S>
Network<S> make_cls_net(int embed_dim, int input_size, ClsObjective objective) {
  std::vector<LayerSpec> layers = {
      {LayerKind::Conv3x3, 3, 16, true},
      {LayerKind::Relu},
      {LayerKind::Stride2Downsample},
      {LayerKind::Conv3x3, 16, 32, true},
      {LayerKind::Relu},
      {LayerKind::Stride2Downsample},
      {LayerKind::Conv3x3, 32, 64, true},
      {LayerKind::Relu},
      {LayerKind::Stride2Downsample},
      {LayerKind::Conv3x3, 64, 64, true},
      {LayerKind::Relu},
      {LayerKind::GlobalAvgPool},
      {LayerKind::Dense, 64, embed_dim, true},
  };
  if (objective == ClsObjective::CrossEntropy) {
    layers.push_back({LayerKind::Relu});
    layers.push_back({LayerKind::Dense, embed_dim, 2, true});
  } else {
    layers.push_back({LayerKind::L2Normalize});
  }
  return make_network<S>(std::move(layers), 3, /*tap=*/-1, input_size);
}

struct Embedding {
  Vector<double> v;
  bool zero_warning = false;
};

/// Resizes to the model's input size when needed and standardizes the crop
/// (zero mean, unit variance) before the forward pass, mirroring the training
/// input path; unit norm unless the pre-normalization activations vanish.
Embedding embed(const Network<double>& model, const Raster& raster);

struct Gallery {
  Matrix<double> embeddings;  // N x D, unit rows
  std::vector<int> labels;    // 0 natural, 1 dam

  int size() const { return static_cast<int>(labels.size()); }
};

void save_gallery(const std::filesystem::path& path, const Gallery& gallery);
Gallery load_gallery(const std::filesystem::path& path);

struct NnResult {
  WaterClass label = WaterClass::Natural;
  double similarity = 0.0;
};

/// Cosine k-NN over the gallery; default k=1. Ties on similarity go to the
/// lowest gallery index; vote ties go to the class of the nearest entry
/// among the tied classes.
NnResult nn_infer(const Raster& query, const Network<double>& model, const Gallery& gallery,
                  int k = 1);

struct ClsEpochStats {
  int epoch = 0;
  double loss = 0, val_accuracy = 0, msc = 0;
};

struct ClsTrainResult {
  Network<double> net;  // best-validation-accuracy weights
  Gallery gallery;      // train-set embeddings under the returned weights
  std::vector<ClsEpochStats> history;
  double best_val_acc = 0;
  int best_epoch = -1;
};

ClsTrainResult train_cls(const std::filesystem::path& dataset_root, const ClsTrainConfig& cfg,
                         std::uint64_t seed);

void write_cls_history(const std::filesystem::path& path,
                       const std::vector<ClsEpochStats>& history);

}  // namespace damext
