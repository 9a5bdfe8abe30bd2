#include "damext/segmodel.hpp"

#include <cstdio>
#include <fstream>

#include "damext/adam.hpp"
#include "damext/metrics.hpp"

namespace damext {
namespace {

struct SceneData {
  Raster raster;
  LabelMask water;  // binarized ground truth
};

std::vector<SceneData> load_split(const DatasetManifest& manifest, const std::string& split) {
  std::vector<SceneData> out;
  for (const auto& entry : manifest.split(split)) {
    SceneData s;
    s.raster = read_raster(manifest.resolve(entry.raster_path));
    s.water = read_mask(manifest.resolve(entry.mask_path)).binarized();
    out.push_back(std::move(s));
  }
  return out;
}

LabelMask threshold_mask(const Tensor<double>& probs, int b, double threshold) {
  LabelMask m;
  m.width = probs.w;
  m.height = probs.h;
  m.arity = 2;
  m.values.resize(static_cast<Eigen::Index>(probs.w) * probs.h);
  for (int y = 0; y < probs.h; ++y)
    for (int x = 0; x < probs.w; ++x)
      m.values[y * probs.w + x] = probs.at(b, 0, y, x) >= threshold ? 1 : 0;
  return m;
}

double validation_iou(const Network<double>& net, const std::vector<SceneData>& val,
                      double threshold) {
  if (val.empty()) return 0.0;
  double total = 0.0;
  for (const auto& s : val) total += iou(predict_mask(net, s.raster, threshold), s.water, 1);
  return total / static_cast<double>(val.size());
}

}  // namespace

SegTrainResult train_seg(const DatasetManifest& manifest, const SegTrainConfig& cfg,
                         std::uint64_t seed) {
  cfg.validate();
  std::vector<SceneData> train = load_split(manifest, "train");
  std::vector<SceneData> val = load_split(manifest, "val");
  if (train.empty()) throw DataError("train_seg: train split is empty");
  for (const auto& s : train)
    if (s.raster.width % 4 != 0 || s.raster.height % 4 != 0)
      throw ShapeError("train_seg: raster sides must be multiples of 4");

  SegTrainResult result;
  result.net = make_seg_net<double>(cfg.feat_channels);
  {
    Rng init_rng = Rng::substream(seed, "init");
    init_params(result.net, init_rng);
  }
  if (cfg.epochs == 0) return result;

  Rng data_rng = Rng::substream(seed, "data");
  Rng mining_rng = Rng::substream(seed, "mining");

  const int n_train = static_cast<int>(train.size());
  const int steps_per_epoch = (n_train + cfg.batch_size - 1) / cfg.batch_size;
  const long total_steps = static_cast<long>(cfg.epochs) * steps_per_epoch;

  Network<double> best = result.net;
  double best_iou = -1.0;
  int best_epoch = -1;
  long global_step = 0;

  std::vector<int> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    data_rng.shuffle(order);
    double epoch_focal = 0, epoch_triplet = 0;
    int steps = 0;
    for (int start = 0; start < n_train; start += cfg.batch_size) {
      const int bsz = std::min(cfg.batch_size, n_train - start);
      std::vector<Raster> rasters;
      std::vector<LabelMask> gts;
      rasters.reserve(bsz);
      gts.reserve(bsz);
      for (int j = 0; j < bsz; ++j) {
        const SceneData& s = train[order[start + j]];
        Raster r = s.raster;
        LabelMask m = s.water;
        if (cfg.augment_enabled) apply_augment(r, m, sample_augment(cfg.augment, data_rng));
        rasters.push_back(std::move(r));
        gts.push_back(std::move(m));
      }

      const Tensor<double> input = rasters_to_tensor<double>(rasters);
      Tape<double> tape = forward(result.net, input);
      const Tensor<double>& logits = tape.output();
      Tensor<double> probs(logits.n, 1, logits.h, logits.w);
      for (Eigen::Index i = 0; i < logits.data.size(); ++i)
        probs.data[i] = sigmoid(logits.data[i]);

      std::vector<TripletPools> pools;
      pools.reserve(bsz);
      for (int b = 0; b < bsz; ++b)
        pools.push_back(build_pools(threshold_mask(probs, b, cfg.threshold), gts[b]));
      const Tensor<double>& feats = tape.outputs[result.net.tap];
      const std::vector<PointTriplet> triplets = mine_triplets(
          pools, cfg.anchors_per_image, cfg.mining_strategy, mining_rng, &feats);

      const FocalBatch<double> fb = focal_loss(probs, gts, cfg.focal);
      const PlmlResult<double> pl = plml_loss(feats, triplets, cfg.margin_beta);
      const double total = seg_total_loss(fb.value, pl.value, cfg.loss_weight_sigma);
      if (!std::isfinite(total))
        throw NumericError("train_seg: non-finite loss at epoch " + std::to_string(epoch) +
                           " step " + std::to_string(steps));

      Tensor<double> grad_logits(logits.n, 1, logits.h, logits.w);
      grad_logits.data = fb.grad.data * probs.data * (1.0 - probs.data);
      Tensor<double> grad_tap(feats.n, feats.c, feats.h, feats.w);
      grad_tap.data = cfg.loss_weight_sigma * pl.grad.data;

      result.net.params.zero_grads();
      backward(result.net, tape, grad_logits, &grad_tap);
      const double lr = poly_decay(cfg.learning_rate, global_step, total_steps);
      adam_step(result.net.params, lr, global_step + 1);
      ++global_step;

      epoch_focal += fb.value;
      epoch_triplet += pl.value;
      ++steps;
    }

    SegEpochStats stats;
    stats.epoch = epoch;
    stats.focal_loss = epoch_focal / steps;
    stats.triplet_loss = epoch_triplet / steps;
    stats.val_iou = validation_iou(result.net, val, cfg.threshold);
    result.history.push_back(stats);
    if (stats.val_iou > best_iou) {
      best_iou = stats.val_iou;
      best_epoch = epoch;
      best = result.net;
    }
  }

  result.net = std::move(best);
  result.best_val_iou = best_iou;
  result.best_epoch = best_epoch;
  return result;
}

LabelMask predict_mask(const Network<double>& model, const Raster& raster, double threshold) {
  if (raster.width % 4 != 0 || raster.height % 4 != 0)
    throw ShapeError("predict_mask: raster sides must be multiples of 4");
  const std::vector<Raster> batch{raster};
  const Tape<double> tape = forward(model, rasters_to_tensor<double>(batch));
  const Tensor<double>& logits = tape.output();
  LabelMask m;
  m.width = logits.w;
  m.height = logits.h;
  m.arity = 2;
  m.values.resize(static_cast<Eigen::Index>(logits.w) * logits.h);
  for (int y = 0; y < logits.h; ++y)
    for (int x = 0; x < logits.w; ++x)
      m.values[y * logits.w + x] = sigmoid(logits.at(0, 0, y, x)) >= threshold ? 1 : 0;
  return m;
}

void write_seg_history(const std::filesystem::path& path,
                       const std::vector<SegEpochStats>& history) {
  std::ofstream out(path);
  if (!out) throw DataError("write_seg_history: cannot open " + path.string());
  out << "epoch,focal_loss,triplet_loss,val_iou\n";
  char buf[160];
  for (const auto& h : history) {
    std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g\n", h.epoch, h.focal_loss,
                  h.triplet_loss, h.val_iou);
    out << buf;
  }
}

}  // namespace damext
