#include "damext/clsmodel.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "damext/adam.hpp"
#include "damext/checkpoint.hpp"
#include "damext/dataset.hpp"

namespace damext {
namespace {

struct CropData {
  Raster raster;
  int label = 0;
};

/// Per-crop standardization (zero mean, unit variance over all pixels and
/// channels). Crops differ mostly in scene brightness and water tint, which
/// says nothing about dam vs natural; removing it per crop forces the
/// embedding to rely on shape and texture. Applied identically at train time
/// (load_crops) and inference time (embed), after resizing.
void standardize_input(Raster& r) {
  const double mean = r.data.mean();
  const double sd = std::sqrt((r.data - mean).square().mean());
  r.data = (r.data - mean) / (sd + 1e-6);
}

std::vector<CropData> load_crops(const std::filesystem::path& root, const std::string& split,
                                 int input_size) {
  std::vector<CropData> out;
  for (const auto& e : read_crop_labels(crop_labels_path(root, split))) {
    CropData c;
    c.raster = read_raster(root / "crops" / e.path);
    if (c.raster.width != input_size || c.raster.height != input_size)
      c.raster = resize_bilinear(c.raster, input_size, input_size);
    standardize_input(c.raster);
    c.label = e.label;
    out.push_back(std::move(c));
  }
  return out;
}

Matrix<double> output_to_rows(const Tensor<double>& out) {
  Matrix<double> emb(out.n, out.sample_size());
  for (int i = 0; i < out.n; ++i)
    for (int j = 0; j < out.sample_size(); ++j) emb(i, j) = out.sample(i)[j];
  return emb;
}

/// Embeddings of a crop list in fixed order, computed in batches.
Matrix<double> embed_all(const Network<double>& net, const std::vector<CropData>& crops,
                         int batch_size) {
  const int dim = net.layers.back().out_channels;
  Matrix<double> emb(crops.size(), dim);
  for (std::size_t start = 0; start < crops.size(); start += batch_size) {
    const std::size_t end = std::min(crops.size(), start + batch_size);
    std::vector<Raster> batch;
    batch.reserve(end - start);
    for (std::size_t i = start; i < end; ++i) batch.push_back(crops[i].raster);
    const Tape<double> tape = forward(net, rasters_to_tensor<double>(batch));
    const Matrix<double> rows = output_to_rows(tape.output());
    emb.middleRows(static_cast<Eigen::Index>(start), rows.rows()) = rows;
  }
  return emb;
}

struct CeResult {
  double value = 0;
  Tensor<double> grad;
};

CeResult ce_loss(const Tensor<double>& logits, const std::vector<int>& labels) {
  CeResult out;
  out.grad = Tensor<double>(logits.n, 2, 1, 1);
  const double inv_b = 1.0 / logits.n;
  for (int b = 0; b < logits.n; ++b) {
    const double l0 = logits.at(b, 0, 0, 0);
    const double l1 = logits.at(b, 1, 0, 0);
    const double m = std::max(l0, l1);
    const double e0 = std::exp(l0 - m);
    const double e1 = std::exp(l1 - m);
    const double sum = e0 + e1;
    const double p0 = e0 / sum, p1 = e1 / sum;
    const int y = labels[b];
    out.value += -std::log(y == 0 ? p0 : p1) * inv_b;
    out.grad.at(b, 0, 0, 0) = (p0 - (y == 0 ? 1.0 : 0.0)) * inv_b;
    out.grad.at(b, 1, 0, 0) = (p1 - (y == 1 ? 1.0 : 0.0)) * inv_b;
  }
  return out;
}

int nonempty_clusters(const std::vector<int>& labels, int z) {
  std::vector<int> counts(z, 0);
  for (int l : labels) ++counts[l];
  int n = 0;
  for (int c : counts) n += c > 0;
  return n;
}

int argmax_class(const Network<double>& net, const Raster& raster) {
  const std::vector<Raster> batch{raster};
  const Tape<double> tape = forward(net, rasters_to_tensor<double>(batch));
  return tape.output().at(0, 1, 0, 0) > tape.output().at(0, 0, 0, 0) ? 1 : 0;
}

double validation_accuracy(const Network<double>& net, const Gallery& gallery,
                           const std::vector<CropData>& val, const ClsTrainConfig& cfg) {
  if (val.empty()) return 0.0;
  int correct = 0;
  for (const auto& c : val) {
    int pred;
    if (cfg.objective == ClsObjective::CrossEntropy)
      pred = argmax_class(net, c.raster);
    else
      pred = nn_infer(c.raster, net, gallery, cfg.knn_k).label == WaterClass::Dam ? 1 : 0;
    correct += pred == c.label;
  }
  return static_cast<double>(correct) / static_cast<double>(val.size());
}

Gallery make_gallery(const Network<double>& net, const std::vector<CropData>& train,
                     int batch_size) {
  Gallery g;
  g.embeddings = embed_all(net, train, batch_size);
  g.labels.reserve(train.size());
  for (const auto& c : train) g.labels.push_back(c.label);
  return g;
}

}  // namespace

const char* cls_objective_name(ClsObjective o) {
  switch (o) {
    case ClsObjective::Pgml: return "pgml";
    case ClsObjective::FeatureHard: return "feature-hard";
    case ClsObjective::CrossEntropy: return "ce";
  }
  return "?";
}

ClsObjective parse_cls_objective(const std::string& name) {
  if (name == "pgml") return ClsObjective::Pgml;
  if (name == "feature-hard" || name == "fbml") return ClsObjective::FeatureHard;
  if (name == "ce" || name == "cross-entropy") return ClsObjective::CrossEntropy;
  throw ConfigError("unknown classification objective: " + name +
                    " (expected pgml, feature-hard, or ce)");
}

Embedding embed(const Network<double>& model, const Raster& raster) {
  Raster r = raster;
  if (model.input_size > 0 &&
      (r.width != model.input_size || r.height != model.input_size))
    r = resize_bilinear(r, model.input_size, model.input_size);
  standardize_input(r);
  const std::vector<Raster> batch{r};
  const Tape<double> tape = forward(model, rasters_to_tensor<double>(batch));
  Embedding e;
  const Tensor<double>& out = tape.output();
  e.v.resize(out.sample_size());
  for (int j = 0; j < out.sample_size(); ++j) e.v[j] = out.sample(0)[j];
  e.zero_warning = tape.l2_zero;
  return e;
}

void save_gallery(const std::filesystem::path& path, const Gallery& gallery) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("save_gallery: cannot open " + path.string());
  detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(gallery.size()));
  detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(gallery.embeddings.cols()));
  for (int i = 0; i < gallery.size(); ++i) {
    detail::write_pod<std::uint8_t>(out, static_cast<std::uint8_t>(gallery.labels[i]));
    for (Eigen::Index j = 0; j < gallery.embeddings.cols(); ++j)
      detail::write_pod<float>(out, static_cast<float>(gallery.embeddings(i, j)));
  }
  if (!out) throw DataError("save_gallery: write failed for " + path.string());
}

Gallery load_gallery(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("load_gallery: cannot open " + path.string());
  const auto count = detail::read_pod<std::uint32_t>(in);
  const auto dim = detail::read_pod<std::uint32_t>(in);
  if (dim == 0 || dim > 65536) throw DataError("load_gallery: implausible dimension");
  Gallery g;
  g.embeddings.resize(count, dim);
  g.labels.resize(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto label = detail::read_pod<std::uint8_t>(in);
    if (label > 1) throw DataError("load_gallery: label out of range");
    g.labels[i] = label;
    for (std::uint32_t j = 0; j < dim; ++j)
      g.embeddings(i, j) = detail::read_pod<float>(in);
  }
  return g;
}

NnResult nn_infer(const Raster& query, const Network<double>& model, const Gallery& gallery,
                  int k) {
  if (gallery.size() == 0) throw DataError("nn_infer: empty gallery");
  if (k < 1) throw ConfigError("nn_infer: k must be >= 1");
  const Embedding q = embed(model, query);
  if (q.v.size() != gallery.embeddings.cols())
    throw ShapeError("nn_infer: embedding dimension does not match gallery");

  const Vector<double> sims = gallery.embeddings * q.v;
  std::vector<int> order(gallery.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (sims[a] != sims[b]) return sims[a] > sims[b];
    return a < b;
  });

  const int kk = std::min<int>(k, gallery.size());
  int votes[2] = {0, 0};
  for (int i = 0; i < kk; ++i) ++votes[gallery.labels[order[i]]];
  int label;
  if (votes[0] == votes[1]) {
    label = gallery.labels[order[0]];  // vote tie: nearest entry decides
  } else {
    label = votes[1] > votes[0] ? 1 : 0;
  }
  return {label == 1 ? WaterClass::Dam : WaterClass::Natural, sims[order[0]]};
}

ClsTrainResult train_cls(const std::filesystem::path& dataset_root, const ClsTrainConfig& cfg,
                         std::uint64_t seed) {
  cfg.validate();
  const std::vector<CropData> train = load_crops(dataset_root, "train", cfg.input_size);
  const std::vector<CropData> val = load_crops(dataset_root, "val", cfg.input_size);
  if (train.empty()) throw DataError("train_cls: train split is empty");
  {
    int count[2] = {0, 0};
    for (const auto& c : train) ++count[c.label];
    if (count[0] == 0 || count[1] == 0)
      throw DataError("train_cls: training split must contain both classes");
  }

  ClsTrainResult result;
  result.net = make_cls_net<double>(cfg.embed_dim, cfg.input_size, cfg.objective);
  {
    Rng init_rng = Rng::substream(seed, "init");
    init_params(result.net, init_rng);
  }
  const bool metric_mode = cfg.objective != ClsObjective::CrossEntropy;
  if (cfg.epochs == 0) {
    if (metric_mode) result.gallery = make_gallery(result.net, train, cfg.batch_size);
    return result;
  }

  Rng data_rng = Rng::substream(seed, "data");
  Rng kmeans_rng = Rng::substream(seed, "kmeans");

  Network<double> best = result.net;
  double best_acc = -1.0;
  int best_epoch = -1;
  long adam_steps = 0;

  const int n_train = static_cast<int>(train.size());
  std::vector<int> order(n_train);
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    data_rng.shuffle(order);
    double epoch_loss = 0, epoch_msc = 0;
    int chunks = 0, msc_batches = 0;
    for (int start = 0; start < n_train; start += cfg.batch_size) {
      const int bsz = std::min(cfg.batch_size, n_train - start);
      if (metric_mode && cfg.objective == ClsObjective::Pgml && bsz < cfg.num_clusters)
        continue;  // cannot form Z clusters from this tail batch
      std::vector<Raster> rasters;
      std::vector<int> labels;
      rasters.reserve(bsz);
      labels.reserve(bsz);
      for (int j = 0; j < bsz; ++j) {
        rasters.push_back(train[order[start + j]].raster);
        labels.push_back(train[order[start + j]].label);
      }

      Tape<double> tape = forward(result.net, rasters_to_tensor<double>(rasters));
      ++chunks;
      if (metric_mode) {
        const Matrix<double> emb = output_to_rows(tape.output());
        std::vector<ImageTriplet> triplets;
        if (cfg.objective == ClsObjective::Pgml) {
          const ClusterAssignment<double> km =
              kmeans(emb, cfg.num_clusters, cfg.kmeans_iters, kmeans_rng);
          triplets = mine_pgml(emb, labels, km.labels);
          if (nonempty_clusters(km.labels, cfg.num_clusters) >= 2) {
            epoch_msc += silhouette(emb, km.labels).mean;
            ++msc_batches;
          }
        } else {
          triplets = mine_fbml(emb, labels);
        }
        const PgmlResult<double> loss = pgml_loss(emb, triplets, cfg.margin_epsilon);
        epoch_loss += loss.value;
        if (triplets.empty()) continue;  // no valid triplet: parameters stay put
        if (!std::isfinite(loss.value))
          throw NumericError("train_cls: non-finite loss at epoch " + std::to_string(epoch));

        Tensor<double> grad_out(bsz, cfg.embed_dim, 1, 1);
        for (int i = 0; i < bsz; ++i)
          for (int j = 0; j < cfg.embed_dim; ++j) grad_out.sample(i)[j] = loss.grad(i, j);
        result.net.params.zero_grads();
        backward(result.net, tape, grad_out);
        adam_step(result.net.params, cfg.learning_rate, ++adam_steps);
      } else {
        const CeResult loss = ce_loss(tape.output(), labels);
        epoch_loss += loss.value;
        if (!std::isfinite(loss.value))
          throw NumericError("train_cls: non-finite loss at epoch " + std::to_string(epoch));
        result.net.params.zero_grads();
        backward(result.net, tape, loss.grad);
        adam_step(result.net.params, cfg.learning_rate, ++adam_steps);
      }
    }

    ClsEpochStats stats;
    stats.epoch = epoch;
    stats.loss = chunks > 0 ? epoch_loss / chunks : 0.0;
    stats.msc = msc_batches > 0 ? epoch_msc / msc_batches : 0.0;
    Gallery epoch_gallery;
    if (metric_mode) epoch_gallery = make_gallery(result.net, train, cfg.batch_size);
    stats.val_accuracy = validation_accuracy(result.net, epoch_gallery, val, cfg);
    result.history.push_back(stats);
    if (stats.val_accuracy > best_acc) {
      best_acc = stats.val_accuracy;
      best_epoch = epoch;
      best = result.net;
    }
  }

  result.net = std::move(best);
  result.best_val_acc = best_acc;
  result.best_epoch = best_epoch;
  if (metric_mode) result.gallery = make_gallery(result.net, train, cfg.batch_size);
  return result;
}

void write_cls_history(const std::filesystem::path& path,
                       const std::vector<ClsEpochStats>& history) {
  std::ofstream out(path);
  if (!out) throw DataError("write_cls_history: cannot open " + path.string());
  out << "epoch,loss,val_accuracy,msc\n";
  char buf[160];
  for (const auto& h : history) {
    std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g\n", h.epoch, h.loss, h.val_accuracy,
                  h.msc);
    out << buf;
  }
}

}  // namespace damext
