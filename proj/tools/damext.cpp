// damext — dataset generation, training, extraction, and evaluation driver.
//
// Every subcommand accepts --config FILE with flat `key = value` lines;
// command-line flags override file values, unknown keys are rejected.
// Results go to stdout as a single JSON document; the resolved config is
// echoed to stderr. Exit codes: 0 ok, 2 config error, 3 data error,
// 4 numeric failure.

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "damext/checkpoint.hpp"
#include "damext/clsmodel.hpp"
#include "damext/dataset.hpp"
#include "damext/gradsuite.hpp"
#include "damext/metrics.hpp"
#include "damext/pipeline.hpp"
#include "damext/segmodel.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace damext;

namespace {

std::string fmt_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

void echo_config(const json& cfg, std::uint64_t seed) {
  std::cerr << "seed = " << seed << "\n";
  for (const auto& [key, value] : cfg.items())
    std::cerr << key << " = "
              << (value.is_string() ? value.get<std::string>() : value.dump()) << "\n";
}

void emit(const json& j) { std::cout << j.dump(2) << "\n"; }

json report_json(const MetricsReport& rep) { return json::parse(rep.to_json()); }

std::vector<LabelMask> load_masks(const fs::path& base, const std::vector<ManifestEntry>& entries,
                                  bool binarize) {
  std::vector<LabelMask> masks;
  masks.reserve(entries.size());
  for (const auto& e : entries) {
    LabelMask m = read_mask(base / e.mask_path);
    masks.push_back(binarize ? m.binarized() : std::move(m));
  }
  return masks;
}

bool is_ce_net(const Network<double>& net) {
  return !net.layers.empty() && net.layers.back().kind == LayerKind::Dense;
}

int ce_predict(const Network<double>& net, const Raster& raster, double* score) {
  Raster in = raster;
  if (net.input_size > 0 && (in.width != net.input_size || in.height != net.input_size))
    in = resize_bilinear(in, net.input_size, net.input_size);
  const Tape<double> tape = forward(net, rasters_to_tensor<double>({in}));
  const double l0 = tape.output().data[0];
  const double l1 = tape.output().data[1];
  const int pred = l1 > l0 ? 1 : 0;
  if (score) {
    const double m = std::max(l0, l1);
    const double e0 = std::exp(l0 - m), e1 = std::exp(l1 - m);
    *score = (pred == 1 ? e1 : e0) / (e0 + e1);
  }
  return pred;
}

struct SubcommandSetup {
  CLI::App* sub;
  std::uint64_t* seed;
};

SubcommandSetup add_subcommand(CLI::App& app, const std::string& name, const std::string& desc,
                               std::uint64_t& seed) {
  CLI::App* sub = app.add_subcommand(name, desc);
  sub->set_config("--config", "", "flat key = value file; flags win");
  sub->allow_config_extras(CLI::config_extras_mode::error);
  sub->add_option("--seed", seed, "master RNG seed")->capture_default_str();
  return {sub, &seed};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dam-reservoir extraction pipeline"};
  app.require_subcommand(1);
  int exit_code = 0;

  // ---------------------------------------------------------------- gen-data
  std::uint64_t gen_seed = 7;
  SceneSpec scene;
  SplitCounts counts;
  std::string gen_out;
  {
    auto [sub, seed] = add_subcommand(app, "gen-data", "generate a synthetic dataset", gen_seed);
    sub->add_option("--out", gen_out, "dataset root directory")->required();
    sub->add_option("--train", counts.train, "training scenes")->capture_default_str();
    sub->add_option("--val", counts.val, "validation scenes")->capture_default_str();
    sub->add_option("--test", counts.test, "test scenes")->capture_default_str();
    sub->add_option("--width", scene.width, "scene width")->capture_default_str();
    sub->add_option("--height", scene.height, "scene height")->capture_default_str();
    sub->add_option("--bodies", scene.num_bodies, "water bodies per scene")->capture_default_str();
    sub->add_option("--mix-dam", scene.mix_dam, "dam share of the shape mix")->capture_default_str();
    sub->add_option("--mix-lake", scene.mix_lake, "lake share")->capture_default_str();
    sub->add_option("--mix-river", scene.mix_river, "river share")->capture_default_str();
    sub->add_option("--noise", scene.noise_level, "pixel noise level")->capture_default_str();
    sub->add_option("--jitter", scene.contour_jitter, "contour jitter probability")
        ->capture_default_str();
    sub->add_option("--cloud-prob", scene.cloud_probability, "cloud probability")
        ->capture_default_str();
    sub->callback([&] {
      json cfg{{"out", gen_out},          {"train", counts.train},
               {"val", counts.val},       {"test", counts.test},
               {"width", scene.width},    {"height", scene.height},
               {"bodies", scene.num_bodies}, {"mix_dam", scene.mix_dam},
               {"mix_lake", scene.mix_lake}, {"mix_river", scene.mix_river},
               {"noise", scene.noise_level}, {"jitter", scene.contour_jitter},
               {"cloud_prob", scene.cloud_probability}};
      echo_config(cfg, gen_seed);
      const DatasetManifest manifest = build_dataset(scene, counts, gen_seed, gen_out);
      json crops;
      for (const char* split : {"train", "val", "test"})
        crops[split] = read_crop_labels(crop_labels_path(manifest.root, split)).size();
      emit(json{{"command", "gen-data"},
                {"seed", gen_seed},
                {"config", cfg},
                {"scenes", manifest.entries.size()},
                {"crops", crops},
                {"manifest", (manifest.root / "manifest.csv").string()}});
    });
  }

  // --------------------------------------------------------------- train-seg
  std::uint64_t seg_seed = 7;
  SegTrainConfig seg_cfg;
  std::string seg_data, seg_out, seg_history, seg_mining = "cross-image-random";
  {
    auto [sub, seed] = add_subcommand(app, "train-seg", "train the water segmentor", seg_seed);
    sub->add_option("--data", seg_data, "dataset root")->required();
    sub->add_option("--out", seg_out, "checkpoint output path")->required();
    sub->add_option("--history", seg_history, "per-epoch CSV output");
    sub->add_option("--K", seg_cfg.anchors_per_image, "anchors per image")->capture_default_str();
    sub->add_option("--beta", seg_cfg.margin_beta, "point-triplet margin")->capture_default_str();
    sub->add_option("--sigma", seg_cfg.loss_weight_sigma, "triplet-loss weight")
        ->capture_default_str();
    sub->add_option("--alpha", seg_cfg.focal.alpha, "focal alpha")->capture_default_str();
    sub->add_option("--gamma", seg_cfg.focal.gamma, "focal gamma")->capture_default_str();
    sub->add_option("--batch", seg_cfg.batch_size, "batch size")->capture_default_str();
    sub->add_option("--epochs", seg_cfg.epochs, "training epochs")->capture_default_str();
    sub->add_option("--lr", seg_cfg.learning_rate, "base learning rate")->capture_default_str();
    sub->add_option("--mining", seg_mining,
                    "cross-image-random | within-image | feature-hard")
        ->capture_default_str();
    sub->add_option("--threshold", seg_cfg.threshold, "water probability threshold")
        ->capture_default_str();
    sub->add_option("--feat-channels", seg_cfg.feat_channels, "point-feature channels")
        ->capture_default_str();
    sub->add_option("--augment", seg_cfg.augment_enabled, "enable training augmentation")
        ->capture_default_str();
    sub->callback([&] {
      seg_cfg.mining_strategy = parse_mining_strategy(seg_mining);
      json cfg{{"data", seg_data},
               {"out", seg_out},
               {"K", seg_cfg.anchors_per_image},
               {"beta", seg_cfg.margin_beta},
               {"sigma", seg_cfg.loss_weight_sigma},
               {"alpha", seg_cfg.focal.alpha},
               {"gamma", seg_cfg.focal.gamma},
               {"batch", seg_cfg.batch_size},
               {"epochs", seg_cfg.epochs},
               {"lr", seg_cfg.learning_rate},
               {"mining", seg_mining},
               {"threshold", seg_cfg.threshold},
               {"feat_channels", seg_cfg.feat_channels},
               {"augment", seg_cfg.augment_enabled}};
      echo_config(cfg, seg_seed);
      const DatasetManifest manifest = read_manifest(fs::path(seg_data) / "manifest.csv");
      const SegTrainResult result = train_seg(manifest, seg_cfg, seg_seed);
      save_checkpoint(seg_out, result.net);
      if (!seg_history.empty()) write_seg_history(seg_history, result.history);
      json last;
      if (!result.history.empty()) {
        const SegEpochStats& e = result.history.back();
        last = json{{"focal_loss", e.focal_loss},
                    {"triplet_loss", e.triplet_loss},
                    {"val_iou", e.val_iou}};
      }
      emit(json{{"command", "train-seg"},
                {"seed", seg_seed},
                {"config", cfg},
                {"epochs_run", result.history.size()},
                {"best_epoch", result.best_epoch},
                {"best_val_iou", result.best_val_iou},
                {"final", last},
                {"checkpoint", seg_out}});
    });
  }

  // --------------------------------------------------------------- train-cls
  std::uint64_t cls_seed = 7;
  ClsTrainConfig cls_cfg;
  std::string cls_data, cls_out, cls_gallery, cls_history, cls_objective = "pgml";
  {
    auto [sub, seed] = add_subcommand(app, "train-cls", "train the dam classifier", cls_seed);
    sub->add_option("--data", cls_data, "dataset root")->required();
    sub->add_option("--out", cls_out, "checkpoint output path")->required();
    sub->add_option("--gallery", cls_gallery, "gallery output path (metric objectives)");
    sub->add_option("--history", cls_history, "per-epoch CSV output");
    sub->add_option("--Z", cls_cfg.num_clusters, "K-means clusters")->capture_default_str();
    sub->add_option("--epsilon", cls_cfg.margin_epsilon, "image-triplet margin")
        ->capture_default_str();
    sub->add_option("--batch", cls_cfg.batch_size, "batch size")->capture_default_str();
    sub->add_option("--epochs", cls_cfg.epochs, "training epochs")->capture_default_str();
    sub->add_option("--lr", cls_cfg.learning_rate, "learning rate")->capture_default_str();
    sub->add_option("--kmeans-iters", cls_cfg.kmeans_iters, "Lloyd iterations")
        ->capture_default_str();
    sub->add_option("--embed-dim", cls_cfg.embed_dim, "embedding dimension")
        ->capture_default_str();
    sub->add_option("--input-size", cls_cfg.input_size, "network input side")
        ->capture_default_str();
    sub->add_option("--knn-k", cls_cfg.knn_k, "neighbours for gallery voting")
        ->capture_default_str();
    sub->add_option("--objective", cls_objective, "pgml | feature-hard | ce")
        ->capture_default_str();
    sub->callback([&] {
      cls_cfg.objective = parse_cls_objective(cls_objective);
      if (cls_cfg.objective != ClsObjective::CrossEntropy && cls_gallery.empty())
        throw ConfigError("train-cls: --gallery is required for metric objectives");
      json cfg{{"data", cls_data},
               {"out", cls_out},
               {"gallery", cls_gallery},
               {"Z", cls_cfg.num_clusters},
               {"epsilon", cls_cfg.margin_epsilon},
               {"batch", cls_cfg.batch_size},
               {"epochs", cls_cfg.epochs},
               {"lr", cls_cfg.learning_rate},
               {"kmeans_iters", cls_cfg.kmeans_iters},
               {"embed_dim", cls_cfg.embed_dim},
               {"input_size", cls_cfg.input_size},
               {"knn_k", cls_cfg.knn_k},
               {"objective", cls_objective}};
      echo_config(cfg, cls_seed);
      const ClsTrainResult result = train_cls(cls_data, cls_cfg, cls_seed);
      save_checkpoint(cls_out, result.net);
      if (!cls_gallery.empty() && cls_cfg.objective != ClsObjective::CrossEntropy)
        save_gallery(cls_gallery, result.gallery);
      if (!cls_history.empty()) write_cls_history(cls_history, result.history);
      emit(json{{"command", "train-cls"},
                {"seed", cls_seed},
                {"config", cfg},
                {"epochs_run", result.history.size()},
                {"best_epoch", result.best_epoch},
                {"best_val_accuracy", result.best_val_acc},
                {"gallery_size", result.gallery.size()},
                {"checkpoint", cls_out}});
    });
  }

  // ----------------------------------------------------------------- extract
  std::uint64_t ext_seed = 7;
  PipelineConfig ext_cfg;
  std::string ext_data, ext_split = "test", ext_seg, ext_cls, ext_gallery, ext_out;
  {
    auto [sub, seed] = add_subcommand(app, "extract", "run the two-stage pipeline", ext_seed);
    sub->add_option("--data", ext_data, "dataset root")->required();
    sub->add_option("--split", ext_split, "manifest split")->capture_default_str();
    sub->add_option("--seg", ext_seg, "segmentation checkpoint")->required();
    sub->add_option("--cls", ext_cls, "classifier checkpoint")->required();
    sub->add_option("--gallery", ext_gallery, "gallery file")->required();
    sub->add_option("--out", ext_out, "output directory")->required();
    sub->add_option("--threshold", ext_cfg.seg_threshold, "water probability threshold")
        ->capture_default_str();
    sub->add_option("--min-area", ext_cfg.min_area, "segment area floor")->capture_default_str();
    sub->add_option("--bbox-factor", ext_cfg.bbox_factor, "bbox expansion factor")
        ->capture_default_str();
    sub->add_option("--knn-k", ext_cfg.knn_k, "neighbours for gallery voting")
        ->capture_default_str();
    sub->callback([&] {
      json cfg{{"data", ext_data},         {"split", ext_split},
               {"seg", ext_seg},           {"cls", ext_cls},
               {"gallery", ext_gallery},   {"out", ext_out},
               {"threshold", ext_cfg.seg_threshold}, {"min_area", ext_cfg.min_area},
               {"bbox_factor", ext_cfg.bbox_factor}, {"knn_k", ext_cfg.knn_k}};
      echo_config(cfg, ext_seed);
      const DatasetManifest manifest = read_manifest(fs::path(ext_data) / "manifest.csv");
      const auto entries = manifest.split(ext_split);
      if (entries.empty()) throw DataError("extract: no scenes in split " + ext_split);
      const Network<double> seg_net = load_checkpoint<double>(ext_seg);
      const Network<double> cls_net = load_checkpoint<double>(ext_cls);
      const Gallery gallery = load_gallery(ext_gallery);
      long segments = 0, dams = 0;
      for (const auto& e : entries) {
        const Raster raster = read_raster(manifest.resolve(e.raster_path));
        const ExtractionMap map = run_pipeline(raster, seg_net, cls_net, gallery, ext_cfg);
        const fs::path mask_out = fs::path(ext_out) / e.mask_path;
        fs::create_directories(mask_out.parent_path());
        write_mask(map.mask, mask_out);
        const fs::path rel(e.mask_path);
        write_segments_csv(map, fs::path(ext_out) / rel.parent_path() /
                                    (rel.stem().string() + "_segments.csv"));
        segments += static_cast<long>(map.segments.size());
        for (const auto& s : map.segments)
          dams += s.predicted_class == WaterClass::Dam;
      }
      emit(json{{"command", "extract"},
                {"seed", ext_seed},
                {"config", cfg},
                {"scenes", entries.size()},
                {"segments", segments},
                {"dam_segments", dams},
                {"natural_segments", segments - dams}});
    });
  }

  // ---------------------------------------------------------------- eval-seg
  std::uint64_t evs_seed = 7;
  std::string evs_data, evs_split = "test", evs_pred, evs_ckpt;
  double evs_threshold = 0.5;
  {
    auto [sub, seed] = add_subcommand(app, "eval-seg", "evaluate water segmentation", evs_seed);
    sub->add_option("--data", evs_data, "dataset root")->required();
    sub->add_option("--split", evs_split, "manifest split")->capture_default_str();
    sub->add_option("--pred", evs_pred, "directory of predicted masks");
    sub->add_option("--seg", evs_ckpt, "segmentation checkpoint (predict on the fly)");
    sub->add_option("--threshold", evs_threshold, "water probability threshold")
        ->capture_default_str();
    sub->callback([&] {
      if (evs_pred.empty() == evs_ckpt.empty())
        throw ConfigError("eval-seg: give exactly one of --pred or --seg");
      json cfg{{"data", evs_data},   {"split", evs_split},          {"pred", evs_pred},
               {"seg", evs_ckpt},    {"threshold", evs_threshold}};
      echo_config(cfg, evs_seed);
      const DatasetManifest manifest = read_manifest(fs::path(evs_data) / "manifest.csv");
      const auto entries = manifest.split(evs_split);
      if (entries.empty()) throw DataError("eval-seg: no scenes in split " + evs_split);
      const std::vector<LabelMask> gts = load_masks(manifest.root, entries, true);
      std::vector<LabelMask> preds;
      if (!evs_pred.empty()) {
        preds = load_masks(evs_pred, entries, true);
      } else {
        const Network<double> net = load_checkpoint<double>(evs_ckpt);
        for (const auto& e : entries)
          preds.push_back(predict_mask(net, read_raster(manifest.resolve(e.raster_path)),
                                       evs_threshold));
      }
      const MetricsReport rep = report(preds, gts, ClassSelection::WaterLand);
      emit(json{{"command", "eval-seg"},
                {"seed", evs_seed},
                {"config", cfg},
                {"report", report_json(rep)}});
    });
  }

  // ---------------------------------------------------------------- eval-cls
  std::uint64_t evc_seed = 7;
  std::string evc_data, evc_split = "test", evc_ckpt, evc_gallery, evc_rows;
  int evc_k = 1;
  {
    auto [sub, seed] = add_subcommand(app, "eval-cls", "evaluate crop classification", evc_seed);
    sub->add_option("--data", evc_data, "dataset root")->required();
    sub->add_option("--split", evc_split, "crop split")->capture_default_str();
    sub->add_option("--cls", evc_ckpt, "classifier checkpoint")->required();
    sub->add_option("--gallery", evc_gallery, "gallery file (metric checkpoints)");
    sub->add_option("--knn-k", evc_k, "neighbours for gallery voting")->capture_default_str();
    sub->add_option("--rows", evc_rows, "per-crop CSV output (path,label,similarity)");
    sub->callback([&] {
      json cfg{{"data", evc_data},       {"split", evc_split}, {"cls", evc_ckpt},
               {"gallery", evc_gallery}, {"knn_k", evc_k},     {"rows", evc_rows}};
      echo_config(cfg, evc_seed);
      const fs::path root(evc_data);
      const auto crops = read_crop_labels(crop_labels_path(root, evc_split));
      if (crops.empty()) throw DataError("eval-cls: no crops in split " + evc_split);
      const Network<double> net = load_checkpoint<double>(evc_ckpt);
      const bool ce = is_ce_net(net);
      Gallery gallery;
      if (!ce) {
        if (evc_gallery.empty())
          throw ConfigError("eval-cls: --gallery is required for metric checkpoints");
        gallery = load_gallery(evc_gallery);
      }
      std::vector<int> pred, gt;
      std::string rows = "path,label,similarity\n";
      for (const auto& e : crops) {
        const Raster raster = read_raster(root / "crops" / e.path);
        int label = 0;
        double score = 0;
        if (ce) {
          label = ce_predict(net, raster, &score);
        } else {
          const NnResult r = nn_infer(raster, net, gallery, evc_k);
          label = r.label == WaterClass::Dam ? 1 : 0;
          score = r.similarity;
        }
        pred.push_back(label);
        gt.push_back(e.label);
        rows += e.path + "," + std::to_string(label) + "," + fmt_g(score) + "\n";
      }
      if (!evc_rows.empty()) {
        std::ofstream out(evc_rows, std::ios::binary);
        if (!out) throw DataError("eval-cls: cannot open " + evc_rows);
        out << rows;
      }
      emit(json{{"command", "eval-cls"},
                {"seed", evc_seed},
                {"config", cfg},
                {"mode", ce ? "ce" : "knn"},
                {"n", pred.size()},
                {"accuracy", accuracy(pred, gt)}});
    });
  }

  // ------------------------------------------------------------ eval-extract
  std::uint64_t evx_seed = 7;
  std::string evx_data, evx_split = "test", evx_pred;
  {
    auto [sub, seed] =
        add_subcommand(app, "eval-extract", "evaluate 3-class extraction maps", evx_seed);
    sub->add_option("--data", evx_data, "dataset root")->required();
    sub->add_option("--split", evx_split, "manifest split")->capture_default_str();
    sub->add_option("--pred", evx_pred, "directory of predicted 3-class masks")->required();
    sub->callback([&] {
      json cfg{{"data", evx_data}, {"split", evx_split}, {"pred", evx_pred}};
      echo_config(cfg, evx_seed);
      const DatasetManifest manifest = read_manifest(fs::path(evx_data) / "manifest.csv");
      const auto entries = manifest.split(evx_split);
      if (entries.empty()) throw DataError("eval-extract: no scenes in split " + evx_split);
      const std::vector<LabelMask> gts = load_masks(manifest.root, entries, false);
      const std::vector<LabelMask> preds = load_masks(evx_pred, entries, false);
      for (const auto& m : preds)
        if (m.arity != 3) throw DataError("eval-extract: predicted masks must be 3-class");
      const MetricsReport dam = report(preds, gts, ClassSelection::Dam);
      const MetricsReport dn = report(preds, gts, ClassSelection::DamNatural);
      const MetricsReport dnb = report(preds, gts, ClassSelection::DamNaturalLand);
      emit(json{{"command", "eval-extract"},
                {"seed", evx_seed},
                {"config", cfg},
                {"iou_d", *dam.iou_d},
                {"miou_dn", *dn.miou_dn},
                {"miou_dnb", *dnb.miou_dnb},
                {"n", dam.n},
                {"empty_class_used",
                 dam.empty_class_used || dn.empty_class_used || dnb.empty_class_used}});
    });
  }

  // --------------------------------------------------------------- gradcheck
  std::uint64_t gc_seed = 7;
  int gc_seeds = 20;
  double gc_tolerance = 1e-4;
  {
    auto [sub, seed] = add_subcommand(app, "gradcheck", "finite-difference verification", gc_seed);
    sub->add_option("--seeds", gc_seeds, "random trials per network")->capture_default_str();
    sub->add_option("--tolerance", gc_tolerance, "max relative error")->capture_default_str();
    sub->callback([&] {
      json cfg{{"seeds", gc_seeds}, {"tolerance", gc_tolerance}};
      echo_config(cfg, gc_seed);
      const GradSuiteResult result = run_gradcheck_suite(gc_seeds, gc_tolerance);
      json cases = json::array();
      for (const auto& c : result.cases)
        cases.push_back(json{{"name", c.name},
                             {"max_rel_err", c.report.max_rel_err},
                             {"checked", c.report.checked},
                             {"excluded", c.report.excluded},
                             {"passed", c.report.passed}});
      emit(json{{"command", "gradcheck"},
                {"seed", gc_seed},
                {"config", cfg},
                {"checked", result.checked},
                {"excluded", result.excluded},
                {"max_rel_err", result.max_rel_err},
                {"passed", result.passed},
                {"cases", cases}});
      if (!result.passed) exit_code = 4;
    });
  }

  // ------------------------------------------------------------------- sweep
  std::uint64_t sw_seed = 7;
  std::string sw_data, sw_param, sw_values, sw_out;
  int sw_epochs = -1;
  {
    auto [sub, seed] = add_subcommand(app, "sweep", "hyperparameter sweep", sw_seed);
    sub->add_option("--data", sw_data, "dataset root")->required();
    sub->add_option("--param", sw_param, "K | beta | sigma | Z | epsilon | batch | knn_k")
        ->required();
    sub->add_option("--values", sw_values, "comma-separated values")->required();
    sub->add_option("--out", sw_out, "CSV output path")->required();
    sub->add_option("--epochs", sw_epochs, "override training epochs");
    sub->callback([&] {
      json cfg{{"data", sw_data},
               {"param", sw_param},
               {"values", sw_values},
               {"out", sw_out},
               {"epochs", sw_epochs}};
      echo_config(cfg, sw_seed);
      std::vector<double> values;
      {
        std::string token;
        std::istringstream in(sw_values);
        while (std::getline(in, token, ','))
          if (!token.empty()) values.push_back(std::stod(token));
      }
      if (values.empty()) throw ConfigError("sweep: no values given");
      const bool seg_param = sw_param == "K" || sw_param == "beta" || sw_param == "sigma";
      const bool cls_param = sw_param == "Z" || sw_param == "epsilon" ||
                             sw_param == "batch" || sw_param == "knn_k";
      if (!seg_param && !cls_param) throw ConfigError("sweep: unknown --param " + sw_param);

      json rows = json::array();
      std::string csv = "param,value,metric,score\n";
      auto add_row = [&](double value, const std::string& metric, double score) {
        rows.push_back(json{{"value", value}, {"metric", metric}, {"score", score}});
        csv += sw_param + "," + fmt_g(value) + "," + metric + "," + fmt_g(score) + "\n";
      };
      for (const double v : values) {
        if (seg_param) {
          SegTrainConfig c;
          if (sw_epochs >= 0) c.epochs = sw_epochs;
          if (sw_param == "K") c.anchors_per_image = static_cast<int>(v);
          if (sw_param == "beta") c.margin_beta = v;
          if (sw_param == "sigma") c.loss_weight_sigma = v;
          const DatasetManifest manifest = read_manifest(fs::path(sw_data) / "manifest.csv");
          const SegTrainResult r = train_seg(manifest, c, sw_seed);
          add_row(v, "val_iou", r.best_val_iou);
        } else {
          ClsTrainConfig c;
          if (sw_epochs >= 0) c.epochs = sw_epochs;
          if (sw_param == "Z") c.num_clusters = static_cast<int>(v);
          if (sw_param == "epsilon") c.margin_epsilon = v;
          if (sw_param == "batch") c.batch_size = static_cast<int>(v);
          if (sw_param == "knn_k") c.knn_k = static_cast<int>(v);
          const ClsTrainResult r = train_cls(sw_data, c, sw_seed);
          double msc = 0;
          if (r.best_epoch >= 1 && r.best_epoch <= static_cast<int>(r.history.size()))
            msc = r.history[r.best_epoch - 1].msc;
          add_row(v, "accuracy", r.best_val_acc);
          add_row(v, "msc", msc);
        }
      }
      std::ofstream out(sw_out, std::ios::binary);
      if (!out) throw DataError("sweep: cannot open " + sw_out);
      out << csv;
      emit(json{{"command", "sweep"},
                {"seed", sw_seed},
                {"config", cfg},
                {"rows", rows},
                {"csv", sw_out}});
    });
  }

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e);
      return code == 0 ? 0 : 2;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return exit_code;
}
