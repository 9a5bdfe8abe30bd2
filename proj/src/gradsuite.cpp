#include "damext/gradsuite.hpp"

#include <algorithm>

#include "damext/clsmodel.hpp"
#include "damext/focal.hpp"
#include "damext/kmeans.hpp"
#include "damext/pgml.hpp"
#include "damext/plml.hpp"
#include "damext/segmodel.hpp"

namespace damext {
namespace {

Network<double> small_seg_net() {
  std::vector<LayerSpec> layers = {
      {LayerKind::Conv3x3, 3, 4, true},
      {LayerKind::Relu},
      {LayerKind::Stride2Downsample},
      {LayerKind::Conv3x3, 4, 6, true},
      {LayerKind::Relu},
      {LayerKind::Stride2Downsample},
      {LayerKind::Conv3x3, 6, 4, true},
      {LayerKind::Relu},
      {LayerKind::BilinearUpsample2},
      {LayerKind::Conv3x3, 4, 4, true},
      {LayerKind::Relu},
      {LayerKind::BilinearUpsample2},
      {LayerKind::Conv3x3, 4, 1, true},
  };
  return make_network<double>(std::move(layers), 3, /*tap=*/7);
}

Network<double> small_cls_net() {
  std::vector<LayerSpec> layers = {
      {LayerKind::Conv3x3, 3, 4, true},
      {LayerKind::Relu},
      {LayerKind::Stride2Downsample},
      {LayerKind::Conv3x3, 4, 6, true},
      {LayerKind::Relu},
      {LayerKind::Stride2Downsample},
      {LayerKind::Conv3x3, 6, 6, true},
      {LayerKind::Relu},
      {LayerKind::GlobalAvgPool},
      {LayerKind::Dense, 6, 6, true},
      {LayerKind::L2Normalize},
  };
  return make_network<double>(std::move(layers), 3, /*tap=*/-1, 8);
}

Tensor<double> random_input(int n, int h, int w, Rng& rng) {
  Tensor<double> t(n, 3, h, w);
  for (Eigen::Index i = 0; i < t.data.size(); ++i) t.data[i] = rng.uniform();
  return t;
}

LabelMask random_mask2(int h, int w, Rng& rng) {
  LabelMask m;
  m.width = w;
  m.height = h;
  m.arity = 2;
  m.values.resize(static_cast<Eigen::Index>(w) * h);
  for (Eigen::Index i = 0; i < m.values.size(); ++i) m.values[i] = rng.bernoulli(0.4) ? 1 : 0;
  return m;
}

GradCheckReport check_seg_case(std::uint64_t seed, double tolerance) {
  Rng rng(seed);
  Network<double> net = small_seg_net();
  init_params(net, rng);
  const Tensor<double> input = random_input(2, 8, 8, rng);

  std::vector<LabelMask> gts;
  for (int b = 0; b < input.n; ++b) gts.push_back(random_mask2(8, 8, rng));

  // freeze the mined triplets: mining is data selection, not part of the
  // differentiable objective
  std::vector<PointTriplet> triplets;
  {
    const Tape<double> tape = forward(net, input);
    std::vector<TripletPools> pools;
    for (int b = 0; b < input.n; ++b) {
      LabelMask pred;
      pred.width = 8;
      pred.height = 8;
      pred.arity = 2;
      pred.values.resize(64);
      for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x)
          pred.values[y * 8 + x] = sigmoid(tape.output().at(b, 0, y, x)) >= 0.5 ? 1 : 0;
      pools.push_back(build_pools(pred, gts[b]));
    }
    triplets = mine_triplets(pools, 8, MiningStrategy::CrossImageRandom, rng,
                             &tape.outputs[net.tap]);
  }

  const FocalConfig focal_cfg;
  const double sigma = 0.25;  // off-default so both loss terms matter
  LossFn<double> loss = [&](const Tensor<double>& output, const Tensor<double>& tap) {
    Tensor<double> probs(output.n, 1, output.h, output.w);
    for (Eigen::Index i = 0; i < output.data.size(); ++i)
      probs.data[i] = sigmoid(output.data[i]);
    const FocalBatch<double> fb = focal_loss(probs, gts, focal_cfg);
    const PlmlResult<double> pl = plml_loss(tap, triplets, 0.05);

    LossProbe<double> probe;
    probe.value = fb.value + sigma * pl.value;
    probe.grad_output = Tensor<double>(output.n, 1, output.h, output.w);
    probe.grad_output.data = fb.grad.data * probs.data * (1.0 - probs.data);
    probe.grad_tap = Tensor<double>(tap.n, tap.c, tap.h, tap.w);
    probe.grad_tap.data = sigma * pl.grad.data;
    probe.signature = sig_mix(fb.signature, pl.signature);
    return probe;
  };
  return check_gradients(net, loss, input, tolerance);
}

GradCheckReport check_cls_case(std::uint64_t seed, double tolerance) {
  Rng rng(seed);
  Network<double> net = small_cls_net();
  init_params(net, rng);
  const int batch = 6;
  const Tensor<double> input = random_input(batch, 8, 8, rng);

  std::vector<int> labels(batch);
  for (int i = 0; i < batch; ++i) labels[i] = rng.bernoulli(0.5) ? 1 : 0;
  if (std::count(labels.begin(), labels.end(), 1) == 0) labels[0] = 1;
  if (std::count(labels.begin(), labels.end(), 0) == 0) labels[1] = 0;

  // freeze clusters and triplets from the initial embeddings
  std::vector<ImageTriplet> triplets;
  {
    const Tape<double> tape = forward(net, input);
    Matrix<double> emb(batch, tape.output().sample_size());
    for (int i = 0; i < batch; ++i)
      for (int j = 0; j < emb.cols(); ++j) emb(i, j) = tape.output().sample(i)[j];
    const ClusterAssignment<double> km = kmeans(emb, 2, 10, rng);
    triplets = mine_pgml(emb, labels, km.labels);
    if (triplets.empty()) triplets = mine_fbml(emb, labels);
  }

  LossFn<double> loss = [&](const Tensor<double>& output, const Tensor<double>&) {
    Matrix<double> emb(output.n, output.sample_size());
    for (int i = 0; i < output.n; ++i)
      for (int j = 0; j < emb.cols(); ++j) emb(i, j) = output.sample(i)[j];
    const PgmlResult<double> pg = pgml_loss(emb, triplets, 0.05);

    LossProbe<double> probe;
    probe.value = pg.value;
    probe.grad_output = Tensor<double>(output.n, output.c, 1, 1);
    for (int i = 0; i < output.n; ++i)
      for (int j = 0; j < emb.cols(); ++j) probe.grad_output.sample(i)[j] = pg.grad(i, j);
    probe.signature = pg.signature;
    return probe;
  };
  return check_gradients(net, loss, input, tolerance);
}

}  // namespace

GradSuiteResult run_gradcheck_suite(int seeds, double tolerance) {
  if (seeds < 1) throw ConfigError("run_gradcheck_suite: seeds must be >= 1");
  GradSuiteResult result;
  result.passed = true;
  for (int s = 0; s < seeds; ++s) {
    GradSuiteCase seg{"seg-focal-plml-" + std::to_string(s),
                      check_seg_case(1000 + static_cast<std::uint64_t>(s), tolerance)};
    GradSuiteCase cls{"cls-pgml-" + std::to_string(s),
                      check_cls_case(2000 + static_cast<std::uint64_t>(s), tolerance)};
    for (const auto* c : {&seg, &cls}) {
      result.max_rel_err = std::max(result.max_rel_err, c->report.max_rel_err);
      result.checked += c->report.checked;
      result.excluded += c->report.excluded;
      result.passed = result.passed && c->report.passed;
    }
    result.cases.push_back(std::move(seg));
    result.cases.push_back(std::move(cls));
  }
  return result;
}

}  // namespace damext
