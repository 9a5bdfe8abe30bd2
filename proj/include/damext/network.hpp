#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "damext/layers.hpp"
#include "damext/rng.hpp"
#include "damext/signature.hpp"
#include "damext/tensor.hpp"

namespace damext {

template <class S>
struct Param {
  std::string name;
  Matrix<S> value, grad, m, v;

  Param(std::string name_, int rows, int cols)
      : name(std::move(name_)),
        value(Matrix<S>::Zero(rows, cols)),
        grad(Matrix<S>::Zero(rows, cols)),
        m(Matrix<S>::Zero(rows, cols)),
        v(Matrix<S>::Zero(rows, cols)) {}
};

template <class S>
struct ParamStore {
  std::vector<Param<S>> entries;

  Param<S>& at(const std::string& name) {
    for (auto& p : entries)
      if (p.name == name) return p;
    throw ConfigError("ParamStore: no parameter named " + name);
  }

  void zero_grads() {
    for (auto& p : entries) p.grad.setZero();
  }

  std::size_t scalar_count() const {
    std::size_t total = 0;
    for (const auto& p : entries) total += static_cast<std::size_t>(p.value.size());
    return total;
  }

  bool grads_finite() const {
    for (const auto& p : entries)
      if (!p.grad.allFinite()) return false;
    return true;
  }
};

template <class S>
struct Tape {
  Tensor<S> input;
  std::vector<Tensor<S>> outputs;
  std::uint64_t signature = sig_init();
  bool l2_zero = false;

  const Tensor<S>& output() const { return outputs.back(); }
};

template <class S>
struct Network {
  std::vector<LayerSpec> layers;
  ParamStore<S> params;
  int input_channels = 3;
  int input_size = 0;  // expected square input edge; 0 = unconstrained
  int tap = -1;        // layer whose output doubles as the point-feature map

  // param index per layer, -1 where not learnable
  std::vector<int> weight_index;
  std::vector<int> bias_index;

  Param<S>& weight(int layer) { return params.entries[weight_index[layer]]; }
  const Param<S>& weight(int layer) const { return params.entries[weight_index[layer]]; }
  Param<S>& bias(int layer) { return params.entries[bias_index[layer]]; }
  const Param<S>& bias(int layer) const { return params.entries[bias_index[layer]]; }
};

template <class S>
Network<S> make_network(std::vector<LayerSpec> layers, int input_channels, int tap = -1,
                        int input_size = 0) {
  if (layers.empty()) throw ConfigError("make_network: no layers");
  if (tap < -1 || tap >= static_cast<int>(layers.size()))
    throw ConfigError("make_network: tap index out of range");

  Network<S> net;
  net.input_channels = input_channels;
  net.input_size = input_size;
  net.tap = tap;
  net.weight_index.assign(layers.size(), -1);
  net.bias_index.assign(layers.size(), -1);

  int cur_c = input_channels;
  bool spatial_collapsed = false;  // past a pooling-to-1x1 or dense layer
  for (std::size_t i = 0; i < layers.size(); ++i) {
    LayerSpec& spec = layers[i];
    const std::string label = "layer " + std::to_string(i) + " (" +
                              layer_kind_name(spec.kind) + ")";
    switch (spec.kind) {
      case LayerKind::Conv3x3: {
        if (spec.in_channels != cur_c)
          throw ConfigError("make_network: " + label + " expects " +
                            std::to_string(spec.in_channels) + " channels, chain gives " +
                            std::to_string(cur_c));
        if (spec.out_channels < 1) throw ConfigError("make_network: " + label + " needs out_channels");
        if (spatial_collapsed)
          throw ConfigError("make_network: " + label + " after spatial collapse");
        net.weight_index[i] = static_cast<int>(net.params.entries.size());
        net.params.entries.emplace_back("layer" + std::to_string(i) + ".weight",
                                        spec.out_channels, spec.in_channels * 9);
        if (spec.has_bias) {
          net.bias_index[i] = static_cast<int>(net.params.entries.size());
          net.params.entries.emplace_back("layer" + std::to_string(i) + ".bias",
                                          spec.out_channels, 1);
        }
        cur_c = spec.out_channels;
        break;
      }
      case LayerKind::Dense: {
        if (spec.in_channels < 1 || spec.out_channels < 1)
          throw ConfigError("make_network: " + label + " needs in/out feature counts");
        net.weight_index[i] = static_cast<int>(net.params.entries.size());
        net.params.entries.emplace_back("layer" + std::to_string(i) + ".weight",
                                        spec.out_channels, spec.in_channels);
        if (spec.has_bias) {
          net.bias_index[i] = static_cast<int>(net.params.entries.size());
          net.params.entries.emplace_back("layer" + std::to_string(i) + ".bias",
                                          spec.out_channels, 1);
        }
        cur_c = spec.out_channels;
        spatial_collapsed = true;
        break;
      }
      case LayerKind::GlobalAvgPool:
        spec.in_channels = spec.out_channels = cur_c;
        spatial_collapsed = true;
        break;
      case LayerKind::Relu:
      case LayerKind::Stride2Downsample:
      case LayerKind::BilinearUpsample2:
      case LayerKind::L2Normalize:
        spec.in_channels = spec.out_channels = cur_c;
        break;
    }
  }
  net.layers = std::move(layers);
  return net;
}

/// Fan-in-scaled uniform init: weights ~ U(-sqrt(6/fan_in), +sqrt(6/fan_in)),
/// biases zero. Deterministic in both rng state and fill order.
template <class S>
void init_params(Network<S>& net, Rng& rng) {
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    if (net.weight_index[static_cast<int>(i)] < 0) continue;
    Param<S>& w = net.weight(static_cast<int>(i));
    const double fan_in = static_cast<double>(w.value.cols());
    const double bound = std::sqrt(6.0 / fan_in);
    for (Eigen::Index r = 0; r < w.value.rows(); ++r)
      for (Eigen::Index c = 0; c < w.value.cols(); ++c)
        w.value(r, c) = static_cast<S>(rng.uniform(-bound, bound));
    if (net.bias_index[static_cast<int>(i)] >= 0)
      net.bias(static_cast<int>(i)).value.setZero();
  }
}

template <class S>
Tape<S> forward(const Network<S>& net, const Tensor<S>& input) {
  if (input.c != net.input_channels)
    throw ShapeError("forward: network expects " + std::to_string(net.input_channels) +
                     " input channels, got " + std::to_string(input.c));
  if (net.input_size > 0 && (input.h != net.input_size || input.w != net.input_size))
    throw ShapeError("forward: network expects " + std::to_string(net.input_size) + "x" +
                     std::to_string(net.input_size) + " input, got " +
                     std::to_string(input.h) + "x" + std::to_string(input.w));

  Tape<S> tape;
  tape.input = input;
  tape.outputs.reserve(net.layers.size());
  const Tensor<S>* cur = &tape.input;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const LayerSpec& spec = net.layers[i];
    Tensor<S> y;
    switch (spec.kind) {
      case LayerKind::Conv3x3: {
        if (cur->c != spec.in_channels)
          throw ShapeError("forward: layer " + std::to_string(i) + " (conv3x3) expects " +
                           std::to_string(spec.in_channels) + " channels, got " +
                           std::to_string(cur->c));
        const Matrix<S>* b = net.bias_index[i] >= 0 ? &net.bias(static_cast<int>(i)).value
                                                    : nullptr;
        y = conv3x3_forward(*cur, net.weight(static_cast<int>(i)).value, b);
        break;
      }
      case LayerKind::Relu:
        for (Eigen::Index j = 0; j < cur->data.size(); ++j)
          tape.signature = sig_push(tape.signature, cur->data[j] > S(0));
        y = relu_forward(*cur);
        break;
      case LayerKind::Stride2Downsample:
        y = downsample2_forward(*cur);
        break;
      case LayerKind::BilinearUpsample2:
        y = upsample2_forward(*cur);
        break;
      case LayerKind::GlobalAvgPool:
        y = global_avg_pool_forward(*cur);
        break;
      case LayerKind::Dense: {
        if (cur->sample_size() != spec.in_channels)
          throw ShapeError("forward: layer " + std::to_string(i) + " (dense) expects " +
                           std::to_string(spec.in_channels) + " features, got " +
                           std::to_string(cur->sample_size()));
        const Matrix<S>* b = net.bias_index[i] >= 0 ? &net.bias(static_cast<int>(i)).value
                                                    : nullptr;
        y = dense_forward(*cur, net.weight(static_cast<int>(i)).value, b);
        break;
      }
      case LayerKind::L2Normalize: {
        const int features = cur->sample_size();
        for (int ni = 0; ni < cur->n; ++ni) {
          Eigen::Map<const Vector<S>> xv(cur->sample(ni), features);
          tape.signature = sig_push(tape.signature, xv.norm() >= static_cast<S>(kL2NormEps));
        }
        bool zero = false;
        y = l2normalize_forward(*cur, &zero);
        if (zero) tape.l2_zero = true;
        break;
      }
    }
    tape.outputs.push_back(std::move(y));
    cur = &tape.outputs.back();
  }
  return tape;
}

/// Accumulates parameter gradients (caller zeroes first) and returns the
/// input gradient. grad_tap, when given, is injected at the tap layer's
/// output so losses on the point-feature map flow into the encoder.
template <class S>
Tensor<S> backward(Network<S>& net, const Tape<S>& tape, const Tensor<S>& grad_output,
                   const Tensor<S>* grad_tap = nullptr) {
  if (tape.outputs.size() != net.layers.size())
    throw DataError("backward: tape does not match network depth");
  if (!grad_output.same_shape(tape.outputs.back()))
    throw ShapeError("backward: output gradient shape mismatch");
  if (grad_tap) {
    if (net.tap < 0) throw ConfigError("backward: tap gradient given but network has no tap");
    if (!grad_tap->same_shape(tape.outputs[net.tap]))
      throw ShapeError("backward: tap gradient shape mismatch");
  }

  Tensor<S> g = grad_output;
  for (int i = static_cast<int>(net.layers.size()) - 1; i >= 0; --i) {
    if (grad_tap && i == net.tap) g.data += grad_tap->data;
    const Tensor<S>& x = i == 0 ? tape.input : tape.outputs[i - 1];
    const LayerSpec& spec = net.layers[i];
    switch (spec.kind) {
      case LayerKind::Conv3x3: {
        Matrix<S>* db = net.bias_index[i] >= 0 ? &net.bias(i).grad : nullptr;
        g = conv3x3_backward(x, net.weight(i).value, g, net.weight(i).grad, db);
        break;
      }
      case LayerKind::Relu:
        g = relu_backward(x, g);
        break;
      case LayerKind::Stride2Downsample:
        g = downsample2_backward(x, g);
        break;
      case LayerKind::BilinearUpsample2:
        g = upsample2_backward(x, g);
        break;
      case LayerKind::GlobalAvgPool:
        g = global_avg_pool_backward(x, g);
        break;
      case LayerKind::Dense: {
        Matrix<S>* db = net.bias_index[i] >= 0 ? &net.bias(i).grad : nullptr;
        g = dense_backward(x, net.weight(i).value, g, net.weight(i).grad, db);
        break;
      }
      case LayerKind::L2Normalize:
        g = l2normalize_backward(x, g);
        break;
    }
  }
  return g;
}

}  // namespace damext
