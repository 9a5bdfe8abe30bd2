#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "damext/network.hpp"

namespace damext {

/// What a loss evaluation hands back to the checker: the scalar, gradients
/// w.r.t. the network output (and optionally the tap), plus the hash of the
/// boolean decisions taken (hinges, clamps) for nondifferentiability probes.
template <class S>
struct LossProbe {
  S value = 0;
  Tensor<S> grad_output;
  Tensor<S> grad_tap;  // leave empty when the loss ignores the tap
  std::uint64_t signature = sig_init();
};

template <class S>
using LossFn = std::function<LossProbe<S>(const Tensor<S>& output, const Tensor<S>& tap)>;

struct GradCheckParam {
  std::string name;
  double max_rel_err = 0.0;
  long checked = 0;
  long excluded = 0;
};

struct GradCheckReport {
  double tolerance = 0.0;
  double max_rel_err = 0.0;
  long checked = 0;
  long excluded = 0;
  bool passed = false;
  std::vector<GradCheckParam> params;
};

/// Central finite differences against the analytic backward pass. Parameters
/// are excluded when |analytic| <= 1e-6 (comparison is meaningless near zero),
/// when the probes disagree on any boolean decision (the step crossed a relu
/// kink, hinge boundary, or clamp), or when the half-step estimate shows the
/// central difference itself has not converged (truncation-dominated third
/// derivative, e.g. triplet distances near zero). The convergence test never
/// looks at the analytic value, so it cannot mask a wrong gradient.
template <class S>
GradCheckReport check_gradients(Network<S>& net, const LossFn<S>& loss, const Tensor<S>& input,
                                double tolerance = 1e-4, double step = 1e-4) {
  static_assert(sizeof(S) >= 8, "finite differences at h=1e-4 need double precision");

  const Tensor<S> empty_tap;
  auto evaluate = [&](S* value, std::uint64_t* signature) {
    Tape<S> tape = forward(net, input);
    const Tensor<S>& tap = net.tap >= 0 ? tape.outputs[net.tap] : empty_tap;
    LossProbe<S> probe = loss(tape.output(), tap);
    if (!std::isfinite(static_cast<double>(probe.value)))
      throw NumericError("check_gradients: non-finite loss");
    *value = probe.value;
    *signature = sig_mix(tape.signature, probe.signature);
    return probe;
  };

  // analytic pass
  S base_value = 0;
  std::uint64_t base_sig = 0;
  LossProbe<S> probe = evaluate(&base_value, &base_sig);
  net.params.zero_grads();
  {
    Tape<S> tape = forward(net, input);
    backward(net, tape, probe.grad_output,
             probe.grad_tap.empty() ? nullptr : &probe.grad_tap);
  }
  std::vector<Matrix<S>> analytic;
  analytic.reserve(net.params.entries.size());
  for (const auto& p : net.params.entries) analytic.push_back(p.grad);

  GradCheckReport report;
  report.tolerance = tolerance;
  const S h = static_cast<S>(step);
  for (std::size_t pi = 0; pi < net.params.entries.size(); ++pi) {
    Param<S>& p = net.params.entries[pi];
    GradCheckParam entry;
    entry.name = p.name;
    for (Eigen::Index j = 0; j < p.value.size(); ++j) {
      const S original = p.value.data()[j];
      S plus = 0, minus = 0, plus_half = 0, minus_half = 0;
      std::uint64_t sig_plus = 0, sig_minus = 0, sig_ph = 0, sig_mh = 0;
      p.value.data()[j] = original + h;
      evaluate(&plus, &sig_plus);
      p.value.data()[j] = original - h;
      evaluate(&minus, &sig_minus);
      p.value.data()[j] = original + h / 2;
      evaluate(&plus_half, &sig_ph);
      p.value.data()[j] = original - h / 2;
      evaluate(&minus_half, &sig_mh);
      p.value.data()[j] = original;

      const double g = static_cast<double>(analytic[pi].data()[j]);
      if (sig_plus != sig_minus || sig_ph != sig_plus || sig_mh != sig_plus ||
          std::abs(g) <= 1e-6) {
        ++entry.excluded;
        continue;
      }
      const double fd = static_cast<double>(plus - minus) / (2.0 * static_cast<double>(h));
      const double fd_half =
          static_cast<double>(plus_half - minus_half) / static_cast<double>(h);
      // step-doubling convergence test: truncation in fd is ~(4/3)|fd - fd_half|
      if (std::abs(fd - fd_half) >
          0.25 * tolerance * std::max(std::abs(fd), std::abs(fd_half))) {
        ++entry.excluded;
        continue;
      }
      const double rel = std::abs(g - fd) / std::max(std::abs(g), std::abs(fd));
      entry.max_rel_err = std::max(entry.max_rel_err, rel);
      ++entry.checked;
    }
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.checked += entry.checked;
    report.excluded += entry.excluded;
    report.params.push_back(std::move(entry));
  }
  report.passed = report.checked > 0 && report.max_rel_err <= tolerance;
  return report;
}

}  // namespace damext
