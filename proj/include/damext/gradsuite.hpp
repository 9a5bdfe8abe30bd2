#pragma once

#include <string>
#include <vector>

#include "damext/gradcheck.hpp"

namespace damext {

struct GradSuiteCase {
  std::string name;  // "seg-focal-plml-<seed>" / "cls-pgml-<seed>"
  GradCheckReport report;
};

struct GradSuiteResult {
  std::vector<GradSuiteCase> cases;
  double max_rel_err = 0;
  long checked = 0, excluded = 0;
  bool passed = false;
};

/// Reduced-width instances of both toy networks, checked under the composite
/// segmentation loss (focal + weighted point-triplet) and the image-triplet
/// loss, over the given number of seeds.
GradSuiteResult run_gradcheck_suite(int seeds, double tolerance = 1e-4);

}  // namespace damext
