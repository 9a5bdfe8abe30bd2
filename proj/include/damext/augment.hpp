#pragma once

#include "damext/raster.hpp"
#include "damext/rng.hpp"

namespace damext {

/// One sampled set of augmentation decisions. Geometric fields apply to
/// raster and mask alike; the photometric fields touch only the raster.
struct AugmentDraws {
  bool hflip = false;
  bool vflip = false;
  int quarter_turns = 0;             // rotation by quarter_turns * 90 deg CCW
  double brightness = 0.0;           // added to all channels
  double channel_shift[3] = {0, 0, 0};

  static AugmentDraws identity() { return {}; }
};

struct AugmentConfig {
  double brightness_delta = 0.2;     // draws in [-delta, +delta]
  double channel_delta = 0.1;
};

AugmentDraws sample_augment(const AugmentConfig& cfg, Rng& rng);

/// Deterministic application of a fixed draw set. Raster values are clamped
/// back into [0, 1] after the photometric shifts.
void apply_augment(Raster& r, LabelMask& m, const AugmentDraws& d);

/// Sample-and-apply convenience used by the training loops.
void augment(Raster& r, LabelMask& m, const AugmentConfig& cfg, Rng& rng);

}  // namespace damext
