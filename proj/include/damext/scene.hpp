#pragma once

#include <cstdint>
#include <vector>

#include "damext/raster.hpp"

namespace damext {

/// Water-body archetypes. Dams carry at least one straight wall (axis-aligned
/// or 45 degrees); lakes are smoothed blobs; rivers are sinuous bands. The
/// wall is what makes the dam class geometrically learnable.
enum class BodyShape { TriangularDam, RoundedLake, LinearRiver };

struct SceneSpec {
  int width = 64;
  int height = 64;
  int num_bodies = 2;  // >=200 px each; 64x64 fits two with clean crop windows
  // shape_mix over {dam, lake, river}; must sum to 1
  double mix_dam = 0.4;
  double mix_lake = 0.3;
  double mix_river = 0.3;
  double noise_level = 0.05;       // std scale of additive pixel noise
  double contour_jitter = 0.25;    // probability a body's mask outline is eroded/dilated
  double cloud_probability = 0.1;  // probability a scene gets cloud blobs

  void validate() const;  // throws ConfigError
};

struct BodyRecord {
  int body_class = 1;  // 1 natural, 2 dam
  int area = 0;        // pixels in the final mask
  int r0 = 0, c0 = 0, r1 = 0, c1 = 0;  // tight bbox, inclusive
};

struct Scene {
  Raster raster;
  LabelMask mask;  // arity 3
  std::vector<BodyRecord> bodies;
};

/// Deterministic synthetic scene: same (spec, seed) gives bit-identical
/// output. Every body in the final mask is a single 8-connected component
/// of at least 200 pixels. Throws PlacementError when the requested bodies
/// cannot be placed without overlap after bounded retries.
Scene generate_scene(const SceneSpec& spec, std::uint64_t seed);

}  // namespace damext
