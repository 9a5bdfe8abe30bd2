#include "damext/plml.hpp"

#include "damext/common.hpp"

namespace damext {

TripletPools build_pools(const LabelMask& pred, const LabelMask& gt) {
  if (pred.arity != 2 || gt.arity != 2)
    throw DataError("build_pools: masks must be 2-class");
  if (pred.width != gt.width || pred.height != gt.height)
    throw ShapeError("build_pools: mask dimensions differ");

  TripletPools pools;
  for (int r = 0; r < gt.height; ++r)
    for (int c = 0; c < gt.width; ++c) {
      const bool g = gt.at(r, c) == 1;
      const bool p = pred.at(r, c) == 1;
      if (g && p)
        pools.anchors.emplace_back(r, c);
      else if (g && !p)
        pools.hard_positives.emplace_back(r, c);
      else if (!g && p)
        pools.hard_negatives.emplace_back(r, c);
    }
  return pools;
}

const char* mining_strategy_name(MiningStrategy s) {
  switch (s) {
    case MiningStrategy::CrossImageRandom: return "cross-image-random";
    case MiningStrategy::WithinImage: return "within-image";
    case MiningStrategy::FeatureHard: return "feature-hard";
  }
  return "?";
}

MiningStrategy parse_mining_strategy(const std::string& name) {
  if (name == "cross-image-random") return MiningStrategy::CrossImageRandom;
  if (name == "within-image") return MiningStrategy::WithinImage;
  if (name == "feature-hard") return MiningStrategy::FeatureHard;
  throw ConfigError("unknown mining strategy: " + name +
                    " (expected cross-image-random, within-image, or feature-hard)");
}

}  // namespace damext
