#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "damext/scene.hpp"

namespace damext {

struct ManifestEntry {
  std::string split;        // train | val | test
  std::string raster_path;  // relative to the manifest's directory
  std::string mask_path;
  std::string bodies_json;  // per-body class records
};

struct DatasetManifest {
  std::filesystem::path root;
  std::vector<ManifestEntry> entries;

  std::vector<ManifestEntry> split(const std::string& name) const;
  std::filesystem::path resolve(const std::string& rel) const { return root / rel; }
};

struct SplitCounts {
  int train = 64;
  int val = 16;
  int test = 16;
};

struct CropEntry {
  std::string path;  // relative to the labels CSV's directory
  int label = 0;     // 0 natural, 1 dam
};

/// Generate scenes for every split, write rasters/masks/manifest under
/// out_dir, and derive the classification set by cropping each body's
/// x2-expanded bounding box. Fully determined by (spec, counts, seed).
DatasetManifest build_dataset(const SceneSpec& spec, const SplitCounts& counts,
                              std::uint64_t seed, const std::filesystem::path& out_dir);

DatasetManifest read_manifest(const std::filesystem::path& csv_path);

std::vector<CropEntry> read_crop_labels(const std::filesystem::path& csv_path);

/// crops/labels_<split>.csv next to the crop images.
std::filesystem::path crop_labels_path(const std::filesystem::path& dataset_root,
                                       const std::string& split);

}  // namespace damext
