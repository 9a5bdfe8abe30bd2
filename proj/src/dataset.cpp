#include "damext/dataset.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "damext/common.hpp"
#include "damext/extract.hpp"
#include "damext/raster.hpp"
#include "damext/rng.hpp"

namespace damext {
namespace {

std::string csv_quote(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    out += c;
  }
  out += "\"";
  return out;
}

std::vector<std::string> parse_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

std::string bodies_to_json(const std::vector<BodyRecord>& bodies) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& b : bodies) {
    arr.push_back({{"class", b.body_class},
                   {"area", b.area},
                   {"bbox", {b.r0, b.c0, b.r1, b.c1}}});
  }
  return arr.dump();
}

std::string scene_stem(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "scene_%04d", index);
  return buf;
}

std::string crop_stem(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "crop_%04d", index);
  return buf;
}

}  // namespace

std::vector<ManifestEntry> DatasetManifest::split(const std::string& name) const {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries)
    if (e.split == name) out.push_back(e);
  return out;
}

DatasetManifest build_dataset(const SceneSpec& spec, const SplitCounts& counts,
                              std::uint64_t seed, const std::filesystem::path& out_dir) {
  spec.validate();
  if (counts.train < 1 || counts.val < 1 || counts.test < 1)
    throw ConfigError("build_dataset: each split needs at least one scene");

  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  DatasetManifest manifest;
  manifest.root = out_dir;

  struct SplitPlan {
    const char* name;
    int count;
  };
  const SplitPlan plans[] = {{"train", counts.train}, {"val", counts.val}, {"test", counts.test}};

  std::ofstream mcsv(out_dir / "manifest.csv");
  if (!mcsv) throw DataError("build_dataset: cannot write manifest.csv");
  mcsv << "split,raster,mask,bodies_json\n";

  for (const auto& plan : plans) {
    fs::create_directories(out_dir / plan.name);
    fs::create_directories(out_dir / "crops" / plan.name);

    std::ofstream lcsv(crop_labels_path(out_dir, plan.name));
    if (!lcsv) throw DataError("build_dataset: cannot write crop labels CSV");
    lcsv << "crop,label\n";

    const std::uint64_t split_base = seed ^ Rng::fnv1a(plan.name);
    int crop_index = 0;
    for (int i = 0; i < plan.count; ++i) {
      const std::uint64_t scene_seed = Rng::splitmix64(split_base + static_cast<std::uint64_t>(i));
      Scene scene = generate_scene(spec, scene_seed);

      const std::string stem = scene_stem(i);
      const std::string raster_rel = std::string(plan.name) + "/" + stem + ".ppm";
      const std::string mask_rel = std::string(plan.name) + "/" + stem + ".pgm";
      write_raster(scene.raster, out_dir / raster_rel);
      write_mask(scene.mask, out_dir / mask_rel);

      ManifestEntry entry;
      entry.split = plan.name;
      entry.raster_path = raster_rel;
      entry.mask_path = mask_rel;
      entry.bodies_json = bodies_to_json(scene.bodies);
      manifest.entries.push_back(entry);

      mcsv << entry.split << ',' << entry.raster_path << ',' << entry.mask_path << ','
           << csv_quote(entry.bodies_json) << '\n';

      for (const auto& body : scene.bodies) {
        BBox tight{body.r0, body.c0, body.r1, body.c1};
        BBox box = expand_bbox(tight, 2.0, scene.raster.height, scene.raster.width);
        Raster patch = crop(scene.raster, box.r0, box.c0, box.r1, box.c1);
        const std::string crop_name = std::string(plan.name) + "/" + crop_stem(crop_index) + ".ppm";
        write_raster(patch, out_dir / "crops" / crop_name);
        lcsv << crop_name << ',' << (body.body_class == 2 ? 1 : 0) << '\n';
        ++crop_index;
      }
    }
  }
  return manifest;
}

DatasetManifest read_manifest(const std::filesystem::path& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw DataError("read_manifest: cannot open " + csv_path.string());

  DatasetManifest manifest;
  manifest.root = csv_path.parent_path();

  std::string line;
  if (!std::getline(in, line)) throw DataError("read_manifest: empty file");
  if (parse_csv_line(line) != std::vector<std::string>{"split", "raster", "mask", "bodies_json"})
    throw DataError("read_manifest: unexpected header in " + csv_path.string());

  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = parse_csv_line(line);
    if (fields.size() != 4) throw DataError("read_manifest: malformed row: " + line);
    manifest.entries.push_back({fields[0], fields[1], fields[2], fields[3]});
  }
  return manifest;
}

std::vector<CropEntry> read_crop_labels(const std::filesystem::path& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw DataError("read_crop_labels: cannot open " + csv_path.string());

  std::string line;
  if (!std::getline(in, line)) throw DataError("read_crop_labels: empty file");
  if (parse_csv_line(line) != std::vector<std::string>{"crop", "label"})
    throw DataError("read_crop_labels: unexpected header in " + csv_path.string());

  std::vector<CropEntry> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = parse_csv_line(line);
    if (fields.size() != 2) throw DataError("read_crop_labels: malformed row: " + line);
    CropEntry e;
    e.path = fields[0];
    try {
      e.label = std::stoi(fields[1]);
    } catch (const std::exception&) {
      throw DataError("read_crop_labels: bad label in row: " + line);
    }
    if (e.label != 0 && e.label != 1)
      throw DataError("read_crop_labels: label must be 0 or 1, got " + fields[1]);
    out.push_back(e);
  }
  return out;
}

std::filesystem::path crop_labels_path(const std::filesystem::path& dataset_root,
                                       const std::string& split) {
  return dataset_root / "crops" / ("labels_" + split + ".csv");
}

}  // namespace damext
