#include "calfront/dataset.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "calfront/errors.hpp"
#include "calfront/raster_io.hpp"

namespace calfront {

namespace {

std::string annotation_key(const std::string& glacier_id, const Date& date) {
  return glacier_id + "_" + format_iso_date(date);
}

}  // namespace

void Dataset::add(SarFrame frame, const Annotation& annotation, ManifestRecord record) {
  std::size_t idx = annotations.size();
  for (std::size_t i = 0; i < annotations.size(); ++i) {
    if (annotations[i].glacier_id == annotation.glacier_id && annotations[i].date == annotation.date) {
      idx = i;
      break;
    }
  }
  if (idx == annotations.size()) {
    Annotation stored = annotation;
    stored.provenance = Provenance::kManual;
    annotations.push_back(std::move(stored));
  }
  record.annotation_date = annotation.date;
  if (record.frame_path.empty()) record.frame_path = frame.id;
  frames.push_back(std::move(frame));
  manifest.records.push_back(std::move(record));
  annotation_of.push_back(idx);
}

std::vector<std::size_t> Dataset::glacier_frames(const std::string& glacier_id) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < frames.size(); ++i)
    if (frames[i].glacier_id == glacier_id) out.push_back(i);
  std::ranges::stable_sort(out, [&](std::size_t a, std::size_t b) { return frames[a].date < frames[b].date; });
  return out;
}

std::vector<std::string> Dataset::glacier_ids() const {
  std::vector<std::string> ids;
  for (const auto& f : frames)
    if (std::ranges::find(ids, f.glacier_id) == ids.end()) ids.push_back(f.glacier_id);
  return ids;
}

Dataset Dataset::subset(Split split) const {
  Dataset out;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (manifest.records[i].split != split) continue;
    out.add(frames[i], label(i), manifest.records[i]);
    const auto& g = frames[i].glacier_id;
    if (auto it = rock_masks.find(g); it != rock_masks.end()) out.rock_masks[g] = it->second;
  }
  return out;
}

std::vector<frontops::GroundTruth> Dataset::ground_truth() const {
  std::vector<frontops::GroundTruth> truth;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (!manifest.records[i].label_match) continue;
    const auto& a = label(i);
    truth.push_back({frames[i].id, a.zones, a.front, true});
  }
  return truth;
}

void Dataset::validate() const {
  if (manifest.records.size() != frames.size() || annotation_of.size() != frames.size())
    throw DataError("dataset has " + std::to_string(frames.size()) + " frames but " +
                    std::to_string(manifest.records.size()) + " manifest records");
  std::set<std::string> ids;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto& f = frames[i];
    validate_frame(f);
    if (!ids.insert(f.id).second) throw DataError("duplicate frame id '" + f.id + "'");
    const auto& a = label(i);
    if (a.glacier_id != f.glacier_id) throw DataError("frame '" + f.id + "' labelled with another glacier's annotation");
    if (!a.zones.same_shape(f.intensity)) throw DataError("frame '" + f.id + "' and its zone label differ in shape");
    const bool match = a.provenance == Provenance::kManual && a.date == f.date;
    if (manifest.records[i].label_match != match)
      throw DataError("frame '" + f.id + "': label_match flag inconsistent with annotation date");
  }
}

Dataset merge(const Dataset& a, const Dataset& b) {
  Dataset out = a;
  for (std::size_t i = 0; i < b.size(); ++i) out.add(b.frames[i], b.label(i), b.manifest.records[i]);
  for (const auto& [g, m] : b.rock_masks) out.rock_masks[g] = m;
  return out;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& root) {
  std::filesystem::create_directories(root);
  std::vector<std::string> zone_paths(dataset.annotations.size());
  std::vector<std::string> front_paths(dataset.annotations.size());
  for (std::size_t i = 0; i < dataset.annotations.size(); ++i) {
    const auto& a = dataset.annotations[i];
    const auto key = annotation_key(a.glacier_id, a.date);
    zone_paths[i] = "zones/" + key + ".png";
    front_paths[i] = "fronts/" + key + ".png";
    write_png_gray(root / zone_paths[i], zones_to_raw(a.zones));
    write_png_gray(root / front_paths[i], front_to_raster(a.front));
  }
  std::map<std::string, std::string> mask_paths;
  for (const auto& [g, mask] : dataset.rock_masks) {
    Grid<std::uint8_t> img = mask;
    for (auto& v : img.values()) v = v ? 255 : 0;
    mask_paths[g] = "rock/" + g + ".png";
    write_png_gray(root / mask_paths[g], img);
  }
  DatasetManifest manifest;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& f = dataset.frames[i];
    ManifestRecord rec = dataset.manifest.records[i];
    rec.frame_path = "frames/" + f.id + ".pfm";
    rec.zone_path = zone_paths[dataset.annotation_of[i]];
    rec.front_path = front_paths[dataset.annotation_of[i]];
    if (auto it = mask_paths.find(f.glacier_id); it != mask_paths.end()) rec.rock_mask_path = it->second;
    write_pfm(root / rec.frame_path, f.intensity);
    manifest.records.push_back(std::move(rec));
  }
  save_manifest(manifest, root / "manifest.json");
}

Dataset load_dataset(const std::filesystem::path& manifest_path) {
  const auto manifest = load_manifest(manifest_path);
  const auto base = manifest_path.parent_path();
  Dataset ds;
  std::map<std::string, Annotation> cache;
  for (const auto& rec : manifest.records) {
    SarFrame frame;
    frame.id = std::filesystem::path(rec.frame_path).stem().string();
    frame.intensity = read_pfm(base / rec.frame_path);
    frame.date = rec.date;
    frame.polarization = rec.polarization;
    frame.pixel_spacing_m = rec.pixel_spacing_m;
    frame.glacier_id = rec.glacier_id;
    frame.domain = rec.domain;
    auto it = cache.find(rec.zone_path);
    if (it == cache.end()) {
      Annotation a;
      a.glacier_id = rec.glacier_id;
      a.date = rec.annotation_date.value_or(rec.date);
      a.zones = zones_from_raw(read_png_gray(base / rec.zone_path));
      a.front = rec.front_path.empty() ? frontops::extract_front(a.zones, rec.pixel_spacing_m)
                                       : front_from_raster(read_png_gray(base / rec.front_path), rec.pixel_spacing_m);
      a.provenance = Provenance::kManual;
      it = cache.emplace(rec.zone_path, std::move(a)).first;
    }
    if (!rec.rock_mask_path.empty() && !ds.rock_masks.contains(rec.glacier_id)) {
      auto mask = read_png_gray(base / rec.rock_mask_path);
      for (auto& v : mask.values()) v = v ? 1 : 0;
      ds.rock_masks[rec.glacier_id] = std::move(mask);
    }
    ManifestRecord stored = rec;
    stored.frame_path = frame.id;
    ds.add(std::move(frame), it->second, std::move(stored));
  }
  ds.validate();
  return ds;
}

}  // namespace calfront
