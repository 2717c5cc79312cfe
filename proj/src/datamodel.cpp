#include "calfront/datamodel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "calfront/errors.hpp"
#include "calfront/raster_io.hpp"

namespace calfront {

using nlohmann::json;

std::string_view zone_name(Zone zone) {
  switch (zone) {
    case Zone::kNA: return "NA";
    case Zone::kRock: return "rock";
    case Zone::kGlacier: return "glacier";
    case Zone::kOcean: return "ocean";
  }
  return "?";
}

ZoneMap zones_from_raw(const Grid<std::uint8_t>& raw) {
  ZoneMap zones(raw.height(), raw.width());
  for (int r = 0; r < raw.height(); ++r) {
    for (int c = 0; c < raw.width(); ++c) {
      const auto v = raw(r, c);
      if (v >= kZoneCount)
        throw DataError("label value " + std::to_string(v) + " at (" + std::to_string(r) + "," + std::to_string(c) +
                        ") is not a zone class (expected 0..3)");
      zones(r, c) = static_cast<Zone>(v);
    }
  }
  return zones;
}

Grid<std::uint8_t> zones_to_raw(const ZoneMap& zones) {
  Grid<std::uint8_t> raw(zones.height(), zones.width());
  std::ranges::transform(zones.values(), raw.values().begin(), [](Zone z) { return static_cast<std::uint8_t>(z); });
  return raw;
}

std::string_view to_string(Polarization p) {
  switch (p) {
    case Polarization::kHH: return "HH";
    case Polarization::kHV: return "HV";
    case Polarization::kVV: return "VV";
    case Polarization::kVH: return "VH";
  }
  return "?";
}

std::string_view to_string(Provenance p) { return p == Provenance::kManual ? "manual" : "propagated"; }

std::string_view to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

Polarization parse_polarization(std::string_view text) {
  for (auto p : {Polarization::kHH, Polarization::kHV, Polarization::kVV, Polarization::kVH})
    if (to_string(p) == text) return p;
  throw ValidationError("unknown polarization '" + std::string(text) + "'");
}

Provenance parse_provenance(std::string_view text) {
  if (text == "manual") return Provenance::kManual;
  if (text == "propagated") return Provenance::kPropagated;
  throw ValidationError("unknown provenance '" + std::string(text) + "'");
}

Split parse_split(std::string_view text) {
  for (auto s : {Split::kTrain, Split::kVal, Split::kTest})
    if (to_string(s) == text) return s;
  throw ValidationError("unknown split '" + std::string(text) + "'");
}

FrontMask make_front_mask(int height, int width, double pixel_spacing_m, std::vector<Pixel> pixels) {
  if (!(pixel_spacing_m > 0.0)) throw ValidationError("pixel spacing must be positive");
  for (const auto& p : pixels) {
    if (p.row < 0 || p.col < 0 || p.row >= height || p.col >= width)
      throw ValidationError("front pixel (" + std::to_string(p.row) + "," + std::to_string(p.col) + ") outside grid");
  }
  std::ranges::sort(pixels);
  pixels.erase(std::unique(pixels.begin(), pixels.end()), pixels.end());
  return FrontMask{height, width, pixel_spacing_m, std::move(pixels)};
}

Grid<std::uint8_t> front_to_raster(const FrontMask& front) {
  Grid<std::uint8_t> raster(front.height, front.width, 0);
  for (const auto& p : front.pixels) raster(p.row, p.col) = 255;
  return raster;
}

FrontMask front_from_raster(const Grid<std::uint8_t>& raster, double pixel_spacing_m) {
  std::vector<Pixel> pixels;
  for (int r = 0; r < raster.height(); ++r)
    for (int c = 0; c < raster.width(); ++c)
      if (raster(r, c) != 0) pixels.push_back({r, c});
  return make_front_mask(raster.height(), raster.width(), pixel_spacing_m, std::move(pixels));
}

void validate_frame(const SarFrame& frame) {
  if (frame.intensity.height() <= 0 || frame.intensity.width() <= 0)
    throw ValidationError("frame '" + frame.id + "' has an empty intensity grid");
  if (!(frame.pixel_spacing_m > 0.0)) throw ValidationError("frame '" + frame.id + "' has non-positive pixel spacing");
  for (double v : frame.intensity.values())
    if (!std::isfinite(v)) throw ValidationError("frame '" + frame.id + "' contains non-finite intensities");
}

std::size_t DatasetManifest::label_matched_count() const {
  return static_cast<std::size_t>(std::ranges::count_if(records, [](const auto& r) { return r.label_match; }));
}

bool DateWindow::contains(const Date& d) const { return d >= first && d <= last; }

DateWindow summer_window(int year) { return {make_date(year, 7, 1), make_date(year, 8, 31)}; }

PropagationResult propagate_summer_label(const Annotation& annotation, const std::vector<SarFrame>& frames,
                                         std::optional<DateWindow> window) {
  const DateWindow w = window.value_or(summer_window(year_of(annotation.date)));
  PropagationResult result;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto& frame = frames[i];
    if (frame.glacier_id != annotation.glacier_id)
      throw ValidationError("frame '" + frame.id + "' belongs to glacier '" + frame.glacier_id + "', annotation to '" +
                            annotation.glacier_id + "'");
    if (!w.contains(frame.date)) continue;
    Annotation label = annotation;
    label.provenance = (frame.date == annotation.date && annotation.provenance == Provenance::kManual)
                           ? Provenance::kManual
                           : Provenance::kPropagated;
    result.pairs.emplace_back(i, std::move(label));
  }
  if (result.pairs.empty() && !frames.empty())
    result.warnings.push_back("no frames of glacier '" + annotation.glacier_id + "' between " + format_iso_date(w.first) +
                              " and " + format_iso_date(w.last));
  return result;
}

std::optional<std::size_t> nearest_annotation_index(const SarFrame& frame, const std::vector<Annotation>& annotations) {
  std::optional<std::size_t> best;
  long best_gap = 0;
  for (std::size_t i = 0; i < annotations.size(); ++i) {
    const auto& a = annotations[i];
    if (a.glacier_id != frame.glacier_id) continue;
    const long gap = std::labs(days_between(frame.date, a.date));
    // Equal gaps resolve to the earlier annotation, then to the lower index, independent of input order.
    if (!best || gap < best_gap || (gap == best_gap && a.date < annotations[*best].date)) {
      best = i;
      best_gap = gap;
    }
  }
  return best;
}

DatasetManifest assign_nearest_annotation(const std::vector<SarFrame>& frames, const std::vector<Annotation>& annotations,
                                          Split split) {
  DatasetManifest manifest;
  std::vector<std::string> orphans;
  for (const auto& frame : frames) {
    auto idx = nearest_annotation_index(frame, annotations);
    if (!idx) {
      orphans.push_back(frame.id.empty() ? frame.glacier_id + "@" + format_iso_date(frame.date) : frame.id);
      continue;
    }
    const auto& a = annotations[*idx];
    ManifestRecord rec;
    rec.frame_path = frame.id;
    rec.glacier_id = frame.glacier_id;
    rec.date = frame.date;
    rec.polarization = frame.polarization;
    rec.pixel_spacing_m = frame.pixel_spacing_m;
    rec.domain = frame.domain;
    rec.split = split;
    rec.annotation_date = a.date;
    rec.label_match = a.provenance == Provenance::kManual && a.date == frame.date;
    manifest.records.push_back(std::move(rec));
  }
  if (!orphans.empty()) {
    std::string msg = "frames without a same-glacier annotation:";
    for (const auto& o : orphans) msg += " " + o;
    throw DataError(msg);
  }
  return manifest;
}

namespace {

json record_to_json(const ManifestRecord& r) {
  json j = {{"frame_path", r.frame_path},
            {"zone_path", r.zone_path},
            {"front_path", r.front_path},
            {"glacier_id", r.glacier_id},
            {"date", format_iso_date(r.date)},
            {"polarization", std::string(to_string(r.polarization))},
            {"pixel_spacing_m", r.pixel_spacing_m},
            {"domain", r.domain},
            {"split", std::string(to_string(r.split))},
            {"label_match", r.label_match}};
  if (r.annotation_date) j["annotation_date"] = format_iso_date(*r.annotation_date);
  if (r.melange) j["melange"] = *r.melange;
  if (!r.rock_mask_path.empty()) j["rock_mask_path"] = r.rock_mask_path;
  return j;
}

template <typename T>
T field(const json& j, std::size_t index, const char* name) {
  auto fail = [&](const std::string& why) {
    return DataError("manifest record " + std::to_string(index) + ", field '" + name + "': " + why);
  };
  auto it = j.find(name);
  if (it == j.end()) throw fail("missing");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw fail("wrong type");
  }
}

ManifestRecord record_from_json(const json& j, std::size_t index) {
  if (!j.is_object()) throw DataError("manifest record " + std::to_string(index) + " is not an object");
  auto wrap = [&](const char* name, auto&& parse) {
    try {
      return parse(field<std::string>(j, index, name));
    } catch (const ValidationError& e) {
      throw DataError("manifest record " + std::to_string(index) + ", field '" + name + "': " + e.what());
    }
  };
  ManifestRecord r;
  r.frame_path = field<std::string>(j, index, "frame_path");
  r.zone_path = field<std::string>(j, index, "zone_path");
  r.front_path = field<std::string>(j, index, "front_path");
  r.glacier_id = field<std::string>(j, index, "glacier_id");
  r.date = wrap("date", [](const std::string& s) { return parse_iso_date(s); });
  r.polarization = wrap("polarization", [](const std::string& s) { return parse_polarization(s); });
  r.pixel_spacing_m = field<double>(j, index, "pixel_spacing_m");
  if (!(r.pixel_spacing_m > 0.0))
    throw DataError("manifest record " + std::to_string(index) + ", field 'pixel_spacing_m': must be positive");
  r.domain = field<std::string>(j, index, "domain");
  r.split = wrap("split", [](const std::string& s) { return parse_split(s); });
  r.label_match = field<bool>(j, index, "label_match");
  if (j.contains("annotation_date"))
    r.annotation_date = wrap("annotation_date", [](const std::string& s) { return parse_iso_date(s); });
  if (j.contains("melange")) r.melange = field<bool>(j, index, "melange");
  if (j.contains("rock_mask_path")) r.rock_mask_path = field<std::string>(j, index, "rock_mask_path");
  if (r.annotation_date && r.label_match && *r.annotation_date != r.date)
    throw DataError("manifest record " + std::to_string(index) + ": label_match set but annotation_date differs from date");
  return r;
}

}  // namespace

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  json arr = json::array();
  for (const auto& r : manifest.records) arr.push_back(record_to_json(r));
  write_file_atomic(path, arr.dump(2) + "\n");
}

DatasetManifest load_manifest(const std::filesystem::path& path, const ManifestLoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError("manifest '" + path.string() + "' is not valid JSON: " + e.what());
  }
  if (!doc.is_array()) throw DataError("manifest '" + path.string() + "' must be a JSON array of records");
  DatasetManifest manifest;
  const auto base = path.parent_path();
  std::set<std::string> checked_labels;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    auto rec = record_from_json(doc[i], i);
    if (options.check_files) {
      for (const auto* p : {&rec.frame_path, &rec.zone_path, &rec.front_path}) {
        if (p->empty()) continue;
        const auto full = base / *p;
        if (!std::filesystem::exists(full))
          throw DataError("manifest record " + std::to_string(i) + " references missing file '" + full.string() + "'");
      }
    }
    if (options.check_labels && !rec.zone_path.empty() && checked_labels.insert(rec.zone_path).second) {
      const auto full = base / rec.zone_path;
      try {
        zones_from_raw(read_png_gray(full));
      } catch (const DataError& e) {
        throw DataError("manifest record " + std::to_string(i) + ", zone raster '" + full.string() + "': " + e.what());
      }
    }
    manifest.records.push_back(std::move(rec));
  }
  return manifest;
}

}  // namespace calfront
