#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "calfront/calendar.hpp"
#include "calfront/grid.hpp"

namespace calfront {

// Label encoding on disk is the underlying value: NA=0, rock=1, glacier=2, ocean=3.
enum class Zone : std::uint8_t { kNA = 0, kRock = 1, kGlacier = 2, kOcean = 3 };
inline constexpr int kZoneCount = 4;

using ZoneMap = Grid<Zone>;

std::string_view zone_name(Zone zone);

/// Converts raw label values to a ZoneMap, rejecting anything outside {0,1,2,3}.
ZoneMap zones_from_raw(const Grid<std::uint8_t>& raw);
Grid<std::uint8_t> zones_to_raw(const ZoneMap& zones);

enum class Polarization { kHH, kHV, kVV, kVH };
enum class Provenance { kManual, kPropagated };
enum class Split { kTrain, kVal, kTest };

std::string_view to_string(Polarization p);
std::string_view to_string(Provenance p);
std::string_view to_string(Split s);
Polarization parse_polarization(std::string_view text);
Provenance parse_provenance(std::string_view text);
Split parse_split(std::string_view text);

/// Glacier-ocean boundary pixels of one frame; empty means "missing front".
struct FrontMask {
  int height = 0;
  int width = 0;
  double pixel_spacing_m = 1.0;
  std::vector<Pixel> pixels;  // sorted row-major, unique

  bool empty() const { return pixels.empty(); }
  bool operator==(const FrontMask&) const = default;
};

/// Builds a FrontMask from an arbitrary pixel list (sorts, dedups, range-checks).
FrontMask make_front_mask(int height, int width, double pixel_spacing_m, std::vector<Pixel> pixels);
Grid<std::uint8_t> front_to_raster(const FrontMask& front);
FrontMask front_from_raster(const Grid<std::uint8_t>& raster, double pixel_spacing_m);

struct SarFrame {
  std::string id;
  Grid<double> intensity;
  Date date{};
  Polarization polarization = Polarization::kHH;
  double pixel_spacing_m = 10.0;
  std::string glacier_id;
  std::string domain = "source";
};

/// Throws ValidationError unless H, W > 0, spacing > 0 and all intensities are finite.
void validate_frame(const SarFrame& frame);

struct Annotation {
  std::string glacier_id;
  Date date{};
  ZoneMap zones;
  FrontMask front;
  Provenance provenance = Provenance::kManual;
};

/// One frame and the annotation assigned to it.
struct ManifestRecord {
  std::string frame_path;  // file path, or frame id for in-memory datasets
  std::string zone_path;
  std::string front_path;
  std::string glacier_id;
  Date date{};
  Polarization polarization = Polarization::kHH;
  double pixel_spacing_m = 10.0;
  std::string domain = "source";
  Split split = Split::kTrain;
  bool label_match = false;

  // Optional extensions; omitted from the manifest file when unset.
  std::optional<Date> annotation_date;
  std::optional<bool> melange;
  std::string rock_mask_path;

  bool operator==(const ManifestRecord&) const = default;
};

struct DatasetManifest {
  std::vector<ManifestRecord> records;

  std::size_t label_matched_count() const;
  bool operator==(const DatasetManifest&) const = default;
};

/// Inclusive date range.
struct DateWindow {
  Date first{};
  Date last{};

  bool contains(const Date& d) const;
};

/// July 1 to August 31 of the given year.
DateWindow summer_window(int year);

struct PropagationResult {
  std::vector<std::pair<std::size_t, Annotation>> pairs;  // (frame index, label)
  std::vector<std::string> warnings;
};

/// Shares one manual annotation with every frame inside the window.
/// The frame on the annotation date keeps provenance `manual`, all others are `propagated`.
PropagationResult propagate_summer_label(const Annotation& annotation, const std::vector<SarFrame>& frames,
                                         std::optional<DateWindow> window = std::nullopt);

/// Assigns each frame the temporally closest same-glacier annotation (ties go to the earlier date).
/// Records carry `annotation_date`; label_match is set iff that annotation is manual and on the frame date.
/// Throws DataError listing every frame without a same-glacier annotation.
DatasetManifest assign_nearest_annotation(const std::vector<SarFrame>& frames, const std::vector<Annotation>& annotations,
                                          Split split = Split::kTest);

/// Index of the annotation chosen by assign_nearest_annotation for one frame, or nullopt.
std::optional<std::size_t> nearest_annotation_index(const SarFrame& frame, const std::vector<Annotation>& annotations);

struct ManifestLoadOptions {
  bool check_files = true;   // referenced frame/zone/front files must exist
  bool check_labels = true;  // zone rasters must only contain class ids 0..3
};

/// Writes the manifest as a JSON array of records (paths are stored verbatim).
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// Reads a manifest written by save_manifest. Relative paths resolve against the manifest's directory.
/// Throws DataError with record index and field name on malformed input.
DatasetManifest load_manifest(const std::filesystem::path& path, const ManifestLoadOptions& options = {});

}  // namespace calfront
