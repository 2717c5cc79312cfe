#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "calfront/datamodel.hpp"

namespace calfront::frontops {

/// Glacier pixels 8-adjacent to at least one ocean pixel, restricted to the
/// largest 8-connected component of such pixels. Equal-size components resolve
/// to the one containing the first pixel in row-major order.
FrontMask extract_front(const ZoneMap& zones, double pixel_spacing_m = 1.0);

/// Symmetric mean nearest-neighbour distance between two fronts, in meters.
/// Returns nullopt when `pred` is empty (missing front). Throws DataError when
/// `truth` is empty and ValidationError on grid or spacing mismatch.
std::optional<double> mde(const FrontMask& pred, const FrontMask& truth);

/// Exact squared Euclidean distance (in pixels^2) from every grid cell to the nearest set pixel.
/// Cells are +inf when the mask is empty.
Grid<double> squared_distance_transform(const FrontMask& mask);

struct IouResult {
  std::array<std::optional<double>, kZoneCount> per_class;  // nullopt: class absent from both maps
  double mean = 0.0;                                         // over defined classes
};

IouResult iou(const ZoneMap& pred, const ZoneMap& truth);

/// Truth for one scored frame.
struct GroundTruth {
  std::string frame_id;
  ZoneMap zones;
  FrontMask front;
  bool label_match = true;
};

struct ImageEval {
  std::string frame_id;
  std::optional<double> mde_m;  // nullopt: missing front
  bool missing_front = false;
  IouResult iou;
};

/// One evaluation run over a test set.
struct EvalReport {
  std::vector<ImageEval> images;  // label-matched frames only
  std::size_t label_matched = 0;
  std::size_t evaluated = 0;  // images with both fronts present
  std::size_t missing_fronts = 0;
  std::optional<double> mde_mean_m;  // over evaluated images
  std::array<std::optional<double>, kZoneCount> class_iou;  // mean over images where the class is defined
  double mean_iou = 0.0;                                     // mean of per-image mean IoU
};

/// Scores predictions against label-matched ground truth.
/// Throws ValidationError listing frame ids present in only one of the two inputs
/// (unmatched truth entries are only an error when label-matched).
EvalReport evaluate(const std::map<std::string, ZoneMap>& predictions, std::span<const GroundTruth> truth);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population
};

MeanStd mean_std(std::span<const double> values);

/// Aggregate of several retrained runs (Table-style mean +- std).
struct RunSummary {
  std::size_t runs = 0;
  std::optional<MeanStd> mde_m;
  MeanStd missing_fronts;
  MeanStd mean_iou;
  std::array<std::optional<MeanStd>, kZoneCount> class_iou;
};

RunSummary summarize_runs(std::span<const EvalReport> reports);

std::string report_to_json(const EvalReport& report, int indent = 2);
std::string summary_to_json(const RunSummary& summary, int indent = 2);

/// Plain-text table with columns Model | MDE | Missing Fronts | All | NA | Rock | Glacier | Ocean.
/// IoU is shown in percent; single runs print bare values, multiple runs print mean±std.
std::string render_table(const std::vector<std::pair<std::string, RunSummary>>& rows);

}  // namespace calfront::frontops
