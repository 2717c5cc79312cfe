#pragma once

// Figure rendering: zone panels, front overlays and uncertainty panels.

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "calfront/dataset.hpp"
#include "calfront/raster_io.hpp"

namespace calfront::plot {

inline constexpr Rgb kPredColor{255, 255, 0};
inline constexpr Rgb kTruthColor{0, 0, 255};
inline constexpr Rgb kOverlapColor{255, 0, 255};

/// Gray ramp: NA black, rock dark gray, glacier light gray, ocean white.
Rgb zone_color(Zone zone);
RgbImage zone_panel(const ZoneMap& zones);

/// Pixels within Euclidean distance `radius` of the front (disk structuring element).
Grid<std::uint8_t> dilate(const FrontMask& front, int radius);

/// Prediction yellow, truth blue, both magenta, drawn over `background` (gray, min-max scaled to
/// 0..200 so it never collides with the overlay colors) or black when `background` is empty.
RgbImage front_overlay(const FrontMask& pred, const FrontMask& truth, int radius, const Grid<double>& background = {});

struct OverlayCounts {
  std::size_t pred = 0;
  std::size_t truth = 0;
  std::size_t overlap = 0;
  std::size_t total() const { return pred + truth + overlap; }
};

OverlayCounts count_overlay(const RgbImage& image);

/// Black -> red -> yellow -> white ramp over [0, vmax]; values above vmax saturate.
Rgb heat_color(double value, double vmax);
RgbImage uncertainty_panel(const Grid<double>& std_map, double vmax);

struct PlotOptions {
  int dilation_radius = 3;
};

struct PlotProducts {
  std::vector<std::filesystem::path> zone_panels;
  std::vector<std::filesystem::path> overlays;
  std::vector<std::filesystem::path> uncertainty_panels;
};

using ClassMaps = std::array<Grid<double>, kZoneCount>;

/// Writes <id>_zones.png and <id>_overlay.png for every label-matched prediction, and
/// <id>_unc_<class>.png when uncertainty maps are given. All uncertainty panels of one frame
/// share one color scale.
PlotProducts write_figures(const std::map<std::string, ZoneMap>& predictions, const Dataset& truth,
                           const std::map<std::string, ClassMaps>& uncertainty, const std::filesystem::path& out_dir,
                           const PlotOptions& options = {});

}  // namespace calfront::plot
