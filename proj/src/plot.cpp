#include "calfront/plot.hpp"

#include <algorithm>
#include <cmath>

#include "calfront/errors.hpp"
#include "calfront/frontops.hpp"

namespace calfront::plot {

Rgb zone_color(Zone zone) {
  switch (zone) {
    case Zone::kNA: return {0, 0, 0};
    case Zone::kRock: return {85, 85, 85};
    case Zone::kGlacier: return {170, 170, 170};
    case Zone::kOcean: return {255, 255, 255};
  }
  throw ValidationError("invalid zone value");
}

RgbImage zone_panel(const ZoneMap& zones) {
  RgbImage out(zones.height(), zones.width());
  for (int r = 0; r < zones.height(); ++r)
    for (int c = 0; c < zones.width(); ++c) out(r, c) = zone_color(zones(r, c));
  return out;
}

Grid<std::uint8_t> dilate(const FrontMask& front, int radius) {
  if (radius < 0) throw ValidationError("dilation radius must be >= 0");
  Grid<std::uint8_t> out(front.height, front.width, 0);
  for (const Pixel& p : front.pixels)
    for (int dy = -radius; dy <= radius; ++dy)
      for (int dx = -radius; dx <= radius; ++dx)
        if (dy * dy + dx * dx <= radius * radius && out.contains(p.row + dy, p.col + dx)) out(p.row + dy, p.col + dx) = 1;
  return out;
}

RgbImage front_overlay(const FrontMask& pred, const FrontMask& truth, int radius, const Grid<double>& background) {
  if (pred.height != truth.height || pred.width != truth.width) throw ValidationError("overlay fronts differ in size");
  const int h = truth.height;
  const int w = truth.width;
  RgbImage out(h, w, Rgb{0, 0, 0});
  if (!background.empty()) {
    if (background.height() != h || background.width() != w) throw ValidationError("overlay background differs in size");
    const auto [lo, hi] = std::ranges::minmax(background.values());
    const double span = hi > lo ? hi - lo : 1.0;
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        const auto g = static_cast<std::uint8_t>(std::lround(200.0 * (background(r, c) - lo) / span));
        out(r, c) = {g, g, g};
      }
  }
  const auto p = dilate(pred, radius);
  const auto t = dilate(truth, radius);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      if (p(r, c) && t(r, c)) out(r, c) = kOverlapColor;
      else if (p(r, c)) out(r, c) = kPredColor;
      else if (t(r, c)) out(r, c) = kTruthColor;
    }
  return out;
}

OverlayCounts count_overlay(const RgbImage& image) {
  OverlayCounts n;
  for (const Rgb& px : image.values()) {
    if (px == kPredColor) ++n.pred;
    else if (px == kTruthColor) ++n.truth;
    else if (px == kOverlapColor) ++n.overlap;
  }
  return n;
}

Rgb heat_color(double value, double vmax) {
  const double t = vmax > 0.0 ? std::clamp(value / vmax, 0.0, 1.0) : 0.0;
  auto ch = [](double x) { return static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(x, 0.0, 1.0))); };
  return {ch(3.0 * t), ch(3.0 * t - 1.0), ch(3.0 * t - 2.0)};
}

RgbImage uncertainty_panel(const Grid<double>& std_map, double vmax) {
  RgbImage out(std_map.height(), std_map.width());
  for (int r = 0; r < std_map.height(); ++r)
    for (int c = 0; c < std_map.width(); ++c) out(r, c) = heat_color(std_map(r, c), vmax);
  return out;
}

PlotProducts write_figures(const std::map<std::string, ZoneMap>& predictions, const Dataset& truth,
                           const std::map<std::string, ClassMaps>& uncertainty, const std::filesystem::path& out_dir,
                           const PlotOptions& options) {
  if (options.dilation_radius < 0) throw ValidationError("dilation radius must be >= 0");
  std::filesystem::create_directories(out_dir);
  PlotProducts out;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (!truth.manifest.records[i].label_match) continue;
    const auto& frame = truth.frames[i];
    auto it = predictions.find(frame.id);
    if (it == predictions.end()) throw DataError("no prediction for frame '" + frame.id + "'");
    const auto& ann = truth.label(i);
    if (!it->second.same_shape(ann.zones)) throw DataError("prediction for '" + frame.id + "' has the wrong size");

    auto zp = out_dir / (frame.id + "_zones.png");
    write_png_rgb(zp, zone_panel(it->second));
    out.zone_panels.push_back(zp);

    const auto pred_front = frontops::extract_front(it->second, ann.front.pixel_spacing_m);
    auto op = out_dir / (frame.id + "_overlay.png");
    write_png_rgb(op, front_overlay(pred_front, ann.front, options.dilation_radius, frame.intensity));
    out.overlays.push_back(op);

    auto u = uncertainty.find(frame.id);
    if (u == uncertainty.end()) continue;
    double vmax = 0.0;
    for (const auto& g : u->second)
      for (double v : g.values()) vmax = std::max(vmax, v);
    for (int k = 0; k < kZoneCount; ++k) {
      auto up = out_dir / (frame.id + "_unc_" + std::string(zone_name(static_cast<Zone>(k))) + ".png");
      write_png_rgb(up, uncertainty_panel(u->second[static_cast<std::size_t>(k)], vmax));
      out.uncertainty_panels.push_back(up);
    }
  }
  return out;
}

}  // namespace calfront::plot
