#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "calfront/grid.hpp"

namespace calfront::rockmask {

struct Point {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Point&) const = default;
};

enum class PolygonTag { kGlacierOutline, kGlacierTongue, kCoastline };

std::string to_string(PolygonTag tag);
PolygonTag parse_polygon_tag(const std::string& text);

/// One simple polygon: outer ring, optional holes. Rings may be given open or closed.
struct Polygon {
  std::vector<Point> outer;
  std::vector<std::vector<Point>> holes;
};

struct PolygonSet {
  PolygonTag tag = PolygonTag::kGlacierOutline;
  std::vector<Polygon> polygons;
};

/// Planar polygonal region (union of disjoint polygons with holes), planar meters.
class Region {
 public:
  Region();
  ~Region();
  Region(const Region&);
  Region(Region&&) noexcept;
  Region& operator=(const Region&);
  Region& operator=(Region&&) noexcept;

  static Region from_polygon(const Polygon& polygon);
  static Region rectangle(double x0, double y0, double x1, double y1);

  double area() const;
  bool empty() const;

  Region united(const Region& other) const;
  Region intersected(const Region& other) const;
  Region subtracted(const Region& other) const;

  /// Every ring of the region, outer and inner, as closed vertex lists.
  std::vector<std::vector<Point>> rings() const;
  std::vector<Polygon> polygons() const;

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

/// Validates and unions a polygon set. Throws ValidationError with the offending polygon index.
Region region_of(const PolygonSet& set);

/// Combined glacier footprint: union of outlines and tongues.
Region build_glacier_area(const PolygonSet& outlines, const PolygonSet& tongues);

/// Land inside the coastline that is not glacier-covered. Throws ValidationError on an empty coastline.
Region build_rock_region(const PolygonSet& coastline, const Region& glacier_area);

/// Frame grid placement: pixel (row, col) covers x in [origin_x + col*s, origin_x + (col+1)*s),
/// y in [origin_y + row*s, origin_y + (row+1)*s).
struct GridGeometry {
  double origin_x = 0.0;
  double origin_y = 0.0;
  double spacing = 1.0;
  int height = 0;
  int width = 0;

  bool operator==(const GridGeometry&) const = default;
};

struct PixelEdit {
  int row = 0;
  int col = 0;

  bool operator==(const PixelEdit&) const = default;
};

struct RockMask {
  Grid<std::uint8_t> bits;  // 1 = rock
  std::string glacier_id;
  GridGeometry geometry;
  std::vector<PixelEdit> edit_log;

  std::size_t popcount() const;
  bool operator==(const RockMask&) const = default;
};

/// Pixel set to 1 iff its centre lies inside the region. Centres on a boundary count as inside
/// when the region lies to their +x side (left edges) or +y side (bottom edges).
RockMask rasterize(const Region& region, const GridGeometry& geometry, const std::string& glacier_id = {});

/// Toggles the listed pixels and appends them to the edit log.
RockMask refine_near_front(const RockMask& mask, const std::vector<PixelEdit>& edits);

/// GeoJSON FeatureCollection of Polygon/MultiPolygon features; each feature's `properties.tag` is
/// one of glacier_outline, glacier_tongue, coastline. Returns one set per tag present.
std::vector<PolygonSet> load_polygons_geojson(const std::filesystem::path& path);
void save_polygons_geojson(const std::vector<PolygonSet>& sets, const std::filesystem::path& path);

void save_edit_log(const std::vector<PixelEdit>& edits, const std::filesystem::path& path);
std::vector<PixelEdit> load_edit_log(const std::filesystem::path& path);

}  // namespace calfront::rockmask
