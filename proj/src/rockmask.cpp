#define BOOST_ALLOW_DEPRECATED_HEADERS
// Overlay rescaling in Boost 1.74 moves output vertices off exact input coordinates.
#define BOOST_GEOMETRY_NO_ROBUSTNESS
#include "calfront/rockmask.hpp"

#include <algorithm>
#include <boost/geometry.hpp>
#include <boost/geometry/geometries/multi_polygon.hpp>
#include <boost/geometry/geometries/point_xy.hpp>
#include <boost/geometry/geometries/polygon.hpp>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

#include "calfront/errors.hpp"
#include "calfront/raster_io.hpp"

namespace calfront::rockmask {

namespace bg = boost::geometry;
using BPoint = bg::model::d2::point_xy<double>;
using BPolygon = bg::model::polygon<BPoint>;
using BMulti = bg::model::multi_polygon<BPolygon>;
using nlohmann::json;

struct Region::Impl {
  BMulti shape;
};

namespace {

BPolygon::ring_type to_ring(const std::vector<Point>& pts) {
  BPolygon::ring_type ring;
  for (const auto& p : pts) ring.push_back(BPoint(p.x, p.y));
  return ring;
}

std::vector<Point> from_ring(const BPolygon::ring_type& ring) {
  std::vector<Point> pts;
  pts.reserve(ring.size());
  for (const auto& p : ring) pts.push_back({p.x(), p.y()});
  return pts;
}

void check_ring(const std::vector<Point>& ring, std::size_t index) {
  std::size_t distinct = ring.size();
  if (!ring.empty() && ring.front() == ring.back()) --distinct;
  if (distinct < 3)
    throw ValidationError("polygon " + std::to_string(index) + " has fewer than 3 distinct vertices");
  for (const auto& p : ring)
    if (!std::isfinite(p.x) || !std::isfinite(p.y))
      throw ValidationError("polygon " + std::to_string(index) + " has a non-finite coordinate");
}

BPolygon to_polygon(const Polygon& polygon, std::size_t index) {
  check_ring(polygon.outer, index);
  BPolygon out;
  out.outer() = to_ring(polygon.outer);
  for (const auto& hole : polygon.holes) {
    check_ring(hole, index);
    out.inners().push_back(to_ring(hole));
  }
  bg::correct(out);
  std::string reason;
  if (!bg::is_valid(out, reason)) throw ValidationError("polygon " + std::to_string(index) + " is invalid: " + reason);
  return out;
}

}  // namespace

Region::Region() : impl_(std::make_unique<Impl>()) {}
Region::~Region() = default;
Region::Region(const Region& other) : impl_(std::make_unique<Impl>(*other.impl_)) {}
Region::Region(Region&&) noexcept = default;
Region& Region::operator=(const Region& other) {
  if (this != &other) impl_ = std::make_unique<Impl>(*other.impl_);
  return *this;
}
Region& Region::operator=(Region&&) noexcept = default;

Region Region::from_polygon(const Polygon& polygon) {
  Region r;
  r.impl_->shape.push_back(to_polygon(polygon, 0));
  return r;
}

Region Region::rectangle(double x0, double y0, double x1, double y1) {
  if (!(x1 > x0) || !(y1 > y0)) throw ValidationError("rectangle must have positive extent");
  return from_polygon(Polygon{{{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}, {}});
}

double Region::area() const { return bg::area(impl_->shape); }

bool Region::empty() const { return impl_->shape.empty(); }

Region Region::united(const Region& other) const {
  Region r;
  bg::union_(impl_->shape, other.impl_->shape, r.impl_->shape);
  return r;
}

Region Region::intersected(const Region& other) const {
  Region r;
  bg::intersection(impl_->shape, other.impl_->shape, r.impl_->shape);
  return r;
}

Region Region::subtracted(const Region& other) const {
  Region r;
  bg::difference(impl_->shape, other.impl_->shape, r.impl_->shape);
  return r;
}

std::vector<std::vector<Point>> Region::rings() const {
  std::vector<std::vector<Point>> out;
  for (const auto& poly : impl_->shape) {
    out.push_back(from_ring(poly.outer()));
    for (const auto& inner : poly.inners()) out.push_back(from_ring(inner));
  }
  return out;
}

std::vector<Polygon> Region::polygons() const {
  std::vector<Polygon> out;
  for (const auto& poly : impl_->shape) {
    Polygon p;
    p.outer = from_ring(poly.outer());
    for (const auto& inner : poly.inners()) p.holes.push_back(from_ring(inner));
    out.push_back(std::move(p));
  }
  return out;
}

std::string to_string(PolygonTag tag) {
  switch (tag) {
    case PolygonTag::kGlacierOutline: return "glacier_outline";
    case PolygonTag::kGlacierTongue: return "glacier_tongue";
    case PolygonTag::kCoastline: return "coastline";
  }
  return "?";
}

PolygonTag parse_polygon_tag(const std::string& text) {
  for (auto t : {PolygonTag::kGlacierOutline, PolygonTag::kGlacierTongue, PolygonTag::kCoastline})
    if (to_string(t) == text) return t;
  throw ValidationError("unknown polygon tag '" + text + "'");
}

Region region_of(const PolygonSet& set) {
  Region acc;
  for (std::size_t i = 0; i < set.polygons.size(); ++i) {
    Region single;
    try {
      single = Region::from_polygon(set.polygons[i]);
    } catch (const ValidationError& e) {
      std::string msg = e.what();
      const std::string prefix = "polygon 0";
      if (msg.rfind(prefix, 0) == 0) msg = msg.substr(prefix.size());
      throw ValidationError(to_string(set.tag) + " polygon " + std::to_string(i) + msg);
    }
    acc = acc.united(single);
  }
  return acc;
}

Region build_glacier_area(const PolygonSet& outlines, const PolygonSet& tongues) {
  if (outlines.tag != PolygonTag::kGlacierOutline) throw ValidationError("outline set must be tagged glacier_outline");
  if (tongues.tag != PolygonTag::kGlacierTongue) throw ValidationError("tongue set must be tagged glacier_tongue");
  return region_of(outlines).united(region_of(tongues));
}

Region build_rock_region(const PolygonSet& coastline, const Region& glacier_area) {
  if (coastline.tag != PolygonTag::kCoastline) throw ValidationError("coastline set must be tagged coastline");
  if (coastline.polygons.empty()) throw ValidationError("coastline polygon set is empty");
  return region_of(coastline).subtracted(glacier_area);
}

std::size_t RockMask::popcount() const {
  return static_cast<std::size_t>(std::ranges::count_if(bits.values(), [](std::uint8_t v) { return v != 0; }));
}

RockMask rasterize(const Region& region, const GridGeometry& g, const std::string& glacier_id) {
  if (g.height <= 0 || g.width <= 0) throw ValidationError("raster grid must have positive height and width");
  if (!(g.spacing > 0.0) || !std::isfinite(g.spacing)) throw ValidationError("raster spacing must be positive");
  RockMask mask{Grid<std::uint8_t>(g.height, g.width, 0), glacier_id, g, {}};
  const auto rings = region.rings();
  std::vector<double> crossings;
  auto centre_x = [&](int c) { return g.origin_x + (c + 0.5) * g.spacing; };
  for (int r = 0; r < g.height; ++r) {
    const double y = g.origin_y + (r + 0.5) * g.spacing;
    crossings.clear();
    for (const auto& ring : rings) {
      for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
        const Point& a = ring[i];
        const Point& b = ring[i + 1];
        // Half-open in y: an edge owns its lower endpoint only.
        if ((a.y <= y) == (b.y <= y)) continue;
        crossings.push_back(a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y));
      }
    }
    std::ranges::sort(crossings);
    for (std::size_t k = 0; k + 1 < crossings.size(); k += 2) {
      const double x0 = crossings[k];
      const double x1 = crossings[k + 1];
      // Half-open in x: [x0, x1).
      int c0 = static_cast<int>(std::ceil((x0 - g.origin_x) / g.spacing - 0.5));
      c0 = std::clamp(c0, 0, g.width);
      while (c0 > 0 && centre_x(c0 - 1) >= x0) --c0;
      while (c0 < g.width && centre_x(c0) < x0) ++c0;
      for (int c = c0; c < g.width && centre_x(c) < x1; ++c) mask.bits(r, c) = 1;
    }
  }
  return mask;
}

RockMask refine_near_front(const RockMask& mask, const std::vector<PixelEdit>& edits) {
  for (const auto& e : edits)
    if (!mask.bits.contains(e.row, e.col))
      throw ValidationError("edit (" + std::to_string(e.row) + "," + std::to_string(e.col) + ") outside the " +
                            std::to_string(mask.bits.height()) + "x" + std::to_string(mask.bits.width()) + " mask");
  RockMask out = mask;
  for (const auto& e : edits) {
    auto& v = out.bits(e.row, e.col);
    v = v ? 0 : 1;
    out.edit_log.push_back(e);
  }
  return out;
}

namespace {

std::vector<Point> ring_from_json(const json& j) {
  std::vector<Point> ring;
  for (const auto& p : j) {
    if (!p.is_array() || p.size() < 2) throw DataError("GeoJSON position must be [x, y]");
    ring.push_back({p[0].get<double>(), p[1].get<double>()});
  }
  return ring;
}

Polygon polygon_from_json(const json& rings) {
  if (!rings.is_array() || rings.empty()) throw DataError("GeoJSON polygon needs at least one ring");
  Polygon poly;
  poly.outer = ring_from_json(rings[0]);
  for (std::size_t i = 1; i < rings.size(); ++i) poly.holes.push_back(ring_from_json(rings[i]));
  return poly;
}

json ring_to_json(std::vector<Point> ring) {
  if (!ring.empty() && !(ring.front() == ring.back())) ring.push_back(ring.front());
  json arr = json::array();
  for (const auto& p : ring) arr.push_back({p.x, p.y});
  return arr;
}

}  // namespace

std::vector<PolygonSet> load_polygons_geojson(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open polygon file '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
  if (doc.value("type", "") != "FeatureCollection") throw DataError("'" + path.string() + "' is not a FeatureCollection");
  std::vector<PolygonSet> sets;
  auto set_for = [&](PolygonTag tag) -> PolygonSet& {
    for (auto& s : sets)
      if (s.tag == tag) return s;
    sets.push_back(PolygonSet{tag, {}});
    return sets.back();
  };
  const auto& features = doc.at("features");
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto& f = features[i];
    try {
      const auto tag = parse_polygon_tag(f.at("properties").at("tag").get<std::string>());
      const auto& geom = f.at("geometry");
      const auto type = geom.at("type").get<std::string>();
      auto& set = set_for(tag);
      if (type == "Polygon") {
        set.polygons.push_back(polygon_from_json(geom.at("coordinates")));
      } else if (type == "MultiPolygon") {
        for (const auto& rings : geom.at("coordinates")) set.polygons.push_back(polygon_from_json(rings));
      } else {
        throw DataError("unsupported geometry type '" + type + "'");
      }
    } catch (const json::exception& e) {
      throw DataError("feature " + std::to_string(i) + " in '" + path.string() + "': " + e.what());
    } catch (const ValidationError& e) {
      throw DataError("feature " + std::to_string(i) + " in '" + path.string() + "': " + e.what());
    }
  }
  return sets;
}

void save_polygons_geojson(const std::vector<PolygonSet>& sets, const std::filesystem::path& path) {
  json features = json::array();
  for (const auto& set : sets) {
    for (const auto& poly : set.polygons) {
      json rings = json::array();
      rings.push_back(ring_to_json(poly.outer));
      for (const auto& h : poly.holes) rings.push_back(ring_to_json(h));
      features.push_back({{"type", "Feature"},
                          {"properties", {{"tag", to_string(set.tag)}}},
                          {"geometry", {{"type", "Polygon"}, {"coordinates", rings}}}});
    }
  }
  json doc = {{"type", "FeatureCollection"}, {"features", features}};
  write_file_atomic(path, doc.dump(2) + "\n");
}

void save_edit_log(const std::vector<PixelEdit>& edits, const std::filesystem::path& path) {
  json arr = json::array();
  for (const auto& e : edits) arr.push_back({{"row", e.row}, {"col", e.col}, {"op", "toggle"}});
  write_file_atomic(path, arr.dump(2) + "\n");
}

std::vector<PixelEdit> load_edit_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open edit log '" + path.string() + "'");
  std::vector<PixelEdit> edits;
  try {
    const json arr = json::parse(in);
    for (const auto& e : arr) edits.push_back({e.at("row").get<int>(), e.at("col").get<int>()});
  } catch (const json::exception& e) {
    throw DataError("malformed edit log '" + path.string() + "': " + e.what());
  }
  return edits;
}

}  // namespace calfront::rockmask
