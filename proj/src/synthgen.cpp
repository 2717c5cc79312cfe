#include "calfront/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "calfront/errors.hpp"

namespace calfront::synthgen {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Geometry phases come from their own stream so rendering changes never move the scene.
struct Geometry {
  const SceneSpec& spec;
  double wave_phase = 0.0;
  double wall_phase_top = 0.0;
  double wall_phase_bottom = 0.0;
  int backstop_cols = 0;

  explicit Geometry(const SceneSpec& s) : spec(s) {
    std::mt19937_64 rng(s.seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> phase(0.0, kTwoPi);
    wave_phase = phase(rng);
    wall_phase_top = phase(rng);
    wall_phase_bottom = phase(rng);
    backstop_cols = static_cast<int>(std::lround(s.backstop * s.width));
  }

  int wall_top_row(int col) const {
    const double t = spec.wall_top * spec.height +
                     spec.wall_wobble * spec.height * std::sin(kTwoPi * 1.5 * col / spec.width + wall_phase_top);
    return static_cast<int>(std::lround(t));
  }

  // First row of the lower wall.
  int wall_bottom_row(int col) const {
    const double t = spec.wall_bottom * spec.height +
                     spec.wall_wobble * spec.height * std::sin(kTwoPi * 1.5 * col / spec.width + wall_phase_bottom);
    return spec.height - static_cast<int>(std::lround(t));
  }

  // First ocean column of a row.
  int front_col(int row, int step) const {
    const double wave = spec.front_wave_amplitude * std::sin(kTwoPi * row / spec.front_wave_period + wave_phase);
    return static_cast<int>(std::lround(spec.front_baseline_col + spec.front_velocity * step + wave));
  }

  bool is_na(int r, int c) const {
    const int b = spec.na_border_px;
    return r < b || c < b || r >= spec.height - b || c >= spec.width - b;
  }

  Zone zone_at(int r, int c, int step) const {
    if (is_na(r, c)) return Zone::kNA;
    if (r < wall_top_row(c) || r >= wall_bottom_row(c) || c < backstop_cols) return Zone::kRock;
    return c < front_col(r, step) ? Zone::kGlacier : Zone::kOcean;
  }
};

// Bilinear upsampling of a coarse N(0,1) lattice: a smooth static texture field.
Grid<double> smooth_field(int height, int width, int cell, std::mt19937_64& rng) {
  const int gh = height / cell + 2;
  const int gw = width / cell + 2;
  std::normal_distribution<double> normal(0.0, 1.0);
  Grid<double> coarse(gh, gw);
  for (auto& v : coarse.values()) v = normal(rng);
  Grid<double> field(height, width);
  for (int r = 0; r < height; ++r) {
    const double fy = static_cast<double>(r) / cell;
    const int y0 = static_cast<int>(fy);
    const double ty = fy - y0;
    for (int c = 0; c < width; ++c) {
      const double fx = static_cast<double>(c) / cell;
      const int x0 = static_cast<int>(fx);
      const double tx = fx - x0;
      field(r, c) = (1 - ty) * ((1 - tx) * coarse(y0, x0) + tx * coarse(y0, x0 + 1)) +
                    ty * ((1 - tx) * coarse(y0 + 1, x0) + tx * coarse(y0 + 1, x0 + 1));
    }
  }
  return field;
}

std::vector<rockmask::Polygon> row_runs(const SceneSpec& spec, auto&& predicate) {
  std::vector<rockmask::Polygon> rects;
  const double s = spec.pixel_spacing_m;
  for (int r = 0; r < spec.height; ++r) {
    int c = 0;
    while (c < spec.width) {
      if (!predicate(r, c)) {
        ++c;
        continue;
      }
      const int c0 = c;
      while (c < spec.width && predicate(r, c)) ++c;
      const double x0 = c0 * s;
      const double x1 = c * s;
      const double y0 = r * s;
      const double y1 = (r + 1) * s;
      rects.push_back({{{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}, {}});
    }
  }
  return rects;
}

std::string frame_id(const std::string& glacier, const Date& date) { return glacier + "_" + format_iso_date(date); }

}  // namespace

TextureStats source_texture() { return TextureStats{}; }

TextureStats target_texture() {
  TextureStats t;
  // Dark rock and wind-roughened (brighter) open water relative to the source domain.
  t.rock_mean = 0.3;
  t.glacier_mean = 0.7;
  t.ocean_mean = 0.45;
  t.texture_amplitude = 0.2;
  return t;
}

void validate_spec(const SceneSpec& spec, int n_steps) {
  auto fail = [&](const std::string& why) { return ValidationError("scene '" + spec.glacier_id + "': " + why); };
  if (spec.height < 32 || spec.width < 32) throw fail("height and width must be at least 32");
  if (spec.height % 4 != 0 || spec.width % 4 != 0) throw fail("height and width must be divisible by 4");
  if (!(spec.pixel_spacing_m > 0.0)) throw fail("pixel spacing must be positive");
  if (spec.na_border_px < 0) throw fail("NA border must be non-negative");
  if (spec.melange_band_px < 0) throw fail("melange band must be non-negative");
  if (spec.speckle_strength < 0.0) throw fail("speckle strength must be non-negative");
  if (!(spec.front_wave_period > 0.0)) throw fail("front wave period must be positive");
  if (spec.front_wave_amplitude * kTwoPi / spec.front_wave_period > 1.0)
    throw fail("front wave is too steep (amplitude * 2pi / period must be <= 1)");
  if (n_steps < 1) throw fail("n_steps must be at least 1");
  const Geometry g(spec);
  const int b = spec.na_border_px;
  for (int c = b; c < spec.width - b; ++c) {
    if (g.wall_top_row(c) <= b || g.wall_bottom_row(c) >= spec.height - b)
      throw fail("rock walls must be at least one pixel thick inside the NA border");
    if (g.wall_bottom_row(c) - g.wall_top_row(c) < 4) throw fail("fjord narrower than 4 rows at column " + std::to_string(c));
  }
  if (g.backstop_cols <= b) throw fail("rock backstop must extend past the NA border");
  for (int step : {0, n_steps - 1}) {
    for (int r = b; r < spec.height - b; ++r) {
      const int f = g.front_col(r, step);
      if (f <= g.backstop_cols || f >= spec.width - b)
        throw fail("front leaves the grid at step " + std::to_string(step) + ", row " + std::to_string(r) + " (first ocean column " +
                   std::to_string(f) + ", allowed " + std::to_string(g.backstop_cols + 1) + ".." +
                   std::to_string(spec.width - b - 1) + ")");
    }
  }
}

ZoneMap scene_zones(const SceneSpec& spec, int step) {
  const Geometry g(spec);
  ZoneMap zones(spec.height, spec.width);
  for (int r = 0; r < spec.height; ++r)
    for (int c = 0; c < spec.width; ++c) zones(r, c) = g.zone_at(r, c, step);
  return zones;
}

std::vector<SyntheticAcquisition> generate_scene(const SceneSpec& spec, int n_steps, const Date& start, int cadence_days) {
  if (cadence_days < 1) throw ValidationError("cadence must be at least one day");
  validate_spec(spec, n_steps);
  const Geometry g(spec);
  std::mt19937_64 rng(spec.seed);
  const int cell = std::max(4, spec.height / 8);
  const Grid<double> rock_tex = smooth_field(spec.height, spec.width, cell, rng);
  const Grid<double> ice_tex = smooth_field(spec.height, spec.width, cell, rng);
  const Grid<double> ocean_tex = smooth_field(spec.height, spec.width, cell, rng);
  const auto& tx = spec.texture;
  auto modulation = [&](double field) { return std::max(0.1, 1.0 + tx.texture_amplitude * field); };

  std::vector<SyntheticAcquisition> out;
  out.reserve(static_cast<std::size_t>(n_steps));
  std::uniform_real_distribution<double> jitter(-1.0, 1.0);
  for (int step = 0; step < n_steps; ++step) {
    SyntheticAcquisition acq;
    acq.melange = spec.melange_steps.contains(step);
    acq.zones = scene_zones(spec, step);
    const Date date = add_days(start, static_cast<long>(step) * cadence_days);

    std::vector<Pixel> front;
    for (int r = 0; r < spec.height; ++r) {
      for (int c = 0; c < spec.width; ++c) {
        if (g.zone_at(r, c, step) != Zone::kGlacier) continue;
        bool touches_ocean = false;
        for (int dr = -1; dr <= 1 && !touches_ocean; ++dr)
          for (int dc = -1; dc <= 1 && !touches_ocean; ++dc) {
            const int rr = r + dr;
            const int cc = c + dc;
            touches_ocean = (dr || dc) && rr >= 0 && cc >= 0 && rr < spec.height && cc < spec.width &&
                            g.zone_at(rr, cc, step) == Zone::kOcean;
          }
        if (touches_ocean) front.push_back({r, c});
      }
    }
    acq.front = make_front_mask(spec.height, spec.width, spec.pixel_spacing_m, std::move(front));

    const double gain = 1.0 + tx.brightness_jitter * jitter(rng);
    const double shape = spec.speckle_strength > 0.0 ? 1.0 / spec.speckle_strength : 0.0;
    std::gamma_distribution<double> speckle(shape > 0.0 ? shape : 1.0, spec.speckle_strength > 0.0 ? spec.speckle_strength : 1.0);
    Grid<double> intensity(spec.height, spec.width);
    for (int r = 0; r < spec.height; ++r) {
      for (int c = 0; c < spec.width; ++c) {
        const Zone z = acq.zones(r, c);
        double mean = tx.na_mean;
        double mod = 1.0;
        switch (z) {
          case Zone::kNA: break;
          case Zone::kRock:
            mean = tx.rock_mean;
            mod = modulation(rock_tex(r, c));
            break;
          case Zone::kGlacier:
            mean = tx.glacier_mean;
            mod = modulation(ice_tex(r, c));
            break;
          case Zone::kOcean:
            if (acq.melange && c - g.front_col(r, step) < spec.melange_band_px) {
              mean = tx.glacier_mean;
              mod = modulation(ice_tex(r, c));
            } else {
              mean = tx.ocean_mean;
              mod = modulation(ocean_tex(r, c));
            }
            break;
        }
        double v = mean * mod * gain;
        // Speckle is drawn for every pixel so the stream does not depend on the class layout.
        const double n = spec.speckle_strength > 0.0 ? speckle(rng) : 1.0;
        if (z != Zone::kNA) v *= n;
        intensity(r, c) = v;
      }
    }
    acq.frame.id = frame_id(spec.glacier_id, date);
    acq.frame.intensity = std::move(intensity);
    acq.frame.date = date;
    acq.frame.polarization = spec.polarization;
    acq.frame.pixel_spacing_m = spec.pixel_spacing_m;
    acq.frame.glacier_id = spec.glacier_id;
    acq.frame.domain = spec.domain;
    out.push_back(std::move(acq));
  }
  return out;
}

std::vector<rockmask::PolygonSet> scene_polygons(const SceneSpec& spec) {
  const Geometry g(spec);
  auto land = [&](int r, int c) {
    const Zone z = g.zone_at(r, c, 0);
    return z == Zone::kRock || z == Zone::kGlacier;
  };
  // Outline reflects an older, shorter glacier; the tongue covers the current terminus.
  auto outline = [&](int r, int c) { return g.zone_at(r, c, 0) == Zone::kGlacier && c < g.front_col(r, 0) - 4; };
  auto tongue = [&](int r, int c) {
    return g.zone_at(r, c, 0) == Zone::kGlacier && c >= std::max(g.backstop_cols, g.front_col(r, 0) - 10);
  };
  return {rockmask::PolygonSet{rockmask::PolygonTag::kCoastline, row_runs(spec, land)},
          rockmask::PolygonSet{rockmask::PolygonTag::kGlacierOutline, row_runs(spec, outline)},
          rockmask::PolygonSet{rockmask::PolygonTag::kGlacierTongue, row_runs(spec, tongue)}};
}

rockmask::RockMask scene_rock_mask(const SceneSpec& spec) {
  const auto sets = scene_polygons(spec);
  const auto glacier = rockmask::build_glacier_area(sets[1], sets[2]);
  const auto rock = rockmask::build_rock_region(sets[0], glacier);
  return rockmask::rasterize(rock, {0.0, 0.0, spec.pixel_spacing_m, spec.height, spec.width}, spec.glacier_id);
}

std::set<int> seasonal_melange_schedule(const Date& start, int n_steps, int cadence_days, const std::set<unsigned>& months,
                                        double fraction, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::set<int> steps;
  for (int k = 0; k < n_steps; ++k) {
    const double draw = u(rng);
    if (months.contains(month_of(add_days(start, static_cast<long>(k) * cadence_days))) && draw < fraction) steps.insert(k);
  }
  return steps;
}

std::vector<SceneSpec> glacier_family(const SceneSpec& base, int count, const std::string& prefix) {
  std::vector<SceneSpec> out;
  std::mt19937_64 rng(base.seed * 7919ULL + 17ULL);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < count; ++k) {
    SceneSpec s = base;
    s.glacier_id = prefix + std::to_string(k);
    s.seed = base.seed * 1000003ULL + static_cast<std::uint64_t>(k) + 1ULL;
    s.wall_top = base.wall_top * (1.0 + 0.25 * u(rng));
    s.wall_bottom = base.wall_bottom * (1.0 + 0.25 * u(rng));
    s.backstop = base.backstop * (1.0 + 0.25 * u(rng));
    s.front_baseline_col = std::round(base.front_baseline_col + 0.1 * base.width * u(rng));
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

int steps_for_years(const Date& start, int years, int cadence) {
  const Date end = make_date(year_of(start) + years, 1, 1);
  return static_cast<int>((days_between(start, end) + cadence - 1) / cadence);
}

Annotation annotation_of(const SyntheticAcquisition& acq) {
  return Annotation{acq.frame.glacier_id, acq.frame.date, acq.zones, acq.front, Provenance::kManual};
}

ManifestRecord record_of(const SyntheticAcquisition& acq, Split split, bool label_match) {
  ManifestRecord rec;
  rec.frame_path = acq.frame.id;
  rec.glacier_id = acq.frame.glacier_id;
  rec.date = acq.frame.date;
  rec.polarization = acq.frame.polarization;
  rec.pixel_spacing_m = acq.frame.pixel_spacing_m;
  rec.domain = acq.frame.domain;
  rec.split = split;
  rec.label_match = label_match;
  rec.melange = acq.melange;
  return rec;
}

// Dense year: m evenly spaced manual annotations, every frame labelled by the nearest one.
void add_eval_year(Dataset& ds, const std::vector<SyntheticAcquisition>& acqs, int year, int m, Split split) {
  std::vector<const SyntheticAcquisition*> in_year;
  for (const auto& a : acqs)
    if (year_of(a.frame.date) == year) in_year.push_back(&a);
  if (in_year.empty()) return;
  const int n = static_cast<int>(in_year.size());
  m = std::min(m, n);
  std::vector<Annotation> annotations;
  for (int k = 0; k < m; ++k) {
    const int idx = m == 1 ? n / 2 : static_cast<int>(std::lround(static_cast<double>(k) * (n - 1) / (m - 1)));
    annotations.push_back(annotation_of(*in_year[static_cast<std::size_t>(idx)]));
  }
  std::vector<SarFrame> frames;
  for (const auto* a : in_year) frames.push_back(a->frame);
  const auto manifest = assign_nearest_annotation(frames, annotations, split);
  for (std::size_t i = 0; i < in_year.size(); ++i) {
    const auto& rec = manifest.records[i];
    const auto ann = nearest_annotation_index(frames[i], annotations);
    auto out = record_of(*in_year[i], split, rec.label_match);
    ds.add(in_year[i]->frame, annotations[*ann], std::move(out));
  }
}

}  // namespace

DomainPair generate_domain_pair(const DomainPairConfig& cfg) {
  if (cfg.source_glaciers.empty() || cfg.target_glaciers.empty())
    throw ValidationError("domain pair needs at least one source and one target glacier");
  DomainPair pair;

  const Date source_start = make_date(cfg.source_first_year, 1, 1);
  const int source_steps = steps_for_years(source_start, cfg.source_years, cfg.source_cadence_days);
  for (auto spec : cfg.source_glaciers) {
    spec.domain = "source";
    spec.melange_steps = seasonal_melange_schedule(source_start, source_steps, cfg.source_cadence_days, cfg.melange_months,
                                                   cfg.melange_fraction, spec.seed + 101);
    const auto acqs = generate_scene(spec, source_steps, source_start, cfg.source_cadence_days);
    for (const auto& a : acqs) pair.source.add(a.frame, annotation_of(a), record_of(a, Split::kTrain, true));
    if (cfg.rock_masks) pair.source.rock_masks[spec.glacier_id] = scene_rock_mask(spec).bits;
  }

  const int first_year = std::min({cfg.train_year, cfg.val_year, cfg.test_year});
  const int last_year = std::max({cfg.train_year, cfg.val_year, cfg.test_year});
  const Date target_start = make_date(first_year, 1, 1);
  const int target_steps = steps_for_years(target_start, last_year - first_year + 1, cfg.target_cadence_days);
  for (std::size_t gi = 0; gi < cfg.target_glaciers.size(); ++gi) {
    auto spec = cfg.target_glaciers[gi];
    spec.domain = "target";
    spec.melange_steps = seasonal_melange_schedule(target_start, target_steps, cfg.target_cadence_days, cfg.melange_months,
                                                   cfg.melange_fraction, spec.seed + 101);
    const auto acqs = generate_scene(spec, target_steps, target_start, cfg.target_cadence_days);

    // Few-shot: one manual label near mid-July, shared across July and August.
    std::vector<SarFrame> season;
    std::vector<const SyntheticAcquisition*> season_acq;
    for (const auto& a : acqs) {
      if (year_of(a.frame.date) == cfg.train_year) {
        season.push_back(a.frame);
        season_acq.push_back(&a);
      }
    }
    if (!season.empty()) {
      const Date target_day = make_date(cfg.train_year, 7, 15);
      const auto* best = season_acq.front();
      for (const auto* a : season_acq)
        if (std::labs(days_between(a->frame.date, target_day)) < std::labs(days_between(best->frame.date, target_day))) best = a;
      const auto manual = annotation_of(*best);
      const auto prop = propagate_summer_label(manual, season);
      for (const auto& [idx, label] : prop.pairs) {
        const bool match = label.provenance == Provenance::kManual;
        pair.target.add(season[idx], manual, record_of(*season_acq[idx], Split::kTrain, match));
      }
    }
    if (std::ranges::find(cfg.val_glaciers, gi) != cfg.val_glaciers.end())
      add_eval_year(pair.target, acqs, cfg.val_year, cfg.eval_annotations_per_glacier, Split::kVal);
    if (std::ranges::find(cfg.test_glaciers, gi) != cfg.test_glaciers.end())
      add_eval_year(pair.target, acqs, cfg.test_year, cfg.eval_annotations_per_glacier, Split::kTest);
    if (cfg.rock_masks) pair.target.rock_masks[spec.glacier_id] = scene_rock_mask(spec).bits;
  }

  for (auto split : {Split::kTrain, Split::kVal, Split::kTest}) {
    const auto n = std::ranges::count_if(pair.target.manifest.records, [&](const auto& r) { return r.split == split; });
    if (n == 0) throw DataError("target partition '" + std::string(to_string(split)) + "' is empty");
  }
  pair.source.validate();
  pair.target.validate();
  return pair;
}

}  // namespace calfront::synthgen
