#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "calfront/calendar.hpp"
#include "calfront/dataset.hpp"
#include "calfront/datamodel.hpp"
#include "calfront/rockmask.hpp"

namespace calfront::synthgen {

/// Mean backscatter per class and low-frequency texture amplitude for one domain.
struct TextureStats {
  double na_mean = 0.0;
  double rock_mean = 0.55;
  double glacier_mean = 0.85;
  double ocean_mean = 0.2;
  double texture_amplitude = 0.15;  // relative amplitude of the static spatial modulation
  double brightness_jitter = 0.05;  // relative per-acquisition gain jitter

  bool operator==(const TextureStats&) const = default;
};

TextureStats source_texture();
TextureStats target_texture();

/// Geometry and appearance of one synthetic glacier. The glacier flows toward +column:
/// rock walls at the top and bottom, a rock backstop on the left, ocean to the right of the front.
struct SceneSpec {
  int height = 64;
  int width = 64;
  double pixel_spacing_m = 10.0;
  std::string glacier_id = "glacier";
  std::string domain = "source";
  Polarization polarization = Polarization::kHH;

  int na_border_px = 2;
  double wall_top = 0.22;      // upper rock wall thickness, fraction of height
  double wall_bottom = 0.22;   // lower rock wall thickness, fraction of height
  double wall_wobble = 0.04;   // wall undulation amplitude, fraction of height
  double backstop = 0.12;      // rock backstop width, fraction of width

  double front_baseline_col = 32.0;  // first ocean column at step 0
  double front_velocity = 0.0;       // px/step toward the ocean
  double front_wave_amplitude = 0.0;  // px
  double front_wave_period = 24.0;    // px

  std::set<int> melange_steps;
  int melange_band_px = 12;

  double speckle_strength = 0.05;  // variance of the unit-mean gamma speckle
  TextureStats texture;
  std::uint64_t seed = 0;
};

/// Throws ValidationError if the grid is too small, not divisible by 4, or the front could leave the grid
/// within `n_steps` steps.
void validate_spec(const SceneSpec& spec, int n_steps);

struct SyntheticAcquisition {
  SarFrame frame;
  ZoneMap zones;
  FrontMask front;
  bool melange = false;
};

/// `n_steps` acquisitions `cadence_days` apart starting at `start`.
std::vector<SyntheticAcquisition> generate_scene(const SceneSpec& spec, int n_steps, const Date& start, int cadence_days = 12);

/// Pixel-exact zone map of the scene at one step (no rendering).
ZoneMap scene_zones(const SceneSpec& spec, int step);

/// Vector description of the scene at step 0 (coastline, glacier outline, glacier tongue) in
/// rockmask grid coordinates with spacing = pixel_spacing_m and origin (0, 0).
std::vector<rockmask::PolygonSet> scene_polygons(const SceneSpec& spec);

/// Rock mask built through the rockmask pipeline from scene_polygons.
rockmask::RockMask scene_rock_mask(const SceneSpec& spec);

/// Steps whose date falls in `months`, each kept with probability `fraction` (seeded).
std::set<int> seasonal_melange_schedule(const Date& start, int n_steps, int cadence_days, const std::set<unsigned>& months,
                                        double fraction, std::uint64_t seed);

/// `count` per-glacier variations of `base` (geometry jitter, ids `<prefix><k>`, seeds derived from base.seed).
std::vector<SceneSpec> glacier_family(const SceneSpec& base, int count, const std::string& prefix);

struct DomainPairConfig {
  std::vector<SceneSpec> source_glaciers;
  std::vector<SceneSpec> target_glaciers;
  int source_cadence_days = 12;
  int target_cadence_days = 6;
  int source_first_year = 2017;
  int source_years = 2;
  int train_year = 2019;  // target few-shot labels: Jul-Aug of this year
  int val_year = 2017;
  int test_year = 2016;
  std::vector<std::size_t> val_glaciers;   // indices into target_glaciers
  std::vector<std::size_t> test_glaciers;  // indices into target_glaciers
  int eval_annotations_per_glacier = 10;   // manual labels in val/test years
  std::set<unsigned> melange_months{12, 1, 2, 3, 4};
  double melange_fraction = 1.0;
  bool rock_masks = true;
};

struct DomainPair {
  Dataset source;  // split train, every frame manually labelled
  Dataset target;  // splits train (few-shot), val, test
};

/// Source and target datasets with a controllable domain shift. Identical source and target specs
/// are accepted as a no-shift control. Throws DataError if any target partition ends up empty.
DomainPair generate_domain_pair(const DomainPairConfig& config);

}  // namespace calfront::synthgen
