#include <doctest.h>

#include <set>

#include "calfront/errors.hpp"
#include "calfront/experiment.hpp"
#include "calfront/frontops.hpp"
#include "calfront/synthgen.hpp"

using namespace calfront;

namespace {

synthgen::SceneSpec small_spec() {
  synthgen::SceneSpec s;
  s.height = 32;
  s.width = 48;
  s.front_baseline_col = 28;
  s.seed = 3;
  return s;
}

// Mean first-ocean column over the fjord rows.
double mean_front_col(const ZoneMap& z) {
  double sum = 0;
  int n = 0;
  for (int r = 0; r < z.height(); ++r)
    for (int c = 1; c < z.width(); ++c)
      if (z(r, c) == Zone::kOcean && z(r, c - 1) == Zone::kGlacier) {
        sum += c;
        ++n;
      }
  return n ? sum / n : -1.0;
}

double variance(const Grid<double>& g) {
  double m = 0, v = 0;
  for (double x : g.values()) m += x;
  m /= static_cast<double>(g.size());
  for (double x : g.values()) v += (x - m) * (x - m);
  return v / static_cast<double>(g.size());
}

}  // namespace

TEST_CASE("static scene gives identical zone maps") {
  const auto acqs = synthgen::generate_scene(small_spec(), 3, make_date(2016, 1, 1));
  REQUIRE(acqs.size() == 3);
  CHECK(acqs[0].zones == acqs[1].zones);
  CHECK(acqs[1].zones == acqs[2].zones);
  CHECK(acqs[0].frame.date < acqs[1].frame.date);
  CHECK(days_between(acqs[0].frame.date, acqs[1].frame.date) == 12);
}

TEST_CASE("front advances one column per step at velocity 1") {
  auto spec = small_spec();
  spec.front_velocity = 1.0;
  const auto acqs = synthgen::generate_scene(spec, 4, make_date(2016, 1, 1));
  for (int k = 1; k < 4; ++k)
    CHECK(mean_front_col(acqs[static_cast<std::size_t>(k)].zones) - mean_front_col(acqs[static_cast<std::size_t>(k - 1)].zones) ==
          doctest::Approx(1.0));
}

TEST_CASE("generation is deterministic") {
  auto spec = small_spec();
  spec.front_wave_amplitude = 2.0;
  spec.melange_steps = {1};
  const auto a = synthgen::generate_scene(spec, 3, make_date(2016, 1, 1));
  const auto b = synthgen::generate_scene(spec, 3, make_date(2016, 1, 1));
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].frame.intensity == b[i].frame.intensity);
    CHECK(a[i].zones == b[i].zones);
  }
  spec.seed = 4;
  const auto c = synthgen::generate_scene(spec, 3, make_date(2016, 1, 1));
  CHECK_FALSE(a[0].frame.intensity == c[0].frame.intensity);
}

TEST_CASE("stored fronts equal extract_front and all four classes are present") {
  auto spec = small_spec();
  spec.front_velocity = -0.5;
  spec.front_wave_amplitude = 2.0;
  spec.melange_steps = {0, 2};
  for (const auto& a : synthgen::generate_scene(spec, 5, make_date(2016, 1, 1))) {
    CHECK(frontops::extract_front(a.zones, spec.pixel_spacing_m) == a.front);
    CHECK_FALSE(a.front.empty());
    std::set<Zone> present(a.zones.values().begin(), a.zones.values().end());
    CHECK(present.size() == 4);
    for (double v : a.frame.intensity.values()) CHECK(std::isfinite(v));
  }
}

TEST_CASE("melange changes intensity only") {
  auto spec = small_spec();
  const auto clear = synthgen::generate_scene(spec, 2, make_date(2016, 1, 1));
  spec.melange_steps = {0, 1};
  const auto mel = synthgen::generate_scene(spec, 2, make_date(2016, 1, 1));
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(mel[i].melange);
    CHECK_FALSE(clear[i].melange);
    CHECK(mel[i].zones == clear[i].zones);
    CHECK_FALSE(mel[i].frame.intensity == clear[i].frame.intensity);
  }
  // the band next to the front looks like glacier: brighter than open ocean on average
  double band = 0, open = 0;
  int nb = 0, no = 0;
  const auto& z = mel[0].zones;
  const int front = static_cast<int>(std::lround(mean_front_col(z)));
  for (int r = 0; r < z.height(); ++r)
    for (int c = 0; c < z.width(); ++c) {
      if (z(r, c) != Zone::kOcean) continue;
      if (c < front + spec.melange_band_px - 2) {
        band += mel[0].frame.intensity(r, c);
        ++nb;
      } else if (c >= front + spec.melange_band_px + 2) {
        open += mel[0].frame.intensity(r, c);
        ++no;
      }
    }
  REQUIRE(nb > 0);
  REQUIRE(no > 0);
  CHECK(band / nb > open / no + 0.2);
}

TEST_CASE("spec validation") {
  auto spec = small_spec();
  spec.height = 30;
  CHECK_THROWS_AS(synthgen::validate_spec(spec, 1), ValidationError);
  spec = small_spec();
  spec.width = 28;
  CHECK_THROWS_AS(synthgen::validate_spec(spec, 1), ValidationError);
  spec = small_spec();
  spec.front_velocity = 1.0;
  CHECK_NOTHROW(synthgen::validate_spec(spec, 5));
  CHECK_THROWS_AS(synthgen::validate_spec(spec, 40), ValidationError);
  CHECK_THROWS_AS(synthgen::generate_scene(spec, 40, make_date(2016, 1, 1)), ValidationError);
}

TEST_CASE("speckle strength raises intensity variance") {
  auto spec = small_spec();
  spec.texture.texture_amplitude = 0.0;
  spec.texture.brightness_jitter = 0.0;
  spec.speckle_strength = 0.05;
  const auto lo = synthgen::generate_scene(spec, 1, make_date(2016, 1, 1));
  spec.speckle_strength = 0.10;
  const auto hi = synthgen::generate_scene(spec, 1, make_date(2016, 1, 1));
  // Compare the within-class variance of the glacier interior.
  auto glacier_var = [](const synthgen::SyntheticAcquisition& a) {
    std::vector<double> v;
    for (int r = 0; r < a.zones.height(); ++r)
      for (int c = 0; c < a.zones.width(); ++c)
        if (a.zones(r, c) == Zone::kGlacier) v.push_back(a.frame.intensity(r, c));
    Grid<double> out(1, static_cast<int>(v.size()));
    std::copy(v.begin(), v.end(), out.values().begin());
    return variance(out);
  };
  CHECK(glacier_var(hi[0]) > glacier_var(lo[0]));
}

TEST_CASE("melange schedule respects months and fraction") {
  const auto start = make_date(2016, 1, 1);
  const auto all = synthgen::seasonal_melange_schedule(start, 60, 6, {12, 1, 2, 3, 4}, 1.0, 1);
  for (int s = 0; s < 60; ++s) {
    const unsigned m = month_of(add_days(start, 6L * s));
    CHECK((all.count(s) == 1) == (m <= 4 || m == 12));
  }
  CHECK(synthgen::seasonal_melange_schedule(start, 60, 6, {12, 1, 2, 3, 4}, 0.0, 1).empty());
}

TEST_CASE("domain pair: partitions, label matching, shift control") {
  const auto cfg = experiment::domain_pair_config(experiment::BenchmarkConfig{});
  const auto pair = synthgen::generate_domain_pair(cfg);

  std::map<Split, std::set<int>> years;
  std::size_t test_matched = 0;
  for (std::size_t i = 0; i < pair.target.size(); ++i) {
    const auto& rec = pair.target.manifest.records[i];
    years[rec.split].insert(year_of(rec.date));
    if (rec.split == Split::kTest && rec.label_match) ++test_matched;
    CHECK(rec.domain == "target");
  }
  for (auto a : {Split::kTrain, Split::kVal, Split::kTest})
    for (auto b : {Split::kTrain, Split::kVal, Split::kTest})
      if (a != b)
        for (int y : years[a]) CHECK(years[b].count(y) == 0);
  CHECK(test_matched >= 20);

  // exactly one manual annotation per glacier in the few-shot pool
  const auto train = pair.target.subset(Split::kTrain);
  std::map<std::string, int> manual;
  for (std::size_t i = 0; i < train.size(); ++i) manual[train.frames[i].glacier_id] += train.manifest.records[i].label_match;
  for (const auto& [g, n] : manual) CHECK(n == 1);
  CHECK(manual.size() == cfg.target_glaciers.size());

  // winter melange coverage
  std::size_t winter = 0, with_melange = 0;
  for (const auto& rec : pair.target.manifest.records) {
    const unsigned m = month_of(rec.date);
    if (m == 12 || m <= 4) {
      ++winter;
      with_melange += rec.melange.value_or(false);
    }
  }
  REQUIRE(winter > 0);
  CHECK(2 * with_melange >= winter);

  // identical specs are accepted (no-shift control)
  auto same = cfg;
  same.target_glaciers = same.source_glaciers;
  CHECK_NOTHROW(synthgen::generate_domain_pair(same));

  // an empty partition is rejected
  auto none = cfg;
  none.test_glaciers.clear();
  CHECK_THROWS_AS(synthgen::generate_domain_pair(none), DataError);
}

TEST_CASE("scene rock mask agrees with the rock class away from the front") {
  const auto spec = small_spec();
  const auto mask = synthgen::scene_rock_mask(spec);
  const auto z = synthgen::scene_zones(spec, 0);
  REQUIRE(mask.bits.same_shape(z));
  std::size_t agree = 0;
  for (int r = 0; r < z.height(); ++r)
    for (int c = 0; c < z.width(); ++c) agree += (mask.bits(r, c) == 1) == (z(r, c) == Zone::kRock);
  CHECK(static_cast<double>(agree) / static_cast<double>(z.size()) > 0.97);
}
