#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>

#include "calfront/dataset.hpp"
#include "calfront/errors.hpp"
#include "calfront/raster_io.hpp"
#include "calfront/synthgen.hpp"

using namespace calfront;
namespace fs = std::filesystem;

namespace {

SarFrame frame_on(const std::string& glacier, Date d) {
  SarFrame f;
  f.id = glacier + "_" + format_iso_date(d);
  f.intensity = Grid<double>(4, 4, 0.5);
  f.date = d;
  f.glacier_id = glacier;
  return f;
}

Annotation ann_on(const std::string& glacier, Date d, Provenance p = Provenance::kManual) {
  Annotation a;
  a.glacier_id = glacier;
  a.date = d;
  a.zones = ZoneMap(4, 4, Zone::kGlacier);
  a.front = make_front_mask(4, 4, 10.0, {});
  a.provenance = p;
  return a;
}

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("calfront_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("calendar") {
  CHECK(format_iso_date(parse_iso_date("2016-05-10")) == "2016-05-10");
  CHECK_THROWS_AS(parse_iso_date("2016-13-01"), ValidationError);
  CHECK_THROWS_AS(parse_iso_date("16-05-10"), ValidationError);
  CHECK(days_between(make_date(2016, 5, 10), make_date(2016, 6, 1)) == 22);
  CHECK(add_days(make_date(2016, 2, 28), 1) == make_date(2016, 2, 29));
  CHECK(month_name(9) == "September");
}

TEST_CASE("zone labels reject values outside 0..3") {
  Grid<std::uint8_t> raw(2, 2, 1);
  CHECK(zones_from_raw(raw)(0, 0) == Zone::kRock);
  raw(1, 1) = 5;
  CHECK_THROWS_AS(zones_from_raw(raw), DataError);
}

TEST_CASE("frame validation") {
  auto f = frame_on("g", make_date(2016, 1, 1));
  CHECK_NOTHROW(validate_frame(f));
  f.pixel_spacing_m = 0.0;
  CHECK_THROWS_AS(validate_frame(f), ValidationError);
  f.pixel_spacing_m = 10.0;
  f.intensity(1, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(validate_frame(f), ValidationError);
  f.intensity = Grid<double>();
  CHECK_THROWS_AS(validate_frame(f), ValidationError);
}

TEST_CASE("summer label propagation") {
  const auto manual = ann_on("g", make_date(2019, 7, 15));
  SUBCASE("single frame on the annotation date") {
    const auto r = propagate_summer_label(manual, {frame_on("g", make_date(2019, 7, 15))});
    REQUIRE(r.pairs.size() == 1);
    CHECK(r.pairs[0].second.provenance == Provenance::kManual);
  }
  SUBCASE("empty frame list") {
    const auto r = propagate_summer_label(manual, {});
    CHECK(r.pairs.empty());
    CHECK(r.warnings.empty());
  }
  SUBCASE("window bounds and provenance") {
    std::vector<SarFrame> frames;
    for (Date d : {make_date(2019, 6, 30), make_date(2019, 7, 1), make_date(2019, 7, 15), make_date(2019, 8, 31),
                   make_date(2019, 9, 1)})
      frames.push_back(frame_on("g", d));
    const auto r = propagate_summer_label(manual, frames);
    REQUIRE(r.pairs.size() == 3);
    CHECK(r.pairs[0].first == 1);
    CHECK(r.pairs[2].first == 3);
    int manual_count = 0;
    for (const auto& [i, a] : r.pairs) manual_count += a.provenance == Provenance::kManual;
    CHECK(manual_count == 1);
  }
  SUBCASE("no frame in the window warns") {
    const auto r = propagate_summer_label(manual, {frame_on("g", make_date(2019, 1, 1))});
    CHECK(r.pairs.empty());
    CHECK(r.warnings.size() == 1);
  }
  SUBCASE("foreign glacier is rejected") {
    CHECK_THROWS_AS(propagate_summer_label(manual, {frame_on("other", make_date(2019, 7, 20))}), ValidationError);
  }
}

TEST_CASE("nearest annotation examples") {
  const std::vector<Annotation> anns{ann_on("g", make_date(2016, 5, 1)), ann_on("g", make_date(2016, 6, 1))};
  auto m = assign_nearest_annotation({frame_on("g", make_date(2016, 5, 10))}, anns);
  CHECK(*m.records[0].annotation_date == make_date(2016, 5, 1));
  CHECK_FALSE(m.records[0].label_match);

  m = assign_nearest_annotation({frame_on("g", make_date(2016, 6, 1))}, anns);
  CHECK(m.records[0].label_match);

  // exact tie: 2016-05-16 is 15 days from both -> earlier
  m = assign_nearest_annotation({frame_on("g", make_date(2016, 5, 16))}, anns);
  CHECK(*m.records[0].annotation_date == make_date(2016, 5, 1));

  // a propagated label on the same date is not a label match
  m = assign_nearest_annotation({frame_on("g", make_date(2016, 7, 1))}, {ann_on("g", make_date(2016, 7, 1), Provenance::kPropagated)});
  CHECK_FALSE(m.records[0].label_match);

  CHECK_THROWS_AS(assign_nearest_annotation({frame_on("h", make_date(2016, 5, 10))}, anns), DataError);
}

TEST_CASE("nearest annotation: brute force and order invariance") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> day(0, 365);
  for (int t = 0; t < 50; ++t) {
    std::vector<Annotation> anns;
    for (int k = 0; k < 6; ++k) anns.push_back(ann_on(k % 2 ? "a" : "b", add_days(make_date(2016, 1, 1), day(rng))));
    std::vector<SarFrame> frames;
    for (int k = 0; k < 20; ++k) frames.push_back(frame_on(k % 2 ? "a" : "b", add_days(make_date(2016, 1, 1), day(rng))));
    const auto m = assign_nearest_annotation(frames, anns);
    for (std::size_t i = 0; i < frames.size(); ++i) {
      long best = 1L << 40;
      Date best_date{};
      for (const auto& a : anns) {
        if (a.glacier_id != frames[i].glacier_id) continue;
        const long gap = std::labs(days_between(frames[i].date, a.date));
        if (gap < best || (gap == best && a.date < best_date)) {
          best = gap;
          best_date = a.date;
        }
      }
      CHECK(*m.records[i].annotation_date == best_date);
      CHECK(m.records[i].label_match == (best_date == frames[i].date));
    }
    auto shuffled = frames;
    std::vector<std::size_t> perm(frames.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t i = 0; i < perm.size(); ++i) shuffled[i] = frames[perm[i]];
    auto anns_shuffled = anns;
    std::shuffle(anns_shuffled.begin(), anns_shuffled.end(), rng);
    const auto m2 = assign_nearest_annotation(shuffled, anns_shuffled);
    for (std::size_t i = 0; i < perm.size(); ++i) CHECK(m2.records[i] == m.records[perm[i]]);
  }
}

TEST_CASE("manifest round trip and validation") {
  const auto dir = temp_dir("manifest");
  DatasetManifest m;
  ManifestRecord r;
  r.frame_path = "frames/a.pfm";
  r.zone_path = "zones/a.png";
  r.front_path = "fronts/a.png";
  r.glacier_id = "g";
  r.date = make_date(2016, 5, 1);
  r.annotation_date = r.date;
  r.label_match = true;
  r.melange = false;
  r.split = Split::kTest;
  m.records.push_back(r);
  save_manifest(m, dir / "manifest.json");
  CHECK(load_manifest(dir / "manifest.json", {false, false}) == m);

  // missing files named in the error
  try {
    load_manifest(dir / "manifest.json");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("a.pfm") != std::string::npos);
  }

  fs::create_directories(dir / "frames");
  fs::create_directories(dir / "zones");
  fs::create_directories(dir / "fronts");
  write_pfm(dir / "frames/a.pfm", Grid<double>(2, 2, 1.0));
  write_png_gray(dir / "fronts/a.png", Grid<std::uint8_t>(2, 2, 0));
  Grid<std::uint8_t> labels(2, 2, 2);
  labels(0, 1) = 5;
  write_png_gray(dir / "zones/a.png", labels);
  CHECK_THROWS_AS(load_manifest(dir / "manifest.json"), DataError);
  labels(0, 1) = 3;
  write_png_gray(dir / "zones/a.png", labels);
  CHECK_NOTHROW(load_manifest(dir / "manifest.json"));

  std::ofstream(dir / "bad.json") << "[{\"glacier_id\": 3}]";
  CHECK_THROWS_AS(load_manifest(dir / "bad.json", {false, false}), DataError);
}

TEST_CASE("raster io round trips") {
  const auto dir = temp_dir("raster");
  Grid<double> g(3, 5);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 5; ++c) g(r, c) = 0.25 * r - c;
  write_pfm(dir / "g.pfm", g);
  CHECK(read_pfm(dir / "g.pfm") == g);  // values are float-exact
  RgbImage img(2, 3, Rgb{1, 2, 3});
  img(1, 2) = {255, 0, 255};
  write_png_rgb(dir / "i.png", img);
  CHECK(read_png_rgb(dir / "i.png") == img);
  CHECK_THROWS_AS(read_pfm(dir / "missing.pfm"), DataError);
}

TEST_CASE("dataset save/load round trip") {
  synthgen::SceneSpec spec;
  spec.height = 32;
  spec.width = 32;
  spec.front_baseline_col = 20;
  spec.glacier_id = "g0";
  Dataset ds;
  for (const auto& a : synthgen::generate_scene(spec, 3, make_date(2016, 1, 1))) {
    Annotation ann{spec.glacier_id, a.frame.date, a.zones, a.front, Provenance::kManual};
    ManifestRecord rec;
    rec.glacier_id = spec.glacier_id;
    rec.date = a.frame.date;
    rec.split = Split::kTest;
    rec.label_match = true;
    rec.melange = a.melange;
    ds.add(a.frame, ann, rec);
  }
  ds.rock_masks["g0"] = synthgen::scene_rock_mask(spec).bits;
  const auto dir = temp_dir("dataset");
  save_dataset(ds, dir);
  const auto back = load_dataset(dir / "manifest.json");
  REQUIRE(back.size() == ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(back.frames[i].id == ds.frames[i].id);
    CHECK(back.label(i).zones == ds.label(i).zones);
    CHECK(back.label(i).front == ds.label(i).front);
    for (int r = 0; r < 32; ++r)
      for (int c = 0; c < 32; ++c)
        CHECK(back.frames[i].intensity(r, c) == doctest::Approx(ds.frames[i].intensity(r, c)).epsilon(1e-6));
  }
  CHECK(back.rock_masks.at("g0") == ds.rock_masks.at("g0"));
  CHECK(back.ground_truth().size() == 3);
}
