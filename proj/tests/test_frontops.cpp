#include <doctest.h>

#include <random>

#include "calfront/errors.hpp"
#include "calfront/frontops.hpp"
#include "oracles.hpp"

using namespace calfront;

namespace {

ZoneMap split_map(int h, int w, int first_ocean_col) {
  ZoneMap z(h, w, Zone::kGlacier);
  for (int r = 0; r < h; ++r)
    for (int c = first_ocean_col; c < w; ++c) z(r, c) = Zone::kOcean;
  return z;
}

FrontMask column(int h, int w, int col, double spacing) {
  std::vector<Pixel> px;
  for (int r = 0; r < h; ++r) px.push_back({r, col});
  return make_front_mask(h, w, spacing, px);
}

}  // namespace

TEST_CASE("extract_front: all glacier gives a missing front") {
  CHECK(frontops::extract_front(ZoneMap(8, 8, Zone::kGlacier)).empty());
}

TEST_CASE("extract_front: vertical split is one column of 8 pixels") {
  const auto f = frontops::extract_front(split_map(8, 8, 4));
  REQUIRE(f.pixels.size() == 8);
  for (const auto& p : f.pixels) CHECK(p.col == 3);
}

TEST_CASE("extract_front: keeps only the larger of two contacts") {
  ZoneMap z(20, 20, Zone::kRock);
  for (int r = 0; r < 10; ++r) {  // 10-pixel contact
    z(r, 2) = Zone::kGlacier;
    z(r, 3) = Zone::kOcean;
  }
  for (int r = 14; r < 17; ++r) {  // 3-pixel contact
    z(r, 12) = Zone::kGlacier;
    z(r, 13) = Zone::kOcean;
  }
  const auto f = frontops::extract_front(z);
  REQUIRE(f.pixels.size() == 10);
  for (const auto& p : f.pixels) CHECK(p.col == 2);
  CHECK(f.pixels == oracle::extract_front(z));
}

TEST_CASE("extract_front matches the brute-force oracle on random maps") {
  std::mt19937_64 rng(42);
  for (int t = 0; t < 200; ++t) {
    const auto z = oracle::random_zones(rng, 16, 16);
    CHECK(frontops::extract_front(z).pixels == oracle::extract_front(z));
  }
}

TEST_CASE("mde examples") {
  const auto a = column(8, 8, 4, 10.0);
  CHECK(*frontops::mde(a, a) == 0.0);
  CHECK(*frontops::mde(column(8, 8, 6, 10.0), a) == doctest::Approx(20.0).epsilon(1e-12));
  const auto p = make_front_mask(8, 8, 2.0, {{0, 0}});
  const auto q = make_front_mask(8, 8, 2.0, {{3, 4}});
  CHECK(*frontops::mde(p, q) == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("mde errors and missing fronts") {
  const auto a = column(8, 8, 4, 10.0);
  const FrontMask empty = make_front_mask(8, 8, 10.0, {});
  CHECK_FALSE(frontops::mde(empty, a).has_value());
  CHECK_THROWS_AS(frontops::mde(a, empty), DataError);
  CHECK_THROWS_AS(frontops::mde(a, column(8, 8, 4, 5.0)), ValidationError);
  CHECK_THROWS_AS(frontops::mde(a, column(8, 9, 4, 10.0)), ValidationError);
}

TEST_CASE("mde properties on random fronts: oracle, symmetry, translation") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> coord(0, 15), n(1, 12), shift(-3, 3);
  for (int t = 0; t < 200; ++t) {
    std::vector<Pixel> a, b;
    for (int k = n(rng); k > 0; --k) a.push_back({coord(rng), coord(rng)});
    for (int k = n(rng); k > 0; --k) b.push_back({coord(rng), coord(rng)});
    const auto fa = make_front_mask(16, 16, 7.0, a);
    const auto fb = make_front_mask(16, 16, 7.0, b);
    const double got = *frontops::mde(fa, fb);
    CHECK(oracle::rel_err(got, oracle::mde(fa.pixels, fb.pixels, 7.0)) <= 1e-9);
    CHECK(got == doctest::Approx(*frontops::mde(fb, fa)).epsilon(1e-12));
    CHECK(got >= 0.0);
    CHECK(*frontops::mde(fa, fa) == 0.0);

    // translate both inside a 40x40 grid
    const int dr = shift(rng) + 10, dc = shift(rng) + 10;
    auto move = [&](std::vector<Pixel> v) {
      for (auto& p : v) p = {p.row + dr, p.col + dc};
      return make_front_mask(40, 40, 7.0, v);
    };
    CHECK(*frontops::mde(move(fa.pixels), move(fb.pixels)) == doctest::Approx(got).epsilon(1e-12));
  }
}

TEST_CASE("distance transform matches brute force") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> coord(0, 11);
  for (int t = 0; t < 50; ++t) {
    std::vector<Pixel> px;
    for (int k = 0; k < 1 + t % 6; ++k) px.push_back({coord(rng), coord(rng)});
    const auto f = make_front_mask(12, 12, 1.0, px);
    const auto dt = frontops::squared_distance_transform(f);
    for (int r = 0; r < 12; ++r)
      for (int c = 0; c < 12; ++c) {
        double best = 1e300;
        for (const auto& p : f.pixels) best = std::min(best, double((p.row - r) * (p.row - r) + (p.col - c) * (p.col - c)));
        CHECK(dt(r, c) == best);
      }
  }
}

TEST_CASE("iou examples") {
  ZoneMap all(4, 4, Zone::kNA);
  all(0, 1) = Zone::kRock;
  all(0, 2) = Zone::kGlacier;
  all(0, 3) = Zone::kOcean;
  const auto same = frontops::iou(all, all);
  for (const auto& v : same.per_class) CHECK(*v == 1.0);
  CHECK(same.mean == 1.0);

  // glacier regions of 8 pixels overlapping by half -> 4 / 12
  ZoneMap truth(4, 8, Zone::kRock), pred(4, 8, Zone::kRock);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 2; ++c) truth(r, c) = Zone::kGlacier;
  for (int r = 0; r < 4; ++r)
    for (int c = 1; c < 3; ++c) pred(r, c) = Zone::kGlacier;
  const auto res = frontops::iou(pred, truth);
  CHECK(*res.per_class[2] == doctest::Approx(1.0 / 3.0));
  CHECK_FALSE(res.per_class[3].has_value());
  CHECK_FALSE(res.per_class[0].has_value());
  CHECK(res.mean == doctest::Approx((*res.per_class[1] + 1.0 / 3.0) / 2.0));

  CHECK_THROWS_AS(frontops::iou(ZoneMap(4, 4), ZoneMap(4, 5)), ValidationError);
}

TEST_CASE("iou matches the counting oracle on random maps") {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 200; ++t) {
    const auto a = oracle::random_zones(rng, 16, 16);
    const auto b = oracle::random_zones(rng, 16, 16);
    const auto r = frontops::iou(a, b);
    double sum = 0.0;
    int n = 0;
    for (int k = 0; k < kZoneCount; ++k) {
      const auto want = oracle::class_iou(a, b, static_cast<Zone>(k));
      REQUIRE(want.has_value() == r.per_class[static_cast<std::size_t>(k)].has_value());
      if (!want) continue;
      const double got = *r.per_class[static_cast<std::size_t>(k)];
      CHECK(oracle::rel_err(got, *want) <= 1e-9);
      CHECK(got >= 0.0);
      CHECK(got <= 1.0);
      sum += *want;
      ++n;
    }
    CHECK(oracle::rel_err(r.mean, sum / n) <= 1e-9);
    const auto self = frontops::iou(a, a);
    for (const auto& v : self.per_class)
      if (v) CHECK(*v == 1.0);
  }
}

namespace {

std::vector<frontops::GroundTruth> make_truth(int n) {
  std::vector<frontops::GroundTruth> out;
  for (int i = 0; i < n; ++i) {
    frontops::GroundTruth g;
    g.frame_id = "f" + std::to_string(i);
    g.zones = split_map(8, 8, 4);
    g.front = frontops::extract_front(g.zones, 10.0);
    out.push_back(g);
  }
  return out;
}

}  // namespace

TEST_CASE("evaluate: perfect predictions") {
  const auto truth = make_truth(5);
  std::map<std::string, ZoneMap> pred;
  for (const auto& g : truth) pred[g.frame_id] = g.zones;
  const auto rep = frontops::evaluate(pred, truth);
  CHECK(*rep.mde_mean_m == 0.0);
  CHECK(rep.missing_fronts == 0);
  CHECK(rep.evaluated == 5);
  CHECK(rep.mean_iou == 1.0);
}

TEST_CASE("evaluate: one missing front among 10") {
  const auto truth = make_truth(10);
  std::map<std::string, ZoneMap> pred;
  for (const auto& g : truth) pred[g.frame_id] = split_map(8, 8, 5);  // front one column off: 10 m
  pred["f3"] = ZoneMap(8, 8, Zone::kGlacier);
  const auto rep = frontops::evaluate(pred, truth);
  CHECK(rep.missing_fronts == 1);
  CHECK(rep.evaluated == 9);
  CHECK(rep.evaluated + rep.missing_fronts == rep.label_matched);
  CHECK(*rep.mde_mean_m == doctest::Approx(10.0));
}

TEST_CASE("evaluate: unmatched ids are listed") {
  auto truth = make_truth(3);
  std::map<std::string, ZoneMap> pred;
  pred["f0"] = truth[0].zones;
  pred["ghost"] = truth[0].zones;
  try {
    frontops::evaluate(pred, truth);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("ghost") != std::string::npos);
    CHECK(msg.find("f1") != std::string::npos);
  }
  // unmatched truth that is not label-matched is fine
  truth[1].label_match = false;
  truth[2].label_match = false;
  pred.erase("ghost");
  CHECK(frontops::evaluate(pred, truth).label_matched == 1);
}

TEST_CASE("summaries: 100 and 120 -> 110 +- 10") {
  frontops::EvalReport a, b;
  a.mde_mean_m = 100.0;
  b.mde_mean_m = 120.0;
  a.missing_fronts = 1;
  b.missing_fronts = 3;
  const std::vector<frontops::EvalReport> runs{a, b};
  const auto s = frontops::summarize_runs(runs);
  CHECK(s.mde_m->mean == doctest::Approx(110.0));
  CHECK(s.mde_m->std == doctest::Approx(10.0));
  CHECK(s.missing_fronts.mean == doctest::Approx(2.0));
  const auto table = frontops::render_table({{"two runs", s}});
  CHECK(table.find("110.0±10.0") != std::string::npos);
}

TEST_CASE("render_table: perfect single run") {
  const auto truth = make_truth(2);
  std::map<std::string, ZoneMap> pred;
  for (const auto& g : truth) pred[g.frame_id] = g.zones;
  const std::vector<frontops::EvalReport> runs{frontops::evaluate(pred, truth)};
  const auto table = frontops::render_table({{"perfect", frontops::summarize_runs(runs)}});
  CHECK(table.find("MDE") != std::string::npos);
  CHECK(table.find("0.0") != std::string::npos);
  CHECK(table.find("100.0") != std::string::npos);
}
