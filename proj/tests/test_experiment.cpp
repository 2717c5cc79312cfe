#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>

#include "calfront/errors.hpp"
#include "calfront/experiment.hpp"
#include "calfront/pipeline.hpp"
#include "fixtures.hpp"

using namespace calfront;
using namespace calfront::experiment;

TEST_CASE("tags parse and form a chain") {
  for (Tag t : chain()) CHECK(parse_tag(to_string(t)) == t);
  CHECK_THROWS_AS(parse_tag("everything"), ValidationError);
}

TEST_CASE("each tag enables exactly one more feature") {
  const auto base = default_run_config();
  struct Features {
    bool target, summer, rock, ens;
  };
  auto features = [&](Tag t) {
    const auto c = resolve(base, t);
    CHECK_NOTHROW(c.validate());
    return Features{c.use_target, c.train.policy.kind == composer::PolicyKind::kSummerReference, c.train.rock_mask,
                    c.members > 1};
  };
  int prev = -1;
  for (Tag t : chain()) {
    const auto f = features(t);
    const int on = f.target + f.summer + f.rock + f.ens;
    CHECK(on == prev + 1);
    prev = on;
  }
  const auto few = resolve(base, Tag::kFewShot);
  const auto summer = resolve(base, Tag::kSummerRef);
  CHECK(few.train.policy.length == 8);
  CHECK(summer.net.series_length == 7);
  CHECK(resolve(base, Tag::kRockMask).net.in_channels == 2);
  CHECK(resolve(base, Tag::kEnsemble).members == 5);
  CHECK(resolve(summer, Tag::kBaseline).train.policy == composer::SeriesPolicy::consecutive(8));
}

TEST_CASE("run config JSON round trip and validation") {
  auto c = resolve(default_run_config(), Tag::kRockMask);
  c.seed = 12;
  c.data_root = "/data";
  const nlohmann::json j = c;
  const auto back = j.get<RunConfig>();
  CHECK(back.benchmark == c.benchmark);
  CHECK(back.net == c.net);
  CHECK(back.train == c.train);
  CHECK(back.experiment == c.experiment);
  CHECK(back.seed == 12);
  CHECK(back.data_root == "/data");

  auto bad = c;
  bad.net.in_channels = 1;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = c;
  bad.net.series_length = 8;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = c;
  bad.members = 0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  BenchmarkConfig b;
  b.height = 40;
  CHECK_THROWS_AS(domain_pair_config(b), ValidationError);
}

TEST_CASE("pipeline series: anchor position, fallback, shift") {
  const auto& pair = fixtures::tiny_pair();
  const auto test = pair.target.subset(Split::kTest);
  pipeline::SeriesOptions summer{composer::SeriesPolicy::summer_reference(3, 4), true, false};
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto s = pipeline::compose_for(test, i, summer);
    CHECK(s.frames[static_cast<std::size_t>(s.anchor_pos)] == i);
    CHECK(s.retain[static_cast<std::size_t>(s.anchor_pos)]);
    const auto x = pipeline::series_tensor(test, s, true);
    CHECK(x.channels == 2);
    CHECK(x.frames == 7);
  }
  // few-shot data has no September: strict fails, fallback composes consecutively
  const auto train = pair.target.subset(Split::kTrain);
  CHECK_THROWS_AS(pipeline::compose_for(train, 0, summer), DataError);
  summer.fallback_consecutive = true;
  const auto fb = pipeline::compose_for(train, 0, summer);
  CHECK(fb.fell_back);
  CHECK(fb.frames.size() == 7);

  net::Tensor t(1, 1, 2, 4);
  for (int c = 0; c < 4; ++c) t.at(0, 0, 0, c) = c + 1;
  std::vector<ZoneMap> lab{ZoneMap(2, 4, Zone::kRock)};
  pipeline::shift_columns(t, lab, 1);
  CHECK(t.at(0, 0, 0, 0) == 0.0);
  CHECK(t.at(0, 0, 0, 1) == 1.0);
  CHECK(lab[0](0, 0) == Zone::kNA);
  CHECK(lab[0](0, 1) == Zone::kRock);
}

TEST_CASE("end-to-end run on the tiny benchmark") {
  auto c = resolve(fixtures::tiny_run_config(), Tag::kRockMask);
  const auto dir = std::filesystem::temp_directory_path() / "calfront_test_run";
  std::filesystem::remove_all(dir);
  const auto r = run(c, fixtures::tiny_pair(), dir);
  CHECK(r.report.evaluated + r.report.missing_fronts == r.report.label_matched);
  CHECK(r.report.label_matched == fixtures::tiny_pair().target.subset(Split::kTest).manifest.label_matched_count());
  CHECK(std::filesystem::exists(dir / "report.json"));
  CHECK(std::filesystem::exists(dir / "best.ckpt"));
  const auto dumped = nlohmann::json::parse(std::ifstream(dir / "resolved_config.json")).get<RunConfig>();
  CHECK(dumped.train == c.train);

  // zeroing the rock channel changes the predictions of a rock-aware model
  const auto test = fixtures::tiny_pair().target.subset(Split::kTest);
  net::Network n(r.members.front().best);
  const auto options = c.train.series_options();
  std::size_t changed = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (!test.manifest.records[i].label_match) continue;
    const auto s = pipeline::compose_for(test, i, options);
    auto x = pipeline::series_tensor(test, s, true);
    const auto a = net::argmax_zones(n.forward(x), s.anchor_pos);
    x.data.row(1).setZero();
    const auto b = net::argmax_zones(n.forward(x), s.anchor_pos);
    for (std::size_t k = 0; k < a.size(); ++k) changed += a.values()[k] != b.values()[k];
  }
  CHECK(changed > 0);
}
