#include <doctest.h>

#include <algorithm>
#include <nlohmann/json.hpp>
#include <random>
#include <set>

#include "calfront/composer.hpp"
#include "calfront/errors.hpp"

using namespace calfront;
using namespace calfront::composer;

namespace {

std::vector<Date> every_n_days(Date start, int n, int count) {
  std::vector<Date> out;
  for (int i = 0; i < count; ++i) out.push_back(add_days(start, static_cast<long>(i) * n));
  return out;
}

std::vector<Date> dates_of(const ComposedSeries& s, const std::vector<Date>& dates) {
  std::vector<Date> out;
  for (auto i : s.frames) out.push_back(dates[i]);
  return out;
}

}  // namespace

TEST_CASE("policy validation") {
  CHECK_NOTHROW(SeriesPolicy::consecutive(2).validate());
  CHECK_THROWS_AS(SeriesPolicy::consecutive(1).validate(), ValidationError);
  auto p = SeriesPolicy::summer_reference(3, 4);
  CHECK(p.length == 7);
  p.analysis_count = 5;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p = SeriesPolicy::summer_reference(3, 4);
  p.reference_months = {7, 7, 9};
  CHECK_THROWS_AS(p.validate(), ValidationError);
  CHECK_THROWS_AS(parse_policy_kind("weekly"), ValidationError);

  nlohmann::json j = SeriesPolicy::summer_reference(3, 4);
  CHECK(j.get<SeriesPolicy>() == SeriesPolicy::summer_reference(3, 4));
  j = SeriesPolicy::consecutive(5);
  CHECK(j.get<SeriesPolicy>() == SeriesPolicy::consecutive(5));
}

TEST_CASE("consecutive examples") {
  const auto d8 = every_n_days(make_date(2016, 1, 1), 12, 8);
  auto s = compose_consecutive(d8, 0, SeriesPolicy::consecutive(8));
  CHECK(dates_of(s, d8) == d8);
  CHECK(std::ranges::all_of(s.retain, [](bool b) { return b; }));

  const auto d20 = every_n_days(make_date(2016, 1, 1), 12, 20);
  s = compose_consecutive(d20, 10, SeriesPolicy::consecutive(8));
  REQUIRE(s.size() == 8);
  CHECK(std::ranges::find(s.frames, std::size_t{10}) != s.frames.end());
  for (std::size_t k = 1; k < s.size(); ++k) CHECK(s.frames[k] == s.frames[k - 1] + 1);

  const auto d5 = every_n_days(make_date(2016, 1, 1), 12, 5);
  CHECK_THROWS_AS(compose_consecutive(d5, 0, SeriesPolicy::consecutive(8)), DataError);
  CHECK_THROWS_AS(compose_consecutive(d5, 7, SeriesPolicy::consecutive(3)), ValidationError);
}

TEST_CASE("summer reference examples") {
  // exactly one frame per summer month, on odd days
  std::vector<Date> dates{make_date(2016, 7, 2), make_date(2016, 8, 30), make_date(2016, 9, 29)};
  for (int d = 1; d <= 10; ++d) dates.push_back(make_date(2016, 11, static_cast<unsigned>(d)));
  const auto s = compose_with_summer_refs(dates, 8, SeriesPolicy::summer_reference(3, 4));
  REQUIRE(s.size() == 7);
  CHECK(std::vector<std::size_t>(s.frames.begin(), s.frames.begin() + 3) == std::vector<std::size_t>{0, 1, 2});
  for (int k = 0; k < 3; ++k) {
    CHECK(s.roles[static_cast<std::size_t>(k)] == Role::kReference);
    CHECK_FALSE(s.retain[static_cast<std::size_t>(k)]);
  }
  for (std::size_t k = 3; k < 7; ++k) CHECK(s.retain[k]);

  // no September frame
  std::vector<Date> no_sep{make_date(2016, 7, 16), make_date(2016, 8, 16)};
  for (int d = 1; d <= 10; ++d) no_sep.push_back(make_date(2016, 11, static_cast<unsigned>(d)));
  try {
    compose_with_summer_refs(no_sep, 5, SeriesPolicy::summer_reference(3, 4));
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("missing reference month: September") != std::string::npos);
  }

  // day-16 rule, tie to the earlier date
  std::vector<Date> tie{make_date(2016, 7, 12), make_date(2016, 7, 20), make_date(2016, 8, 16), make_date(2016, 9, 16)};
  for (int d = 1; d <= 6; ++d) tie.push_back(make_date(2016, 12, static_cast<unsigned>(d)));
  const auto t = compose_with_summer_refs(tie, 6, SeriesPolicy::summer_reference(3, 4));
  CHECK(t.frames[0] == 0);

  // anchor as its own reference: error, or skipped on request
  std::vector<Date> summer = every_n_days(make_date(2016, 7, 1), 6, 20);
  const std::size_t anchor = 2;  // 2016-07-13, closest to the 16th
  CHECK_THROWS_AS(compose_with_summer_refs(summer, anchor, SeriesPolicy::summer_reference(3, 4)), ValidationError);
  const auto skipped = compose_with_summer_refs(summer, anchor, SeriesPolicy::summer_reference(3, 4), true);
  CHECK(std::ranges::count(skipped.frames, anchor) == 1);
  CHECK(skipped.roles[static_cast<std::size_t>(std::ranges::find(skipped.frames, anchor) - skipped.frames.begin())] ==
        Role::kAnalysis);
}

TEST_CASE("composer properties on random calendars") {
  std::mt19937_64 rng(2024);
  const auto policy = SeriesPolicy::summer_reference(3, 4);
  int checked = 0;
  for (int t = 0; t < 300; ++t) {
    // unique random days over two years
    std::set<long> offsets;
    const int n = std::uniform_int_distribution<int>(8, 60)(rng);
    std::uniform_int_distribution<long> day(0, 729);
    while (static_cast<int>(offsets.size()) < n) offsets.insert(day(rng));
    std::vector<Date> dates;
    for (long o : offsets) dates.push_back(add_days(make_date(2016, 1, 1), o));
    std::shuffle(dates.begin(), dates.end(), rng);
    const std::size_t anchor = std::uniform_int_distribution<std::size_t>(0, dates.size() - 1)(rng);

    // consecutive: contiguous date-ordered slice containing the anchor
    auto sorted = dates;
    std::ranges::sort(sorted);
    const auto c = compose_consecutive(dates, anchor, SeriesPolicy::consecutive(8));
    const auto cd = dates_of(c, dates);
    const auto at = std::ranges::search(sorted, cd);
    CHECK_FALSE(at.empty());
    CHECK(std::ranges::count(c.frames, anchor) == 1);

    ComposedSeries s;
    try {
      s = compose_with_summer_refs(dates, anchor, policy, true);
    } catch (const DataError&) {
      continue;
    }
    ++checked;
    const int year = year_of(dates[anchor]);
    REQUIRE(s.size() == 7);
    std::vector<unsigned> ref_months;
    for (std::size_t k = 0; k < s.size(); ++k) {
      if (s.roles[k] != Role::kReference) continue;
      CHECK(year_of(dates[s.frames[k]]) == year);
      ref_months.push_back(month_of(dates[s.frames[k]]));
    }
    CHECK(ref_months == std::vector<unsigned>{7, 8, 9});
    CHECK(std::set<std::size_t>(s.frames.begin(), s.frames.end()).size() == s.size());
    CHECK(std::ranges::count(s.frames, anchor) == 1);

    // permutation invariance: same dates in the same order
    std::vector<std::size_t> perm(dates.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Date> permuted(dates.size());
    std::size_t new_anchor = 0;
    for (std::size_t i = 0; i < perm.size(); ++i) {
      permuted[i] = dates[perm[i]];
      if (perm[i] == anchor) new_anchor = i;
    }
    const auto s2 = compose_with_summer_refs(permuted, new_anchor, policy, true);
    CHECK(dates_of(s2, permuted) == dates_of(s, dates));
    CHECK(s2.roles == s.roles);
    CHECK(s2.retain == s.retain);
  }
  CHECK(checked > 100);
}
