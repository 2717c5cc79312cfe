#include "calfront/composer.hpp"

#include <algorithm>
#include <cstdlib>
#include <numeric>
#include <optional>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "calfront/errors.hpp"

namespace calfront::composer {
namespace {

constexpr unsigned kMonthMidpointDay = 16;

// Input positions ordered by (date, original index).
std::vector<std::size_t> date_order(std::span<const Date> dates) {
  std::vector<std::size_t> order(dates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) { return dates[a] < dates[b]; });
  return order;
}

// Start of a `count`-long window over `n` items that contains `pos`, with `pos` as close to the
// middle as the bounds allow.
std::size_t window_start(std::size_t n, std::size_t pos, std::size_t count) {
  const std::size_t half = count / 2;
  std::size_t start = pos >= half ? pos - half : 0;
  return std::min(start, n - count);
}

void check_anchor(std::span<const Date> dates, std::size_t anchor) {
  if (anchor >= dates.size())
    throw ValidationError("anchor index " + std::to_string(anchor) + " out of range for " + std::to_string(dates.size()) +
                          " frames");
}

}  // namespace

SeriesPolicy SeriesPolicy::consecutive(int length) {
  SeriesPolicy p;
  p.kind = PolicyKind::kConsecutive;
  p.length = length;
  p.reference_count = 0;
  p.reference_months.clear();
  p.analysis_count = length;
  return p;
}

SeriesPolicy SeriesPolicy::summer_reference(int reference_count, int analysis_count) {
  SeriesPolicy p;
  p.kind = PolicyKind::kSummerReference;
  p.reference_count = reference_count;
  p.analysis_count = analysis_count;
  p.length = reference_count + analysis_count;
  p.reference_months.clear();
  for (int i = 0; i < reference_count; ++i) p.reference_months.push_back(static_cast<unsigned>(7 + i));
  return p;
}

void SeriesPolicy::validate() const {
  if (length < 2) throw ValidationError("series length must be at least 2");
  if (kind == PolicyKind::kConsecutive) return;
  if (reference_count < 0 || reference_count >= length)
    throw ValidationError("reference count must be in [0, length)");
  if (analysis_count != length - reference_count)
    throw ValidationError("analysis count must equal length - reference count");
  if (static_cast<int>(reference_months.size()) != reference_count)
    throw ValidationError("reference month list must have one entry per reference");
  std::set<unsigned> seen;
  for (unsigned m : reference_months) {
    if (m < 1 || m > 12) throw ValidationError("reference month " + std::to_string(m) + " is not a calendar month");
    if (!seen.insert(m).second) throw ValidationError("reference months must be pairwise distinct");
  }
}

std::string_view to_string(PolicyKind kind) {
  return kind == PolicyKind::kConsecutive ? "consecutive" : "summer_reference";
}

PolicyKind parse_policy_kind(std::string_view text) {
  if (text == "consecutive") return PolicyKind::kConsecutive;
  if (text == "summer_reference") return PolicyKind::kSummerReference;
  throw ValidationError("unknown series policy '" + std::string(text) + "' (expected consecutive or summer_reference)");
}

void to_json(nlohmann::json& j, const SeriesPolicy& p) {
  j = nlohmann::json{{"kind", to_string(p.kind)},
                     {"length", p.length},
                     {"reference_count", p.reference_count},
                     {"reference_months", p.reference_months},
                     {"analysis_count", p.analysis_count}};
}

void from_json(const nlohmann::json& j, SeriesPolicy& p) {
  const auto kind = parse_policy_kind(j.value("kind", std::string("consecutive")));
  p = kind == PolicyKind::kConsecutive ? SeriesPolicy::consecutive(j.value("length", 8))
                                       : SeriesPolicy::summer_reference(j.value("reference_count", 3), j.value("analysis_count", 4));
  if (j.contains("reference_months")) p.reference_months = j.at("reference_months").get<std::vector<unsigned>>();
  if (j.contains("length")) p.length = j.at("length").get<int>();
}

ComposedSeries compose_consecutive(std::span<const Date> dates, std::size_t anchor, const SeriesPolicy& policy) {
  policy.validate();
  check_anchor(dates, anchor);
  const auto length = static_cast<std::size_t>(policy.length);
  if (dates.size() < length)
    throw DataError("consecutive series needs " + std::to_string(length) + " frames, only " + std::to_string(dates.size()) +
                    " available (short by " + std::to_string(length - dates.size()) + ")");
  const auto order = date_order(dates);
  const auto pos = static_cast<std::size_t>(std::ranges::find(order, anchor) - order.begin());
  const auto start = window_start(order.size(), pos, length);
  ComposedSeries series;
  series.frames.assign(order.begin() + static_cast<long>(start), order.begin() + static_cast<long>(start + length));
  series.roles.assign(length, Role::kAnalysis);
  series.retain.assign(length, true);
  return series;
}

ComposedSeries compose_with_summer_refs(std::span<const Date> dates, std::size_t anchor, const SeriesPolicy& policy,
                                        bool skip_anchor) {
  policy.validate();
  if (policy.kind != PolicyKind::kSummerReference) throw ValidationError("policy is not summer_reference");
  check_anchor(dates, anchor);
  const auto order = date_order(dates);
  const int year = year_of(dates[anchor]);

  std::vector<std::size_t> references;
  for (unsigned month : policy.reference_months) {
    std::optional<std::size_t> best;
    long best_gap = 0;
    for (std::size_t idx : order) {
      const Date& d = dates[idx];
      if (year_of(d) != year || month_of(d) != month) continue;
      if (skip_anchor && idx == anchor) continue;
      const long gap = std::labs(static_cast<long>(day_of(d)) - static_cast<long>(kMonthMidpointDay));
      // `order` is date-ascending, so strict comparison keeps the earlier frame on ties.
      if (!best || gap < best_gap) {
        best = idx;
        best_gap = gap;
      }
    }
    if (!best) throw DataError("missing reference month: " + month_name(month) + " " + std::to_string(year));
    if (*best == anchor)
      throw ValidationError("anchor frame " + format_iso_date(dates[anchor]) + " is selected as the " + month_name(month) +
                            " reference; choose a different anchor");
    references.push_back(*best);
  }

  std::vector<std::size_t> pool;
  for (std::size_t idx : order)
    if (std::ranges::find(references, idx) == references.end()) pool.push_back(idx);
  const auto count = static_cast<std::size_t>(policy.analysis_count);
  if (pool.size() < count)
    throw DataError("summer-reference series needs " + std::to_string(count) + " analysis frames, only " +
                    std::to_string(pool.size()) + " non-reference frames available");
  const auto pos = static_cast<std::size_t>(std::ranges::find(pool, anchor) - pool.begin());
  const auto start = window_start(pool.size(), pos, count);

  ComposedSeries series;
  // Same-year references: calendar-month order is date order.
  std::vector<std::size_t> refs_sorted = references;
  std::ranges::stable_sort(refs_sorted, [&](std::size_t a, std::size_t b) { return dates[a] < dates[b]; });
  for (std::size_t idx : refs_sorted) {
    series.frames.push_back(idx);
    series.roles.push_back(Role::kReference);
    series.retain.push_back(false);
  }
  for (std::size_t i = start; i < start + count; ++i) {
    series.frames.push_back(pool[i]);
    series.roles.push_back(Role::kAnalysis);
    series.retain.push_back(true);
  }
  return series;
}

ComposedSeries compose(std::span<const Date> dates, std::size_t anchor, const SeriesPolicy& policy, bool skip_anchor) {
  return policy.kind == PolicyKind::kConsecutive ? compose_consecutive(dates, anchor, policy)
                                                 : compose_with_summer_refs(dates, anchor, policy, skip_anchor);
}

}  // namespace calfront::composer
