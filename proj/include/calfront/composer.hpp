#pragma once

#include <cstddef>
#include <nlohmann/json_fwd.hpp>
#include <span>
#include <string_view>
#include <vector>

#include "calfront/calendar.hpp"

namespace calfront::composer {

enum class PolicyKind { kConsecutive, kSummerReference };

struct SeriesPolicy {
  PolicyKind kind = PolicyKind::kConsecutive;
  int length = 8;                               // L
  int reference_count = 3;                      // R
  std::vector<unsigned> reference_months{7, 8, 9};
  int analysis_count = 4;                       // A; must equal L - R under summer_reference

  static SeriesPolicy consecutive(int length = 8);
  static SeriesPolicy summer_reference(int reference_count = 3, int analysis_count = 4);

  /// Throws ValidationError naming the violated constraint.
  void validate() const;
  bool operator==(const SeriesPolicy&) const = default;
};

/// JSON form: {"kind": "consecutive"|"summer_reference", "length", "reference_count",
/// "reference_months", "analysis_count"}.
void to_json(nlohmann::json& j, const SeriesPolicy& p);
void from_json(const nlohmann::json& j, SeriesPolicy& p);
std::string_view to_string(PolicyKind kind);
PolicyKind parse_policy_kind(std::string_view text);

enum class Role { kReference, kAnalysis };

struct ComposedSeries {
  std::vector<std::size_t> frames;  // indices into the caller's frame list
  std::vector<Role> roles;
  std::vector<bool> retain;

  std::size_t size() const { return frames.size(); }
  bool operator==(const ComposedSeries&) const = default;
};

/// L consecutive frames (by date) containing the anchor; every position is analysis and retained.
/// `anchor` indexes `dates`; the input need not be sorted.
ComposedSeries compose_consecutive(std::span<const Date> dates, std::size_t anchor, const SeriesPolicy& policy);

/// R summer references (one per reference month of the anchor's year, closest to day 16, ties to the
/// earlier date) at the series head, followed by A consecutive non-reference frames containing the anchor.
/// Throws DataError for a missing reference month or too few analysis frames, and ValidationError when
/// the anchor itself would be chosen as a reference. With `skip_anchor` the anchor is never a
/// reference candidate and the next-closest frame of that month is used instead.
ComposedSeries compose_with_summer_refs(std::span<const Date> dates, std::size_t anchor, const SeriesPolicy& policy,
                                        bool skip_anchor = false);

/// Dispatches on policy.kind.
ComposedSeries compose(std::span<const Date> dates, std::size_t anchor, const SeriesPolicy& policy,
                       bool skip_anchor = false);

}  // namespace calfront::composer
