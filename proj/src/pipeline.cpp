#include "calfront/pipeline.hpp"

#include <algorithm>

#include "calfront/errors.hpp"
#include "calfront/frontops.hpp"

namespace calfront::pipeline {

SeriesSample compose_for(const Dataset& ds, std::size_t frame, const SeriesOptions& options) {
  if (frame >= ds.size()) throw ValidationError("frame index " + std::to_string(frame) + " out of range");
  const auto members = ds.glacier_frames(ds.frames[frame].glacier_id);
  std::vector<Date> dates;
  dates.reserve(members.size());
  for (std::size_t i : members) dates.push_back(ds.frames[i].date);
  const auto local = static_cast<std::size_t>(std::ranges::find(members, frame) - members.begin());

  SeriesSample s;
  s.anchor = frame;
  composer::ComposedSeries series;
  try {
    series = composer::compose(dates, local, options.policy, /*skip_anchor=*/true);
  } catch (const DataError&) {
    if (!options.fallback_consecutive || options.policy.kind == composer::PolicyKind::kConsecutive) throw;
    series = composer::compose_consecutive(dates, local, composer::SeriesPolicy::consecutive(options.policy.length));
    s.fell_back = true;
  }
  for (std::size_t k = 0; k < series.size(); ++k) {
    s.frames.push_back(members[series.frames[k]]);
    s.retain.push_back(series.retain[k]);
    if (series.frames[k] == local && series.roles[k] == composer::Role::kAnalysis) s.anchor_pos = static_cast<int>(k);
  }
  return s;
}

const Grid<std::uint8_t>& rock_mask_for(const Dataset& ds, const std::string& glacier_id) {
  auto it = ds.rock_masks.find(glacier_id);
  if (it == ds.rock_masks.end()) throw DataError("no rock mask for glacier '" + glacier_id + "'");
  return it->second;
}

net::Tensor series_tensor(const Dataset& ds, const SeriesSample& sample, bool rock_mask) {
  if (sample.frames.empty()) throw ValidationError("empty series");
  const auto& first = ds.frames[sample.frames.front()].intensity;
  const int h = first.height();
  const int w = first.width();
  net::Tensor t(static_cast<int>(sample.frames.size()), 1, h, w);
  for (std::size_t k = 0; k < sample.frames.size(); ++k) {
    const auto& img = ds.frames[sample.frames[k]].intensity;
    if (!img.same_shape(first)) throw DataError("frames of one series differ in size");
    const auto vals = img.values();
    std::copy(vals.begin(), vals.end(), t.data.data() + static_cast<std::ptrdiff_t>(k) * h * w);
  }
  if (!rock_mask) return t;
  return net::attach_rock_channel(t, rock_mask_for(ds, ds.frames[sample.anchor].glacier_id));
}

std::vector<ZoneMap> series_labels(const Dataset& ds, const SeriesSample& sample) {
  std::vector<ZoneMap> out;
  out.reserve(sample.frames.size());
  for (std::size_t i : sample.frames) out.push_back(ds.label(i).zones);
  return out;
}

void shift_columns(net::Tensor& series, std::vector<ZoneMap>& labels, int dx) {
  if (dx == 0) return;
  const int w = series.width;
  const net::Tensor src = series;
  series.data.setZero();
  for (int f = 0; f < series.frames; ++f)
    for (int r = 0; r < series.height; ++r)
      for (int c = 0; c < w; ++c) {
        const int from = c - dx;
        if (from >= 0 && from < w)
          series.data.col((f * series.height + r) * w + c) = src.data.col((f * series.height + r) * w + from);
      }
  for (auto& lab : labels) {
    const ZoneMap old = lab;
    for (int r = 0; r < lab.height(); ++r)
      for (int c = 0; c < lab.width(); ++c) {
        const int from = c - dx;
        lab(r, c) = from >= 0 && from < lab.width() ? old(r, from) : Zone::kNA;
      }
  }
}

net::Tensor anchor_logits(const net::Tensor& logits, int anchor_pos) {
  if (anchor_pos < 0 || anchor_pos >= logits.frames) throw ValidationError("anchor position out of range");
  net::Tensor out(1, logits.channels, logits.height, logits.width);
  out.data = logits.data.middleCols(static_cast<Eigen::Index>(anchor_pos) * logits.pixels(), logits.pixels());
  return out;
}

std::map<std::string, net::Tensor> predict_logits(net::Network& network, const Dataset& ds, const SeriesOptions& options,
                                                  bool label_matched_only) {
  std::map<std::string, net::Tensor> out;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (label_matched_only && !ds.manifest.records[i].label_match) continue;
    const SeriesSample s = compose_for(ds, i, options);
    out[ds.frames[i].id] = anchor_logits(network.forward(series_tensor(ds, s, options.rock_mask)), s.anchor_pos);
  }
  return out;
}

std::map<std::string, ZoneMap> predict_zones(net::Network& network, const Dataset& ds, const SeriesOptions& options,
                                             bool label_matched_only) {
  std::map<std::string, ZoneMap> out;
  for (auto& [id, logits] : predict_logits(network, ds, options, label_matched_only))
    out.emplace(id, net::argmax_zones(logits, 0));
  return out;
}

double mean_class_iou(const std::map<std::string, ZoneMap>& predictions, const Dataset& ds) {
  std::array<double, kZoneCount> sum{};
  std::array<int, kZoneCount> count{};
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto it = predictions.find(ds.frames[i].id);
    if (it == predictions.end()) continue;
    const auto r = frontops::iou(it->second, ds.label(i).zones);
    for (int k = 0; k < kZoneCount; ++k)
      if (r.per_class[static_cast<std::size_t>(k)]) {
        sum[static_cast<std::size_t>(k)] += *r.per_class[static_cast<std::size_t>(k)];
        ++count[static_cast<std::size_t>(k)];
      }
  }
  double total = 0.0;
  int defined = 0;
  for (int k = 0; k < kZoneCount; ++k)
    if (count[static_cast<std::size_t>(k)] > 0) {
      total += sum[static_cast<std::size_t>(k)] / count[static_cast<std::size_t>(k)];
      ++defined;
    }
  if (defined == 0) throw DataError("no predictions overlap the dataset");
  return total / defined;
}

}  // namespace calfront::pipeline
