#include "calfront/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "calfront/errors.hpp"

namespace calfront::ensemble {

namespace {

// Strict weak order on tensor contents, used to fix the reduction order.
bool content_less(const net::Tensor& a, const net::Tensor& b) {
  return std::lexicographical_compare(a.data.data(), a.data.data() + a.data.size(), b.data.data(),
                                      b.data.data() + b.data.size());
}

}  // namespace

Fused combine_logits(const std::vector<net::Tensor>& member_logits) {
  if (member_logits.empty()) throw ValidationError("ensemble needs at least one member");
  for (const auto& t : member_logits)
    if (!t.same_shape(member_logits.front())) throw ValidationError("member logits differ in shape");
  std::vector<std::size_t> order(member_logits.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) { return content_less(member_logits[a], member_logits[b]); });

  const auto n = static_cast<double>(member_logits.size());
  Fused f;
  f.members = member_logits.size();
  f.mean = member_logits.front();
  f.mean.data.setZero();
  // running mean: identical members give exactly zero spread
  double k = 0.0;
  for (std::size_t i : order) f.mean.data += (member_logits[i].data - f.mean.data) / ++k;
  f.std = f.mean;
  f.std.data.setZero();
  for (std::size_t i : order) f.std.data += (member_logits[i].data - f.mean.data).cwiseAbs2();
  f.std.data = (f.std.data / n).cwiseSqrt();
  return f;
}

EnsembleOutput to_output(const Fused& fused) {
  EnsembleOutput out;
  out.members = fused.members;
  const auto& m = fused.mean;
  for (int t = 0; t < m.frames; ++t) {
    out.zones.push_back(net::argmax_zones(m, t));
    std::array<Grid<double>, kZoneCount> u;
    for (int k = 0; k < kZoneCount; ++k) {
      Grid<double> g(m.height, m.width);
      for (int r = 0; r < m.height; ++r)
        for (int c = 0; c < m.width; ++c) g(r, c) = fused.std.at(t, k, r, c);
      u[static_cast<std::size_t>(k)] = std::move(g);
    }
    out.uncertainty.push_back(std::move(u));
  }
  return out;
}

void check_compatible(const std::vector<net::Checkpoint>& members) {
  if (members.empty()) throw ValidationError("ensemble needs at least one member");
  const auto& a = members.front().config;
  for (std::size_t i = 1; i < members.size(); ++i) {
    const auto& b = members[i].config;
    auto fail = [i](const char* field) {
      throw ValidationError("ensemble member " + std::to_string(i) + " differs in " + field);
    };
    if (a.series_length != b.series_length) fail("series_length");
    if (a.in_channels != b.in_channels) fail("in_channels");
    if (a.classes != b.classes) fail("classes");
    if (a.height != b.height) fail("height");
    if (a.width != b.width) fail("width");
    if (a.crop_fraction != b.crop_fraction) fail("crop_fraction");
  }
}

EnsembleOutput ensemble_predict(const std::vector<net::Checkpoint>& members, const net::Tensor& series,
                                const std::vector<bool>& retain) {
  check_compatible(members);
  if (static_cast<int>(retain.size()) != series.frames) throw ValidationError("retain flags must match the series length");
  std::vector<net::Tensor> logits;
  for (const auto& ckpt : members) {
    net::Network n(ckpt);
    const net::Tensor full = n.forward(series);
    int kept = 0;
    for (bool r : retain) kept += r ? 1 : 0;
    net::Tensor sel(kept, full.channels, full.height, full.width);
    int k = 0;
    for (int t = 0; t < full.frames; ++t)
      if (retain[static_cast<std::size_t>(t)])
        sel.data.middleCols(static_cast<Eigen::Index>(k++) * full.pixels(), full.pixels()) =
            full.data.middleCols(static_cast<Eigen::Index>(t) * full.pixels(), full.pixels());
    logits.push_back(std::move(sel));
  }
  return to_output(combine_logits(logits));
}

}  // namespace calfront::ensemble
