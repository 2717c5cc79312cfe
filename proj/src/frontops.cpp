#include "calfront/frontops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "calfront/errors.hpp"

namespace calfront::frontops {

using nlohmann::json;

namespace {

constexpr int kDr[8] = {-1, -1, -1, 0, 0, 1, 1, 1};
constexpr int kDc[8] = {-1, 0, 1, -1, 1, -1, 0, 1};

// Lower envelope of parabolas (Felzenszwalb & Huttenlocher), one line at a time.
void distance_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v, std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  constexpr double kInf = std::numeric_limits<double>::infinity();
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (std::isinf(f[q])) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    double s = 0.0;
    while (true) {
      const int p = v[k];
      s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p));
      if (s <= z[k] && k > 0) {
        --k;
        continue;
      }
      break;
    }
    if (s <= z[k]) {
      // k == 0 and the new parabola dominates everywhere.
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  if (k < 0) {
    std::fill(d.begin(), d.end(), kInf);
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[j + 1] < q) ++j;
    const double dq = q - v[j];
    d[q] = dq * dq + f[v[j]];
  }
}

double mean_nearest(const FrontMask& from, const Grid<double>& dt_to) {
  double sum = 0.0;
  for (const auto& p : from.pixels) sum += std::sqrt(dt_to(p.row, p.col));
  return sum / static_cast<double>(from.pixels.size());
}

}  // namespace

FrontMask extract_front(const ZoneMap& zones, double pixel_spacing_m) {
  const int h = zones.height();
  const int w = zones.width();
  Grid<std::uint8_t> candidate(h, w, 0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (zones(r, c) != Zone::kGlacier) continue;
      for (int k = 0; k < 8; ++k) {
        const int rr = r + kDr[k];
        const int cc = c + kDc[k];
        if (zones.contains(rr, cc) && zones(rr, cc) == Zone::kOcean) {
          candidate(r, c) = 1;
          break;
        }
      }
    }
  }

  Grid<int> label(h, w, -1);
  std::vector<Pixel> best;
  std::vector<Pixel> component;
  std::deque<Pixel> queue;
  int next_label = 0;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (!candidate(r, c) || label(r, c) >= 0) continue;
      component.clear();
      label(r, c) = next_label;
      queue.push_back({r, c});
      while (!queue.empty()) {
        const Pixel p = queue.front();
        queue.pop_front();
        component.push_back(p);
        for (int k = 0; k < 8; ++k) {
          const int rr = p.row + kDr[k];
          const int cc = p.col + kDc[k];
          if (candidate.contains(rr, cc) && candidate(rr, cc) && label(rr, cc) < 0) {
            label(rr, cc) = next_label;
            queue.push_back({rr, cc});
          }
        }
      }
      ++next_label;
      // Strictly larger: the earlier component (row-major seed) wins ties.
      if (component.size() > best.size()) best = component;
    }
  }
  return make_front_mask(h, w, pixel_spacing_m, std::move(best));
}

Grid<double> squared_distance_transform(const FrontMask& mask) {
  const int h = mask.height;
  const int w = mask.width;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  Grid<double> dt(h, w, kInf);
  for (const auto& p : mask.pixels) dt(p.row, p.col) = 0.0;
  const int n = std::max(h, w);
  std::vector<double> f(static_cast<std::size_t>(n));
  std::vector<double> d(static_cast<std::size_t>(n));
  std::vector<int> v(static_cast<std::size_t>(n));
  std::vector<double> z(static_cast<std::size_t>(n) + 1);
  f.resize(static_cast<std::size_t>(h));
  d.resize(static_cast<std::size_t>(h));
  for (int c = 0; c < w; ++c) {
    for (int r = 0; r < h; ++r) f[r] = dt(r, c);
    distance_1d(f, d, v, z);
    for (int r = 0; r < h; ++r) dt(r, c) = d[r];
  }
  f.resize(static_cast<std::size_t>(w));
  d.resize(static_cast<std::size_t>(w));
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) f[c] = dt(r, c);
    distance_1d(f, d, v, z);
    for (int c = 0; c < w; ++c) dt(r, c) = d[c];
  }
  return dt;
}

std::optional<double> mde(const FrontMask& pred, const FrontMask& truth) {
  if (truth.empty()) throw DataError("ground-truth front is empty");
  if (pred.height != truth.height || pred.width != truth.width)
    throw ValidationError("front masks have different grid shapes");
  if (pred.pixel_spacing_m != truth.pixel_spacing_m) throw ValidationError("front masks have different pixel spacing");
  if (pred.empty()) return std::nullopt;
  const auto dt_truth = squared_distance_transform(truth);
  const auto dt_pred = squared_distance_transform(pred);
  const double forward = mean_nearest(pred, dt_truth);
  const double backward = mean_nearest(truth, dt_pred);
  return 0.5 * (forward + backward) * truth.pixel_spacing_m;
}

IouResult iou(const ZoneMap& pred, const ZoneMap& truth) {
  if (!pred.same_shape(truth))
    throw ValidationError("zone maps differ in shape: " + std::to_string(pred.height()) + "x" + std::to_string(pred.width()) +
                          " vs " + std::to_string(truth.height()) + "x" + std::to_string(truth.width()));
  std::array<std::size_t, kZoneCount> inter{};
  std::array<std::size_t, kZoneCount> uni{};
  const auto p = pred.values();
  const auto t = truth.values();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto a = static_cast<std::size_t>(p[i]);
    const auto b = static_cast<std::size_t>(t[i]);
    if (a == b) {
      ++inter[a];
      ++uni[a];
    } else {
      ++uni[a];
      ++uni[b];
    }
  }
  IouResult result;
  double sum = 0.0;
  int defined = 0;
  for (int k = 0; k < kZoneCount; ++k) {
    if (uni[k] == 0) continue;
    const double v = static_cast<double>(inter[k]) / static_cast<double>(uni[k]);
    result.per_class[k] = v;
    sum += v;
    ++defined;
  }
  result.mean = defined > 0 ? sum / defined : 0.0;
  return result;
}

EvalReport evaluate(const std::map<std::string, ZoneMap>& predictions, std::span<const GroundTruth> truth) {
  std::set<std::string> truth_ids;
  std::vector<std::string> unmatched;
  for (const auto& t : truth) {
    truth_ids.insert(t.frame_id);
    if (t.label_match && !predictions.contains(t.frame_id)) unmatched.push_back("no prediction for '" + t.frame_id + "'");
  }
  for (const auto& [id, _] : predictions)
    if (!truth_ids.contains(id)) unmatched.push_back("prediction '" + id + "' has no manifest entry");
  if (!unmatched.empty()) {
    std::string msg = "prediction/manifest mismatch:";
    for (const auto& u : unmatched) msg += "\n  " + u;
    throw ValidationError(msg);
  }

  EvalReport report;
  std::array<double, kZoneCount> class_sum{};
  std::array<int, kZoneCount> class_n{};
  double mde_sum = 0.0;
  double iou_sum = 0.0;
  for (const auto& t : truth) {
    if (!t.label_match) continue;
    ++report.label_matched;
    const auto& pred = predictions.at(t.frame_id);
    ImageEval img;
    img.frame_id = t.frame_id;
    img.iou = iou(pred, t.zones);
    const auto pred_front = extract_front(pred, t.front.pixel_spacing_m);
    img.mde_m = mde(pred_front, t.front);
    img.missing_front = !img.mde_m.has_value();
    if (img.missing_front) {
      ++report.missing_fronts;
    } else {
      ++report.evaluated;
      mde_sum += *img.mde_m;
    }
    for (int k = 0; k < kZoneCount; ++k) {
      if (img.iou.per_class[k]) {
        class_sum[k] += *img.iou.per_class[k];
        ++class_n[k];
      }
    }
    iou_sum += img.iou.mean;
    report.images.push_back(std::move(img));
  }
  if (report.evaluated > 0) report.mde_mean_m = mde_sum / static_cast<double>(report.evaluated);
  for (int k = 0; k < kZoneCount; ++k)
    if (class_n[k] > 0) report.class_iou[k] = class_sum[k] / class_n[k];
  report.mean_iou = report.label_matched > 0 ? iou_sum / static_cast<double>(report.label_matched) : 0.0;
  return report;
}

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) return {};
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  return {mean, std::sqrt(sq / static_cast<double>(values.size()))};
}

RunSummary summarize_runs(std::span<const EvalReport> reports) {
  RunSummary s;
  s.runs = reports.size();
  std::vector<double> mdes;
  std::vector<double> missing;
  std::vector<double> ious;
  std::array<std::vector<double>, kZoneCount> cls;
  for (const auto& r : reports) {
    if (r.mde_mean_m) mdes.push_back(*r.mde_mean_m);
    missing.push_back(static_cast<double>(r.missing_fronts));
    ious.push_back(r.mean_iou);
    for (int k = 0; k < kZoneCount; ++k)
      if (r.class_iou[k]) cls[k].push_back(*r.class_iou[k]);
  }
  if (!mdes.empty()) s.mde_m = mean_std(mdes);
  s.missing_fronts = mean_std(missing);
  s.mean_iou = mean_std(ious);
  for (int k = 0; k < kZoneCount; ++k)
    if (!cls[k].empty()) s.class_iou[k] = mean_std(cls[k]);
  return s;
}

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json iou_json(const std::array<std::optional<double>, kZoneCount>& per_class) {
  json j = json::object();
  for (int k = 0; k < kZoneCount; ++k) j[std::string(zone_name(static_cast<Zone>(k)))] = optional_number(per_class[k]);
  return j;
}

json mean_std_json(const MeanStd& m) { return {{"mean", m.mean}, {"std", m.std}}; }

std::string cell(const std::optional<MeanStd>& v, std::size_t runs, double scale, int decimals) {
  if (!v) return "n/a";
  char buf[64];
  if (runs <= 1)
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v->mean * scale);
  else
    std::snprintf(buf, sizeof(buf), "%.*f±%.*f", decimals, v->mean * scale, decimals, v->std * scale);
  return buf;
}

// Column width in terminal cells; "±" is two bytes in UTF-8.
std::size_t display_width(const std::string& s) {
  std::size_t n = 0;
  for (unsigned char ch : s)
    if ((ch & 0xC0) != 0x80) ++n;
  return n;
}

}  // namespace

std::string report_to_json(const EvalReport& report, int indent) {
  json images = json::array();
  for (const auto& img : report.images) {
    images.push_back({{"frame_id", img.frame_id},
                      {"mde_m", optional_number(img.mde_m)},
                      {"missing_front", img.missing_front},
                      {"iou", iou_json(img.iou.per_class)},
                      {"mean_iou", img.iou.mean}});
  }
  json j = {{"label_matched", report.label_matched},
            {"evaluated", report.evaluated},
            {"missing_fronts", report.missing_fronts},
            {"mde_m", optional_number(report.mde_mean_m)},
            {"iou", iou_json(report.class_iou)},
            {"mean_iou", report.mean_iou},
            {"images", images}};
  return j.dump(indent);
}

std::string summary_to_json(const RunSummary& s, int indent) {
  json cls = json::object();
  for (int k = 0; k < kZoneCount; ++k)
    cls[std::string(zone_name(static_cast<Zone>(k)))] = s.class_iou[k] ? mean_std_json(*s.class_iou[k]) : json(nullptr);
  json j = {{"runs", s.runs},
            {"mde_m", s.mde_m ? mean_std_json(*s.mde_m) : json(nullptr)},
            {"missing_fronts", mean_std_json(s.missing_fronts)},
            {"mean_iou", mean_std_json(s.mean_iou)},
            {"iou", cls}};
  return j.dump(indent);
}

std::string render_table(const std::vector<std::pair<std::string, RunSummary>>& rows) {
  std::vector<std::vector<std::string>> cells;
  cells.push_back({"Model", "MDE (m)", "Missing Fronts", "All", "NA", "Rock", "Glacier", "Ocean"});
  for (const auto& [name, s] : rows) {
    std::vector<std::string> row{name, cell(s.mde_m, s.runs, 1.0, 1)};
    if (s.runs <= 1) {
      row.push_back(std::to_string(static_cast<long>(std::llround(s.missing_fronts.mean))));
    } else {
      row.push_back(cell(s.missing_fronts, s.runs, 1.0, 1));
    }
    row.push_back(cell(s.mean_iou, s.runs, 100.0, 1));
    for (int k = 0; k < kZoneCount; ++k) row.push_back(cell(s.class_iou[k], s.runs, 100.0, 1));
    cells.push_back(std::move(row));
  }
  std::vector<std::size_t> widths(cells.front().size(), 0);
  for (const auto& row : cells)
    for (std::size_t i = 0; i < row.size(); ++i) widths[i] = std::max(widths[i], display_width(row[i]));
  std::ostringstream out;
  for (std::size_t r = 0; r < cells.size(); ++r) {
    for (std::size_t i = 0; i < cells[r].size(); ++i) {
      if (i > 0) out << " | ";
      out << cells[r][i] << std::string(widths[i] - display_width(cells[r][i]), ' ');
    }
    out << "\n";
    if (r == 0) {
      for (std::size_t i = 0; i < widths.size(); ++i) {
        if (i > 0) out << "-+-";
        out << std::string(widths[i], '-');
      }
      out << "\n";
    }
  }
  return out.str();
}

}  // namespace calfront::frontops
