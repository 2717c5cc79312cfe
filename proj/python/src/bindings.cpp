#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <algorithm>
#include <nlohmann/json.hpp>

#include "calfront/calendar.hpp"
#include "calfront/composer.hpp"
#include "calfront/ensemble.hpp"
#include "calfront/errors.hpp"
#include "calfront/experiment.hpp"
#include "calfront/frontops.hpp"
#include "calfront/rockmask.hpp"

namespace py = pybind11;
using namespace calfront;

namespace {

using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;
using F64Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

ZoneMap zones_of(const U8Array& a) {
  if (a.ndim() != 2) throw ValidationError("zone map must be a 2-d array");
  Grid<std::uint8_t> raw(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), raw.values().begin());
  return zones_from_raw(raw);
}

// nonzero -> 1
U8Array to_array(const Grid<std::uint8_t>& g) {
  U8Array out({g.height(), g.width()});
  std::ranges::transform(g.values(), out.mutable_data(), [](std::uint8_t v) { return std::uint8_t{v != 0}; });
  return out;
}

FrontMask front_of(const U8Array& a, double spacing) {
  if (a.ndim() != 2) throw ValidationError("front mask must be a 2-d array");
  Grid<std::uint8_t> raw(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), raw.values().begin());
  return front_from_raster(raw, spacing);
}

py::object optional_to_py(const std::optional<double>& v) { return v ? py::cast(*v) : py::none(); }

// (F, K, H, W) array <-> tensor
net::Tensor tensor_of(const F64Array& a) {
  if (a.ndim() != 4) throw ValidationError("logits must have shape (frames, classes, height, width)");
  net::Tensor t(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), static_cast<int>(a.shape(2)),
                static_cast<int>(a.shape(3)));
  auto v = a.unchecked<4>();
  for (int f = 0; f < t.frames; ++f)
    for (int k = 0; k < t.channels; ++k)
      for (int r = 0; r < t.height; ++r)
        for (int c = 0; c < t.width; ++c) t.at(f, k, r, c) = v(f, k, r, c);
  return t;
}

F64Array array_of(const net::Tensor& t) {
  F64Array out({t.frames, t.channels, t.height, t.width});
  auto v = out.mutable_unchecked<4>();
  for (int f = 0; f < t.frames; ++f)
    for (int k = 0; k < t.channels; ++k)
      for (int r = 0; r < t.height; ++r)
        for (int c = 0; c < t.width; ++c) v(f, k, r, c) = t.at(f, k, r, c);
  return out;
}

py::dict compose_series(const std::vector<std::string>& dates, std::size_t anchor, const std::string& policy_json,
                        bool skip_anchor) {
  std::vector<Date> parsed;
  for (const auto& d : dates) parsed.push_back(parse_iso_date(d));
  const auto policy = nlohmann::json::parse(policy_json).get<composer::SeriesPolicy>();
  const auto s = composer::compose(parsed, anchor, policy, skip_anchor);
  std::vector<std::string> roles;
  for (auto r : s.roles) roles.emplace_back(r == composer::Role::kReference ? "reference" : "analysis");
  py::dict out;
  out["frames"] = s.frames;
  out["roles"] = roles;
  out["retain"] = s.retain;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Calving-front delineation core";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_OSError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.def(
      "extract_front", [](const U8Array& zones) { return to_array(front_to_raster(frontops::extract_front(zones_of(zones)))); },
      py::arg("zones"), "Front pixels (uint8 0/1) of a zone map.");

  m.def(
      "mde",
      [](const U8Array& pred, const U8Array& truth, double spacing) {
        return optional_to_py(frontops::mde(front_of(pred, spacing), front_of(truth, spacing)));
      },
      py::arg("pred_front"), py::arg("true_front"), py::arg("pixel_spacing_m") = 1.0,
      "Symmetric mean nearest-neighbour distance in metres; None when either front is empty.");

  m.def(
      "iou",
      [](const U8Array& pred, const U8Array& truth) {
        const auto r = frontops::iou(zones_of(pred), zones_of(truth));
        py::list per_class;
        for (const auto& v : r.per_class) per_class.append(optional_to_py(v));
        py::dict out;
        out["per_class"] = per_class;
        out["mean"] = r.mean;
        return out;
      },
      py::arg("pred"), py::arg("truth"));

  m.def("compose_series", &compose_series, py::arg("dates"), py::arg("anchor"),
        py::arg("policy_json") = R"({"kind": "consecutive", "length": 8})", py::arg("skip_anchor") = false,
        "Frame indices, roles and retain flags of one series.");

  m.def(
      "combine_logits",
      [](const std::vector<F64Array>& members) {
        std::vector<net::Tensor> ts;
        for (const auto& a : members) ts.push_back(tensor_of(a));
        const auto fused = ensemble::combine_logits(ts);
        return py::make_tuple(array_of(fused.mean), array_of(fused.std));
      },
      py::arg("member_logits"), "Mean logits and population std over members.");

  m.def(
      "rasterize_polygons",
      [](const std::vector<std::vector<std::pair<double, double>>>& rings, double origin_x, double origin_y,
         double spacing, int height, int width) {
        rockmask::Region region;
        for (const auto& ring : rings) {
          rockmask::Polygon p;
          for (auto [x, y] : ring) p.outer.push_back({x, y});
          region = region.united(rockmask::Region::from_polygon(p));
        }
        return to_array(rockmask::rasterize(region, {origin_x, origin_y, spacing, height, width}).bits);
      },
      py::arg("rings"), py::arg("origin_x"), py::arg("origin_y"), py::arg("spacing"), py::arg("height"),
      py::arg("width"), "Union of simple polygons rasterized by pixel-centre inclusion.");

  m.def(
      "default_config", [] { return nlohmann::json(experiment::default_run_config()).dump(); },
      "Default run configuration as JSON.");

  m.def(
      "synthesize",
      [](const std::string& config_json, const std::filesystem::path& root) {
        const auto c = nlohmann::json::parse(config_json).get<experiment::RunConfig>();
        const auto pair = synthgen::generate_domain_pair(experiment::domain_pair_config(c.benchmark));
        save_dataset(pair.source, root / "source");
        save_dataset(pair.target, root / "target");
        return py::make_tuple(pair.source.size(), pair.target.size());
      },
      py::arg("config_json"), py::arg("root"), "Writes the synthetic source and target datasets under root.");

  m.def(
      "run_experiment",
      [](const std::string& config_json, const std::string& tag, const std::filesystem::path& out_dir) {
        auto c = nlohmann::json::parse(config_json).get<experiment::RunConfig>();
        c = experiment::resolve(c, experiment::parse_tag(tag));
        experiment::RunResult r;
        {
          py::gil_scoped_release release;
          const auto pair = synthgen::generate_domain_pair(experiment::domain_pair_config(c.benchmark));
          r = experiment::run(c, pair, out_dir);
        }
        return frontops::report_to_json(r.report);
      },
      py::arg("config_json"), py::arg("tag") = "baseline", py::arg("out_dir") = std::filesystem::path{},
      "Trains and evaluates one experiment; returns the evaluation report as JSON.");
}
