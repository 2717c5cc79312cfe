// calfront command-line tool. Exit codes: 0 ok, 2 validation, 3 data, 4 numerical.

#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>

#include "calfront/adapt.hpp"
#include "calfront/ensemble.hpp"
#include "calfront/errors.hpp"
#include "calfront/experiment.hpp"
#include "calfront/pipeline.hpp"
#include "calfront/plot.hpp"
#include "calfront/raster_io.hpp"
#include "calfront/rockmask.hpp"
#include "calfront/synthgen.hpp"

namespace fs = std::filesystem;
using namespace calfront;
using nlohmann::json;

namespace {

struct CommonFlags {
  std::string config;
  std::string experiment;
  std::optional<std::uint64_t> seed;
  std::optional<int> members;
  std::string policy;
  std::string rock_mask;
  std::string out;
};

void add_common(CLI::App* app, CommonFlags& f) {
  app->add_option("--config", f.config, "run configuration (JSON)")->check(CLI::ExistingFile);
  app->add_option("--experiment", f.experiment, "baseline, few_shot, summer_ref, rock_mask or ensemble");
  app->add_option("--seed", f.seed, "base seed");
  app->add_option("--members", f.members, "ensemble members");
  app->add_option("--policy", f.policy, "series policy")->check(CLI::IsMember({"consecutive", "summer_reference"}));
  app->add_option("--rock-mask", f.rock_mask, "rock mask channel")->check(CLI::IsMember({"on", "off"}));
  app->add_option("--out", f.out, "output directory");
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

// Config file, then --experiment, then the remaining flag overrides.
experiment::RunConfig resolve_config(const CommonFlags& f) {
  experiment::RunConfig c = experiment::default_run_config();
  if (!f.config.empty()) {
    try {
      c = read_json(f.config).get<experiment::RunConfig>();
    } catch (const json::exception& e) {
      throw ValidationError(f.config + ": " + e.what());
    }
  }
  if (f.seed) c.seed = *f.seed;
  c = experiment::resolve(c, f.experiment.empty() ? c.experiment : experiment::parse_tag(f.experiment));
  if (f.members) c.members = *f.members;
  if (!f.policy.empty()) {
    c.train.policy = composer::parse_policy_kind(f.policy) == composer::PolicyKind::kSummerReference
                         ? composer::SeriesPolicy::summer_reference(3, 4)
                         : composer::SeriesPolicy::consecutive(8);
    c.net.series_length = c.train.policy.length;
  }
  if (!f.rock_mask.empty()) {
    c.train.rock_mask = f.rock_mask == "on";
    c.net.in_channels = c.train.rock_mask ? 2 : 1;
  }
  if (c.data_root.empty())
    if (const char* env = std::getenv("CALFRONT_DATA_ROOT")) c.data_root = env;
  if (!f.out.empty()) c.out_root = f.out;
  c.validate();
  return c;
}

fs::path out_dir(const experiment::RunConfig& c) {
  if (c.out_root.empty()) throw ValidationError("no output directory (use --out)");
  fs::create_directories(c.out_root);
  return c.out_root;
}

void dump_config(const experiment::RunConfig& c, const fs::path& dir) {
  write_file_atomic(dir / "resolved_config.json", json(c).dump(2) + "\n");
}

synthgen::DomainPair load_pair(const experiment::RunConfig& c) {
  if (c.data_root.empty()) {
    std::cerr << "no data root; generating the synthetic benchmark in memory\n";
    return synthgen::generate_domain_pair(experiment::domain_pair_config(c.benchmark));
  }
  const fs::path root = c.data_root;
  return {load_dataset(root / "source" / "manifest.json"), load_dataset(root / "target" / "manifest.json")};
}

Dataset load_split(const fs::path& manifest, const std::string& split) {
  Dataset ds = load_dataset(manifest);
  return split == "all" ? ds : ds.subset(parse_split(split));
}

std::map<std::string, ZoneMap> read_predictions(const fs::path& dir, const Dataset& ds) {
  std::map<std::string, ZoneMap> out;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (!ds.manifest.records[i].label_match) continue;
    const auto path = dir / "zones" / (ds.frames[i].id + ".png");
    if (!fs::exists(path)) throw DataError("missing prediction " + path.string());
    out.emplace(ds.frames[i].id, zones_from_raw(read_png_gray(path)));
  }
  return out;
}

int cmd_synth(const CommonFlags& f) {
  auto c = resolve_config(f);
  const fs::path root = f.out.empty() ? fs::path(c.data_root) : fs::path(f.out);
  if (root.empty()) throw ValidationError("no output directory (use --out or CALFRONT_DATA_ROOT)");
  auto pair = synthgen::generate_domain_pair(experiment::domain_pair_config(c.benchmark));
  save_dataset(pair.source, root / "source");
  save_dataset(pair.target, root / "target");
  dump_config(c, root);
  std::cout << "source frames " << pair.source.size() << ", target frames " << pair.target.size() << " -> " << root << "\n";
  return 0;
}

struct RockmaskFlags {
  std::string polygons;
  std::vector<double> grid;
  std::string edits;
  std::string glacier = "glacier";
};

int cmd_rockmask(const CommonFlags& f, const RockmaskFlags& r) {
  if (r.grid.size() != 5) throw ValidationError("--grid expects origin_x origin_y spacing height width");
  if (f.out.empty()) throw ValidationError("no output directory (use --out)");
  rockmask::GridGeometry g{r.grid[0], r.grid[1], r.grid[2], static_cast<int>(r.grid[3]), static_cast<int>(r.grid[4])};
  const auto sets = rockmask::load_polygons_geojson(r.polygons);
  rockmask::PolygonSet outlines{rockmask::PolygonTag::kGlacierOutline, {}};
  rockmask::PolygonSet tongues{rockmask::PolygonTag::kGlacierTongue, {}};
  rockmask::PolygonSet coast{rockmask::PolygonTag::kCoastline, {}};
  for (const auto& s : sets) {
    auto& dst = s.tag == rockmask::PolygonTag::kGlacierOutline ? outlines
                : s.tag == rockmask::PolygonTag::kGlacierTongue ? tongues
                                                                : coast;
    dst.polygons.insert(dst.polygons.end(), s.polygons.begin(), s.polygons.end());
  }
  const auto glacier = rockmask::build_glacier_area(outlines, tongues);
  auto mask = rockmask::rasterize(rockmask::build_rock_region(coast, glacier), g, r.glacier);
  if (!r.edits.empty()) mask = rockmask::refine_near_front(mask, rockmask::load_edit_log(r.edits));
  fs::create_directories(f.out);
  Grid<std::uint8_t> img = mask.bits;
  for (auto& v : img.values()) v = v ? 255 : 0;
  write_png_gray(fs::path(f.out) / (r.glacier + ".png"), img);
  rockmask::save_edit_log(mask.edit_log, fs::path(f.out) / (r.glacier + "_edits.json"));
  std::cout << "rock pixels " << mask.popcount() << "\n";
  return 0;
}

struct DataFlags {
  std::string manifest;
  std::string split = "test";
};

int cmd_compose(const CommonFlags& f, const DataFlags& d) {
  auto c = resolve_config(f);
  const auto dir = out_dir(c);
  const Dataset ds = load_split(d.manifest, d.split);
  const auto options = c.train.series_options();
  json series = json::array();
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto s = pipeline::compose_for(ds, i, options);
    json frames = json::array();
    for (std::size_t k : s.frames) frames.push_back(ds.frames[k].id);
    series.push_back({{"anchor", ds.frames[i].id},
                      {"frames", frames},
                      {"retain", s.retain},
                      {"anchor_pos", s.anchor_pos},
                      {"fell_back", s.fell_back},
                      {"label_match", ds.manifest.records[i].label_match}});
  }
  write_file_atomic(dir / "series.json", json{{"policy", c.train.policy}, {"series", series}}.dump(2) + "\n");
  dump_config(c, dir);
  std::cout << series.size() << " series -> " << (dir / "series.json") << "\n";
  return 0;
}

int cmd_train(const CommonFlags& f) {
  auto c = resolve_config(f);
  const auto dir = out_dir(c);
  dump_config(c, dir);
  const auto pair = load_pair(c);
  const Dataset train_target = pair.target.subset(Split::kTrain);
  const Dataset val = pair.target.subset(Split::kVal);
  adapt::TrainHooks hooks;
  hooks.out_dir = dir;
  const Dataset* target = c.use_target ? &train_target : nullptr;
  if (c.members == 1) {
    auto r = adapt::train(pair.source, target, val, c.net, c.train, hooks);
    std::cout << "best epoch " << r.best_epoch << " val IoU " << r.best.meta.best_val_iou << " -> "
              << (dir / "best.ckpt") << "\n";
    return 0;
  }
  auto ens = adapt::retrain_ensemble(pair.source, target, val, c.net, c.train, c.members, hooks);
  for (const auto& [i, msg] : ens.failures) std::cerr << "member " << i << " failed: " << msg << "\n";
  std::cout << ens.members.size() << "/" << c.members << " members trained -> " << dir << "\n";
  if (ens.members.empty()) throw NumericalError("every ensemble member failed");
  return ens.failures.empty() ? 0 : 4;
}

int cmd_predict(const CommonFlags& f, const DataFlags& d, const std::vector<std::string>& checkpoints) {
  auto c = resolve_config(f);
  const auto dir = out_dir(c);
  const Dataset ds = load_split(d.manifest, d.split);
  std::vector<net::Checkpoint> members;
  for (const auto& p : checkpoints) members.push_back(net::load_checkpoint(p));
  ensemble::check_compatible(members);
  if (members.front().config.in_channels != c.net.in_channels || members.front().config.series_length != c.net.series_length)
    throw ValidationError("checkpoint channels/series length disagree with the resolved config (check --policy/--rock-mask)");
  const auto options = c.train.series_options();

  std::vector<std::map<std::string, net::Tensor>> per_member;
  for (const auto& m : members) {
    net::Network n(m);
    per_member.push_back(pipeline::predict_logits(n, ds, options));
  }
  fs::create_directories(dir / "zones");
  if (members.size() > 1) fs::create_directories(dir / "uncertainty");
  json frames = json::array();
  for (const auto& [id, first] : per_member.front()) {
    std::vector<net::Tensor> logits;
    for (const auto& pm : per_member) logits.push_back(pm.at(id));
    const auto out = ensemble::to_output(ensemble::combine_logits(logits));
    write_png_gray(dir / "zones" / (id + ".png"), zones_to_raw(out.zones.front()));
    if (members.size() > 1)
      for (int k = 0; k < kZoneCount; ++k)
        write_pfm(dir / "uncertainty" / (id + "_" + std::string(zone_name(static_cast<Zone>(k))) + ".pfm"),
                  out.uncertainty.front()[static_cast<std::size_t>(k)]);
    frames.push_back(id);
  }
  write_file_atomic(dir / "predictions.json", json{{"members", members.size()}, {"frames", frames}}.dump(2) + "\n");
  dump_config(c, dir);
  std::cout << frames.size() << " predictions from " << members.size() << " member(s) -> " << dir << "\n";
  return 0;
}

int cmd_eval(const CommonFlags& f, const DataFlags& d, const std::vector<std::string>& prediction_dirs) {
  const Dataset ds = load_split(d.manifest, d.split);
  const auto truth = ds.ground_truth();
  std::vector<frontops::EvalReport> reports;
  for (const auto& p : prediction_dirs) reports.push_back(frontops::evaluate(read_predictions(p, ds), truth));
  const auto summary = frontops::summarize_runs(reports);
  const std::string label = f.experiment.empty() ? "model" : f.experiment;
  const auto table = frontops::render_table({{label, summary}});
  std::cout << table;
  if (!f.out.empty()) {
    fs::create_directories(f.out);
    for (std::size_t i = 0; i < reports.size(); ++i)
      write_file_atomic(fs::path(f.out) / ("report_" + std::to_string(i) + ".json"), frontops::report_to_json(reports[i]) + "\n");
    write_file_atomic(fs::path(f.out) / "summary.json", frontops::summary_to_json(summary) + "\n");
    write_file_atomic(fs::path(f.out) / "table.txt", table);
  }
  return 0;
}

int cmd_plot(const CommonFlags& f, const DataFlags& d, const std::string& predictions, int radius) {
  if (f.out.empty()) throw ValidationError("no output directory (use --out)");
  const Dataset ds = load_split(d.manifest, d.split);
  const auto preds = read_predictions(predictions, ds);
  std::map<std::string, plot::ClassMaps> unc;
  const fs::path udir = fs::path(predictions) / "uncertainty";
  if (fs::exists(udir))
    for (const auto& [id, z] : preds) {
      plot::ClassMaps maps;
      for (int k = 0; k < kZoneCount; ++k) {
        const auto p = udir / (id + "_" + std::string(zone_name(static_cast<Zone>(k))) + ".pfm");
        if (!fs::exists(p)) throw DataError("missing uncertainty map " + p.string());
        maps[static_cast<std::size_t>(k)] = read_pfm(p);
      }
      unc.emplace(id, std::move(maps));
    }
  const auto products = plot::write_figures(preds, ds, unc, f.out, {radius});
  std::cout << products.overlays.size() << " overlays, " << products.uncertainty_panels.size()
            << " uncertainty panels -> " << f.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"calfront: calving-front delineation on synthetic multi-temporal SAR scenes"};
  app.require_subcommand(1);
  CommonFlags flags;
  DataFlags data;
  RockmaskFlags rock;
  std::vector<std::string> checkpoints, prediction_dirs;
  std::string predictions;
  int radius = 3;

  auto* synth = app.add_subcommand("synth", "generate the synthetic source/target benchmark");
  add_common(synth, flags);

  auto* rockmask_cmd = app.add_subcommand("rockmask", "rasterize a rock mask from GeoJSON polygons");
  add_common(rockmask_cmd, flags);
  rockmask_cmd->add_option("--polygons", rock.polygons, "GeoJSON with tagged polygons")->required()->check(CLI::ExistingFile);
  rockmask_cmd->add_option("--grid", rock.grid, "origin_x origin_y spacing height width")->required()->expected(5);
  rockmask_cmd->add_option("--edits", rock.edits, "pixel edit log (JSON)")->check(CLI::ExistingFile);
  rockmask_cmd->add_option("--glacier", rock.glacier, "glacier id");

  auto add_data = [&](CLI::App* sub) {
    sub->add_option("--manifest", data.manifest, "dataset manifest")->required()->check(CLI::ExistingFile);
    sub->add_option("--split", data.split, "train, val, test or all")->check(CLI::IsMember({"train", "val", "test", "all"}));
  };
  auto* compose = app.add_subcommand("compose", "write the series index of a dataset");
  add_common(compose, flags);
  add_data(compose);

  auto* train = app.add_subcommand("train", "train one experiment (checkpoints + log)");
  add_common(train, flags);

  auto* predict = app.add_subcommand("predict", "zone maps (and uncertainty for >= 2 checkpoints)");
  add_common(predict, flags);
  add_data(predict);
  predict->add_option("--checkpoint", checkpoints, "checkpoint file (repeat for an ensemble)")->required()->check(CLI::ExistingFile);

  auto* eval = app.add_subcommand("eval", "score predictions and render the table");
  add_common(eval, flags);
  add_data(eval);
  eval->add_option("--predictions", prediction_dirs, "prediction directory (repeat for retrained runs)")->required();

  auto* plot_cmd = app.add_subcommand("plot", "zone panels, front overlays and uncertainty panels");
  add_common(plot_cmd, flags);
  add_data(plot_cmd);
  plot_cmd->add_option("--predictions", predictions, "prediction directory")->required();
  plot_cmd->add_option("--radius", radius, "front dilation radius in pixels");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*synth) return cmd_synth(flags);
    if (*rockmask_cmd) return cmd_rockmask(flags, rock);
    if (*compose) return cmd_compose(flags, data);
    if (*train) return cmd_train(flags);
    if (*predict) return cmd_predict(flags, data, checkpoints);
    if (*eval) return cmd_eval(flags, data, prediction_dirs);
    if (*plot_cmd) return cmd_plot(flags, data, predictions, radius);
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
