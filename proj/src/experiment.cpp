#include "calfront/experiment.hpp"

#include <chrono>
#include <fstream>
#include <nlohmann/json.hpp>

#include "calfront/ensemble.hpp"
#include "calfront/errors.hpp"
#include "calfront/raster_io.hpp"

namespace calfront::experiment {

std::string_view to_string(Tag tag) {
  switch (tag) {
    case Tag::kBaseline: return "baseline";
    case Tag::kFewShot: return "few_shot";
    case Tag::kSummerRef: return "summer_ref";
    case Tag::kRockMask: return "rock_mask";
    case Tag::kEnsemble: return "ensemble";
  }
  return "?";
}

Tag parse_tag(std::string_view text) {
  for (Tag t : chain())
    if (to_string(t) == text) return t;
  throw ValidationError("unknown experiment '" + std::string(text) +
                        "' (expected baseline, few_shot, summer_ref, rock_mask or ensemble)");
}

const std::vector<Tag>& chain() {
  static const std::vector<Tag> tags{Tag::kBaseline, Tag::kFewShot, Tag::kSummerRef, Tag::kRockMask, Tag::kEnsemble};
  return tags;
}

synthgen::DomainPairConfig domain_pair_config(const BenchmarkConfig& b) {
  if (b.height < 32 || b.width < 32 || b.height % 16 != 0 || b.width % 16 != 0)
    throw ValidationError("benchmark height and width must be multiples of 16 and at least 32");
  synthgen::SceneSpec base;
  base.height = b.height;
  base.width = b.width;
  base.pixel_spacing_m = b.pixel_spacing_m;
  base.front_baseline_col = std::round(b.front_baseline * b.width);
  base.front_wave_amplitude = b.wave_amplitude;
  base.front_wave_period = 0.75 * b.height;
  base.melange_band_px = b.melange_band_px;
  base.speckle_strength = b.speckle_strength;

  synthgen::DomainPairConfig cfg;
  base.seed = b.seed;
  base.texture = b.source_texture;
  base.front_velocity = b.source_front_velocity;
  cfg.source_glaciers = synthgen::glacier_family(base, b.source_glaciers, "src");
  base.seed = b.seed + 1;
  base.texture = b.target_texture;
  base.front_velocity = b.target_front_velocity;
  cfg.target_glaciers = synthgen::glacier_family(base, b.target_glaciers, "tgt");
  cfg.val_glaciers = b.val_glaciers;
  cfg.test_glaciers = b.test_glaciers;
  cfg.eval_annotations_per_glacier = b.eval_annotations_per_glacier;
  cfg.melange_fraction = b.melange_fraction;
  return cfg;
}

void RunConfig::validate() const {
  net.validate();
  train.validate();
  if (net.in_channels != (train.rock_mask ? 2 : 1))
    throw ValidationError("net.in_channels must be 2 exactly when the rock mask is on");
  if (net.series_length != train.policy.length) throw ValidationError("net.series_length must equal the policy length");
  if (members < 1) throw ValidationError("members must be at least 1");
  if (net.height != benchmark.height || net.width != benchmark.width)
    throw ValidationError("net input size must match the benchmark scene size");
}

RunConfig default_run_config() {
  RunConfig c;
  c.net.height = c.benchmark.height;
  c.net.width = c.benchmark.width;
  c.net.widths = {8, 12, 16, 20, 24};
  c.net.gru_hidden = {8, 8, 8};
  c.net.crop_fraction = 1.0;
  c.net.series_length = 8;
  c.train.learning_rate = 5e-3;
  c.train.weight_decay = 1e-4;
  c.train.batch_size = 1;
  c.train.steps_per_epoch = 60;
  c.train.max_epochs = 6;
  c.train.patience = 3;
  c.train.shift_augment_px = 8;
  c.train.policy = composer::SeriesPolicy::consecutive(8);
  return c;
}

RunConfig resolve(RunConfig c, Tag tag) {
  const auto rank = [](Tag t) { return static_cast<int>(t); };
  c.experiment = tag;
  c.use_target = rank(tag) >= rank(Tag::kFewShot);
  if (rank(tag) >= rank(Tag::kSummerRef)) {
    c.train.policy = composer::SeriesPolicy::summer_reference(3, 4);
  } else {
    c.train.policy = composer::SeriesPolicy::consecutive(c.train.policy.kind == composer::PolicyKind::kConsecutive
                                                             ? c.train.policy.length
                                                             : 8);
  }
  c.net.series_length = c.train.policy.length;
  c.train.rock_mask = rank(tag) >= rank(Tag::kRockMask);
  c.net.in_channels = c.train.rock_mask ? 2 : 1;
  c.members = tag == Tag::kEnsemble ? std::max(c.members, 5) : 1;
  c.train.seed = c.seed;
  return c;
}

void to_json(nlohmann::json& j, const BenchmarkConfig& b) {
  auto tex = [](const synthgen::TextureStats& t) {
    return nlohmann::json{{"na_mean", t.na_mean},
                          {"rock_mean", t.rock_mean},
                          {"glacier_mean", t.glacier_mean},
                          {"ocean_mean", t.ocean_mean},
                          {"texture_amplitude", t.texture_amplitude},
                          {"brightness_jitter", t.brightness_jitter}};
  };
  j = nlohmann::json{{"height", b.height},
                     {"width", b.width},
                     {"pixel_spacing_m", b.pixel_spacing_m},
                     {"source_glaciers", b.source_glaciers},
                     {"target_glaciers", b.target_glaciers},
                     {"val_glaciers", b.val_glaciers},
                     {"test_glaciers", b.test_glaciers},
                     {"eval_annotations_per_glacier", b.eval_annotations_per_glacier},
                     {"source_front_velocity", b.source_front_velocity},
                     {"target_front_velocity", b.target_front_velocity},
                     {"front_baseline", b.front_baseline},
                     {"wave_amplitude", b.wave_amplitude},
                     {"melange_band_px", b.melange_band_px},
                     {"melange_fraction", b.melange_fraction},
                     {"speckle_strength", b.speckle_strength},
                     {"source_texture", tex(b.source_texture)},
                     {"target_texture", tex(b.target_texture)},
                     {"seed", b.seed}};
}

void from_json(const nlohmann::json& j, BenchmarkConfig& b) {
  BenchmarkConfig d;
  auto tex = [](const nlohmann::json& t, synthgen::TextureStats s) {
    s.na_mean = t.value("na_mean", s.na_mean);
    s.rock_mean = t.value("rock_mean", s.rock_mean);
    s.glacier_mean = t.value("glacier_mean", s.glacier_mean);
    s.ocean_mean = t.value("ocean_mean", s.ocean_mean);
    s.texture_amplitude = t.value("texture_amplitude", s.texture_amplitude);
    s.brightness_jitter = t.value("brightness_jitter", s.brightness_jitter);
    return s;
  };
  b.height = j.value("height", d.height);
  b.width = j.value("width", d.width);
  b.pixel_spacing_m = j.value("pixel_spacing_m", d.pixel_spacing_m);
  b.source_glaciers = j.value("source_glaciers", d.source_glaciers);
  b.target_glaciers = j.value("target_glaciers", d.target_glaciers);
  b.val_glaciers = j.value("val_glaciers", d.val_glaciers);
  b.test_glaciers = j.value("test_glaciers", d.test_glaciers);
  b.eval_annotations_per_glacier = j.value("eval_annotations_per_glacier", d.eval_annotations_per_glacier);
  b.source_front_velocity = j.value("source_front_velocity", d.source_front_velocity);
  b.target_front_velocity = j.value("target_front_velocity", d.target_front_velocity);
  b.front_baseline = j.value("front_baseline", d.front_baseline);
  b.wave_amplitude = j.value("wave_amplitude", d.wave_amplitude);
  b.melange_band_px = j.value("melange_band_px", d.melange_band_px);
  b.melange_fraction = j.value("melange_fraction", d.melange_fraction);
  b.speckle_strength = j.value("speckle_strength", d.speckle_strength);
  b.source_texture = j.contains("source_texture") ? tex(j.at("source_texture"), d.source_texture) : d.source_texture;
  b.target_texture = j.contains("target_texture") ? tex(j.at("target_texture"), d.target_texture) : d.target_texture;
  b.seed = j.value("seed", d.seed);
}

void to_json(nlohmann::json& j, const RunConfig& c) {
  j = nlohmann::json{{"data_root", c.data_root},
                     {"out_root", c.out_root},
                     {"benchmark", c.benchmark},
                     {"net", c.net},
                     {"train", c.train},
                     {"experiment", to_string(c.experiment)},
                     {"use_target", c.use_target},
                     {"members", c.members},
                     {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, RunConfig& c) {
  const RunConfig d = default_run_config();
  c.data_root = j.value("data_root", d.data_root);
  c.out_root = j.value("out_root", d.out_root);
  c.benchmark = j.contains("benchmark") ? j.at("benchmark").get<BenchmarkConfig>() : d.benchmark;
  c.net = j.contains("net") ? j.at("net").get<net::NetConfig>() : d.net;
  c.train = j.contains("train") ? j.at("train").get<adapt::TrainConfig>() : d.train;
  c.experiment = parse_tag(j.value("experiment", std::string("baseline")));
  c.use_target = j.value("use_target", d.use_target);
  c.members = j.value("members", d.members);
  c.seed = j.value("seed", d.seed);
}

RunResult run(const RunConfig& config, const synthgen::DomainPair& data, const std::filesystem::path& out_dir) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const Dataset train_target = data.target.subset(Split::kTrain);
  const Dataset val = data.target.subset(Split::kVal);
  const Dataset test = data.target.subset(Split::kTest);
  if (test.size() == 0) throw DataError("target test split is empty");

  RunResult result;
  result.config = config;
  adapt::TrainHooks hooks;
  hooks.out_dir = out_dir;
  const Dataset* target = config.use_target ? &train_target : nullptr;
  if (config.members == 1) {
    result.members.push_back(adapt::train(data.source, target, val, config.net, config.train, hooks));
  } else {
    auto ens = adapt::retrain_ensemble(data.source, target, val, config.net, config.train, config.members, hooks);
    if (ens.members.empty()) throw NumericalError("every ensemble member failed: " + ens.failures.front().second);
    result.members = std::move(ens.members);
  }

  const auto options = config.train.series_options();
  if (result.members.size() == 1) {
    net::Network n(result.members.front().best);
    result.predictions = pipeline::predict_zones(n, test, options);
  } else {
    std::vector<std::map<std::string, net::Tensor>> per_member;
    for (const auto& m : result.members) {
      net::Network n(m.best);
      per_member.push_back(pipeline::predict_logits(n, test, options));
    }
    for (const auto& [id, first] : per_member.front()) {
      std::vector<net::Tensor> logits;
      for (const auto& pm : per_member) logits.push_back(pm.at(id));
      result.predictions.emplace(id, ensemble::to_output(ensemble::combine_logits(logits)).zones.front());
    }
  }
  const auto truth = test.ground_truth();
  result.report = frontops::evaluate(result.predictions, truth);
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_file_atomic(out_dir / "resolved_config.json", nlohmann::json(config).dump(2) + "\n");
    write_file_atomic(out_dir / "report.json", frontops::report_to_json(result.report) + "\n");
  }
  return result;
}

}  // namespace calfront::experiment
