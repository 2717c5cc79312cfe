#pragma once

// Run configuration and the experiment chain baseline -> few_shot -> summer_ref -> rock_mask -> ensemble.

#include <cstdint>
#include <filesystem>
#include <map>
#include <nlohmann/json_fwd.hpp>
#include <optional>
#include <string>
#include <vector>

#include "calfront/adapt.hpp"
#include "calfront/frontops.hpp"
#include "calfront/net.hpp"
#include "calfront/synthgen.hpp"

namespace calfront::experiment {

enum class Tag { kBaseline, kFewShot, kSummerRef, kRockMask, kEnsemble };

std::string_view to_string(Tag tag);
Tag parse_tag(std::string_view text);
/// Tags in chain order.
const std::vector<Tag>& chain();

/// Knobs of the synthetic source -> target benchmark.
struct BenchmarkConfig {
  int height = 32;
  int width = 64;                 // glacier flows along +column
  double pixel_spacing_m = 10.0;
  int source_glaciers = 3;
  int target_glaciers = 4;
  std::vector<std::size_t> val_glaciers{0};
  std::vector<std::size_t> test_glaciers{1, 2};
  int eval_annotations_per_glacier = 10;
  double source_front_velocity = -0.01;    // px per step; negative = retreat
  double target_front_velocity = -0.01;
  double front_baseline = 0.6;             // first ocean column at step 0, fraction of width
  double wave_amplitude = 1.5;    // px
  int melange_band_px = 8;
  double melange_fraction = 1.0;
  double speckle_strength = 0.05;
  synthgen::TextureStats source_texture = synthgen::source_texture();
  synthgen::TextureStats target_texture = synthgen::target_texture();
  std::uint64_t seed = 7;

  bool operator==(const BenchmarkConfig&) const = default;
};

synthgen::DomainPairConfig domain_pair_config(const BenchmarkConfig& b);

struct RunConfig {
  std::string data_root;
  std::string out_root;
  BenchmarkConfig benchmark;
  net::NetConfig net;
  adapt::TrainConfig train;
  Tag experiment = Tag::kBaseline;
  bool use_target = false;  // few-shot target data joins training
  int members = 1;
  std::uint64_t seed = 0;

  /// Checks cross-field consistency (net channels vs rock mask, series length vs policy).
  void validate() const;
};

/// Default toy-scale configuration (already resolved for `baseline`).
RunConfig default_run_config();

/// Applies the feature set of `tag` on top of `base`: each tag enables exactly one more feature than
/// its predecessor (target data, summer policy, rock channel, 5-member ensemble).
RunConfig resolve(RunConfig base, Tag tag);

void to_json(nlohmann::json& j, const BenchmarkConfig& b);
void from_json(const nlohmann::json& j, BenchmarkConfig& b);
void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);

struct RunResult {
  RunConfig config;
  frontops::EvalReport report;
  std::vector<adapt::TrainResult> members;
  std::map<std::string, ZoneMap> predictions;
  double seconds = 0.0;
};

/// Trains the configured experiment on `data` and evaluates on the target test split.
/// With members > 1 the anchor logits of all members are fused (mean-logit argmax).
RunResult run(const RunConfig& config, const synthgen::DomainPair& data, const std::filesystem::path& out_dir = {});

}  // namespace calfront::experiment
