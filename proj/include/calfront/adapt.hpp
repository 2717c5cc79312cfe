#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "calfront/composer.hpp"
#include "calfront/dataset.hpp"
#include "calfront/net.hpp"
#include "calfront/pipeline.hpp"

namespace calfront::adapt {

struct TrainConfig {
  double learning_rate = 1e-4;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int batch_size = 1;         // series per optimizer step
  int steps_per_epoch = 50;   // optimizer steps per epoch
  int max_epochs = 20;
  int patience = 3;
  double target_ratio = 1.0;  // target batches per source batch
  bool target_only = false;   // the ratio -> infinity limit
  std::uint64_t seed = 0;
  composer::SeriesPolicy policy = composer::SeriesPolicy::consecutive();
  bool rock_mask = false;
  // Target few-shot series that cannot satisfy the summer policy (no September frames) are
  // composed consecutively instead.
  bool fallback_consecutive = true;
  // Random horizontal shift of whole training series (inputs and labels), in pixels; 0 disables.
  int shift_augment_px = 0;

  void validate() const;
  pipeline::SeriesOptions series_options() const;
  bool operator==(const TrainConfig&) const = default;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

/// Learning rate at `step` of `total` under cosine decay to zero.
double cosine_lr(double base, long step, long total);

/// Adam with decoupled weight decay.
class AdamW {
 public:
  AdamW(double beta1, double beta2, double epsilon, double weight_decay);
  void step(std::vector<net::Parameter>& params, double lr);
  long steps() const { return t_; }

 private:
  double beta1_, beta2_, eps_, wd_;
  long t_ = 0;
  std::vector<Eigen::MatrixXd> m_, v_;
};

/// Tracks the best validation score; stops after `patience` epochs without strict improvement.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience);
  /// Returns true when `score` is a new best.
  bool update(int epoch, double score);
  bool should_stop() const { return stale_ >= patience_; }
  int best_epoch() const { return best_epoch_; }
  double best_score() const { return best_; }

 private:
  int patience_;
  int stale_ = 0;
  int best_epoch_ = 0;
  double best_ = -1.0;
  bool any_ = false;
};

enum class Domain { kSource, kTarget };

/// Draws which domain the next batch comes from: target with probability ratio/(1+ratio).
/// Without a target set every batch is source and no random numbers are consumed.
class BatchMixer {
 public:
  BatchMixer(bool has_source, bool has_target, double ratio, bool target_only, std::uint64_t seed);
  Domain next();
  const std::vector<Domain>& log() const { return log_; }

 private:
  bool has_source_, has_target_;
  double p_target_;
  std::mt19937_64 rng_;
  std::vector<Domain> log_;
};

/// First `n` draws of a BatchMixer.
std::vector<Domain> mix_batches(std::size_t n, bool has_target, double ratio, bool target_only, std::uint64_t seed);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_iou = 0.0;
  double learning_rate = 0.0;
  std::size_t source_batches = 0;
  std::size_t target_batches = 0;
  bool best = false;
};

struct TrainHooks {
  /// Replaces the validation IoU computation (tests).
  std::function<double(net::Network&, int epoch)> validate;
  /// Directory for best.ckpt and train_log.jsonl; empty disables file output.
  std::filesystem::path out_dir;
};

struct TrainResult {
  net::Checkpoint best;
  int best_epoch = 0;
  std::vector<EpochLog> history;
  std::vector<Domain> sampler_log;
  double first_loss = 0.0;  // loss of the very first batch
  std::size_t fallback_series = 0;
};

/// Trains a fresh network. `target_fewshot` may be null or empty (source-only baseline).
/// Throws DataError on empty source/val sets and NumericalError (with epoch and batch) on a
/// non-finite loss.
TrainResult train(const Dataset& source, const Dataset* target_fewshot, const Dataset& val, const net::NetConfig& net_config,
                  const TrainConfig& cfg, const TrainHooks& hooks = {});

struct EnsembleResult {
  std::vector<TrainResult> members;
  std::vector<std::pair<int, std::string>> failures;  // (member index, message)
};

/// `n_members` independent trainings with seeds cfg.seed + i. Member failures are collected, not thrown.
EnsembleResult retrain_ensemble(const Dataset& source, const Dataset* target_fewshot, const Dataset& val,
                                const net::NetConfig& net_config, const TrainConfig& cfg, int n_members,
                                const TrainHooks& hooks = {});

}  // namespace calfront::adapt
