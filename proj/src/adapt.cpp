#include "calfront/adapt.hpp"

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numbers>
#include <sstream>

#include "calfront/errors.hpp"

namespace calfront::adapt {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ValidationError("learning_rate must be positive");
  if (weight_decay < 0.0) throw ValidationError("weight_decay must be non-negative");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ValidationError("betas must be in [0, 1)");
  if (!(epsilon > 0.0)) throw ValidationError("epsilon must be positive");
  if (batch_size < 1) throw ValidationError("batch_size must be at least 1");
  if (steps_per_epoch < 1) throw ValidationError("steps_per_epoch must be at least 1");
  if (max_epochs < 1) throw ValidationError("max_epochs must be at least 1");
  if (patience < 1) throw ValidationError("patience must be at least 1");
  if (!(target_ratio > 0.0)) throw ValidationError("target_ratio must be positive");
  if (shift_augment_px < 0) throw ValidationError("shift_augment_px must be non-negative");
  policy.validate();
}

pipeline::SeriesOptions TrainConfig::series_options() const {
  return pipeline::SeriesOptions{policy, rock_mask, fallback_consecutive};
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"learning_rate", c.learning_rate},
                     {"weight_decay", c.weight_decay},
                     {"beta1", c.beta1},
                     {"beta2", c.beta2},
                     {"epsilon", c.epsilon},
                     {"batch_size", c.batch_size},
                     {"steps_per_epoch", c.steps_per_epoch},
                     {"max_epochs", c.max_epochs},
                     {"patience", c.patience},
                     {"target_ratio", c.target_ratio},
                     {"target_only", c.target_only},
                     {"seed", c.seed},
                     {"policy", c.policy},
                     {"rock_mask", c.rock_mask},
                     {"fallback_consecutive", c.fallback_consecutive},
                     {"shift_augment_px", c.shift_augment_px}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  TrainConfig d;
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.weight_decay = j.value("weight_decay", d.weight_decay);
  c.beta1 = j.value("beta1", d.beta1);
  c.beta2 = j.value("beta2", d.beta2);
  c.epsilon = j.value("epsilon", d.epsilon);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.steps_per_epoch = j.value("steps_per_epoch", d.steps_per_epoch);
  c.max_epochs = j.value("max_epochs", d.max_epochs);
  c.patience = j.value("patience", d.patience);
  c.target_ratio = j.value("target_ratio", d.target_ratio);
  c.target_only = j.value("target_only", d.target_only);
  c.seed = j.value("seed", d.seed);
  c.policy = j.contains("policy") ? j.at("policy").get<composer::SeriesPolicy>() : d.policy;
  c.rock_mask = j.value("rock_mask", d.rock_mask);
  c.fallback_consecutive = j.value("fallback_consecutive", d.fallback_consecutive);
  c.shift_augment_px = j.value("shift_augment_px", d.shift_augment_px);
}

double cosine_lr(double base, long step, long total) {
  if (total <= 0) return base;
  const double progress = std::clamp(static_cast<double>(step) / static_cast<double>(total), 0.0, 1.0);
  return 0.5 * base * (1.0 + std::cos(std::numbers::pi * progress));
}

AdamW::AdamW(double beta1, double beta2, double epsilon, double weight_decay)
    : beta1_(beta1), beta2_(beta2), eps_(epsilon), wd_(weight_decay) {}

void AdamW::step(std::vector<net::Parameter>& params, double lr) {
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.push_back(Eigen::MatrixXd::Zero(p.value.rows(), p.value.cols()));
      v_.push_back(Eigen::MatrixXd::Zero(p.value.rows(), p.value.cols()));
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * p.grad;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * p.grad.cwiseAbs2();
    p.value *= 1.0 - lr * wd_;
    p.value.array() -= lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
  }
}

EarlyStopping::EarlyStopping(int patience) : patience_(patience) {
  if (patience < 1) throw ValidationError("patience must be at least 1");
}

bool EarlyStopping::update(int epoch, double score) {
  if (!any_ || score > best_) {
    any_ = true;
    best_ = score;
    best_epoch_ = epoch;
    stale_ = 0;
    return true;
  }
  ++stale_;
  return false;
}

BatchMixer::BatchMixer(bool has_source, bool has_target, double ratio, bool target_only, std::uint64_t seed)
    : has_source_(has_source), has_target_(has_target), rng_(seed) {
  if (!(ratio > 0.0)) throw ValidationError("sampling ratio must be positive");
  if (!has_source && !has_target) throw DataError("no training data in either domain");
  if (target_only && !has_target) throw DataError("target-only sampling needs target frames");
  p_target_ = target_only || !has_source ? 1.0 : ratio / (1.0 + ratio);
}

Domain BatchMixer::next() {
  Domain d = Domain::kSource;
  if (has_target_) {
    if (p_target_ >= 1.0) {
      d = Domain::kTarget;
    } else {
      std::bernoulli_distribution coin(p_target_);
      d = coin(rng_) ? Domain::kTarget : Domain::kSource;
    }
  }
  log_.push_back(d);
  return d;
}

std::vector<Domain> mix_batches(std::size_t n, bool has_target, double ratio, bool target_only, std::uint64_t seed) {
  BatchMixer mixer(true, has_target, ratio, target_only, seed);
  for (std::size_t i = 0; i < n; ++i) mixer.next();
  return mixer.log();
}

namespace {

std::vector<pipeline::SeriesSample> sample_pool(const Dataset& ds, const pipeline::SeriesOptions& options) {
  std::vector<pipeline::SeriesSample> pool;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    try {
      pool.push_back(pipeline::compose_for(ds, i, options));
    } catch (const DataError&) {
      // Anchors whose series cannot be composed are not sampled.
    }
  }
  return pool;
}

std::string rng_state(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

void append_line(const std::filesystem::path& path, const std::string& line) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw DataError("cannot append to " + path.string());
  out << line << '\n';
}

}  // namespace

TrainResult train(const Dataset& source, const Dataset* target_fewshot, const Dataset& val, const net::NetConfig& net_config,
                  const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  net_config.validate();
  if (net_config.in_channels != (cfg.rock_mask ? 2 : 1))
    throw ValidationError("network in_channels must be " + std::string(cfg.rock_mask ? "2" : "1") +
                          " when rock_mask is " + (cfg.rock_mask ? "on" : "off"));
  if (net_config.series_length != cfg.policy.length)
    throw ValidationError("network series_length differs from the policy's series length");
  if (source.size() == 0) throw DataError("source training set is empty");
  if (!hooks.validate && val.manifest.label_matched_count() == 0)
    throw DataError("validation set has no label-matched frames");

  const auto options = cfg.series_options();
  const auto source_pool = sample_pool(source, options);
  if (source_pool.empty()) throw DataError("no source frame can anchor a series of length " + std::to_string(cfg.policy.length));
  std::vector<pipeline::SeriesSample> target_pool;
  if (target_fewshot) {
    target_pool = sample_pool(*target_fewshot, options);
    if (target_fewshot->size() > 0 && target_pool.empty())
      throw DataError("no few-shot target frame can anchor a series under the " + std::string(composer::to_string(options.policy.kind)) + " policy");
  }

  TrainResult result;
  for (const auto* pool : {&source_pool, static_cast<const decltype(source_pool)*>(&target_pool)})
    for (const auto& s : *pool) result.fallback_series += s.fell_back ? 1 : 0;

  net::Network network(net_config, cfg.seed);
  std::mt19937_64 rng(cfg.seed * 0x9E3779B97F4A7C15ULL + 1);
  BatchMixer mixer(true, !target_pool.empty(), cfg.target_ratio, cfg.target_only, cfg.seed + 0x5851F42D4C957F2DULL);
  AdamW optimizer(cfg.beta1, cfg.beta2, cfg.epsilon, cfg.weight_decay);
  EarlyStopping stopper(cfg.patience);
  const long total_steps = static_cast<long>(cfg.max_epochs) * cfg.steps_per_epoch;

  std::filesystem::path log_path;
  if (!hooks.out_dir.empty()) {
    std::filesystem::create_directories(hooks.out_dir);
    log_path = hooks.out_dir / "train_log.jsonl";
    std::filesystem::remove(log_path);
  }

  long global_step = 0;
  bool first = true;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    EpochLog log;
    log.epoch = epoch;
    double loss_sum = 0.0;
    for (int step = 0; step < cfg.steps_per_epoch; ++step, ++global_step) {
      network.zero_grad();
      for (int b = 0; b < cfg.batch_size; ++b) {
        const Domain d = mixer.next();
        const auto& pool = d == Domain::kTarget ? target_pool : source_pool;
        const Dataset& ds = d == Domain::kTarget ? *target_fewshot : source;
        (d == Domain::kTarget ? log.target_batches : log.source_batches) += 1;
        std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
        const auto& sample = pool[pick(rng)];
        net::LossResult loss;
        try {
          auto input = pipeline::series_tensor(ds, sample, cfg.rock_mask);
          auto labels = pipeline::series_labels(ds, sample);
          if (cfg.shift_augment_px > 0) {
            std::uniform_int_distribution<int> shift(-cfg.shift_augment_px, cfg.shift_augment_px);
            pipeline::shift_columns(input, labels, shift(rng));
          }
          const auto logits = network.forward(input);
          loss = net::cross_entropy(logits, labels, sample.retain, net_config.crop_fraction);
        } catch (const NumericalError& e) {
          throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(step) +
                               " (anchor " + ds.frames[sample.anchor].id + "): " + e.what());
        }
        if (first) {
          result.first_loss = loss.loss;
          first = false;
        }
        loss.grad.data /= static_cast<double>(cfg.batch_size);
        network.backward(loss.grad);
        loss_sum += loss.loss;
      }
      log.learning_rate = cosine_lr(cfg.learning_rate, global_step, total_steps);
      optimizer.step(network.parameters(), log.learning_rate);
    }
    log.train_loss = loss_sum / (static_cast<double>(cfg.steps_per_epoch) * cfg.batch_size);
    log.val_iou = hooks.validate ? hooks.validate(network, epoch)
                                 : pipeline::mean_class_iou(pipeline::predict_zones(network, val, options), val);
    log.best = stopper.update(epoch, log.val_iou);
    if (log.best) {
      result.best = network.to_checkpoint({epoch, log.val_iou, cfg.seed, rng_state(rng)});
      result.best_epoch = epoch;
      if (!hooks.out_dir.empty()) net::save_checkpoint(result.best, hooks.out_dir / "best.ckpt");
    }
    result.history.push_back(log);
    if (!log_path.empty()) {
      append_line(log_path, nlohmann::json{{"epoch", log.epoch},
                                           {"train_loss", log.train_loss},
                                           {"val_iou", log.val_iou},
                                           {"lr", log.learning_rate},
                                           {"source_batches", log.source_batches},
                                           {"target_batches", log.target_batches},
                                           {"best", log.best}}
                                .dump());
    }
    if (stopper.should_stop()) break;
  }
  result.sampler_log = mixer.log();
  return result;
}

EnsembleResult retrain_ensemble(const Dataset& source, const Dataset* target_fewshot, const Dataset& val,
                                const net::NetConfig& net_config, const TrainConfig& cfg, int n_members,
                                const TrainHooks& hooks) {
  if (n_members < 1) throw ValidationError("ensemble needs at least one member");
  EnsembleResult out;
  for (int i = 0; i < n_members; ++i) {
    TrainConfig member = cfg;
    member.seed = cfg.seed + static_cast<std::uint64_t>(i);
    TrainHooks h = hooks;
    if (!hooks.out_dir.empty()) h.out_dir = hooks.out_dir / ("member_" + std::to_string(i));
    try {
      out.members.push_back(train(source, target_fewshot, val, net_config, member, h));
    } catch (const std::exception& e) {
      out.failures.emplace_back(i, e.what());
    }
  }
  return out;
}

}  // namespace calfront::adapt
