#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <nlohmann/json_fwd.hpp>
#include <random>
#include <string>
#include <vector>

#include "calfront/datamodel.hpp"

namespace calfront::net {

inline constexpr int kStages = 4;

struct NetConfig {
  int height = 128;
  int width = 128;
  int series_length = 8;
  int in_channels = 1;  // 1: intensity, 2: intensity + rock mask (also fed to the head)
  std::array<int, kStages + 1> widths{8, 12, 16, 24, 32};  // stem, then one per encoder stage
  std::array<int, 3> gru_hidden{8, 12, 16};     // temporal units after encoder stages 2, 3, 4
  int classes = kZoneCount;
  double crop_fraction = 0.5;                   // retained central fraction per side
  bool temporal = true;                         // false replaces every temporal unit by identity

  void validate() const;
  bool operator==(const NetConfig&) const = default;
};

void to_json(nlohmann::json& j, const NetConfig& c);
void from_json(const nlohmann::json& j, NetConfig& c);

/// Frames x channels x H x W stored as a (channels, frames*H*W) matrix. Column index is
/// (frame*H + row)*W + col, so each pixel's channel vector is contiguous.
struct Tensor {
  int frames = 0;
  int channels = 0;
  int height = 0;
  int width = 0;
  Eigen::MatrixXd data;

  Tensor() = default;
  Tensor(int f, int c, int h, int w) : frames(f), channels(c), height(h), width(w), data(Eigen::MatrixXd::Zero(c, f * h * w)) {}

  int pixels() const { return height * width; }
  double& at(int f, int c, int r, int col) { return data(c, (f * height + r) * width + col); }
  double at(int f, int c, int r, int col) const { return data(c, (f * height + r) * width + col); }
  bool same_shape(const Tensor& o) const {
    return frames == o.frames && channels == o.channels && height == o.height && width == o.width;
  }
};

/// Central crop window for one axis: [offset, offset + size).
struct CropWindow {
  int row0 = 0;
  int col0 = 0;
  int height = 0;
  int width = 0;
};

/// size = ceil(extent * fraction); odd margins leave the extra pixel below the window (offset rounds down).
CropWindow central_crop(int height, int width, double fraction);

/// L x K x h x w centre crop of per-frame logits.
Tensor retain_central(const Tensor& logits, double fraction);

/// Adds the mask as channel 2 of every time step.
Tensor attach_rock_channel(const Tensor& series, const Grid<std::uint8_t>& mask);
/// Drops every channel after the first.
Tensor strip_rock_channel(const Tensor& series);

struct Parameter {
  std::string name;
  Eigen::MatrixXd value;
  Eigen::MatrixXd grad;
};

struct TrainingMeta {
  int epoch = 0;
  double best_val_iou = 0.0;
  std::uint64_t seed = 0;
  std::string rng_state;
};

/// Serialized network: config, named tensors and training metadata.
struct Checkpoint {
  NetConfig config;
  std::vector<std::pair<std::string, Eigen::MatrixXd>> tensors;
  TrainingMeta meta;
};

/// Binary archive: "CALFRONTCKPT1\n", 8-byte header length, JSON header (config, meta, tensor index),
/// then the tensors as little-endian float64 in column-major order. Written atomically.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

class Network {
 public:
  /// He-style fan-in initialisation from `seed`.
  Network(const NetConfig& config, std::uint64_t seed);
  explicit Network(const Checkpoint& checkpoint);
  ~Network();
  Network(Network&&) noexcept;
  Network& operator=(Network&&) noexcept;
  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;

  const NetConfig& config() const { return config_; }

  /// L x C x H x W input to L x K x H x W logits. Throws ValidationError naming the offending dimension.
  Tensor forward(const Tensor& series);

  /// Backpropagates d(loss)/d(logits) of the most recent forward call, accumulating into Parameter::grad.
  void backward(const Tensor& grad_logits);

  void zero_grad();
  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  std::size_t parameter_count() const;

  /// Zeroes the classifier weights and bias.
  void zero_classifier();

  Checkpoint to_checkpoint(const TrainingMeta& meta = {}) const;

  struct Layers;

 private:
  NetConfig config_;
  std::vector<Parameter> params_;
  std::unique_ptr<Layers> layers_;
};

struct LossResult {
  double loss = 0.0;
  Tensor grad;  // d(loss)/d(logits)
  std::size_t pixels = 0;
};

/// Mean pixelwise softmax cross-entropy over the retained crop of frames with `retain[t]` set.
/// `labels[t]` must match the full H x W grid; NA is a regular class.
LossResult cross_entropy(const Tensor& logits, const std::vector<ZoneMap>& labels, const std::vector<bool>& retain,
                         double crop_fraction);

/// Argmax class per pixel of one frame.
ZoneMap argmax_zones(const Tensor& logits, int frame);

/// Softmax probabilities of one frame/pixel.
std::array<double, kZoneCount> softmax_at(const Tensor& logits, int frame, int row, int col);

}  // namespace calfront::net
