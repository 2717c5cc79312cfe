#pragma once

// Building blocks of the network. Each layer caches what its backward pass needs from the
// most recent forward call; parameters live in a shared store and are addressed by index.

#include <Eigen/Core>
#include <random>
#include <string>
#include <vector>

#include "calfront/net.hpp"

namespace calfront::net::detail {

using ParamStore = std::vector<Parameter>;

std::size_t add_parameter(ParamStore& store, std::string name, int rows, int cols);

/// k x k convolution with zero padding k/2, optional stride 2.
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(ParamStore& store, const std::string& name, int in_channels, int out_channels, int kernel, int stride,
         std::mt19937_64& rng);

  Tensor forward(const Tensor& x, const ParamStore& p);
  Tensor backward(const Tensor& dy, ParamStore& p);

  std::size_t weight_index() const { return weight_; }
  std::size_t bias_index() const { return bias_; }

 private:
  int in_ = 0;
  int out_ = 0;
  int kernel_ = 1;
  int stride_ = 1;
  std::size_t weight_ = 0;
  std::size_t bias_ = 0;
  Eigen::MatrixXd cols_;
  int frames_ = 0;
  int in_h_ = 0;
  int in_w_ = 0;
  int out_h_ = 0;
  int out_w_ = 0;
};

Tensor relu(const Tensor& x);
/// dy masked by x > 0 (x is the ReLU output or input; both share the support).
Tensor relu_backward(const Tensor& dy, const Tensor& activation);

Tensor upsample2x(const Tensor& x);
Tensor upsample2x_backward(const Tensor& dy);

/// Two 3x3 convolutions with a residual connection: relu(x + conv2(relu(conv1(x)))).
class ResBlock {
 public:
  ResBlock() = default;
  ResBlock(ParamStore& store, const std::string& name, int channels, std::mt19937_64& rng);
  Tensor forward(const Tensor& x, const ParamStore& p);
  Tensor backward(const Tensor& dy, ParamStore& p);

 private:
  Conv2d conv1_;
  Conv2d conv2_;
  Tensor h1_;
  Tensor out_;
};

/// Bidirectional GRU over the time axis at every spatial location; forward and backward hidden
/// states are concatenated, projected to the input width and added to the input.
class TemporalGru {
 public:
  TemporalGru() = default;
  TemporalGru(ParamStore& store, const std::string& name, int channels, int hidden, std::mt19937_64& rng);
  Tensor forward(const Tensor& x, const ParamStore& p, bool enabled);
  Tensor backward(const Tensor& dy, ParamStore& p);

 private:
  struct Direction {
    std::size_t w_in = 0;    // (3H, C) input weights for z, r, n
    std::size_t w_hid = 0;   // (3H, H) recurrent weights
    std::size_t b_in = 0;    // (3H, 1)
    std::size_t b_hid = 0;   // (3H, 1)
    // Per time step caches (H x P each).
    std::vector<Eigen::MatrixXd> h_prev, z, r, n, hn;
    std::vector<Eigen::MatrixXd> h;
  };

  void run_direction(Direction& d, const Tensor& x, const ParamStore& p, bool reverse);
  Eigen::MatrixXd backprop_direction(Direction& d, const std::vector<Eigen::MatrixXd>& dh_out, const Tensor& x,
                                     ParamStore& p, bool reverse);

  int channels_ = 0;
  int hidden_ = 0;
  Direction fwd_;
  Direction bwd_;
  std::size_t proj_w_ = 0;  // (C, 2H)
  std::size_t proj_b_ = 0;  // (C, 1)
  bool enabled_ = true;
  Tensor input_;
  Eigen::MatrixXd concat_;  // (2H, L*P)
};

/// Kernel-3 convolution along time with zero padding, mixing channels, added to the input.
class TemporalConv {
 public:
  TemporalConv() = default;
  TemporalConv(ParamStore& store, const std::string& name, int channels, std::mt19937_64& rng);
  Tensor forward(const Tensor& x, const ParamStore& p, bool enabled);
  Tensor backward(const Tensor& dy, ParamStore& p);

 private:
  int channels_ = 0;
  std::size_t weight_ = 0;  // (C, 3C): [t-1 | t | t+1]
  std::size_t bias_ = 0;
  bool enabled_ = true;
  Eigen::MatrixXd stacked_;
  int frames_ = 0;
  int pixels_ = 0;
};

}  // namespace calfront::net::detail
