#include "layers.hpp"

#include <cmath>
#include <cstring>

#include "calfront/errors.hpp"

namespace calfront::net::detail {

namespace {

void fill_normal(Eigen::MatrixXd& m, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, stddev);
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = normal(rng);
}

void fill_uniform(Eigen::MatrixXd& m, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-bound, bound);
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = u(rng);
}

Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& a) { return (1.0 / (1.0 + (-a.array()).exp())).matrix(); }

void check_channels(const Tensor& x, int expected, const char* layer) {
  if (x.channels != expected)
    throw ValidationError(std::string(layer) + ": expected " + std::to_string(expected) + " channels, got " +
                          std::to_string(x.channels));
}

}  // namespace

std::size_t add_parameter(ParamStore& store, std::string name, int rows, int cols) {
  store.push_back(Parameter{std::move(name), Eigen::MatrixXd::Zero(rows, cols), Eigen::MatrixXd::Zero(rows, cols)});
  return store.size() - 1;
}

Conv2d::Conv2d(ParamStore& store, const std::string& name, int in_channels, int out_channels, int kernel, int stride,
               std::mt19937_64& rng)
    : in_(in_channels), out_(out_channels), kernel_(kernel), stride_(stride) {
  weight_ = add_parameter(store, name + ".weight", out_, kernel_ * kernel_ * in_);
  bias_ = add_parameter(store, name + ".bias", out_, 1);
  fill_normal(store[weight_].value, std::sqrt(2.0 / (kernel_ * kernel_ * in_)), rng);
}

Tensor Conv2d::forward(const Tensor& x, const ParamStore& p) {
  check_channels(x, in_, "conv");
  const int pad = kernel_ / 2;
  frames_ = x.frames;
  in_h_ = x.height;
  in_w_ = x.width;
  out_h_ = (in_h_ + 2 * pad - kernel_) / stride_ + 1;
  out_w_ = (in_w_ + 2 * pad - kernel_) / stride_ + 1;
  if (kernel_ == 1 && stride_ == 1) {
    cols_ = x.data;
  } else {
    const int patch = kernel_ * kernel_ * in_;
    cols_.setZero(patch, static_cast<Eigen::Index>(frames_) * out_h_ * out_w_);
    const double* src = x.data.data();
    double* dst = cols_.data();
    for (int f = 0; f < frames_; ++f) {
      for (int oy = 0; oy < out_h_; ++oy) {
        for (int ox = 0; ox < out_w_; ++ox) {
          const std::size_t j = (static_cast<std::size_t>(f) * out_h_ + oy) * out_w_ + ox;
          for (int ky = 0; ky < kernel_; ++ky) {
            const int iy = oy * stride_ + ky - pad;
            if (iy < 0 || iy >= in_h_) continue;
            for (int kx = 0; kx < kernel_; ++kx) {
              const int ix = ox * stride_ + kx - pad;
              if (ix < 0 || ix >= in_w_) continue;
              const std::size_t in_col = (static_cast<std::size_t>(f) * in_h_ + iy) * in_w_ + ix;
              std::memcpy(dst + j * patch + static_cast<std::size_t>(ky * kernel_ + kx) * in_, src + in_col * in_,
                          sizeof(double) * static_cast<std::size_t>(in_));
            }
          }
        }
      }
    }
  }
  Tensor y;
  y.frames = frames_;
  y.channels = out_;
  y.height = out_h_;
  y.width = out_w_;
  y.data.noalias() = p[weight_].value * cols_;
  y.data.colwise() += p[bias_].value.col(0);
  return y;
}

Tensor Conv2d::backward(const Tensor& dy, ParamStore& p) {
  p[weight_].grad.noalias() += dy.data * cols_.transpose();
  p[bias_].grad += dy.data.rowwise().sum();
  Eigen::MatrixXd dcols = p[weight_].value.transpose() * dy.data;
  Tensor dx(frames_, in_, in_h_, in_w_);
  if (kernel_ == 1 && stride_ == 1) {
    dx.data = std::move(dcols);
    return dx;
  }
  const int pad = kernel_ / 2;
  const int patch = kernel_ * kernel_ * in_;
  const double* src = dcols.data();
  double* dst = dx.data.data();
  for (int f = 0; f < frames_; ++f) {
    for (int oy = 0; oy < out_h_; ++oy) {
      for (int ox = 0; ox < out_w_; ++ox) {
        const std::size_t j = (static_cast<std::size_t>(f) * out_h_ + oy) * out_w_ + ox;
        for (int ky = 0; ky < kernel_; ++ky) {
          const int iy = oy * stride_ + ky - pad;
          if (iy < 0 || iy >= in_h_) continue;
          for (int kx = 0; kx < kernel_; ++kx) {
            const int ix = ox * stride_ + kx - pad;
            if (ix < 0 || ix >= in_w_) continue;
            const std::size_t in_col = (static_cast<std::size_t>(f) * in_h_ + iy) * in_w_ + ix;
            const double* s = src + j * patch + static_cast<std::size_t>(ky * kernel_ + kx) * in_;
            double* d = dst + in_col * in_;
            for (int c = 0; c < in_; ++c) d[c] += s[c];
          }
        }
      }
    }
  }
  return dx;
}

Tensor relu(const Tensor& x) {
  Tensor y = x;
  y.data = x.data.cwiseMax(0.0);
  return y;
}

Tensor relu_backward(const Tensor& dy, const Tensor& activation) {
  Tensor dx = dy;
  dx.data = (activation.data.array() > 0.0).select(dy.data, 0.0);
  return dx;
}

Tensor upsample2x(const Tensor& x) {
  Tensor y(x.frames, x.channels, x.height * 2, x.width * 2);
  for (int f = 0; f < x.frames; ++f)
    for (int r = 0; r < y.height; ++r)
      for (int c = 0; c < y.width; ++c)
        y.data.col((f * y.height + r) * y.width + c) = x.data.col((f * x.height + r / 2) * x.width + c / 2);
  return y;
}

Tensor upsample2x_backward(const Tensor& dy) {
  Tensor dx(dy.frames, dy.channels, dy.height / 2, dy.width / 2);
  for (int f = 0; f < dy.frames; ++f)
    for (int r = 0; r < dy.height; ++r)
      for (int c = 0; c < dy.width; ++c)
        dx.data.col((f * dx.height + r / 2) * dx.width + c / 2) += dy.data.col((f * dy.height + r) * dy.width + c);
  return dx;
}

ResBlock::ResBlock(ParamStore& store, const std::string& name, int channels, std::mt19937_64& rng)
    : conv1_(store, name + ".conv1", channels, channels, 3, 1, rng), conv2_(store, name + ".conv2", channels, channels, 3, 1, rng) {
  // Start close to identity.
  store[conv2_.weight_index()].value *= 0.5;
}

Tensor ResBlock::forward(const Tensor& x, const ParamStore& p) {
  h1_ = relu(conv1_.forward(x, p));
  Tensor h2 = conv2_.forward(h1_, p);
  h2.data += x.data;
  out_ = relu(h2);
  return out_;
}

Tensor ResBlock::backward(const Tensor& dy, ParamStore& p) {
  const Tensor d = relu_backward(dy, out_);
  Tensor dh1 = relu_backward(conv2_.backward(d, p), h1_);
  Tensor dx = conv1_.backward(dh1, p);
  dx.data += d.data;
  return dx;
}

TemporalGru::TemporalGru(ParamStore& store, const std::string& name, int channels, int hidden, std::mt19937_64& rng)
    : channels_(channels), hidden_(hidden) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (auto* dir : {&fwd_, &bwd_}) {
    const std::string prefix = name + (dir == &fwd_ ? ".fwd" : ".bwd");
    dir->w_in = add_parameter(store, prefix + ".w_in", 3 * hidden, channels);
    dir->w_hid = add_parameter(store, prefix + ".w_hid", 3 * hidden, hidden);
    dir->b_in = add_parameter(store, prefix + ".b_in", 3 * hidden, 1);
    dir->b_hid = add_parameter(store, prefix + ".b_hid", 3 * hidden, 1);
    fill_uniform(store[dir->w_in].value, bound, rng);
    fill_uniform(store[dir->w_hid].value, bound, rng);
    fill_uniform(store[dir->b_in].value, bound, rng);
    fill_uniform(store[dir->b_hid].value, bound, rng);
  }
  proj_w_ = add_parameter(store, name + ".proj.weight", channels, 2 * hidden);
  proj_b_ = add_parameter(store, name + ".proj.bias", channels, 1);
  fill_normal(store[proj_w_].value, std::sqrt(1.0 / (2.0 * hidden)), rng);
}

void TemporalGru::run_direction(Direction& d, const Tensor& x, const ParamStore& p, bool reverse) {
  const int steps = x.frames;
  const int pix = x.pixels();
  const int H = hidden_;
  Eigen::MatrixXd gates_in = p[d.w_in].value * x.data;
  gates_in.colwise() += p[d.b_in].value.col(0);
  for (auto* v : {&d.h_prev, &d.z, &d.r, &d.n, &d.hn, &d.h}) v->assign(static_cast<std::size_t>(steps), Eigen::MatrixXd());
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(H, pix);
  const auto& w_hid = p[d.w_hid].value;
  const auto& b_hid = p[d.b_hid].value;
  for (int s = 0; s < steps; ++s) {
    const int t = reverse ? steps - 1 - s : s;
    const auto gi = gates_in.middleCols(static_cast<Eigen::Index>(t) * pix, pix);
    Eigen::MatrixXd gh = w_hid * h;
    gh.colwise() += b_hid.col(0);
    Eigen::MatrixXd z = sigmoid(gi.topRows(H) + gh.topRows(H));
    Eigen::MatrixXd r = sigmoid(gi.middleRows(H, H) + gh.middleRows(H, H));
    Eigen::MatrixXd hn = gh.bottomRows(H);
    Eigen::MatrixXd n = (gi.bottomRows(H).array() + r.array() * hn.array()).tanh().matrix();
    Eigen::MatrixXd h_new = ((1.0 - z.array()) * n.array() + z.array() * h.array()).matrix();
    const auto k = static_cast<std::size_t>(t);
    d.h_prev[k] = std::move(h);
    d.z[k] = std::move(z);
    d.r[k] = std::move(r);
    d.n[k] = std::move(n);
    d.hn[k] = std::move(hn);
    d.h[k] = h_new;
    h = std::move(h_new);
  }
}

Eigen::MatrixXd TemporalGru::backprop_direction(Direction& d, const std::vector<Eigen::MatrixXd>& dh_out, const Tensor& x,
                                                ParamStore& p, bool reverse) {
  const int steps = x.frames;
  const int pix = x.pixels();
  const int H = hidden_;
  Eigen::MatrixXd d_gates_in(3 * H, static_cast<Eigen::Index>(steps) * pix);
  Eigen::MatrixXd dh_next = Eigen::MatrixXd::Zero(H, pix);
  Eigen::MatrixXd d_gh(3 * H, pix);
  const auto& w_hid = p[d.w_hid].value;
  for (int s = steps - 1; s >= 0; --s) {
    const int t = reverse ? steps - 1 - s : s;
    const auto k = static_cast<std::size_t>(t);
    const auto& z = d.z[k].array();
    const auto& r = d.r[k].array();
    const auto& n = d.n[k].array();
    const Eigen::ArrayXXd dh = (dh_out[k] + dh_next).array();
    const Eigen::ArrayXXd da_n = dh * (1.0 - z) * (1.0 - n * n);
    const Eigen::ArrayXXd da_z = dh * (d.h_prev[k].array() - n) * z * (1.0 - z);
    const Eigen::ArrayXXd da_r = da_n * d.hn[k].array() * r * (1.0 - r);
    d_gh.topRows(H) = da_z.matrix();
    d_gh.middleRows(H, H) = da_r.matrix();
    d_gh.bottomRows(H) = (da_n * r).matrix();
    auto dgi = d_gates_in.middleCols(static_cast<Eigen::Index>(t) * pix, pix);
    dgi.topRows(H) = da_z.matrix();
    dgi.middleRows(H, H) = da_r.matrix();
    dgi.bottomRows(H) = da_n.matrix();
    p[d.w_hid].grad.noalias() += d_gh * d.h_prev[k].transpose();
    p[d.b_hid].grad += d_gh.rowwise().sum();
    dh_next = (dh * z).matrix();
    dh_next.noalias() += w_hid.transpose() * d_gh;
  }
  p[d.w_in].grad.noalias() += d_gates_in * x.data.transpose();
  p[d.b_in].grad += d_gates_in.rowwise().sum();
  return p[d.w_in].value.transpose() * d_gates_in;
}

Tensor TemporalGru::forward(const Tensor& x, const ParamStore& p, bool enabled) {
  check_channels(x, channels_, "temporal gru");
  enabled_ = enabled;
  if (!enabled) return x;
  input_ = x;
  run_direction(fwd_, x, p, false);
  run_direction(bwd_, x, p, true);
  const int pix = x.pixels();
  concat_.resize(2 * hidden_, static_cast<Eigen::Index>(x.frames) * pix);
  for (int t = 0; t < x.frames; ++t) {
    const auto k = static_cast<std::size_t>(t);
    concat_.block(0, static_cast<Eigen::Index>(t) * pix, hidden_, pix) = fwd_.h[k];
    concat_.block(hidden_, static_cast<Eigen::Index>(t) * pix, hidden_, pix) = bwd_.h[k];
  }
  Tensor y = x;
  y.data.noalias() += p[proj_w_].value * concat_;
  y.data.colwise() += p[proj_b_].value.col(0);
  return y;
}

Tensor TemporalGru::backward(const Tensor& dy, ParamStore& p) {
  if (!enabled_) return dy;
  p[proj_w_].grad.noalias() += dy.data * concat_.transpose();
  p[proj_b_].grad += dy.data.rowwise().sum();
  const Eigen::MatrixXd d_concat = p[proj_w_].value.transpose() * dy.data;
  const int pix = input_.pixels();
  std::vector<Eigen::MatrixXd> dh_f(static_cast<std::size_t>(input_.frames));
  std::vector<Eigen::MatrixXd> dh_b(static_cast<std::size_t>(input_.frames));
  for (int t = 0; t < input_.frames; ++t) {
    dh_f[static_cast<std::size_t>(t)] = d_concat.block(0, static_cast<Eigen::Index>(t) * pix, hidden_, pix);
    dh_b[static_cast<std::size_t>(t)] = d_concat.block(hidden_, static_cast<Eigen::Index>(t) * pix, hidden_, pix);
  }
  Tensor dx = dy;
  dx.data += backprop_direction(fwd_, dh_f, input_, p, false);
  dx.data += backprop_direction(bwd_, dh_b, input_, p, true);
  return dx;
}

TemporalConv::TemporalConv(ParamStore& store, const std::string& name, int channels, std::mt19937_64& rng)
    : channels_(channels) {
  weight_ = add_parameter(store, name + ".weight", channels, 3 * channels);
  bias_ = add_parameter(store, name + ".bias", channels, 1);
  fill_normal(store[weight_].value, 0.5 * std::sqrt(1.0 / (3.0 * channels)), rng);
}

Tensor TemporalConv::forward(const Tensor& x, const ParamStore& p, bool enabled) {
  check_channels(x, channels_, "temporal conv");
  enabled_ = enabled;
  if (!enabled) return x;
  frames_ = x.frames;
  pixels_ = x.pixels();
  const int C = channels_;
  stacked_.setZero(3 * C, x.data.cols());
  for (int t = 0; t < frames_; ++t) {
    const Eigen::Index col = static_cast<Eigen::Index>(t) * pixels_;
    if (t > 0) stacked_.block(0, col, C, pixels_) = x.data.middleCols(col - pixels_, pixels_);
    stacked_.block(C, col, C, pixels_) = x.data.middleCols(col, pixels_);
    if (t + 1 < frames_) stacked_.block(2 * C, col, C, pixels_) = x.data.middleCols(col + pixels_, pixels_);
  }
  Tensor y = x;
  y.data.noalias() += p[weight_].value * stacked_;
  y.data.colwise() += p[bias_].value.col(0);
  return y;
}

Tensor TemporalConv::backward(const Tensor& dy, ParamStore& p) {
  if (!enabled_) return dy;
  p[weight_].grad.noalias() += dy.data * stacked_.transpose();
  p[bias_].grad += dy.data.rowwise().sum();
  const Eigen::MatrixXd ds = p[weight_].value.transpose() * dy.data;
  const int C = channels_;
  Tensor dx = dy;
  for (int t = 0; t < frames_; ++t) {
    const Eigen::Index col = static_cast<Eigen::Index>(t) * pixels_;
    dx.data.middleCols(col, pixels_) += ds.block(C, col, C, pixels_);
    // x_t feeds frame t+1 as its "previous" input and frame t-1 as its "next" input.
    if (t + 1 < frames_) dx.data.middleCols(col, pixels_) += ds.block(0, col + pixels_, C, pixels_);
    if (t > 0) dx.data.middleCols(col, pixels_) += ds.block(2 * C, col - pixels_, C, pixels_);
  }
  return dx;
}

}  // namespace calfront::net::detail
