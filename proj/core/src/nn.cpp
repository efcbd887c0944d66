#include "echogcn/nn.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "echogcn/error.hpp"
#include "echogcn/phantom.hpp"

namespace echogcn {

namespace {

constexpr const char* kModule = "nn";

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using Map = Eigen::Map<RowMat<T>>;
template <class T>
using CMap = Eigen::Map<const RowMat<T>>;

template <class T>
void he_uniform(AlignedVector<T>& w, int fan_in, Rng& rng, double gain) {
  const double bound = gain * std::sqrt(6.0 / fan_in);
  for (T& v : w) v = static_cast<T>(rng.uniform(-bound, bound));
}

}  // namespace

std::size_t shape_size(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw Error(Errc::ShapeMismatch, kModule, "negative dimension");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

template <class T>
Tensor<T>::Tensor(std::vector<int> s, T fill) : shape(std::move(s)), data(shape_size(shape), fill) {}

template <class T>
T activate(Activation a, T x) {
  switch (a) {
    case Activation::Relu: return x > T(0) ? x : T(0);
    case Activation::LeakyRelu: return x > T(0) ? x : static_cast<T>(kLeakySlope) * x;
    case Activation::None: break;
  }
  return x;
}

template <class T>
T activate_grad(Activation a, T pre) {
  switch (a) {
    case Activation::Relu: return pre > T(0) ? T(1) : T(0);
    case Activation::LeakyRelu: return pre > T(0) ? T(1) : static_cast<T>(kLeakySlope);
    case Activation::None: break;
  }
  return T(1);
}

// ---- Conv2d ----

template <class T>
Conv2d<T>::Conv2d(int in_channels, int out_channels, int stride, bool relu, int kernel)
    : cin_(in_channels), cout_(out_channels), stride_(stride), k_(kernel), relu_(relu) {
  if (cin_ < 1 || cout_ < 1 || stride_ < 1 || k_ < 1 || k_ % 2 == 0) {
    throw Error(Errc::ConfigError, kModule, "bad convolution geometry");
  }
  const std::size_t nw = static_cast<std::size_t>(cout_) * cin_ * k_ * k_;
  weight.assign(nw, T(0));
  grad_weight.assign(nw, T(0));
  bias.assign(cout_, T(0));
  grad_bias.assign(cout_, T(0));
}

template <class T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x, bool train) {
  if (x.shape.size() != 4 || x.shape[0] != cin_) {
    throw Error(Errc::ShapeMismatch, kModule, "conv input must be [" + std::to_string(cin_) + ", B, H, W]");
  }
  batch_ = x.shape[1];
  h_ = x.shape[2];
  w_ = x.shape[3];
  const int pad = k_ / 2;
  oh_ = (h_ + 2 * pad - k_) / stride_ + 1;
  ow_ = (w_ + 2 * pad - k_) / stride_ + 1;
  const int kk = cin_ * k_ * k_;
  const std::size_t plane = static_cast<std::size_t>(oh_) * ow_;
  const std::size_t n = static_cast<std::size_t>(batch_) * plane;

  AlignedVector<T> local;
  AlignedVector<T>& col = train ? col_ : local;
  col.assign(static_cast<std::size_t>(kk) * n, T(0));
  for (int c = 0; c < cin_; ++c) {
    for (int ky = 0; ky < k_; ++ky) {
      for (int kx = 0; kx < k_; ++kx) {
        T* row = col.data() + static_cast<std::size_t>((c * k_ + ky) * k_ + kx) * n;
        for (int b = 0; b < batch_; ++b) {
          const T* src = x.data.data() + (static_cast<std::size_t>(c) * batch_ + b) * h_ * w_;
          T* dst = row + b * plane;
          for (int oy = 0; oy < oh_; ++oy) {
            const int iy = oy * stride_ + ky - pad;
            if (iy < 0 || iy >= h_) continue;
            for (int ox = 0; ox < ow_; ++ox) {
              const int ix = ox * stride_ + kx - pad;
              if (ix >= 0 && ix < w_) dst[oy * ow_ + ox] = src[iy * w_ + ix];
            }
          }
        }
      }
    }
  }

  Tensor<T> y({cout_, batch_, oh_, ow_});
  Map<T> ym(y.data.data(), cout_, static_cast<Eigen::Index>(n));
  ym.noalias() = CMap<T>(weight.data(), cout_, kk) * CMap<T>(col.data(), kk, static_cast<Eigen::Index>(n));
  for (int o = 0; o < cout_; ++o) {
    T* r = y.data.data() + o * n;
    const T bo = bias[o];
    if (relu_) {
      for (std::size_t i = 0; i < n; ++i) r[i] = std::max(r[i] + bo, T(0));
    } else {
      for (std::size_t i = 0; i < n; ++i) r[i] += bo;
    }
  }
  if (train) out_ = y;
  return y;
}

template <class T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& dy_in, bool need_input_grad) {
  const std::size_t plane = static_cast<std::size_t>(oh_) * ow_;
  const std::size_t n = static_cast<std::size_t>(batch_) * plane;
  if (dy_in.size() != static_cast<std::size_t>(cout_) * n || col_.empty()) {
    throw Error(Errc::ShapeMismatch, kModule, "conv backward without a matching training forward");
  }
  const int kk = cin_ * k_ * k_;
  AlignedVector<T> dy = dy_in.data;
  if (relu_) {
    for (std::size_t i = 0; i < dy.size(); ++i) {
      if (!(out_.data[i] > T(0))) dy[i] = T(0);
    }
  }
  CMap<T> dym(dy.data(), cout_, static_cast<Eigen::Index>(n));
  CMap<T> colm(col_.data(), kk, static_cast<Eigen::Index>(n));
  Map<T>(grad_weight.data(), cout_, kk).noalias() += dym * colm.transpose();
  for (int o = 0; o < cout_; ++o) {
    T s = T(0);
    const T* r = dy.data() + o * n;
    for (std::size_t i = 0; i < n; ++i) s += r[i];
    grad_bias[o] += s;
  }
  if (!need_input_grad) return {};

  RowMat<T> dcol = CMap<T>(weight.data(), cout_, kk).transpose() * dym;
  Tensor<T> dx({cin_, batch_, h_, w_});
  const int pad = k_ / 2;
  for (int c = 0; c < cin_; ++c) {
    for (int ky = 0; ky < k_; ++ky) {
      for (int kx = 0; kx < k_; ++kx) {
        const T* row = dcol.data() + static_cast<std::size_t>((c * k_ + ky) * k_ + kx) * n;
        for (int b = 0; b < batch_; ++b) {
          T* dst = dx.data.data() + (static_cast<std::size_t>(c) * batch_ + b) * h_ * w_;
          const T* src = row + b * plane;
          for (int oy = 0; oy < oh_; ++oy) {
            const int iy = oy * stride_ + ky - pad;
            if (iy < 0 || iy >= h_) continue;
            for (int ox = 0; ox < ow_; ++ox) {
              const int ix = ox * stride_ + kx - pad;
              if (ix >= 0 && ix < w_) dst[iy * w_ + ix] += src[oy * ow_ + ox];
            }
          }
        }
      }
    }
  }
  return dx;
}

template <class T>
void Conv2d<T>::init(Rng& rng) {
  he_uniform(weight, cin_ * k_ * k_, rng, 1.0);
  std::fill(bias.begin(), bias.end(), T(0));
}

template <class T>
std::vector<ParamRef<T>> Conv2d<T>::params(const std::string& prefix) {
  return {{prefix + ".weight", {cout_, cin_, k_, k_}, weight.data(), grad_weight.data(), weight.size()},
          {prefix + ".bias", {cout_}, bias.data(), grad_bias.data(), bias.size()}};
}

// ---- Dense ----

template <class T>
Dense<T>::Dense(int in, int out, Activation act) : in_(in), out_(out), act_(act) {
  if (in_ < 1 || out_ < 0) throw Error(Errc::ConfigError, kModule, "bad dense geometry");
  weight.assign(static_cast<std::size_t>(in_) * out_, T(0));
  grad_weight.assign(weight.size(), T(0));
  bias.assign(out_, T(0));
  grad_bias.assign(out_, T(0));
}

template <class T>
Tensor<T> Dense<T>::forward(const Tensor<T>& x, bool train) {
  if (x.shape.size() != 2 || x.shape[0] != in_) {
    throw Error(Errc::ShapeMismatch, kModule, "dense input must be [" + std::to_string(in_) + ", B]");
  }
  const int b = x.shape[1];
  Tensor<T> y({out_, b});
  Map<T> ym(y.data.data(), out_, b);
  ym.noalias() = CMap<T>(weight.data(), out_, in_) * CMap<T>(x.data.data(), in_, b);
  for (int o = 0; o < out_; ++o) {
    for (int j = 0; j < b; ++j) ym(o, j) += bias[o];
  }
  if (train) {
    x_ = x;
    pre_ = y;
  }
  if (act_ != Activation::None) {
    for (T& v : y.data) v = activate(act_, v);
  }
  return y;
}

template <class T>
Tensor<T> Dense<T>::backward(const Tensor<T>& dy) {
  if (dy.shape != pre_.shape) throw Error(Errc::ShapeMismatch, kModule, "dense backward shape");
  const int b = dy.shape[1];
  AlignedVector<T> d = dy.data;
  if (act_ != Activation::None) {
    for (std::size_t i = 0; i < d.size(); ++i) d[i] *= activate_grad(act_, pre_.data[i]);
  }
  CMap<T> dm(d.data(), out_, b);
  Map<T>(grad_weight.data(), out_, in_).noalias() += dm * CMap<T>(x_.data.data(), in_, b).transpose();
  for (int o = 0; o < out_; ++o) grad_bias[o] += dm.row(o).sum();
  Tensor<T> dx({in_, b});
  Map<T>(dx.data.data(), in_, b).noalias() = CMap<T>(weight.data(), out_, in_).transpose() * dm;
  return dx;
}

template <class T>
void Dense<T>::init(Rng& rng, double gain) {
  he_uniform(weight, in_, rng, gain);
  std::fill(bias.begin(), bias.end(), T(0));
}

template <class T>
std::vector<ParamRef<T>> Dense<T>::params(const std::string& prefix) {
  return {{prefix + ".weight", {out_, in_}, weight.data(), grad_weight.data(), weight.size()},
          {prefix + ".bias", {out_}, bias.data(), grad_bias.data(), bias.size()}};
}

// ---- pooling ----

template <class T>
Tensor<T> global_average_pool(const Tensor<T>& x) {
  if (x.shape.size() != 4) throw Error(Errc::ShapeMismatch, kModule, "pool input must be [C, B, H, W]");
  const int c = x.shape[0], b = x.shape[1];
  const std::size_t plane = static_cast<std::size_t>(x.shape[2]) * x.shape[3];
  Tensor<T> y({c, b});
  for (int i = 0; i < c * b; ++i) {
    const T* p = x.data.data() + i * plane;
    T s = T(0);
    for (std::size_t k = 0; k < plane; ++k) s += p[k];
    y.data[i] = s / static_cast<T>(plane);
  }
  return y;
}

template <class T>
Tensor<T> global_average_pool_backward(const Tensor<T>& dy, int h, int w) {
  const int c = dy.shape.at(0), b = dy.shape.at(1);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  Tensor<T> dx({c, b, h, w});
  for (int i = 0; i < c * b; ++i) {
    const T g = dy.data[i] / static_cast<T>(plane);
    std::fill_n(dx.data.data() + i * plane, plane, g);
  }
  return dx;
}

// ---- Encoder ----

void EncoderConfig::validate() const {
  if (blocks.empty()) throw Error(Errc::ConfigError, kModule, "encoder needs at least one block");
  for (const EncoderBlock& b : blocks) {
    if (b.out_channels < 1) throw Error(Errc::ConfigError, kModule, "encoder channels must be >= 1");
    if (b.stride != 1 && b.stride != 2) throw Error(Errc::ConfigError, kModule, "encoder stride must be 1 or 2");
  }
  if (embedding < 8) throw Error(Errc::ConfigError, kModule, "embedding must be >= 8");
  if (input_size < 1) throw Error(Errc::ConfigError, kModule, "input_size must be >= 1");
}

EncoderConfig EncoderConfig::reduced() {
  EncoderConfig c;
  c.blocks = {{4, 2}, {8, 2}, {8, 2}};
  c.embedding = 16;
  c.input_size = 32;
  return c;
}

template <class T>
Encoder<T>::Encoder(const EncoderConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  int cin = cfg_.coord_channels ? 3 : 1;
  for (const EncoderBlock& b : cfg_.blocks) {
    convs.emplace_back(cin, b.out_channels, b.stride, true);
    cin = b.out_channels;
  }
  fc = Dense<T>(cin, cfg_.embedding, Activation::Relu);
}

template <class T>
Tensor<T> Encoder<T>::forward(const Tensor<T>& x, bool train) {
  if (x.shape.size() != 4 || x.shape[0] != 1 || x.shape[2] != cfg_.input_size || x.shape[3] != cfg_.input_size) {
    throw Error(Errc::ShapeMismatch, kModule,
                "encoder input must be [1, B, " + std::to_string(cfg_.input_size) + ", " +
                    std::to_string(cfg_.input_size) + "]");
  }
  Tensor<T> a;
  if (cfg_.coord_channels) {
    const int b = x.shape[1], s = cfg_.input_size;
    const std::size_t plane = static_cast<std::size_t>(s) * s;
    Tensor<T> xc({3, b, s, s});
    std::copy(x.data.begin(), x.data.end(), xc.data.begin());
    for (int i = 0; i < b; ++i) {
      T* cx = xc.data.data() + (static_cast<std::size_t>(b) + i) * plane;
      T* cy = xc.data.data() + (2 * static_cast<std::size_t>(b) + i) * plane;
      for (int r = 0; r < s; ++r) {
        for (int c = 0; c < s; ++c) {
          cx[static_cast<std::size_t>(r) * s + c] = static_cast<T>((2.0 * c + 1.0) / s - 1.0);
          cy[static_cast<std::size_t>(r) * s + c] = static_cast<T>((2.0 * r + 1.0) / s - 1.0);
        }
      }
    }
    a = convs.front().forward(xc, train);
  } else {
    a = convs.front().forward(x, train);
  }
  for (std::size_t i = 1; i < convs.size(); ++i) a = convs[i].forward(a, train);
  last_h_ = a.shape[2];
  last_w_ = a.shape[3];
  return fc.forward(global_average_pool(a), train);
}

template <class T>
Tensor<T> Encoder<T>::backward(const Tensor<T>& dy, bool need_input_grad) {
  Tensor<T> g = global_average_pool_backward(fc.backward(dy), last_h_, last_w_);
  for (std::size_t i = convs.size(); i-- > 1;) g = convs[i].backward(g, true);
  Tensor<T> dx = convs.front().backward(g, need_input_grad);
  if (!need_input_grad || !cfg_.coord_channels) return dx;
  // Only the image channel is an input.
  Tensor<T> out({1, dx.shape[1], dx.shape[2], dx.shape[3]});
  std::copy(dx.data.begin(), dx.data.begin() + static_cast<std::ptrdiff_t>(out.size()), out.data.begin());
  return out;
}

template <class T>
void Encoder<T>::init(Rng& rng) {
  for (Conv2d<T>& c : convs) c.init(rng);
  fc.init(rng);
}

template <class T>
std::vector<ParamRef<T>> Encoder<T>::params() {
  std::vector<ParamRef<T>> out;
  for (std::size_t i = 0; i < convs.size(); ++i) {
    auto p = convs[i].params("encoder.conv" + std::to_string(i));
    out.insert(out.end(), p.begin(), p.end());
  }
  auto p = fc.params("encoder.fc");
  out.insert(out.end(), p.begin(), p.end());
  return out;
}

// ---- Adam ----

void AdamConfig::validate() const {
  if (!(learning_rate > 0.0)) throw Error(Errc::ConfigError, kModule, "learning_rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw Error(Errc::ConfigError, kModule, "betas must lie in [0, 1)");
  }
  if (!(eps_hat > 0.0)) throw Error(Errc::ConfigError, kModule, "eps_hat must be positive");
}

template <class T>
void adam_step(std::vector<ParamRef<T>>& params, AdamState<T>& st, const AdamConfig& cfg) {
  if (st.m.size() != params.size()) {
    st.m.assign(params.size(), {});
    st.v.assign(params.size(), {});
    for (std::size_t i = 0; i < params.size(); ++i) {
      st.m[i].assign(params[i].size, T(0));
      st.v[i].assign(params[i].size, T(0));
    }
    st.step = 0;
  }
  ++st.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.step));
  const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
  const T lr = static_cast<T>(cfg.learning_rate), eps = static_cast<T>(cfg.eps_hat);
  const T ic1 = static_cast<T>(1.0 / c1), ic2 = static_cast<T>(1.0 / c2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    ParamRef<T>& p = params[i];
    T* m = st.m[i].data();
    T* v = st.v[i].data();
    for (std::size_t k = 0; k < p.size; ++k) {
      const T g = p.grad[k];
      m[k] = b1 * m[k] + (T(1) - b1) * g;
      v[k] = b2 * v[k] + (T(1) - b2) * g * g;
      p.value[k] -= lr * (m[k] * ic1) / (std::sqrt(v[k] * ic2) + eps);
    }
  }
}

template <class T>
void zero_grads(std::vector<ParamRef<T>>& params) {
  for (ParamRef<T>& p : params) std::fill_n(p.grad, p.size, T(0));
}

template <class T>
std::size_t parameter_count(const std::vector<ParamRef<T>>& params) {
  std::size_t n = 0;
  for (const ParamRef<T>& p : params) n += p.size;
  return n;
}

#define ECHOGCN_NN_INSTANTIATE(T)                                                              \
  template struct Tensor<T>;                                                                   \
  template T activate<T>(Activation, T);                                                       \
  template T activate_grad<T>(Activation, T);                                                  \
  template class Conv2d<T>;                                                                    \
  template class Dense<T>;                                                                     \
  template Tensor<T> global_average_pool<T>(const Tensor<T>&);                                 \
  template Tensor<T> global_average_pool_backward<T>(const Tensor<T>&, int, int);              \
  template class Encoder<T>;                                                                   \
  template void adam_step<T>(std::vector<ParamRef<T>>&, AdamState<T>&, const AdamConfig&);    \
  template void zero_grads<T>(std::vector<ParamRef<T>>&);                                      \
  template std::size_t parameter_count<T>(const std::vector<ParamRef<T>>&);

ECHOGCN_NN_INSTANTIATE(float)
ECHOGCN_NN_INSTANTIATE(double)

}  // namespace echogcn
