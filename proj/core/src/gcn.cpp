#include "echogcn/gcn.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <nlohmann/json.hpp>

#include "echogcn/error.hpp"
#include "echogcn/raster.hpp"

namespace echogcn {

namespace {

constexpr const char* kModule = "gcn";

// Head initialization: points start near the image center, displacement near
// softplus(-3.2) ~ 0.04 of the image side.
constexpr double kHeadGain = 0.1;
constexpr double kCoordBias = 0.5;
constexpr double kDispBias = -3.2;

int wrap(int i, int n) { return ((i % n) + n) % n; }

template <class T>
T sigmoid(T z) {
  return z >= T(0) ? T(1) / (T(1) + std::exp(-z)) : std::exp(z) / (T(1) + std::exp(z));
}

template <class T>
T softplus_t(T z) {
  return z > T(20) ? z : std::log1p(std::exp(z));
}

void check_target(const RingTopology& topo, const KeypointSet& k) {
  if (static_cast<int>(k.endo.size()) != topo.ring_count() || static_cast<int>(k.epi.size()) != topo.ring_count() ||
      static_cast<int>(k.la.size()) != topo.la_count()) {
    throw Error(Errc::LayoutMismatch, kModule, "keypoint counts do not match the ring topology");
  }
}

// Outward normals as in outward_normal(), with their inputs for backprop.
// The orientation sign is treated as locally constant.
template <class T>
struct NormalTape {
  std::vector<std::array<T, 2>> n;
  std::vector<std::array<T, 2>> t;  // next - prev
  std::vector<T> len;
  std::vector<T> sign;
};

template <class T>
NormalTape<T> normals(const std::vector<std::array<T, 2>>& e) {
  const int r = static_cast<int>(e.size());
  NormalTape<T> tape;
  tape.n.resize(r);
  tape.t.resize(r);
  tape.len.resize(r);
  tape.sign.resize(r);
  T cx = 0, cy = 0;
  for (const auto& p : e) {
    cx += p[0];
    cy += p[1];
  }
  cx /= r;
  cy /= r;
  for (int i = 0; i < r; ++i) {
    const auto& prev = e[i == 0 ? 0 : i - 1];
    const auto& next = e[i + 1 == r ? r - 1 : i + 1];
    const T tx = next[0] - prev[0], ty = next[1] - prev[1];
    const T len = std::sqrt(tx * tx + ty * ty);
    tape.t[i] = {tx, ty};
    tape.len[i] = len;
    if (len == T(0)) {
      tape.n[i] = {T(0), T(0)};
      tape.sign[i] = T(1);
      continue;
    }
    T nx = ty / len, ny = -tx / len;
    const T s = (nx * (e[i][0] - cx) + ny * (e[i][1] - cy)) < T(0) ? T(-1) : T(1);
    tape.n[i] = {s * nx, s * ny};
    tape.sign[i] = s;
  }
  return tape;
}

template <class T>
std::array<T, 2> at2(const Tensor<T>& x, int b, int s, int c0) {
  const int sz = x.shape[1], ch = x.shape[2];
  const T* p = x.data.data() + (static_cast<std::size_t>(b) * sz + s) * ch + c0;
  return {p[0], p[1]};
}

template <class T>
void add2(Tensor<T>& x, int b, int s, int c0, T gx, T gy) {
  const int sz = x.shape[1], ch = x.shape[2];
  T* p = x.data.data() + (static_cast<std::size_t>(b) * sz + s) * ch + c0;
  p[0] += gx;
  p[1] += gy;
}

template <class T>
T& at1(Tensor<T>& x, int b, int s, int c) {
  return x.data[(static_cast<std::size_t>(b) * x.shape[1] + s) * x.shape[2] + c];
}

template <class T>
T at1(const Tensor<T>& x, int b, int s, int c) {
  return x.data[(static_cast<std::size_t>(b) * x.shape[1] + s) * x.shape[2] + c];
}

// Raw arrays of one sample, unclamped.
template <class T>
struct Raw {
  std::vector<std::array<T, 2>> endo, epi, la;
  std::vector<T> z, disp;
  NormalTape<T> tape;
};

template <class T>
Raw<T> read_raw(const RingPair<T>& out, const RingTopology& topo, bool disp_head, int b) {
  Raw<T> r;
  const int rc = topo.ring_count(), lc = topo.la_count();
  r.endo.resize(rc);
  r.la.resize(lc);
  for (int j = 0; j < rc; ++j) r.endo[j] = at2(out.inner, b, j, 0);
  for (int k = 0; k < lc; ++k) r.la[k] = at2(out.inner, b, topo.la_slot(k), 0);
  r.epi.resize(rc);
  if (disp_head) {
    r.tape = normals(r.endo);
    r.z.resize(rc);
    r.disp.resize(rc);
    for (int j = 0; j < rc; ++j) {
      r.z[j] = at1(out.inner, b, j, 2);
      r.disp[j] = softplus_t(r.z[j]) + static_cast<T>(kMinDisplacement);
      r.epi[j] = {r.endo[j][0] + r.disp[j] * r.tape.n[j][0], r.endo[j][1] + r.disp[j] * r.tape.n[j][1]};
    }
  } else {
    for (int j = 0; j < rc; ++j) r.epi[j] = at2(out.outer, b, j, 0);
  }
  return r;
}

std::vector<Point> to_points(const auto& arr) {
  std::vector<Point> out;
  out.reserve(arr.size());
  for (const auto& p : arr) out.push_back({static_cast<double>(p[0]), static_cast<double>(p[1])});
  return out;
}

template <class T>
T dist_grad(const std::array<T, 2>& p, Point t, T& gx, T& gy) {
  const T dx = p[0] - static_cast<T>(t.x), dy = p[1] - static_cast<T>(t.y);
  const T d = std::sqrt(dx * dx + dy * dy);
  if (d > T(0)) {
    gx = dx / d;
    gy = dy / d;
  } else {
    gx = gy = T(0);
  }
  return d;
}

// ---- JSON config ----

using nlohmann::json;

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw Error(Errc::ConfigError, kModule, where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* k) { return it.key() == k; })) {
      throw Error(Errc::ConfigError, kModule, "unknown key '" + it.key() + "' in " + where);
    }
  }
}

template <class V>
void read_opt(const json& j, const char* key, V& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<V>();
  } catch (const json::exception&) {
    throw Error(Errc::ConfigError, kModule, where + "." + key + " has the wrong type");
  }
}

}  // namespace

// ---- configs ----

void DecoderConfig::validate(const RingTopology& topo) const {
  for (int c : channels) {
    if (c < 1) throw Error(Errc::ConfigError, kModule, "decoder channels must be >= 1");
  }
  if (w < 1 || w > topo.size()) throw Error(Errc::ConfigError, kModule, "w must lie in [1, ring size]");
  if (v < 1 || v % 2 == 0 || v > topo.size()) throw Error(Errc::ConfigError, kModule, "v must be odd and >= 1");
}

DecoderConfig DecoderConfig::variant(std::string_view name) {
  DecoderConfig d;
  if (name == "wide") {
    d.channels = {48, 32, 32, 16, 16, 8, 8, 4};
    d.v = 11;
  } else if (name == "medium") {
    d.channels = {32, 16, 8, 4};
    d.v = 5;
  } else if (name == "default") {
    d.channels = {8, 4};
    d.v = 1;
  } else if (name == "none") {
    d.channels = {};
    d.v = 1;
  } else {
    throw Error(Errc::ConfigError, kModule, "unknown decoder variant '" + std::string(name) + "'");
  }
  return d;
}

std::vector<std::string> DecoderConfig::variant_names() { return {"wide", "medium", "default", "none"}; }

void ModelConfig::validate() const {
  encoder.validate();
  if (sampling.n_side < 1 || sampling.m_side < 1) throw Error(Errc::ConfigError, kModule, "n_side and m_side must be >= 1");
  decoder.validate(topology());
}

ModelConfig ModelConfig::reduced() {
  ModelConfig c;
  c.encoder = EncoderConfig::reduced();
  c.decoder.channels = {4, 2};
  return c;
}

std::string model_config_to_json(const ModelConfig& cfg) {
  json blocks = json::array();
  for (const EncoderBlock& b : cfg.encoder.blocks) blocks.push_back({{"out_channels", b.out_channels}, {"stride", b.stride}});
  const json j = {
      {"version", kTopologyVersion},
      {"encoder", {{"blocks", blocks}, {"embedding", cfg.encoder.embedding}, {"input_size", cfg.encoder.input_size},
                   {"coord_channels", cfg.encoder.coord_channels}}},
      {"decoder",
       {{"channels", cfg.decoder.channels},
        {"w", cfg.decoder.w},
        {"v", cfg.decoder.v},
        {"displacement_head", cfg.decoder.displacement_head}}},
      {"sampling", {{"n_side", cfg.sampling.n_side}, {"m_side", cfg.sampling.m_side}}},
  };
  return j.dump();
}

ModelConfig model_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(Errc::ConfigError, kModule, std::string("model config is not JSON: ") + e.what());
  }
  check_keys(j, {"version", "encoder", "decoder", "sampling"}, "model");
  if (!j.contains("version")) throw Error(Errc::ConfigError, kModule, "model config lacks 'version'");
  if (!j["version"].is_number_integer() || j["version"].get<int>() != kTopologyVersion) {
    throw Error(Errc::ConfigError, kModule, "unsupported model config version");
  }
  ModelConfig c;
  if (j.contains("encoder")) {
    const json& e = j["encoder"];
    check_keys(e, {"blocks", "embedding", "input_size", "coord_channels"}, "encoder");
    if (e.contains("blocks")) {
      if (!e["blocks"].is_array()) throw Error(Errc::ConfigError, kModule, "encoder.blocks must be an array");
      c.encoder.blocks.clear();
      for (const json& b : e["blocks"]) {
        check_keys(b, {"out_channels", "stride"}, "encoder.blocks[]");
        EncoderBlock blk;
        read_opt(b, "out_channels", blk.out_channels, "encoder.blocks[]");
        read_opt(b, "stride", blk.stride, "encoder.blocks[]");
        c.encoder.blocks.push_back(blk);
      }
    }
    read_opt(e, "embedding", c.encoder.embedding, "encoder");
    read_opt(e, "input_size", c.encoder.input_size, "encoder");
    read_opt(e, "coord_channels", c.encoder.coord_channels, "encoder");
  }
  if (j.contains("decoder")) {
    const json& d = j["decoder"];
    check_keys(d, {"channels", "w", "v", "displacement_head"}, "decoder");
    read_opt(d, "channels", c.decoder.channels, "decoder");
    read_opt(d, "w", c.decoder.w, "decoder");
    read_opt(d, "v", c.decoder.v, "decoder");
    read_opt(d, "displacement_head", c.decoder.displacement_head, "decoder");
  }
  if (j.contains("sampling")) {
    const json& s = j["sampling"];
    check_keys(s, {"n_side", "m_side"}, "sampling");
    read_opt(s, "n_side", c.sampling.n_side, "sampling");
    read_opt(s, "m_side", c.sampling.m_side, "sampling");
  }
  c.validate();
  return c;
}

// ---- RingLayer ----

template <class T>
RingLayer<T>::RingLayer(const RingTopology& topo, int in_channels, int out_inner, int out_outer, int w, int v,
                        Activation act)
    : inner_map((w + v) * in_channels, out_inner, act),
      outer_map((w + v) * in_channels, out_outer, act),
      topo_(topo),
      cin_(in_channels),
      cout_i_(out_inner),
      cout_o_(out_outer),
      w_(w),
      v_(v) {}

template <class T>
Tensor<T> RingLayer<T>::gather(const Tensor<T>& same, const Tensor<T>& other) const {
  const int s = topo_.size();
  const int n = batch_ * s;
  Tensor<T> g({(w_ + v_) * cin_, n});
  for (int b = 0; b < batch_; ++b) {
    for (int i = 0; i < s; ++i) {
      const int col = b * s + i;
      for (int t = 0; t < w_; ++t) {
        const T* src = same.data.data() + (static_cast<std::size_t>(b) * s + wrap(i - w_ / 2 + t, s)) * cin_;
        for (int c = 0; c < cin_; ++c) g.data[static_cast<std::size_t>(t * cin_ + c) * n + col] = src[c];
      }
      for (int t = 0; t < v_; ++t) {
        const T* src = other.data.data() + (static_cast<std::size_t>(b) * s + wrap(i - v_ / 2 + t, s)) * cin_;
        for (int c = 0; c < cin_; ++c) g.data[static_cast<std::size_t>((w_ + t) * cin_ + c) * n + col] = src[c];
      }
    }
  }
  return g;
}

template <class T>
void RingLayer<T>::scatter(const Tensor<T>& g, Tensor<T>& d_same, Tensor<T>& d_other) const {
  const int s = topo_.size();
  const int n = batch_ * s;
  for (int b = 0; b < batch_; ++b) {
    for (int i = 0; i < s; ++i) {
      const int col = b * s + i;
      for (int t = 0; t < w_; ++t) {
        T* dst = d_same.data.data() + (static_cast<std::size_t>(b) * s + wrap(i - w_ / 2 + t, s)) * cin_;
        for (int c = 0; c < cin_; ++c) dst[c] += g.data[static_cast<std::size_t>(t * cin_ + c) * n + col];
      }
      for (int t = 0; t < v_; ++t) {
        T* dst = d_other.data.data() + (static_cast<std::size_t>(b) * s + wrap(i - v_ / 2 + t, s)) * cin_;
        for (int c = 0; c < cin_; ++c) dst[c] += g.data[static_cast<std::size_t>((w_ + t) * cin_ + c) * n + col];
      }
    }
  }
}

template <class T>
RingPair<T> RingLayer<T>::forward(const RingPair<T>& x, bool train) {
  const int s = topo_.size();
  if (x.inner.shape.size() != 3 || x.inner.shape[1] != s || x.inner.shape[2] != cin_ || x.outer.shape != x.inner.shape) {
    throw Error(Errc::ShapeMismatch, kModule, "ring layer input must be [B, " + std::to_string(s) + ", " +
                                                  std::to_string(cin_) + "] for both rings");
  }
  batch_ = x.inner.shape[0];
  const int n = batch_ * s;
  RingPair<T> y{Tensor<T>({batch_, s, cout_i_}), Tensor<T>({batch_, s, cout_o_})};
  const Tensor<T> yi = inner_map.forward(gather(x.inner, x.outer), train);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < cout_i_; ++c) y.inner.data[static_cast<std::size_t>(r) * cout_i_ + c] = yi.data[static_cast<std::size_t>(c) * n + r];
  }
  if (cout_o_ > 0) {
    const Tensor<T> yo = outer_map.forward(gather(x.outer, x.inner), train);
    for (int r = 0; r < n; ++r) {
      if (topo_.is_pad(r % s)) continue;
      for (int c = 0; c < cout_o_; ++c) y.outer.data[static_cast<std::size_t>(r) * cout_o_ + c] = yo.data[static_cast<std::size_t>(c) * n + r];
    }
  }
  return y;
}

template <class T>
RingPair<T> RingLayer<T>::backward(const RingPair<T>& dy) {
  const int s = topo_.size();
  const int n = batch_ * s;
  RingPair<T> dx{Tensor<T>({batch_, s, cin_}), Tensor<T>({batch_, s, cin_})};
  Tensor<T> gi({cout_i_, n});
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < cout_i_; ++c) gi.data[static_cast<std::size_t>(c) * n + r] = dy.inner.data[static_cast<std::size_t>(r) * cout_i_ + c];
  }
  scatter(inner_map.backward(gi), dx.inner, dx.outer);
  if (cout_o_ > 0) {
    Tensor<T> go({cout_o_, n});
    for (int r = 0; r < n; ++r) {
      if (topo_.is_pad(r % s)) continue;
      for (int c = 0; c < cout_o_; ++c) go.data[static_cast<std::size_t>(c) * n + r] = dy.outer.data[static_cast<std::size_t>(r) * cout_o_ + c];
    }
    scatter(outer_map.backward(go), dx.outer, dx.inner);
  }
  return dx;
}

template <class T>
void RingLayer<T>::init(Rng& rng, double gain) {
  inner_map.init(rng, gain);
  outer_map.init(rng, gain);
}

template <class T>
std::vector<ParamRef<T>> RingLayer<T>::params(const std::string& prefix) {
  auto p = inner_map.params(prefix + ".inner");
  if (cout_o_ > 0) {
    auto q = outer_map.params(prefix + ".outer");
    p.insert(p.end(), q.begin(), q.end());
  }
  return p;
}

// ---- targets and loss ----

double softplus(double z) { return softplus_t(z); }

Target Target::from(const KeypointSet& kps) {
  Target t;
  t.keypoints = kps;
  t.disp = to_displacement(kps).disp;
  return t;
}

double keypoint_loss(const Prediction& pred, const Target& target) {
  const KeypointSet& p = pred.keypoints;
  const KeypointSet& t = target.keypoints;
  if (p.endo.size() != t.endo.size() || p.epi.size() != t.epi.size() || p.la.size() != t.la.size()) {
    throw Error(Errc::LayoutMismatch, kModule, "prediction and target layouts differ");
  }
  double l = 0.0;
  for (std::size_t i = 0; i < p.endo.size(); ++i) l += distance(p.endo[i], t.endo[i]);
  for (std::size_t i = 0; i < p.epi.size(); ++i) l += distance(p.epi[i], t.epi[i]);
  for (std::size_t i = 0; i < p.la.size(); ++i) l += distance(p.la[i], t.la[i]);
  if (!pred.disp.empty()) {
    if (pred.disp.size() != target.disp.size()) {
      throw Error(Errc::LayoutMismatch, kModule, "displacement counts differ");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < pred.disp.size(); ++i) s += std::abs(pred.disp[i] - target.disp[i]);
    l += s / static_cast<double>(pred.disp.size());
  }
  return l;
}

// ---- GCNModel ----

template <class T>
GCNModel<T>::GCNModel(const ModelConfig& cfg) : cfg_(cfg), topo_(cfg.topology()) {
  cfg_.validate();
  encoder = Encoder<T>(cfg_.encoder);
  const auto& ch = cfg_.decoder.channels;
  const int s = topo_.size();
  if (ch.empty()) {
    proj_inner_ = cfg_.head_inner();
    proj_outer_ = cfg_.head_outer();
  } else {
    proj_inner_ = proj_outer_ = ch.front();
    for (std::size_t k = 1; k < ch.size(); ++k) {
      layers.emplace_back(topo_, ch[k - 1], ch[k], ch[k], cfg_.decoder.w, cfg_.decoder.v, Activation::LeakyRelu);
    }
    layers.emplace_back(topo_, ch.back(), cfg_.head_inner(), cfg_.head_outer(), cfg_.decoder.w, cfg_.decoder.v,
                        Activation::None);
  }
  projection = Dense<T>(cfg_.encoder.embedding, s * (proj_inner_ + proj_outer_), Activation::None);
}

template <class T>
void GCNModel<T>::init(std::uint64_t seed) {
  Rng rng(seed);
  encoder.init(rng);
  const int s = topo_.size();
  auto head_bias = [&](auto& bias, int channels) {
    // bias laid out slot-major with `channels` per slot
    for (std::size_t k = 0; k < bias.size(); ++k) {
      const int c = static_cast<int>(k % channels);
      bias[k] = static_cast<T>(c < 2 ? kCoordBias : kDispBias);
    }
  };
  if (layers.empty()) {
    projection.init(rng, kHeadGain);
    std::vector<T> bi(static_cast<std::size_t>(s) * proj_inner_), bo(static_cast<std::size_t>(s) * proj_outer_);
    head_bias(bi, proj_inner_);
    head_bias(bo, std::max(proj_outer_, 1));
    std::copy(bi.begin(), bi.end(), projection.bias.begin());
    std::copy(bo.begin(), bo.end(), projection.bias.begin() + static_cast<std::ptrdiff_t>(bi.size()));
    return;
  }
  projection.init(rng);
  for (std::size_t k = 0; k + 1 < layers.size(); ++k) layers[k].init(rng);
  RingLayer<T>& head = layers.back();
  head.init(rng, kHeadGain);
  head_bias(head.inner_map.bias, head.out_inner());
  if (head.out_outer() > 0) head_bias(head.outer_map.bias, head.out_outer());
}

template <class T>
RingPair<T> GCNModel<T>::forward(const Tensor<T>& images, bool train) {
  const Tensor<T> e = encoder.forward(images, train);
  const Tensor<T> p = projection.forward(e, train);
  const int b = e.shape[1];
  const int s = topo_.size();
  RingPair<T> x{Tensor<T>({b, s, proj_inner_}), Tensor<T>({b, s, proj_outer_})};
  const std::size_t outer_base = static_cast<std::size_t>(s) * proj_inner_;
  for (int bi = 0; bi < b; ++bi) {
    for (std::size_t k = 0; k < outer_base; ++k) x.inner.data[bi * outer_base + k] = p.data[k * b + bi];
    for (int slot = 0; slot < s; ++slot) {
      if (topo_.is_pad(slot)) continue;
      for (int c = 0; c < proj_outer_; ++c) {
        const std::size_t k = outer_base + static_cast<std::size_t>(slot) * proj_outer_ + c;
        x.outer.data[(static_cast<std::size_t>(bi) * s + slot) * proj_outer_ + c] = p.data[k * b + bi];
      }
    }
  }
  for (RingLayer<T>& l : layers) x = l.forward(x, train);
  return x;
}

template <class T>
void GCNModel<T>::backward(const RingPair<T>& grad) {
  RingPair<T> g = grad;
  for (std::size_t k = layers.size(); k-- > 0;) g = layers[k].backward(g);
  const int b = g.inner.shape[0];
  const int s = topo_.size();
  const std::size_t outer_base = static_cast<std::size_t>(s) * proj_inner_;
  Tensor<T> dp({projection.out_features(), b});
  for (int bi = 0; bi < b; ++bi) {
    for (std::size_t k = 0; k < outer_base; ++k) dp.data[k * b + bi] = g.inner.data[bi * outer_base + k];
    for (int slot = 0; slot < s; ++slot) {
      if (topo_.is_pad(slot)) continue;
      for (int c = 0; c < proj_outer_; ++c) {
        const std::size_t k = outer_base + static_cast<std::size_t>(slot) * proj_outer_ + c;
        dp.data[k * b + bi] = g.outer.data[(static_cast<std::size_t>(bi) * s + slot) * proj_outer_ + c];
      }
    }
  }
  encoder.backward(projection.backward(dp), false);
}

template <class T>
T GCNModel<T>::loss(const RingPair<T>& out, const std::vector<Target>& targets, RingPair<T>* grad) const {
  const int batch = out.inner.shape.at(0);
  if (static_cast<int>(targets.size()) != batch) throw Error(Errc::LayoutMismatch, kModule, "one target per sample");
  const bool disp_head = cfg_.decoder.displacement_head;
  const int rc = topo_.ring_count(), lc = topo_.la_count();
  if (grad) {
    grad->inner = Tensor<T>(out.inner.shape);
    grad->outer = Tensor<T>(out.outer.shape);
  }
  const T inv_b = T(1) / static_cast<T>(batch);
  T total = 0;
  for (int b = 0; b < batch; ++b) {
    const Target& tg = targets[b];
    check_target(topo_, tg.keypoints);
    if (disp_head && static_cast<int>(tg.disp.size()) != rc) {
      throw Error(Errc::LayoutMismatch, kModule, "target lacks displacements");
    }
    const Raw<T> r = read_raw(out, topo_, disp_head, b);
    std::vector<std::array<T, 2>> g_endo(rc, {T(0), T(0)}), g_epi(rc, {T(0), T(0)});
    T l = 0, gx, gy;
    for (int j = 0; j < rc; ++j) {
      l += dist_grad(r.endo[j], tg.keypoints.endo[j], gx, gy);
      g_endo[j] = {gx, gy};
      l += dist_grad(r.epi[j], tg.keypoints.epi[j], gx, gy);
      g_epi[j] = {gx, gy};
    }
    for (int k = 0; k < lc; ++k) {
      l += dist_grad(r.la[k], tg.keypoints.la[k], gx, gy);
      if (grad) add2(grad->inner, b, topo_.la_slot(k), 0, gx * inv_b, gy * inv_b);
    }
    std::vector<T> g_d(rc, T(0));
    if (disp_head) {
      T s = 0;
      for (int j = 0; j < rc; ++j) {
        const T diff = r.disp[j] - static_cast<T>(tg.disp[j]);
        s += std::abs(diff);
        g_d[j] = (diff > T(0) ? T(1) : diff < T(0) ? T(-1) : T(0)) / static_cast<T>(rc);
      }
      l += s / static_cast<T>(rc);
    }
    total += l;
    if (!grad) continue;
    if (disp_head) {
      for (int j = 0; j < rc; ++j) {
        const auto& n = r.tape.n[j];
        g_endo[j][0] += g_epi[j][0];
        g_endo[j][1] += g_epi[j][1];
        g_d[j] += g_epi[j][0] * n[0] + g_epi[j][1] * n[1];
        const T len = r.tape.len[j];
        if (len > T(0)) {
          // n = s * R t / |t| with R(a, b) = (b, -a); back through the unit tangent.
          const T gnx = r.disp[j] * g_epi[j][0] * r.tape.sign[j];
          const T gny = r.disp[j] * g_epi[j][1] * r.tape.sign[j];
          const T ux = -gny, uy = gnx;  // R^T g
          const T thx = r.tape.t[j][0] / len, thy = r.tape.t[j][1] / len;
          const T proj = ux * thx + uy * thy;
          const T gtx = (ux - proj * thx) / len, gty = (uy - proj * thy) / len;
          const int prev = j == 0 ? 0 : j - 1;
          const int next = j + 1 == rc ? rc - 1 : j + 1;
          g_endo[next][0] += gtx;
          g_endo[next][1] += gty;
          g_endo[prev][0] -= gtx;
          g_endo[prev][1] -= gty;
        }
        at1(grad->inner, b, j, 2) += g_d[j] * sigmoid(r.z[j]) * inv_b;
      }
    } else {
      for (int j = 0; j < rc; ++j) add2(grad->outer, b, j, 0, g_epi[j][0] * inv_b, g_epi[j][1] * inv_b);
    }
    for (int j = 0; j < rc; ++j) add2(grad->inner, b, j, 0, g_endo[j][0] * inv_b, g_endo[j][1] * inv_b);
  }
  return total * inv_b;
}

template <class T>
Prediction GCNModel<T>::decode(const RingPair<T>& out, int b) const {
  const Raw<T> r = read_raw(out, topo_, cfg_.decoder.displacement_head, b);
  Prediction p;
  p.keypoints.n_side = topo_.n_side;
  p.keypoints.m_side = topo_.m_side;
  p.keypoints.endo = to_points(r.endo);
  p.keypoints.epi = to_points(r.epi);
  p.keypoints.la = to_points(r.la);
  p.keypoints.landmarks = canonical_landmarks(cfg_.sampling);
  p.disp.assign(r.disp.begin(), r.disp.end());
  return p;
}

template <class T>
Prediction GCNModel<T>::materialize(const RingPair<T>& out, int b) const {
  Prediction p = decode(out, b);
  KeypointSet& k = p.keypoints;
  if (!cfg_.decoder.displacement_head) {
    for (auto* arr : {&k.endo, &k.epi, &k.la}) {
      for (Point& q : *arr) q = {std::clamp(q.x, 0.0, 1.0), std::clamp(q.y, 0.0, 1.0)};
    }
    return p;
  }
  const double lo = kMinDisplacement, hi = 1.0 - kMinDisplacement;
  for (auto* arr : {&k.endo, &k.la}) {
    for (Point& q : *arr) q = {std::clamp(q.x, lo, hi), std::clamp(q.y, lo, hi)};
  }
  DisplacementSet ds;
  ds.n_side = k.n_side;
  ds.m_side = k.m_side;
  ds.endo = k.endo;
  ds.la = k.la;
  ds.disp = p.disp;
  ds.landmarks = k.landmarks;
  k = from_displacement(ds);
  return p;
}

template <class T>
std::vector<ParamRef<T>> GCNModel<T>::params() {
  auto out = encoder.params();
  auto p = projection.params("projection");
  out.insert(out.end(), p.begin(), p.end());
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const std::string name = k + 1 == layers.size() ? "head" : "ring" + std::to_string(k);
    auto q = layers[k].params(name);
    out.insert(out.end(), q.begin(), q.end());
  }
  return out;
}

template <class T>
std::size_t GCNModel<T>::parameter_count() {
  return echogcn::parameter_count(params());
}

template <class T>
Tensor<T> images_to_tensor(const std::vector<const Image*>& images, int size) {
  Tensor<T> x({1, static_cast<int>(images.size()), size, size});
  const std::size_t plane = static_cast<std::size_t>(size) * size;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const Image& im = *images[i];
    if (im.width != size || im.height != size) {
      throw Error(Errc::ShapeMismatch, kModule, "image must be " + std::to_string(size) + "x" + std::to_string(size));
    }
    std::transform(im.data.begin(), im.data.end(), x.data.begin() + static_cast<std::ptrdiff_t>(i * plane),
                   [](float v) { return static_cast<T>(v); });
  }
  return x;
}

template class RingLayer<float>;
template class RingLayer<double>;
template class GCNModel<float>;
template class GCNModel<double>;
template Tensor<float> images_to_tensor<float>(const std::vector<const Image*>&, int);
template Tensor<double> images_to_tensor<double>(const std::vector<const Image*>&, int);

// ---- inference ----

std::vector<InferResult> infer_batch(GCNModel<float>& model, const std::vector<Image>& images, int batch) {
  std::vector<InferResult> out;
  out.reserve(images.size());
  const int size = model.config().encoder.input_size;
  for (std::size_t start = 0; start < images.size(); start += static_cast<std::size_t>(std::max(batch, 1))) {
    const std::size_t end = std::min(images.size(), start + static_cast<std::size_t>(std::max(batch, 1)));
    std::vector<const Image*> chunk;
    for (std::size_t i = start; i < end; ++i) chunk.push_back(&images[i]);
    const RingPair<float> raw = model.forward(images_to_tensor<float>(chunk, size), false);
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      Prediction p = model.materialize(raw, static_cast<int>(i));
      InferResult r;
      r.mask = rasterize_keypoints(p.keypoints, chunk[i]->width, chunk[i]->height);
      r.keypoints = std::move(p.keypoints);
      r.disp = std::move(p.disp);
      out.push_back(std::move(r));
    }
  }
  return out;
}

InferResult infer(GCNModel<float>& model, const Image& image) { return std::move(infer_batch(model, {image}, 1).front()); }

// ---- training ----

void TrainConfig::validate() const {
  if (epochs < 0) throw Error(Errc::ConfigError, kModule, "epochs must be >= 0");
  if (batch_size < 1) throw Error(Errc::ConfigError, kModule, "batch_size must be >= 1");
  if (!(adam.learning_rate >= 0.0)) throw Error(Errc::ConfigError, kModule, "learning_rate must be >= 0");
  if (adam.learning_rate > 0.0) adam.validate();
  if (!(final_lr_fraction >= 0.0 && final_lr_fraction <= 1.0))
    throw Error(Errc::ConfigError, kModule, "final_lr_fraction must be in [0, 1]");
}

double TrainConfig::learning_rate_at(int epoch) const {
  if (schedule == LrSchedule::Constant || epochs <= 1) return adam.learning_rate;
  const double t = std::clamp(static_cast<double>(epoch) / (epochs - 1), 0.0, 1.0);
  const double f = final_lr_fraction + (1.0 - final_lr_fraction) * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
  return adam.learning_rate * f;
}

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

double evaluate_loss(GCNModel<float>& model, const std::vector<Sample>& data, int batch) {
  if (data.empty()) return std::numeric_limits<double>::quiet_NaN();
  const int size = model.config().encoder.input_size;
  double sum = 0.0;
  for (std::size_t start = 0; start < data.size(); start += static_cast<std::size_t>(batch)) {
    const std::size_t end = std::min(data.size(), start + static_cast<std::size_t>(batch));
    std::vector<const Image*> imgs;
    std::vector<Target> targets;
    for (std::size_t i = start; i < end; ++i) {
      imgs.push_back(&data[i].image);
      targets.push_back(Target::from(data[i].keypoints));
    }
    const RingPair<float> out = model.forward(images_to_tensor<float>(imgs, size), false);
    sum += static_cast<double>(model.loss(out, targets, nullptr)) * static_cast<double>(end - start);
  }
  return sum / static_cast<double>(data.size());
}

TrainResult train(GCNModel<float>& model, const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                  const TrainConfig& cfg, const std::function<void(const EpochStats&)>& on_epoch) {
  cfg.validate();
  if (train_set.empty()) throw Error(Errc::EmptyDataset, kModule, "training set is empty");
  const int size = model.config().encoder.input_size;
  std::vector<Target> targets;
  targets.reserve(train_set.size());
  for (const Sample& s : train_set) targets.push_back(Target::from(s.keypoints));

  auto params = model.params();
  AdamState<float> state;
  Rng order(cfg.seed);
  std::vector<std::size_t> idx(train_set.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;

  TrainResult result;
  result.best_loss = std::numeric_limits<double>::infinity();
  std::vector<std::vector<float>> best;
  auto snapshot = [&] {
    best.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) best[i].assign(params[i].value, params[i].value + params[i].size);
  };
  snapshot();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    AdamConfig adam = cfg.adam;
    adam.learning_rate = cfg.learning_rate_at(epoch);
    order.shuffle(idx);
    double sum = 0.0;
    for (std::size_t start = 0; start < idx.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(idx.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<Image> imgs;
      std::vector<Target> batch_targets;
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t i = idx[k];
        const std::uint64_t s = mix(cfg.seed ^ mix(static_cast<std::uint64_t>(epoch) * 0x100000001b3ULL + i));
        try {
          auto [img, kps] = augment(train_set[i].image, train_set[i].keypoints, cfg.augment, s);
          imgs.push_back(std::move(img));
          batch_targets.push_back(Target::from(kps));
        } catch (const Error& e) {
          if (e.code() != Errc::RetriesExhausted) throw;
          imgs.push_back(train_set[i].image);
          batch_targets.push_back(targets[i]);
        }
      }
      std::vector<const Image*> ptrs;
      for (const Image& im : imgs) ptrs.push_back(&im);
      const RingPair<float> out = model.forward(images_to_tensor<float>(ptrs, size), true);
      RingPair<float> grad;
      const float l = model.loss(out, batch_targets, &grad);
      sum += static_cast<double>(l) * static_cast<double>(end - start);
      zero_grads(params);
      model.backward(grad);
      if (adam.learning_rate > 0.0) adam_step(params, state, adam);
    }
    EpochStats st;
    st.epoch = epoch;
    st.train_loss = sum / static_cast<double>(idx.size());
    st.val_loss = evaluate_loss(model, val_set, cfg.batch_size);
    st.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double score = val_set.empty() ? st.train_loss : st.val_loss;
    if (score < result.best_loss) {
      result.best_loss = score;
      result.best_epoch = epoch;
      snapshot();
    }
    result.curve.push_back(st);
    if (on_epoch) on_epoch(st);
  }
  for (std::size_t i = 0; i < params.size(); ++i) std::copy(best[i].begin(), best[i].end(), params[i].value);
  return result;
}

// ---- model files ----

void save_model(const std::string& path, GCNModel<float>& model) {
  WeightsContent c;
  c.metadata_json = model_config_to_json(model.config());
  for (const ParamRef<float>& p : model.params()) c.entries.push_back({p.name, p.shape, {p.value, p.value + p.size}});
  write_weights(path, c);
}

GCNModel<float> load_model(const std::string& path) {
  try {
    const WeightsContent c = read_weights(path);
    GCNModel<float> model(model_config_from_json(c.metadata_json));
    auto params = model.params();
    if (params.size() != c.entries.size()) {
      throw Error(Errc::ModelLoadFailure, kModule, "tensor count does not match the model config");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      const WeightEntry& e = c.entries[i];
      if (e.name != params[i].name || e.shape != params[i].shape) {
        throw Error(Errc::ModelLoadFailure, kModule, "tensor " + e.name + " does not match " + params[i].name);
      }
      std::copy(e.data.begin(), e.data.end(), params[i].value);
    }
    return model;
  } catch (const Error& e) {
    if (e.code() == Errc::ModelLoadFailure) throw;
    throw Error(Errc::ModelLoadFailure, kModule, path + ": " + e.what());
  }
}

}  // namespace echogcn
