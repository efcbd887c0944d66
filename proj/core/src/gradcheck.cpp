#include "echogcn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "echogcn/phantom.hpp"

namespace echogcn {

namespace {

constexpr double kLayerTol = 1e-4;
constexpr double kEndToEndTol = 1e-3;
constexpr double kStep = 1e-5;

void fill_uniform(AlignedVector<double>& v, Rng& rng, double lo = -1.0, double hi = 1.0) {
  for (double& x : v) x = rng.uniform(lo, hi);
}

double dot(const AlignedVector<double>& a, const AlignedVector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Compares analytic gradients against central differences of `f` over the
// coordinates in `slots`; `analytic` holds one entry per slot.
double compare(const std::vector<double*>& slots, const std::vector<double>& analytic, const std::function<double()>& f,
               double h) {
  std::vector<double> numeric(slots.size());
  for (std::size_t i = 0; i < slots.size(); ++i) {
    double* x = slots[i];
    const double keep = *x;
    *x = keep + h;
    const double fp = f();
    *x = keep - h;
    const double fm = f();
    *x = keep;
    numeric[i] = (fp - fm) / (2.0 * h);
  }
  return relative_error(analytic, numeric);
}

// Picks at most `max_coords` coordinates, spread over all tensors.
void pick(std::vector<ParamRef<double>>& params, std::size_t max_coords, Rng& rng, std::vector<double*>& slots,
          std::vector<double>& analytic) {
  std::size_t total = 0;
  for (const auto& p : params) total += p.size;
  const double keep = total <= max_coords ? 1.0 : static_cast<double>(max_coords) / static_cast<double>(total);
  for (auto& p : params) {
    for (std::size_t k = 0; k < p.size; ++k) {
      if (keep >= 1.0 || rng.uniform() < keep) {
        slots.push_back(p.value + k);
        analytic.push_back(p.grad[k]);
      }
    }
  }
}

void randomize(std::vector<ParamRef<double>>& params, Rng& rng) {
  for (auto& p : params) {
    for (std::size_t k = 0; k < p.size; ++k) p.value[k] = rng.uniform(-0.5, 0.5);
  }
}

Tensor<double> random_tensor(std::vector<int> shape, Rng& rng) {
  Tensor<double> t(std::move(shape));
  fill_uniform(t.data, rng);
  return t;
}

KeypointSet phantom_keypoints(std::uint64_t seed) { return extract_keypoints(generate_phantom(seed).mask); }

}  // namespace

double relative_error(const std::vector<double>& a, const std::vector<double>& n) {
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - n[i]) * (a[i] - n[i]);
    na += a[i] * a[i];
    nn += n[i] * n[i];
  }
  const double denom = std::max(std::sqrt(std::max(na, nn)), 1e-300);
  return std::sqrt(diff) / denom;
}

GradcheckResult gradcheck_conv(int stride, bool relu, std::uint64_t seed) {
  Rng rng(seed);
  Conv2d<double> conv(2, 3, stride, relu);
  auto params = conv.params("conv");
  randomize(params, rng);
  Tensor<double> x = random_tensor({2, 2, 8, 8}, rng);
  const Tensor<double> y0 = conv.forward(x, true);
  Tensor<double> r = random_tensor(y0.shape, rng);
  const Tensor<double> dx = conv.backward(r);

  std::vector<double*> slots;
  std::vector<double> analytic;
  pick(params, 100000, rng, slots, analytic);
  for (std::size_t k = 0; k < x.size(); ++k) {
    slots.push_back(&x.data[k]);
    analytic.push_back(dx.data[k]);
  }
  // Without ReLU the map is linear, so the wide step is exact.
  const double h = relu ? kStep : 1e-3;
  const double err = compare(slots, analytic, [&] { return dot(conv.forward(x, false).data, r.data); }, h);
  return {"conv stride " + std::to_string(stride) + (relu ? " relu" : ""), err, kLayerTol, slots.size()};
}

GradcheckResult gradcheck_dense(Activation act, std::uint64_t seed) {
  Rng rng(seed);
  Dense<double> dense(7, 5, act);
  auto params = dense.params("dense");
  randomize(params, rng);
  Tensor<double> x = random_tensor({7, 3}, rng);
  const Tensor<double> y0 = dense.forward(x, true);
  Tensor<double> r = random_tensor(y0.shape, rng);
  const Tensor<double> dx = dense.backward(r);
  std::vector<double*> slots;
  std::vector<double> analytic;
  pick(params, 100000, rng, slots, analytic);
  for (std::size_t k = 0; k < x.size(); ++k) {
    slots.push_back(&x.data[k]);
    analytic.push_back(dx.data[k]);
  }
  const double err = compare(slots, analytic, [&] { return dot(dense.forward(x, false).data, r.data); }, kStep);
  const char* names[] = {"dense", "dense relu", "dense leaky"};
  return {names[static_cast<int>(act)], err, kLayerTol, slots.size()};
}

namespace {

GradcheckResult check_ring_layer(RingLayer<double>& layer, const RingTopology& topo, int cin, std::string name,
                                 Rng& rng) {
  auto params = layer.params("ring");
  randomize(params, rng);
  RingPair<double> x{random_tensor({2, topo.size(), cin}, rng), random_tensor({2, topo.size(), cin}, rng)};
  for (int b = 0; b < 2; ++b) {
    for (int s = topo.ring_count(); s < topo.size(); ++s) {
      for (int c = 0; c < cin; ++c) x.outer.data[(static_cast<std::size_t>(b) * topo.size() + s) * cin + c] = 0.0;
    }
  }
  const RingPair<double> y0 = layer.forward(x, true);
  RingPair<double> r{random_tensor(y0.inner.shape, rng), random_tensor(y0.outer.shape, rng)};
  const RingPair<double> dx = layer.backward(r);
  std::vector<double*> slots;
  std::vector<double> analytic;
  pick(params, 600, rng, slots, analytic);
  for (std::size_t k = 0; k < x.inner.size(); ++k) {
    slots.push_back(&x.inner.data[k]);
    analytic.push_back(dx.inner.data[k]);
  }
  for (std::size_t k = 0; k < x.outer.size(); ++k) {
    slots.push_back(&x.outer.data[k]);
    analytic.push_back(dx.outer.data[k]);
  }
  const double err = compare(
      slots, analytic,
      [&] {
        const RingPair<double> y = layer.forward(x, false);
        return dot(y.inner.data, r.inner.data) + dot(y.outer.data, r.outer.data);
      },
      kStep);
  return {std::move(name), err, kLayerTol, slots.size()};
}

}  // namespace

GradcheckResult gradcheck_ring(int channels, int w, int v, std::uint64_t seed) {
  Rng rng(seed);
  const RingTopology topo;
  RingLayer<double> layer(topo, channels, channels, channels, w, v, Activation::LeakyRelu);
  return check_ring_layer(layer, topo, channels,
                          "ring_conv C=" + std::to_string(channels) + " w=" + std::to_string(w) + " v=" + std::to_string(v),
                          rng);
}

GradcheckResult gradcheck_head(bool displacement, std::uint64_t seed) {
  Rng rng(seed);
  const RingTopology topo;
  RingLayer<double> layer(topo, 4, displacement ? 3 : 2, displacement ? 0 : 2, 64, 1, Activation::None);
  return check_ring_layer(layer, topo, 4, displacement ? "head displacement" : "head coordinate", rng);
}

GradcheckResult gradcheck_loss(bool displacement, std::uint64_t seed) {
  Rng rng(seed);
  ModelConfig cfg = ModelConfig::reduced();
  cfg.decoder.displacement_head = displacement;
  const GCNModel<double> model(cfg);
  const RingTopology topo = model.topology();
  const std::vector<Target> targets{Target::from(phantom_keypoints(seed + 1)), Target::from(phantom_keypoints(seed + 2))};
  // Predictions near the targets so the normals are well defined.
  RingPair<double> out{Tensor<double>({2, topo.size(), cfg.head_inner()}), Tensor<double>({2, topo.size(), cfg.head_outer()})};
  for (int b = 0; b < 2; ++b) {
    const KeypointSet& k = targets[b].keypoints;
    auto set = [&](Tensor<double>& t, int slot, Point p) {
      const std::size_t base = (static_cast<std::size_t>(b) * topo.size() + slot) * t.shape[2];
      t.data[base] = p.x + rng.uniform(-0.02, 0.02);
      t.data[base + 1] = p.y + rng.uniform(-0.02, 0.02);
    };
    for (int j = 0; j < topo.ring_count(); ++j) {
      set(out.inner, j, k.endo[j]);
      if (displacement) {
        out.inner.data[(static_cast<std::size_t>(b) * topo.size() + j) * 3 + 2] = rng.uniform(-4.0, -2.0);
      } else {
        set(out.outer, j, k.epi[j]);
      }
    }
    for (int q = 0; q < topo.la_count(); ++q) set(out.inner, topo.la_slot(q), k.la[q]);
  }
  RingPair<double> grad;
  model.loss(out, targets, &grad);
  std::vector<double*> slots;
  std::vector<double> analytic;
  for (std::size_t k = 0; k < out.inner.size(); ++k) {
    slots.push_back(&out.inner.data[k]);
    analytic.push_back(grad.inner.data[k]);
  }
  for (std::size_t k = 0; k < out.outer.size(); ++k) {
    slots.push_back(&out.outer.data[k]);
    analytic.push_back(grad.outer.data[k]);
  }
  const double err = compare(slots, analytic, [&] { return model.loss(out, targets, nullptr); }, kStep);
  return {displacement ? "loss displacement" : "loss coordinate", err, kLayerTol, slots.size()};
}

GradcheckResult gradcheck_end_to_end(const ModelConfig& cfg, std::uint64_t seed, std::size_t max_coords) {
  Rng rng(seed);
  GCNModel<double> model(cfg);
  model.init(seed);
  // Larger head weights so the check is not dominated by the bias.
  for (auto& p : model.params()) {
    if (p.name.rfind("head", 0) == 0 || (model.layers.empty() && p.name.rfind("projection", 0) == 0)) {
      for (std::size_t k = 0; k < p.size; ++k) p.value[k] *= 5.0;
    }
  }
  const int s = cfg.encoder.input_size;
  Tensor<double> x({1, 2, s, s});
  fill_uniform(x.data, rng, 0.0, 1.0);
  const std::vector<Target> targets{Target::from(phantom_keypoints(seed + 1)), Target::from(phantom_keypoints(seed + 2))};
  auto params = model.params();
  zero_grads(params);
  RingPair<double> grad;
  model.loss(model.forward(x, true), targets, &grad);
  model.backward(grad);
  std::vector<double*> slots;
  std::vector<double> analytic;
  pick(params, max_coords, rng, slots, analytic);
  const double err =
      compare(slots, analytic, [&] { return model.loss(model.forward(x, false), targets, nullptr); }, kStep);
  return {std::string("end-to-end ") + (cfg.decoder.displacement_head ? "displacement" : "coordinate"), err,
          kEndToEndTol, slots.size()};
}

std::vector<GradcheckResult> run_gradchecks(std::uint64_t seed) {
  std::vector<GradcheckResult> out;
  out.push_back(gradcheck_conv(1, false, seed));
  out.push_back(gradcheck_conv(2, false, seed + 1));
  out.push_back(gradcheck_conv(2, true, seed + 2));
  out.push_back(gradcheck_dense(Activation::None, seed + 3));
  out.push_back(gradcheck_dense(Activation::Relu, seed + 4));
  out.push_back(gradcheck_dense(Activation::LeakyRelu, seed + 5));
  out.push_back(gradcheck_ring(4, 64, 1, seed + 6));
  out.push_back(gradcheck_ring(4, 8, 3, seed + 7));
  out.push_back(gradcheck_head(false, seed + 8));
  out.push_back(gradcheck_head(true, seed + 9));
  out.push_back(gradcheck_loss(false, seed + 10));
  out.push_back(gradcheck_loss(true, seed + 11));
  ModelConfig cfg = ModelConfig::reduced();
  out.push_back(gradcheck_end_to_end(cfg, seed + 12));
  cfg.decoder.displacement_head = false;
  out.push_back(gradcheck_end_to_end(cfg, seed + 13));
  return out;
}

}  // namespace echogcn
