#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "echogcn/imaging.hpp"
#include "echogcn/keypoints.hpp"
#include "echogcn/nn.hpp"
#include "echogcn/phantom.hpp"

namespace echogcn {

/// Slot layout of the two rings. Inner: endo (ring_count) then LA reversed.
/// Outer: epi (ring_count) then zero pads aligned with the LA slots.
struct RingTopology {
  int n_side = 20;
  int m_side = 10;

  static RingTopology from(const SamplingConfig& s) { return {s.n_side, s.m_side}; }
  int ring_count() const { return 2 * n_side + 3; }
  int la_count() const { return 2 * m_side + 1; }
  int size() const { return ring_count() + la_count(); }
  bool is_pad(int slot) const { return slot >= ring_count(); }
  /// Inner slot holding la[k].
  int la_slot(int k) const { return size() - 1 - k; }
};

struct DecoderConfig {
  std::vector<int> channels{8, 4};  // empty: dense straight to the heads
  int w = 64;
  int v = 1;
  bool displacement_head = true;

  /// Throws Errc::ConfigError.
  void validate(const RingTopology& topo) const;
  /// "wide", "medium", "default", "none".
  static DecoderConfig variant(std::string_view name);
  static std::vector<std::string> variant_names();
};

inline constexpr int kTopologyVersion = 1;

struct ModelConfig {
  EncoderConfig encoder;
  DecoderConfig decoder;
  SamplingConfig sampling;

  void validate() const;
  RingTopology topology() const { return RingTopology::from(sampling); }
  int head_inner() const { return decoder.displacement_head ? 3 : 2; }
  int head_outer() const { return decoder.displacement_head ? 0 : 2; }
  /// Reduced network used by gradient checks.
  static ModelConfig reduced();
};

std::string model_config_to_json(const ModelConfig& cfg);
/// Throws Errc::ConfigError on unknown keys, missing version or bad values.
ModelConfig model_config_from_json(const std::string& text);

/// Ring tensors are [B, S, C] with S the ring size.
template <class T>
struct RingPair {
  Tensor<T> inner;
  Tensor<T> outer;
};

/// One graph convolution over the two rings. Inner slot i reads w inner
/// neighbors starting at i - w/2 and v outer neighbors starting at i - v/2,
/// circularly; the outer update mirrors this with its own weights. Outer pad
/// slots are forced to zero.
template <class T>
class RingLayer {
 public:
  RingLayer() = default;
  RingLayer(const RingTopology& topo, int in_channels, int out_inner, int out_outer, int w, int v, Activation act);

  int in_channels() const { return cin_; }
  int out_inner() const { return cout_i_; }
  int out_outer() const { return cout_o_; }

  RingPair<T> forward(const RingPair<T>& x, bool train);
  RingPair<T> backward(const RingPair<T>& dy);

  void init(Rng& rng, double gain = 1.0);
  std::vector<ParamRef<T>> params(const std::string& prefix);

  Dense<T> inner_map;  // weights [out_inner, (w + v) * in]
  Dense<T> outer_map;

 private:
  Tensor<T> gather(const Tensor<T>& same, const Tensor<T>& other) const;
  void scatter(const Tensor<T>& g, Tensor<T>& d_same, Tensor<T>& d_other) const;

  RingTopology topo_;
  int cin_ = 0, cout_i_ = 0, cout_o_ = 0, w_ = 64, v_ = 1;
  int batch_ = 0;
};

/// Unclamped prediction of one sample in normalized coordinates.
struct Prediction {
  KeypointSet keypoints;
  std::vector<double> disp;  // displacement head only
};

/// Training target; `disp` is filled from the keypoints by projection.
struct Target {
  KeypointSet keypoints;
  std::vector<double> disp;

  static Target from(const KeypointSet& kps);
};

double softplus(double z);

/// Sum of keypoint distances plus the mean absolute displacement error when
/// both carry displacements. Throws Errc::LayoutMismatch.
double keypoint_loss(const Prediction& pred, const Target& target);

template <class T>
class GCNModel {
 public:
  GCNModel() = default;
  explicit GCNModel(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }
  const RingTopology& topology() const { return topo_; }

  /// He-uniform everywhere; the head uses gain 0.1 and biases that start the
  /// points at the image center with a small positive displacement.
  void init(std::uint64_t seed);

  /// images: [1, B, S, S] -> head outputs ([B, S, 3] inner, [B, S, 0] outer
  /// with the displacement head; [B, S, 2] each otherwise).
  RingPair<T> forward(const Tensor<T>& images, bool train);
  void backward(const RingPair<T>& grad);

  /// Mean loss over the batch; fills `grad` (same shapes as `out`) if given.
  T loss(const RingPair<T>& out, const std::vector<Target>& targets, RingPair<T>* grad) const;

  Prediction decode(const RingPair<T>& out, int b) const;
  /// Clamped output: coordinates in [0, 1]; with the displacement head, endo
  /// and LA in [eps, 1 - eps] and epi materialized from the displacements.
  Prediction materialize(const RingPair<T>& out, int b) const;

  std::vector<ParamRef<T>> params();
  std::size_t parameter_count();

  Encoder<T> encoder;
  Dense<T> projection;
  std::vector<RingLayer<T>> layers;  // hidden layers followed by the head, if any

 private:
  ModelConfig cfg_;
  RingTopology topo_;
  int proj_inner_ = 0, proj_outer_ = 0;
};

template <class T>
Tensor<T> images_to_tensor(const std::vector<const Image*>& images, int size);

struct InferResult {
  KeypointSet keypoints;
  std::vector<double> disp;
  LabelMask mask;
};

InferResult infer(GCNModel<float>& model, const Image& image);
std::vector<InferResult> infer_batch(GCNModel<float>& model, const std::vector<Image>& images, int batch = 8);

struct Sample {
  Image image;
  KeypointSet keypoints;
};

/// Per-epoch learning-rate decay. Cosine goes from the Adam rate down to
/// final_lr_fraction times it at the last epoch.
enum class LrSchedule { Constant, Cosine };

struct TrainConfig {
  int epochs = 60;
  int batch_size = 8;
  std::uint64_t seed = 0;
  AdamConfig adam{1e-3};
  LrSchedule schedule = LrSchedule::Cosine;
  double final_lr_fraction = 0.01;
  AugmentConfig augment = AugmentConfig::identity();

  /// Learning rate used during `epoch`.
  double learning_rate_at(int epoch) const;

  void validate() const;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0;
  double val_loss = 0;  // NaN without a validation set
  double seconds = 0;
};

struct TrainResult {
  std::vector<EpochStats> curve;
  int best_epoch = -1;
  double best_loss = 0;
};

/// Shuffled mini-batches with per-sample augmentation and Adam. The weights
/// with the lowest validation loss (training loss without a validation set)
/// are left in `model`. Throws Errc::EmptyDataset.
TrainResult train(GCNModel<float>& model, const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                  const TrainConfig& cfg, const std::function<void(const EpochStats&)>& on_epoch = {});

/// Mean loss of `model` over `data` without augmentation.
double evaluate_loss(GCNModel<float>& model, const std::vector<Sample>& data, int batch = 8);

void save_model(const std::string& path, GCNModel<float>& model);
/// Throws Errc::ModelLoadFailure.
GCNModel<float> load_model(const std::string& path);

}  // namespace echogcn
