#pragma once

#include <cstdint>
#include <new>
#include <string>
#include <vector>

namespace echogcn {

class Rng;

/// 64-byte aligned storage. Vectorized reductions then start at the same
/// alignment on every run, which keeps float results bit-reproducible.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

  template <class U>
  bool operator==(const AlignedAllocator<U>&) const noexcept {
    return true;
  }
};

template <class T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

/// Dense row-major array.
template <class T>
struct Tensor {
  std::vector<int> shape;
  AlignedVector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s, T fill = T(0));

  std::size_t size() const { return data.size(); }
  int dim(std::size_t i) const { return shape.at(i); }
};

std::size_t shape_size(const std::vector<int>& shape);

/// View of one trainable tensor and its gradient.
template <class T>
struct ParamRef {
  std::string name;
  std::vector<int> shape;
  T* value = nullptr;
  T* grad = nullptr;
  std::size_t size = 0;
};

/// 3x3 convolution, padding 1, stride 1 or 2, bias, optional ReLU.
/// Activations are [C, B, H, W]; output spatial size is ceil(H / stride).
/// Weights are [out, in, 3, 3].
template <class T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(int in_channels, int out_channels, int stride, bool relu = true, int kernel = 3);

  int in_channels() const { return cin_; }
  int out_channels() const { return cout_; }
  int stride() const { return stride_; }
  int kernel() const { return k_; }

  /// Keeps what backward needs when `train` is set.
  Tensor<T> forward(const Tensor<T>& x, bool train);
  /// Accumulates into the parameter gradients; returns dL/dx unless
  /// `need_input_grad` is false.
  Tensor<T> backward(const Tensor<T>& dy, bool need_input_grad = true);

  void init(Rng& rng);
  std::vector<ParamRef<T>> params(const std::string& prefix);

  AlignedVector<T> weight;
  AlignedVector<T> bias;
  AlignedVector<T> grad_weight;
  AlignedVector<T> grad_bias;

 private:
  int cin_ = 0, cout_ = 0, stride_ = 1, k_ = 3;
  bool relu_ = true;
  int batch_ = 0, h_ = 0, w_ = 0, oh_ = 0, ow_ = 0;
  AlignedVector<T> col_;
  Tensor<T> out_;
};

/// y = W x + b on [features, B] columns, optional activation.
enum class Activation { None, Relu, LeakyRelu };

template <class T>
T activate(Activation a, T x);
template <class T>
T activate_grad(Activation a, T y_pre);

inline constexpr double kLeakySlope = 0.1;

template <class T>
class Dense {
 public:
  Dense() = default;
  Dense(int in, int out, Activation act = Activation::None);

  int in_features() const { return in_; }
  int out_features() const { return out_; }

  Tensor<T> forward(const Tensor<T>& x, bool train);
  Tensor<T> backward(const Tensor<T>& dy);

  void init(Rng& rng, double gain = 1.0);
  std::vector<ParamRef<T>> params(const std::string& prefix);

  AlignedVector<T> weight;  // [out, in]
  AlignedVector<T> bias;
  AlignedVector<T> grad_weight;
  AlignedVector<T> grad_bias;

 private:
  int in_ = 0, out_ = 0;
  Activation act_ = Activation::None;
  Tensor<T> x_;
  Tensor<T> pre_;
};

/// [C, B, H, W] -> [C, B].
template <class T>
Tensor<T> global_average_pool(const Tensor<T>& x);
template <class T>
Tensor<T> global_average_pool_backward(const Tensor<T>& dy, int h, int w);

struct EncoderBlock {
  int out_channels = 16;
  int stride = 2;
};

struct EncoderConfig {
  std::vector<EncoderBlock> blocks{{16, 2}, {32, 2}, {64, 2}, {128, 2}, {128, 2}};
  int embedding = 128;
  int input_size = 256;
  /// Appends two fixed channels holding the pixel column and row in [-1, 1],
  /// so pooled features can still carry position.
  bool coord_channels = true;

  /// Throws Errc::ConfigError.
  void validate() const;
  /// Smaller network for finite-difference checks.
  static EncoderConfig reduced();
};

/// Conv blocks (ReLU) -> global average pool -> dense to the embedding (ReLU).
/// The image enters as channel 0; coordinate channels follow when enabled.
template <class T>
class Encoder {
 public:
  Encoder() = default;
  explicit Encoder(const EncoderConfig& cfg);

  const EncoderConfig& config() const { return cfg_; }

  /// x: [1, B, S, S] -> [X, B]. Throws Errc::ShapeMismatch.
  Tensor<T> forward(const Tensor<T>& x, bool train);
  /// Gradient w.r.t. the input image only when requested.
  Tensor<T> backward(const Tensor<T>& dy, bool need_input_grad = false);

  void init(Rng& rng);
  std::vector<ParamRef<T>> params();

  std::vector<Conv2d<T>> convs;
  Dense<T> fc;

 private:
  EncoderConfig cfg_;
  int last_h_ = 0, last_w_ = 0;
};

struct AdamConfig {
  double learning_rate = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_hat = 1e-8;

  /// Throws Errc::ConfigError.
  void validate() const;
};

/// Moment estimates for a list of parameter tensors.
template <class T>
struct AdamState {
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
  std::int64_t step = 0;
};

/// One bias-corrected Adam update; grads are read, not cleared.
template <class T>
void adam_step(std::vector<ParamRef<T>>& params, AdamState<T>& state, const AdamConfig& cfg);

template <class T>
void zero_grads(std::vector<ParamRef<T>>& params);

template <class T>
std::size_t parameter_count(const std::vector<ParamRef<T>>& params);

/// Named float32 tensor stored in a weights file.
struct WeightEntry {
  std::string name;
  std::vector<int> shape;
  std::vector<float> data;
};

struct WeightsContent {
  std::string metadata_json = "{}";
  std::vector<WeightEntry> entries;
};

inline constexpr std::uint32_t kWeightsFormatVersion = 1;

/// Layout documented in docs/weights_format.md. Throws Errc::IoError.
void write_weights(const std::string& path, const WeightsContent& content);
/// Throws Errc::IoError or Errc::FormatError.
WeightsContent read_weights(const std::string& path);

}  // namespace echogcn
