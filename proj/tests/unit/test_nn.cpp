#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "echogcn/gradcheck.hpp"
#include "echogcn/nn.hpp"
#include "echogcn/phantom.hpp"
#include "helpers.hpp"

using namespace echogcn;
using echogcn::testing::thrown;

namespace {

Tensor<double> random_tensor(std::vector<int> shape, std::uint64_t seed) {
  Rng rng(seed);
  Tensor<double> t(std::move(shape));
  for (double& v : t.data) v = rng.uniform(-1, 1);
  return t;
}

template <class T>
std::vector<T> vec(const AlignedVector<T>& v) {
  return {v.begin(), v.end()};
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("echogcn_" + name)).string();
}

}  // namespace

TEST(Tensor, SizeIsProductOfShape) {
  const Tensor<float> t({2, 3, 4});
  EXPECT_EQ(t.size(), 24u);
  EXPECT_EQ(thrown([] { Tensor<float>({2, -1}); }), Errc::ShapeMismatch);
}

TEST(Conv, OneByOneIdentityCopiesInput) {
  Conv2d<double> conv(3, 3, 1, false, 1);
  for (int o = 0; o < 3; ++o) conv.weight[o * 3 + o] = 1.0;
  const Tensor<double> x = random_tensor({3, 2, 5, 6}, 1);
  const Tensor<double> y = conv.forward(x, false);
  EXPECT_EQ(y.shape, x.shape);
  EXPECT_EQ(vec(y.data), vec(x.data));
}

TEST(Conv, StrideTwoUsesCeilDivision) {
  Conv2d<float> conv(1, 2, 2);
  EXPECT_EQ(conv.forward(Tensor<float>({1, 1, 8, 8}), false).shape, (std::vector<int>{2, 1, 4, 4}));
  EXPECT_EQ(conv.forward(Tensor<float>({1, 1, 7, 9}), false).shape, (std::vector<int>{2, 1, 4, 5}));
}

TEST(Conv, MatchesDirectCrossCorrelation) {
  Conv2d<double> conv(2, 3, 2, false);
  Rng rng(3);
  for (double& w : conv.weight) w = rng.uniform(-1, 1);
  for (double& b : conv.bias) b = rng.uniform(-1, 1);
  const Tensor<double> x = random_tensor({2, 2, 7, 7}, 4);
  const Tensor<double> y = conv.forward(x, false);
  for (int o = 0; o < 3; ++o) {
    for (int b = 0; b < 2; ++b) {
      for (int oy = 0; oy < 4; ++oy) {
        for (int ox = 0; ox < 4; ++ox) {
          double s = conv.bias[o];
          for (int c = 0; c < 2; ++c) {
            for (int ky = 0; ky < 3; ++ky) {
              for (int kx = 0; kx < 3; ++kx) {
                const int iy = 2 * oy + ky - 1, ix = 2 * ox + kx - 1;
                if (iy < 0 || iy >= 7 || ix < 0 || ix >= 7) continue;
                s += conv.weight[((o * 2 + c) * 3 + ky) * 3 + kx] * x.data[((c * 2 + b) * 7 + iy) * 7 + ix];
              }
            }
          }
          EXPECT_NEAR(y.data[((o * 2 + b) * 4 + oy) * 4 + ox], s, 1e-12);
        }
      }
    }
  }
}

TEST(Conv, RejectsWrongChannelCount) {
  Conv2d<float> conv(2, 2, 1);
  EXPECT_EQ(thrown([&] { conv.forward(Tensor<float>({3, 1, 4, 4}), false); }), Errc::ShapeMismatch);
}

TEST(Conv, GradientsMatchFiniteDifferences) {
  for (const auto& r : {gradcheck_conv(1, false, 11), gradcheck_conv(2, false, 12), gradcheck_conv(2, true, 13)}) {
    EXPECT_LT(r.rel_error, 1e-4) << r.name;
  }
}

TEST(Dense, ZeroWeightsGiveBias) {
  Dense<float> d(4, 3);
  d.bias = {1.5f, -2.0f, 0.25f};
  const Tensor<float> y = d.forward(Tensor<float>({4, 2}, 7.0f), false);
  EXPECT_EQ(vec(y.data), (std::vector<float>{1.5f, 1.5f, -2.0f, -2.0f, 0.25f, 0.25f}));
}

TEST(Dense, RejectsWrongInputSize) {
  Dense<float> d(4, 3);
  EXPECT_EQ(thrown([&] { d.forward(Tensor<float>({5, 1}), false); }), Errc::ShapeMismatch);
}

TEST(Dense, GradientsMatchFiniteDifferences) {
  for (Activation a : {Activation::None, Activation::Relu, Activation::LeakyRelu}) {
    const auto r = gradcheck_dense(a, 21);
    EXPECT_LT(r.rel_error, 1e-4) << r.name;
  }
}

TEST(Pool, AveragesEachPlaneAndSpreadsGradient) {
  Tensor<double> x({2, 1, 2, 2});
  x.data = {1, 2, 3, 4, -1, -1, -1, -1};
  const Tensor<double> y = global_average_pool(x);
  EXPECT_EQ(vec(y.data), (std::vector<double>{2.5, -1.0}));
  Tensor<double> g({2, 1});
  g.data = {4, 8};
  EXPECT_EQ(vec(global_average_pool_backward(g, 2, 2).data), (std::vector<double>{1, 1, 1, 1, 2, 2, 2, 2}));
}

TEST(Encoder, ZeroImageGivesFiniteEmbeddingOfSizeX) {
  Encoder<float> enc(EncoderConfig{});
  Rng rng(5);
  enc.init(rng);
  const Tensor<float> e = enc.forward(Tensor<float>({1, 2, 256, 256}), false);
  EXPECT_EQ(e.shape, (std::vector<int>{128, 2}));
  for (float v : e.data) EXPECT_TRUE(std::isfinite(v));
}

TEST(Encoder, RandomInputsStayFinite) {
  Encoder<float> enc(EncoderConfig{});
  Rng rng(6);
  enc.init(rng);
  Tensor<float> x({1, 1, 256, 256});
  for (float& v : x.data) v = static_cast<float>(rng.uniform());
  for (float v : enc.forward(x, false).data) EXPECT_TRUE(std::isfinite(v));
}

TEST(Encoder, RejectsWrongImageSize) {
  Encoder<float> enc(EncoderConfig{});
  EXPECT_EQ(thrown([&] { enc.forward(Tensor<float>({1, 1, 128, 128}), false); }), Errc::ShapeMismatch);
  EXPECT_EQ(thrown([&] { enc.forward(Tensor<float>({2, 1, 256, 256}), false); }), Errc::ShapeMismatch);
}

TEST(Encoder, ConfigValidation) {
  EncoderConfig c;
  c.blocks[0].stride = 3;
  EXPECT_EQ(thrown([&] { c.validate(); }), Errc::ConfigError);
  c = {};
  c.embedding = 4;
  EXPECT_EQ(thrown([&] { c.validate(); }), Errc::ConfigError);
  c = {};
  c.blocks.clear();
  EXPECT_EQ(thrown([&] { c.validate(); }), Errc::ConfigError);
}

TEST(Encoder, EndToEndGradientThroughReducedConfig) {
  // Encoder + dense head, input gradient included.
  Encoder<double> enc(EncoderConfig::reduced());
  Rng rng(8);
  enc.init(rng);
  Tensor<double> x({1, 2, 32, 32});
  for (double& v : x.data) v = rng.uniform();
  const Tensor<double> y0 = enc.forward(x, true);
  const Tensor<double> r = random_tensor(y0.shape, 9);
  auto params = enc.params();
  zero_grads(params);
  const Tensor<double> dx = enc.backward(r, true);
  auto f = [&] {
    const Tensor<double> y = enc.forward(x, false);
    double s = 0;
    for (std::size_t i = 0; i < y.size(); ++i) s += y.data[i] * r.data[i];
    return s;
  };
  std::vector<double> analytic, numeric;
  auto probe = [&](double* v, double g) {
    const double keep = *v;
    *v = keep + 1e-5;
    const double fp = f();
    *v = keep - 1e-5;
    const double fm = f();
    *v = keep;
    analytic.push_back(g);
    numeric.push_back((fp - fm) / 2e-5);
  };
  for (auto& p : params) {
    for (std::size_t k = 0; k < p.size; k += 7) probe(p.value + k, p.grad[k]);
  }
  for (std::size_t k = 0; k < x.size(); k += 5) probe(&x.data[k], dx.data[k]);
  EXPECT_LT(relative_error(analytic, numeric), 1e-3);
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  std::vector<float> w{1, -2, 3}, g{0, 0, 0};
  std::vector<ParamRef<float>> params{{"w", {3}, w.data(), g.data(), 3}};
  AdamState<float> st;
  for (int i = 0; i < 10; ++i) adam_step(params, st, AdamConfig{1e-2});
  EXPECT_EQ(w, (std::vector<float>{1, -2, 3}));
}

TEST(Adam, ConstantGradientStepApproachesLearningRateTimesSign) {
  std::vector<double> w{0, 0}, g{0.3, -2.0};
  std::vector<ParamRef<double>> params{{"w", {2}, w.data(), g.data(), 2}};
  AdamState<double> st;
  const AdamConfig cfg{1e-3};
  std::vector<double> before;
  for (int i = 0; i < 5000; ++i) {
    before = w;
    adam_step(params, st, cfg);
  }
  EXPECT_NEAR(w[0] - before[0], -1e-3, 1e-3 * 1e-6);
  EXPECT_NEAR(w[1] - before[1], 1e-3, 1e-3 * 1e-6);
}

TEST(Adam, FirstStepIsLearningRateTimesSign) {
  // Bias correction makes the first step exactly lr * g / (|g| + eps).
  std::vector<double> w{1.0}, g{0.5};
  std::vector<ParamRef<double>> params{{"w", {1}, w.data(), g.data(), 1}};
  AdamState<double> st;
  adam_step(params, st, AdamConfig{0.1});
  EXPECT_NEAR(w[0], 1.0 - 0.1 * 0.5 / (0.5 + 1e-8), 1e-15);
}

TEST(Adam, IdenticalRunsAreBitIdentical) {
  auto run = [] {
    std::vector<float> w(50), g(50);
    Rng rng(77);
    for (float& v : w) v = static_cast<float>(rng.uniform(-1, 1));
    std::vector<ParamRef<float>> params{{"w", {50}, w.data(), g.data(), 50}};
    AdamState<float> st;
    for (int step = 0; step < 20; ++step) {
      for (std::size_t i = 0; i < 50; ++i) g[i] = std::sin(w[i] * 3.0f + step);
      adam_step(params, st, AdamConfig{1e-2});
    }
    return w;
  };
  EXPECT_EQ(run(), run());
}

TEST(Adam, ConfigValidation) {
  EXPECT_EQ(thrown([] { AdamConfig{0.0}.validate(); }), Errc::ConfigError);
  EXPECT_EQ(thrown([] { AdamConfig{1e-3, 1.0}.validate(); }), Errc::ConfigError);
  EXPECT_FALSE(thrown([] { AdamConfig{}.validate(); }));
}

TEST(Weights, RoundTripPreservesNamesShapesAndBits) {
  WeightsContent c;
  c.metadata_json = R"({"k":[1,2]})";
  c.entries.push_back({"a.weight", {2, 3}, {1.0f, -0.0f, 3.5e-38f, 1e30f, -7.25f, 0.1f}});
  c.entries.push_back({"a.bias", {0}, {}});
  c.entries.push_back({"b", {1}, {42.0f}});
  const std::string path = temp_path("weights_rt.bin");
  write_weights(path, c);
  const WeightsContent r = read_weights(path);
  EXPECT_EQ(r.metadata_json, c.metadata_json);
  ASSERT_EQ(r.entries.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(r.entries[i].name, c.entries[i].name);
    EXPECT_EQ(r.entries[i].shape, c.entries[i].shape);
    ASSERT_EQ(r.entries[i].data.size(), c.entries[i].data.size());
    EXPECT_EQ(std::memcmp(r.entries[i].data.data(), c.entries[i].data.data(), 4 * c.entries[i].data.size()), 0);
  }
  std::filesystem::remove(path);
}

TEST(Weights, LayoutIsLittleEndianAfterHeader) {
  WeightsContent c;
  c.entries.push_back({"x", {1}, {1.0f}});
  const std::string path = temp_path("weights_layout.bin");
  write_weights(path, c);
  std::ifstream f(path, std::ios::binary);
  const std::string s((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  ASSERT_GE(s.size(), 24u);
  EXPECT_EQ(s.substr(0, 8), "ECHOGCNW");
  EXPECT_EQ(static_cast<unsigned char>(s[8]), 1);  // version 1, little endian
  std::uint64_t hlen = 0;
  for (int i = 0; i < 8; ++i) hlen |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[12 + i])) << (8 * i);
  ASSERT_EQ(s.size(), 20 + hlen + 4);
  // 1.0f = 0x3f800000
  EXPECT_EQ(static_cast<unsigned char>(s[20 + hlen + 3]), 0x3f);
  EXPECT_EQ(static_cast<unsigned char>(s[20 + hlen + 2]), 0x80);
  std::filesystem::remove(path);
}

TEST(Weights, RejectsCorruptFiles) {
  const std::string path = temp_path("weights_bad.bin");
  {
    std::ofstream f(path, std::ios::binary);
    f << "NOTAWEIGHTSFILE_________";
  }
  EXPECT_EQ(thrown([&] { read_weights(path); }), Errc::FormatError);
  WeightsContent c;
  c.entries.push_back({"x", {4}, {1, 2, 3, 4}});
  write_weights(path, c);
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 3);
  EXPECT_EQ(thrown([&] { read_weights(path); }), Errc::FormatError);
  EXPECT_EQ(thrown([&] { read_weights(temp_path("does_not_exist.bin")); }), Errc::IoError);
  std::filesystem::remove(path);
}
