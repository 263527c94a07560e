#include <cmath>
#include <vector>

#include "gtest/gtest.h"
#include "ssrc/error.hpp"
#include "ssrc/gradcheck.hpp"
#include "ssrc/nn.hpp"
#include "ssrc/rng.hpp"

using namespace ssrc;
using namespace ssrc::nn;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

template <typename Fn>
void expect_error(ErrorCode code, Fn&& fn) {
  try {
    fn();
    FAIL() << "expected " << to_string(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

// Straightforward same-padded 2D cross-correlation, single batch.
Tensor reference_conv2d(const Tensor& x, const Tensor& k) {
  const std::size_t H = x.extent(1), W = x.extent(2), C = x.extent(3);
  const std::size_t KH = k.extent(0), KW = k.extent(1), O = k.extent(3);
  Tensor y(Shape{1, H, W, O}, 0.0);
  for (std::size_t i = 0; i < H; ++i)
    for (std::size_t j = 0; j < W; ++j)
      for (std::size_t o = 0; o < O; ++o) {
        double acc = 0.0;
        for (std::size_t a = 0; a < KH; ++a)
          for (std::size_t b = 0; b < KW; ++b) {
            const long ii = static_cast<long>(i + a) - static_cast<long>(KH / 2);
            const long jj = static_cast<long>(j + b) - static_cast<long>(KW / 2);
            if (ii < 0 || jj < 0 || ii >= static_cast<long>(H) || jj >= static_cast<long>(W)) continue;
            for (std::size_t c = 0; c < C; ++c) {
              acc += x.at({0, static_cast<std::size_t>(ii), static_cast<std::size_t>(jj), c}) *
                     k.at({a, b, c, o});
            }
          }
        y.at({0, i, j, o}) = acc;
      }
  return y;
}

std::vector<DenseLayer> dense_layers(Graph& g, std::size_t in, std::size_t layers, std::size_t growth,
                                     int dims, std::uint64_t seed) {
  std::vector<DenseLayer> out;
  for (std::size_t l = 0; l < layers; ++l) {
    Shape ks = dims == 2 ? Shape{3, 3, in + l * growth, growth} : Shape{3, 3, 3, in + l * growth, growth};
    out.push_back({g.parameter(random_tensor(ks, seed + l, -0.3, 0.3)),
                   g.parameter(random_tensor({growth}, seed + 100 + l, -0.1, 0.1))});
  }
  return out;
}

}  // namespace

TEST(Conv2d, SamePaddingPreservesSpatialShape) {
  Graph g;
  Var x = g.constant(random_tensor({1, 32, 32, 26}, 1));
  Var y = conv2d(x, {g.constant(random_tensor({3, 3, 26, 16}, 2)), g.constant(Tensor(Shape{16}))});
  EXPECT_EQ(y.shape(), (Shape{1, 32, 32, 16}));
}

TEST(Conv2d, UnitKernelIsIdentity) {
  Graph g;
  Var x = g.constant(random_tensor({2, 5, 4, 1}, 3));
  Var y = conv2d(x, {g.constant(Tensor(Shape{1, 1, 1, 1}, 1.0)), g.constant(Tensor(Shape{1}, 0.0))});
  EXPECT_EQ(y.value(), x.value());
}

TEST(Conv2d, OnesKernelCountsOverlaps) {
  Graph g;
  Var y = conv2d(g.constant(Tensor(Shape{1, 5, 5, 1}, 1.0)), {g.constant(Tensor(Shape{3, 3, 1, 1}, 1.0))});
  EXPECT_EQ(y.value().at({0, 2, 2, 0}), 9.0);
  EXPECT_EQ(y.value().at({0, 0, 0, 0}), 4.0);
  EXPECT_EQ(y.value().at({0, 0, 2, 0}), 6.0);
}

TEST(Conv2d, MatchesDirectLoops) {
  Graph g;
  const Tensor x = random_tensor({1, 6, 7, 3}, 4);
  const Tensor k = random_tensor({3, 5, 3, 4}, 5);
  Var y = conv2d(g.constant(x), {g.constant(k)});
  const Tensor ref = reference_conv2d(x, k);
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y.value()[i], ref[i], 1e-13);
}

TEST(Conv2d, StrideAndValidPadding) {
  Graph g;
  Var x = g.constant(random_tensor({1, 7, 7, 2}, 6));
  Var k = g.constant(random_tensor({3, 3, 2, 1}, 7));
  EXPECT_EQ(conv2d(x, {k, Var{}, 2, Padding::kSame}).shape(), (Shape{1, 4, 4, 1}));
  EXPECT_EQ(conv2d(x, {k, Var{}, 1, Padding::kValid}).shape(), (Shape{1, 5, 5, 1}));
  EXPECT_EQ(conv2d(x, {k, Var{}, 2, Padding::kValid}).shape(), (Shape{1, 3, 3, 1}));
}

TEST(Conv2d, Errors) {
  Graph g;
  Var x = g.constant(random_tensor({1, 3, 3, 2}, 8));
  expect_error(ErrorCode::kChannelMismatch,
               [&] { conv2d(x, {g.constant(Tensor(Shape{3, 3, 4, 1}))}); });
  expect_error(ErrorCode::kKernelTooLarge, [&] {
    conv2d(x, {g.constant(Tensor(Shape{5, 5, 2, 1})), Var{}, 1, Padding::kValid});
  });
}

TEST(Conv3d, SamePaddingShape) {
  Graph g;
  Var x = g.constant(random_tensor({1, 32, 32, 26, 1}, 9));
  Var y = conv3d(x, {g.constant(random_tensor({3, 3, 3, 1, 4}, 10)), g.constant(Tensor(Shape{4}))});
  EXPECT_EQ(y.shape(), (Shape{1, 32, 32, 26, 4}));
}

TEST(Conv3d, SpectrallyConstantKernelAndInputReduceTo2d) {
  const std::size_t H = 6, W = 5, S = 7;
  const Tensor x2 = random_tensor({1, H, W, 2}, 11);
  const Tensor k2 = random_tensor({3, 3, 2, 3}, 12);
  Tensor x3(Shape{1, H, W, S, 2});
  for (std::size_t i = 0; i < H; ++i)
    for (std::size_t j = 0; j < W; ++j)
      for (std::size_t s = 0; s < S; ++s)
        for (std::size_t c = 0; c < 2; ++c) x3.at({0, i, j, s, c}) = x2.at({0, i, j, c});
  Tensor k3(Shape{3, 3, 3, 2, 3});
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = 0; b < 3; ++b)
      for (std::size_t s = 0; s < 3; ++s)
        for (std::size_t c = 0; c < 2; ++c)
          for (std::size_t o = 0; o < 3; ++o) k3.at({a, b, s, c, o}) = k2.at({a, b, c, o});

  Graph g;
  Var y = conv3d(g.constant(x3), {g.constant(k3)});
  const Tensor ref = reference_conv2d(x2, k2);
  for (std::size_t i = 0; i < H; ++i)
    for (std::size_t j = 0; j < W; ++j)
      for (std::size_t s = 0; s < S; ++s)
        for (std::size_t o = 0; o < 3; ++o) {
          // Interior bands see all three spectral taps, edge bands two.
          const double taps = (s == 0 || s == S - 1) ? 2.0 : 3.0;
          EXPECT_NEAR(y.value().at({0, i, j, s, o}), taps * ref.at({0, i, j, o}), 1e-12);
        }
}

TEST(Conv3d, ZeroKernelGivesBias) {
  Graph g;
  Var y = conv3d(g.constant(random_tensor({2, 4, 4, 5, 2}, 13)),
                 {g.constant(Tensor(Shape{3, 3, 3, 2, 2}, 0.0)),
                  g.constant(Tensor(Shape{2}, std::vector<double>{0.25, -1.5}))});
  for (std::size_t i = 0; i < y.value().size(); ++i) {
    EXPECT_EQ(y.value()[i], i % 2 == 0 ? 0.25 : -1.5);
  }
}

TEST(AvgPool, ShapesAndArithmetic) {
  Graph g;
  EXPECT_EQ(avg_pool2d(g.constant(Tensor(Shape{1, 32, 32, 3}))).shape(), (Shape{1, 16, 16, 3}));
  EXPECT_EQ(avg_pool3d(g.constant(Tensor(Shape{1, 32, 32, 26, 2}))).shape(),
            (Shape{1, 16, 16, 13, 2}));
  EXPECT_EQ(avg_pool3d(g.constant(Tensor(Shape{1, 4, 4, 5, 1})), false).shape(),
            (Shape{1, 2, 2, 5, 1}));
  Var window = avg_pool2d(g.constant(Tensor(Shape{1, 2, 2, 1}, std::vector<double>{1, 2, 3, 4})));
  EXPECT_EQ(window.value().item(), 2.5);
  Var constant = avg_pool2d(g.constant(Tensor(Shape{2, 6, 6, 3}, 0.75)));
  for (double v : constant.value().values()) EXPECT_EQ(v, 0.75);
  EXPECT_EQ(avg_pool2d(g.constant(Tensor(Shape{1, 5, 7, 1}))).shape(), (Shape{1, 2, 3, 1}));
}

TEST(AvgPool, ExtentTooSmall) {
  Graph g;
  expect_error(ErrorCode::kExtentTooSmall, [&] { avg_pool2d(g.constant(Tensor(Shape{1, 1, 4, 1}))); });
  expect_error(ErrorCode::kExtentTooSmall,
               [&] { avg_pool3d(g.constant(Tensor(Shape{1, 4, 4, 1, 1}))); });
}

TEST(AvgPool, PoolingAfterDuplicationUpsampleIsAProjection) {
  Graph g;
  const Tensor x = random_tensor({2, 8, 6, 3}, 14);
  const Tensor pooled = avg_pool2d(g.constant(x)).value();
  Tensor up(Shape{2, 8, 6, 3});
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t i = 0; i < 8; ++i)
      for (std::size_t j = 0; j < 6; ++j)
        for (std::size_t c = 0; c < 3; ++c) up.at({b, i, j, c}) = pooled.at({b, i / 2, j / 2, c});
  const Tensor again = avg_pool2d(g.constant(up)).value();
  EXPECT_EQ(again, pooled);
}

TEST(DenseBlock, ChannelGrowth) {
  Graph g;
  Var x = g.constant(random_tensor({1, 4, 4, 24}, 15));
  auto layers = dense_layers(g, 24, 4, 12, 2, 16);
  Var y = dense_block(x, layers, 2);
  EXPECT_EQ(y.shape(), (Shape{1, 4, 4, 72}));
  EXPECT_EQ(ops::slice(y, 3, 0, 24).value(), x.value());
}

TEST(DenseBlock, ZeroLayersIsIdentity) {
  Graph g;
  Var x = g.constant(random_tensor({1, 3, 3, 5}, 17));
  EXPECT_EQ(dense_block(x, {}, 2).value(), x.value());
}

TEST(DenseBlock, ThreeDimensionalGrowth) {
  Graph g;
  Var x = g.constant(random_tensor({1, 4, 4, 6, 2}, 18));
  auto layers = dense_layers(g, 2, 3, 4, 3, 19);
  EXPECT_EQ(dense_block(x, layers, 3).shape(), (Shape{1, 4, 4, 6, 14}));
}

TEST(DenseBlock, InnerOutputsFeedLaterLayers) {
  // Silencing layer j must change what later layers produce, since they read
  // layer j's channels through the concatenation.
  for (std::size_t j = 0; j < 3; ++j) {
    Graph g;
    Var x = g.constant(random_tensor({1, 5, 5, 3}, 20));
    auto layers = dense_layers(g, 3, 4, 2, 2, 21);
    const Tensor full = dense_block(x, layers, 2).value();
    layers[j].kernel = g.constant(Tensor(layers[j].kernel.shape(), 0.0));
    layers[j].bias = g.constant(Tensor(layers[j].bias.shape(), 0.0));
    const Tensor ablated = dense_block(x, layers, 2).value();
    const std::size_t later_begin = 3 + (j + 1) * 2;
    Graph h;
    const Tensor a = ops::slice(h.constant(full), 3, later_begin, 11).value();
    const Tensor b = ops::slice(h.constant(ablated), 3, later_begin, 11).value();
    EXPECT_NE(a, b) << "layer " << j;
  }
}

TEST(ClassifierHead, Examples) {
  Graph g;
  Var constant = g.constant(Tensor(Shape{1, 3, 3, 2}, 0.4));
  Var pooled = global_average_pool(constant);
  for (double v : pooled.value().values()) EXPECT_DOUBLE_EQ(v, 0.4);

  Var logits = classifier_head(g.constant(random_tensor({3, 4, 4, 5}, 22)),
                               g.constant(Tensor(Shape{5, 2}, 0.0)),
                               g.constant(Tensor(Shape{2}, std::vector<double>{0.3, -0.7})));
  EXPECT_EQ(logits.shape(), (Shape{3, 2}));
  for (std::size_t b = 0; b < 3; ++b) {
    EXPECT_EQ(logits.value().at({b, 0}), 0.3);
    EXPECT_EQ(logits.value().at({b, 1}), -0.7);
  }

  Var single = classifier_head(g.constant(Tensor(Shape{1, 2, 2, 1}, std::vector<double>{1, 2, 3, 4})),
                               g.constant(Tensor(Shape{1, 1}, 1.0)), g.constant(Tensor(Shape{1}, 0.0)));
  EXPECT_EQ(single.value().item(), 2.5);
}

TEST(WeightedCrossEntropy, InverseFrequencyWeights) {
  const auto w = class_weights({8, 2});
  EXPECT_EQ(w[0], 1.25);
  EXPECT_EQ(w[1], 5.0);
  expect_error(ErrorCode::kEmptyClass, [] { class_weights({5, 0}); });
}

TEST(WeightedCrossEntropy, BalancedCountsDoubleTheMeanLoss) {
  Graph g;
  const Tensor logits = random_tensor({6, 2}, 23, -2.0, 2.0);
  const std::vector<int> labels{0, 1, 1, 0, 1, 0};
  const double weighted = weighted_cross_entropy(g.constant(logits), labels, {5, 5}).value().item();
  double plain = 0.0;
  for (std::size_t b = 0; b < 6; ++b) {
    const double l0 = logits[b * 2], l1 = logits[b * 2 + 1];
    const double lse = std::log(std::exp(l0) + std::exp(l1));
    plain += lse - (labels[b] == 0 ? l0 : l1);
  }
  plain /= 6.0;
  EXPECT_NEAR(weighted, 2.0 * plain, 1e-13);
}

TEST(WeightedCrossEntropy, ConfidentCorrectLogitsGiveVanishingLoss) {
  Graph g;
  Tensor logits(Shape{2, 2}, std::vector<double>{40.0, -40.0, -40.0, 40.0});
  const double loss = weighted_cross_entropy(g.constant(logits), std::vector<int>{0, 1}, {3, 7}).value().item();
  EXPECT_LT(loss, 1e-30);
}

TEST(WeightedCrossEntropy, Errors) {
  Graph g;
  Var logits = g.constant(Tensor(Shape{2, 2}));
  expect_error(ErrorCode::kLabelOutOfRange,
               [&] { weighted_cross_entropy(logits, std::vector<int>{0, 2}, {1, 1}); });
  expect_error(ErrorCode::kEmptyClass,
               [&] { weighted_cross_entropy(logits, std::vector<int>{0, 0}, {2, 0}); });
}

class LayerGradient : public ::testing::TestWithParam<int> {};

TEST_P(LayerGradient, MatchesFiniteDifferences) {
  const auto seed = static_cast<std::uint64_t>(GetParam());
  struct Case {
    const char* name;
    std::vector<Shape> shapes;
    GraphFunction fn;
  };
  const std::vector<Case> cases = {
      {"conv2d", {{2, 5, 4, 3}, {3, 3, 3, 2}, {2}},
       [](Graph&, auto v) { return conv2d(v[0], {v[1], v[2]}); }},
      {"conv2d-stride2-valid", {{1, 7, 6, 2}, {3, 3, 2, 3}},
       [](Graph&, auto v) { return conv2d(v[0], {v[1], Var{}, 2, Padding::kValid}); }},
      {"conv3d", {{1, 4, 3, 5, 2}, {3, 3, 3, 2, 2}, {2}},
       [](Graph&, auto v) { return conv3d(v[0], {v[1], v[2]}); }},
      {"avg-pool2d", {{2, 4, 6, 3}}, [](Graph&, auto v) { return avg_pool2d(v[0]); }},
      {"avg-pool3d", {{1, 4, 4, 5, 2}}, [](Graph&, auto v) { return avg_pool3d(v[0]); }},
      {"dense-block", {{1, 4, 4, 3}, {3, 3, 3, 2}, {2}, {3, 3, 5, 2}, {2}},
       [](Graph&, auto v) {
         const DenseLayer layers[] = {{v[1], v[2]}, {v[3], v[4]}};
         return dense_block(v[0], layers, 2);
       }},
      {"classifier-head", {{2, 3, 3, 4}, {4, 2}, {2}},
       [](Graph&, auto v) { return classifier_head(v[0], v[1], v[2]); }},
      {"weighted-cross-entropy", {{4, 2}},
       [](Graph&, auto v) {
         return weighted_cross_entropy(v[0], std::vector<int>{0, 1, 1, 0}, {9, 3});
       }},
  };
  for (std::size_t c = 0; c < cases.size(); ++c) {
    std::vector<Tensor> inputs;
    for (std::size_t k = 0; k < cases[c].shapes.size(); ++k) {
      inputs.push_back(random_tensor(cases[c].shapes[k], derive_seed(seed, c * 16 + k)));
    }
    GradCheckOptions options;
    options.seed = seed;
    const GradCheckResult r = check_gradients(cases[c].fn, inputs, options);
    EXPECT_TRUE(r.passed) << cases[c].name << " max error " << r.max_error << " " << r.worst;
  }
}

INSTANTIATE_TEST_SUITE_P(Seeds, LayerGradient, ::testing::Range(0, 4));
