#include <gtest/gtest.h>

#include <random>

#include "deepconv/dcnn.hpp"
#include "deepconv/deepen.hpp"
#include "deepconv/errors.hpp"

using namespace dc;

namespace {

Vec rand_vec(std::mt19937_64& g, int n, double lo = -1, double hi = 1) {
  std::uniform_real_distribution<double> U(lo, hi);
  Vec v(n);
  for (double& x : v) x = U(g);
  return v;
}

// random net; tied layers get an identical-in-middle bias
Dcnn random_net(std::mt19937_64& g, int d, int s, int J, bool tied, std::optional<int> ds_last = {}) {
  std::vector<ConvLayer> layers;
  int w = d;
  for (int j = 0; j < J; ++j) {
    ConvLayer L;
    L.filter = FilterSeq(rand_vec(g, s + 1));
    if (j + 1 == J && ds_last) L.downsample = ds_last;
    const int out = layer_out_width(w, s, L.downsample);
    L.bias = rand_vec(g, out, -0.3, 0.3);
    if (tied && j + 1 < J) {
      for (int i = s; i <= out - s; ++i) L.bias[i] = L.bias[s - 1];
      L.shape = BiasShape::kMid;
    }
    layers.push_back(L);
    w = out;
  }
  return Dcnn(d, s, layers, rand_vec(g, w), 0.1);
}

// dense oracle: Toeplitz matrices, downsample, bias, relu
double oracle(const Dcnn& net, const Vec& x) {
  Eigen::VectorXd h = Eigen::Map<const Eigen::VectorXd>(x.data(), x.size());
  for (const auto& L : net.layers()) {
    Eigen::VectorXd z = materialize(L.filter, static_cast<int>(h.size())) * h;
    Vec zv(z.data(), z.data() + z.size());
    if (L.downsample) zv = downsample(zv, *L.downsample);
    h.resize(zv.size());
    for (std::size_t i = 0; i < zv.size(); ++i) h[i] = std::max(0.0, zv[i] - L.bias[i]);
  }
  double y = net.out_offset();
  for (int i = 0; i < h.size(); ++i) y += net.out_coeffs()[i] * h[i];
  return y;
}

}  // namespace

TEST(Forward, IdentityLayerOnNonnegativeInput) {
  // s = 1, filter [1] padded to [1, 0]
  const int d = 3;
  ConvLayer L{FilterSeq{1.0}, Vec(d + 1, 0.0), BiasShape::kFree, std::nullopt};
  Vec c(d + 1, 0.0);
  c[0] = 1;
  const Dcnn net(d, 1, {L}, c, 0.0);
  EXPECT_DOUBLE_EQ(predict(net, {2, 0.5, 4}), 2.0);
  const auto fr = forward(net, {2, 0.5, 4});
  ASSERT_EQ(fr.layer_outputs.size(), 2u);
  EXPECT_EQ(fr.layer_outputs[1], (Vec{2, 0.5, 4, 0}));
}

TEST(Forward, TruncatesWhenMSet) {
  ConvLayer L{FilterSeq{1.0}, Vec{0, 0}, BiasShape::kFree, std::nullopt};
  const Dcnn net(1, 1, {L}, Vec{1, 0}, 0.0, 1.0);
  EXPECT_DOUBLE_EQ(predict(net, {3.7}, false), 3.7);
  EXPECT_DOUBLE_EQ(predict(net, {3.7}), 1.0);
  EXPECT_DOUBLE_EQ(forward(net, {3.7}).y, 1.0);
}

TEST(Forward, LinearFeatureBlockFirstEntry) {
  std::mt19937_64 g(21);
  const Vec xi = rand_vec(g, 3);
  const Block b = linear_feature_block(xi, 2, 2.0);
  const Dcnn net(3, 2, b.layers, Vec(b.out_dim, 0.0), 0.0);
  for (int t = 0; t < 20; ++t) {
    const Vec x = rand_vec(g, 3, -2, 2);
    const auto fr = forward(net, x);
    double dot = 0;
    for (int k = 0; k < 3; ++k) dot += xi[k] * x[k];
    EXPECT_NEAR(fr.layer_outputs.back()[0], dot + b.bound_B(), 1e-8);
  }
}

TEST(Forward, MatchesDenseOracle) {
  std::mt19937_64 g(22);
  for (int t = 0; t < 40; ++t) {
    const int d = 2 + t % 5, s = 1 + t % 3, J = 1 + t % 4;
    const Dcnn net = random_net(g, d, s, J, t % 2 == 0, t % 3 == 0 ? std::optional<int>(2) : std::nullopt);
    const Vec x = rand_vec(g, d);
    EXPECT_NEAR(predict(net, x), oracle(net, x), 1e-12);
  }
}

TEST(Forward, DownsampleBeforeBias) {
  // bias has the downsampled width; distinct entries expose the order
  ConvLayer L{FilterSeq{1.0, 1.0}, Vec{0.5, -1.0}, BiasShape::kFree, 2};
  const Dcnn net(3, 1, {L}, Vec{1, 10}, 0.0);
  // T x = [1, 3, 5, 3], D_2 -> [3, 3], minus bias -> [2.5, 4]
  const auto fr = forward(net, {1, 2, 3});
  EXPECT_EQ(fr.layer_outputs[1], (Vec{2.5, 4.0}));
  EXPECT_DOUBLE_EQ(fr.y, 42.5);
}

TEST(Forward, ZeroFiltersGiveConstant) {
  std::mt19937_64 g(23);
  Dcnn net = random_net(g, 4, 2, 3, true);
  std::vector<ConvLayer> layers = net.layers();
  for (auto& L : layers) L.filter = FilterSeq(Vec(3, 0.0));
  const Dcnn zero(4, 2, layers, net.out_coeffs(), net.out_offset());
  const double y0 = predict(zero, rand_vec(g, 4));
  for (int t = 0; t < 20; ++t) EXPECT_EQ(predict(zero, rand_vec(g, 4, -5, 5)), y0);
}

TEST(Forward, DimensionMismatchNamesLayer) {
  ConvLayer L1{FilterSeq{1.0}, Vec(4, 0.0), BiasShape::kFree, std::nullopt};
  ConvLayer L2{FilterSeq{1.0}, Vec(4, 0.0), BiasShape::kFree, std::nullopt};
  try {
    Dcnn(3, 1, {L1, L2}, Vec(5, 0.0), 0.0);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("layer 2"), std::string::npos) << e.what();
  }
  const Dcnn ok(3, 1, {L1}, Vec(4, 0.0), 0.0);
  EXPECT_THROW(predict(ok, {1, 2}), ValidationError);
}

TEST(Forward, WidthChain) {
  std::mt19937_64 g(24);
  const Dcnn net = random_net(g, 5, 3, 4, false, 3);
  const auto& w = net.widths();
  ASSERT_EQ(w.size(), 5u);
  EXPECT_EQ(w[0], 5);
  for (int j = 1; j < 4; ++j) EXPECT_EQ(w[j], w[j - 1] + 3);
  EXPECT_EQ(w[4], (w[3] + 3) / 3);
}

TEST(Truncate, Examples) {
  EXPECT_EQ(truncate(0.5, 1), 0.5);
  EXPECT_EQ(truncate(-3, 1), -1);
  EXPECT_EQ(truncate(2.5, 2.5), 2.5);
  for (double y : {-10.0, -1.0, 0.3, 7.0}) EXPECT_EQ(truncate(truncate(y, 2), 2), truncate(y, 2));
}

TEST(FreeParams, Examples) {
  std::mt19937_64 g(25);
  EXPECT_EQ(count_free_params(random_net(g, 4, 2, 3, true)), 36);
  EXPECT_EQ(count_free_params(random_net(g, 4, 2, 1, true)), 16);
}

TEST(FreeParams, FormulaAndBoundOnGrid) {
  std::mt19937_64 g(26);
  for (int d = 1; d <= 8; ++d)
    for (int s = 1; s <= 5; ++s)
      for (int J = 1; J <= 6; ++J) {
        const Dcnn net = random_net(g, d, s, J, true);
        const long long p = count_free_params(net);
        EXPECT_EQ(p, 3LL * s * (J - 1) + s + 2 + 2LL * (d + J * s));
        if (s <= d) EXPECT_LE(p, 5LL * d * J + 2);
      }
}

TEST(FreeParams, RejectsUntiedOrDownsampled) {
  std::mt19937_64 g(27);
  EXPECT_THROW(count_free_params(random_net(g, 4, 2, 3, false)), ValidationError);
  EXPECT_THROW(count_free_params(random_net(g, 4, 2, 2, true, 2)), ValidationError);
}

TEST(BiasShape, IdenticalInMiddle) {
  // s = 2, d = 6: 1-based entries 2..5 equal
  EXPECT_TRUE(identical_in_middle({9, 1, 1, 1, 1, 7}, 2));
  EXPECT_FALSE(identical_in_middle({9, 1, 1, 2, 1, 7}, 2));
  EXPECT_TRUE(identical_in_middle({1, 2}, 3));  // vacuous
  ConvLayer L{FilterSeq{1.0, 1.0}, Vec{0, 1, 2, 3, 4}, BiasShape::kMid, std::nullopt};
  EXPECT_THROW(Dcnn(3, 2, {L}, Vec(5, 0.0), 0.0), ValidationError);
}

TEST(Serialize, RoundTrip) {
  std::mt19937_64 g(28);
  for (int t = 0; t < 20; ++t) {
    Dcnn net = random_net(g, 2 + t % 4, 1 + t % 3, 1 + t % 4, t % 2 == 0, t % 3 == 0 ? std::optional<int>(2) : std::nullopt);
    const Dcnn back = deserialize(serialize(net));
    EXPECT_TRUE(back == net);
    EXPECT_EQ(back.widths(), net.widths());
  }
  ConvLayer L{FilterSeq{1.0}, Vec{0, 0}, BiasShape::kFree, std::nullopt};
  const Dcnn m(1, 1, {L}, Vec{1, 0}, 0.0, 2.0);
  EXPECT_TRUE(deserialize(serialize(m)) == m);
}

TEST(Serialize, FieldOrder) {
  std::mt19937_64 g(29);
  const std::string text = serialize(random_net(g, 3, 2, 1, false));
  const auto pos = [&](const char* k) { return text.find(std::string("\"") + k + "\""); };
  EXPECT_LT(pos("input_dim"), pos("filter_len"));
  EXPECT_LT(pos("filter_len"), pos("layers"));
  EXPECT_LT(pos("filter"), pos("bias"));
  EXPECT_LT(pos("bias_shape"), pos("downsample"));
  EXPECT_LT(pos("layers"), pos("out_coeffs"));
  EXPECT_LT(pos("out_offset"), pos("truncation"));
}

TEST(Serialize, Errors) {
  try {
    deserialize("{}");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_STREQ(e.what(), "missing field input_dim");
  }
  try {
    deserialize("{\"input_dim\": 1, \"oops\": 2}");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("unknown field oops"), std::string::npos);
  }
  try {
    deserialize("{\"input_dim\": 1,, }");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("parse error at byte"), std::string::npos);
  }
  // width chain re-checked on load
  EXPECT_THROW(deserialize(R"({"input_dim":2,"filter_len":1,"layers":[{"filter":[1],"bias":[0],"bias_shape":"free","downsample":null}],"out_coeffs":[0],"out_offset":0,"truncation":null})"),
               ValidationError);
}
