#include <gtest/gtest.h>

#include <random>

#include "mfce/convgeom.hpp"
#include "mfce/error.hpp"
#include "mfce/model.hpp"
#include "oracles.hpp"

using namespace mfce;

namespace {

ModelSpec single_one_by_one() {
  ModelSpec spec;
  spec.mel_bins = 1;
  spec.num_targets = 4;
  spec.layers = {LayerSpec::conv(4, 1, 1)};
  return spec;
}

}  // namespace

TEST(IntrinsicLength, ToySpecIsSeven) { EXPECT_EQ(intrinsic_length(toy_spec()), 7); }

TEST(IntrinsicLength, SingleOneByOneIsOne) { EXPECT_EQ(intrinsic_length(single_one_by_one()), 1); }

TEST(IntrinsicLength, PaperShapeIsFiftyThree) {
  EXPECT_EQ(intrinsic_length(paper_shape_spec()), 53);
  PaperShapeOptions no_dilation;
  no_dilation.time_dilation = false;
  EXPECT_EQ(intrinsic_length(paper_shape_spec(no_dilation)), 29);
}

TEST(IntrinsicLength, MatchesForwardShapeOracle) {
  PaperShapeOptions small;
  small.mel_bins = 4;
  small.num_targets = 3;
  small.first_width = 1;
  small.widths = {1, 1, 1, 1};
  small.bottleneck = 2;
  Network paper = Network::build(paper_shape_spec(small), 1);
  EXPECT_EQ(mfce::testing::brute_force_intrinsic_length(paper), 53);
  Network toy = Network::build(toy_spec(4, 3, 2), 1);
  EXPECT_EQ(mfce::testing::brute_force_intrinsic_length(toy), 7);
}

TEST(IntrinsicLength, InvariantUnderTimelessLayers) {
  std::mt19937_64 rng(17);
  for (const ModelSpec& base : mfce::testing::assorted_specs()) {
    const int l_m = intrinsic_length(base);
    for (int trial = 0; trial < 5; ++trial) {
      ModelSpec spec = base;
      std::uniform_int_distribution<std::size_t> pos(0, spec.layers.size() - 1);
      const std::size_t at = pos(rng);
      // A relu keeps shapes; a 1x1 pointwise must keep the incoming channel count.
      const std::vector<LayerGeometry> g = layer_geometry(spec);
      if (trial % 2 == 0) {
        spec.layers.insert(spec.layers.begin() + std::ptrdiff_t(at), LayerSpec::relu());
      } else {
        spec.layers.insert(spec.layers.begin() + std::ptrdiff_t(at),
                           LayerSpec::pointwise(g[at].in_channels));
      }
      EXPECT_EQ(intrinsic_length(spec), l_m);
    }
  }
}

TEST(OutputCount, FigureTwoToy) { EXPECT_EQ(output_count(toy_spec(), 15), 9); }

TEST(OutputCount, ExactFitGivesOne) { EXPECT_EQ(output_count(toy_spec(), 7), 1); }

TEST(OutputCount, PaperShapeDeltaEight) { EXPECT_EQ(output_count(paper_shape_spec(), 61), 9); }

TEST(OutputCount, ShortWindowFails) {
  EXPECT_THROW(output_count(toy_spec(), 6), GeometryError);
}

TEST(OutputCount, AgreesWithForwardForEveryWindow) {
  for (const ModelSpec& spec : mfce::testing::assorted_specs()) {
    Network net = Network::build(spec, 3);
    const int l_m = net.intrinsic_length();
    for (int l_i = l_m; l_i <= l_m + 32; ++l_i) {
      Tensor window = Tensor::zeros(
          {std::size_t(spec.input_channels), std::size_t(l_i), std::size_t(spec.mel_bins)});
      EXPECT_EQ(int(net.forward(window).rows()), output_count(spec, l_i));
    }
  }
}

TEST(UtterancePadding, Splits) {
  EXPECT_EQ(utterance_padding(toy_spec(), 10), (Padding{3, 3}));
  EXPECT_EQ(utterance_padding(paper_shape_spec(), 10), (Padding{26, 26}));
  EXPECT_EQ(utterance_padding(single_one_by_one(), 10), (Padding{0, 0}));
  ModelSpec even;
  even.mel_bins = 1;
  even.num_targets = 2;
  even.layers = {LayerSpec::conv(2, 4, 1)};
  EXPECT_EQ(utterance_padding(even, 5), (Padding{1, 2}));
}

TEST(UtterancePadding, ForwardYieldsOneRowPerFrame) {
  std::mt19937_64 rng(9);
  for (const ModelSpec& spec : mfce::testing::assorted_specs()) {
    Network net = Network::build(spec, 4);
    for (std::size_t l_u = 1; l_u <= 100; l_u += 11) {
      auto u = mfce::testing::random_utterance(l_u, spec, rng);
      EXPECT_EQ(net.forward_utterance(u.features).rows(), l_u);
    }
  }
}

TEST(Validate, RejectsBadSpecs) {
  ModelSpec spec = toy_spec();
  spec.num_targets = 9;
  EXPECT_THROW(validate(spec), SpecError);

  ModelSpec no_conv;
  no_conv.mel_bins = 1;
  no_conv.num_targets = 2;
  no_conv.layers = {LayerSpec::pointwise(2)};
  EXPECT_THROW(validate(no_conv), SpecError);

  ModelSpec zero_dilation = toy_spec();
  zero_dilation.layers[0].dilation_t = 0;
  EXPECT_THROW(validate(zero_dilation), SpecError);

  ModelSpec trailing_relu = toy_spec();
  trailing_relu.layers.push_back(LayerSpec::relu());
  EXPECT_THROW(validate(trailing_relu), SpecError);

  ModelSpec uncollapsed = toy_spec();
  uncollapsed.layers.back().collapse_freq = false;
  EXPECT_THROW(validate(uncollapsed), SpecError);
}

TEST(LayerGeometry, ReportsReceptiveFieldGrowth) {
  const auto g = layer_geometry(paper_shape_spec());
  EXPECT_EQ(g.front().time_reduction, 4);
  EXPECT_EQ(g.back().receptive_field, 53);
  int convs = 0;
  for (const auto& layer : g) convs += layer.layer.kind == LayerKind::conv;
  EXPECT_EQ(convs, 13);
}
