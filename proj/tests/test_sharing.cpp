#include <gtest/gtest.h>

#include <random>

#include "efflif/sharing.hpp"
#include "helpers.hpp"
#include "oracle.hpp"

using namespace efflif;

namespace {

using dtensor = basic_tensor<double>;

// Runs a block with constant weighted inputs per member.
std::vector<std::vector<std::vector<double>>> run_constant(sharing_scheme scheme, std::size_t members,
                                                           std::size_t channels,
                                                           const std::vector<std::vector<double>>& x,
                                                           std::size_t T,
                                                           std::vector<std::vector<std::vector<double>>>* u_trace = nullptr) {
  sharing_block<double> blk(scheme, members, channels, 1, {});
  std::vector<std::vector<std::vector<double>>> spikes(T);
  if (u_trace) u_trace->assign(T, {});
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t m = 0; m < members; ++m) {
      std::vector<double> u(channels), o(channels);
      blk.step_layer(m, x[m], u, o);
      spikes[t].push_back(o);
      if (u_trace) (*u_trace)[t].push_back(u);
    }
  return spikes;
}

}  // namespace

TEST(ChainLayout, BufferCountLaw) {
  const std::size_t m = 4, c = 8, n = 2;
  auto base = make_chain_layout({scheme_kind::baseline, 1}, m, c, 1);
  EXPECT_EQ(base.chains.size(), m);
  EXPECT_EQ(base.buffer_elems(), m * c);
  auto l = make_chain_layout({scheme_kind::cross_layer, 1}, m, c, 1);
  EXPECT_EQ(l.chains.size(), 1u);
  EXPECT_EQ(l.buffer_elems(), c);
  auto ch = make_chain_layout({scheme_kind::cross_channel, n}, m, c, 1);
  EXPECT_EQ(ch.chains.size(), m);
  EXPECT_EQ(ch.buffer_elems(), m * c / n);
  auto lc = make_chain_layout({scheme_kind::cross_layer_channel, n}, m, c, 1);
  EXPECT_EQ(lc.chains.size(), 1u);
  EXPECT_EQ(lc.buffer_elems(), c / n);
  EXPECT_EQ(lc.chains[0].size(), m * n);
  EXPECT_THROW(make_chain_layout({scheme_kind::cross_channel, 3}, 1, 8, 1), dimension_error);
}

TEST(CrossLayer, TwoLayerHandTrace) {
  std::vector<std::vector<std::vector<double>>> u;
  const auto s = run_constant({scheme_kind::cross_layer, 1}, 2, 1, {{0.8}, {0.8}}, 2, &u);
  EXPECT_DOUBLE_EQ(u[0][0][0], 0.8);
  EXPECT_EQ(s[0][0][0], 0.0);
  EXPECT_NEAR(u[0][1][0], 1.2, 1e-15);
  EXPECT_EQ(s[0][1][0], 1.0);
  EXPECT_NEAR(u[1][0][0], 0.9, 1e-15);
  EXPECT_EQ(s[1][0][0], 0.0);
  EXPECT_NEAR(u[1][1][0], 1.25, 1e-15);
  EXPECT_EQ(s[1][1][0], 1.0);
}

TEST(CrossChannel, TwoGroupHandTrace) {
  sharing_block<double> blk({scheme_kind::cross_channel, 2}, 1, 2, 1, {});
  const auto sp = forward_layer_crosschannel(blk, dtensor({2}, {0.9, 0.9}));
  EXPECT_FALSE(sp.get(0));
  EXPECT_TRUE(sp.get(1));
  EXPECT_NEAR(blk.carry_u(0)[0], 1.35, 1e-15);
  EXPECT_EQ(blk.carry_o(0)[0], 1.0);
  // the next consumer sees 1.35 - 1 = 0.35 before decay
  const auto sp2 = forward_layer_crosschannel(blk, dtensor({2}, {0.0, 0.0}));
  EXPECT_FALSE(sp2.get(0));
  EXPECT_NEAR(blk.carry_u(0)[0], 0.5 * (0.5 * 0.35), 1e-15);
}

TEST(Sharing, ZeroInputsStayQuiet) {
  for (auto scheme : {sharing_scheme{scheme_kind::baseline, 1}, sharing_scheme{scheme_kind::cross_layer, 1},
                      sharing_scheme{scheme_kind::cross_channel, 2}, sharing_scheme{scheme_kind::cross_layer_channel, 4}}) {
    std::vector<std::vector<std::vector<double>>> u;
    const auto s = run_constant(scheme, 3, 4, std::vector<std::vector<double>>(3, std::vector<double>(4, 0.0)), 4, &u);
    for (std::size_t t = 0; t < 4; ++t)
      for (std::size_t m = 0; m < 3; ++m)
        for (std::size_t i = 0; i < 4; ++i) {
          EXPECT_EQ(s[t][m][i], 0.0);
          EXPECT_EQ(u[t][m][i], 0.0);
        }
  }
}

TEST(Sharing, MemberOrderEnforced) {
  sharing_block<double> blk({scheme_kind::cross_layer, 1}, 2, 2, 1, {});
  std::vector<double> x(2), u(2), o(2);
  EXPECT_THROW(blk.step_layer(1, x, u, o), state_error);
  blk.step_layer(0, x, u, o);
  EXPECT_THROW(blk.step_layer(0, x, u, o), state_error);
  std::vector<double> bad(3);
  EXPECT_THROW(blk.step_layer(1, bad, u, o), dimension_error);
}

TEST(Sharing, DegenerateSchemesMatchBaseline) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> nd(0.6, 0.8);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::vector<double>> x(1, std::vector<double>(6));
    for (auto& v : x[0]) v = nd(rng);
    const auto base = run_constant({scheme_kind::baseline, 1}, 1, 6, x, 5);
    EXPECT_EQ(run_constant({scheme_kind::cross_layer, 1}, 1, 6, x, 5), base);
    EXPECT_EQ(run_constant({scheme_kind::cross_channel, 1}, 1, 6, x, 5), base);
    EXPECT_EQ(run_constant({scheme_kind::cross_layer_channel, 1}, 1, 6, x, 5), base);
  }
}

TEST(Sharing, CombinedReducesToSingleAxisSchemes) {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> nd(0.6, 0.8);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::vector<double>> x3(3, std::vector<double>(4));
    for (auto& row : x3)
      for (auto& v : row) v = nd(rng);
    // n = 1: combined == cross-layer
    EXPECT_EQ(run_constant({scheme_kind::cross_layer_channel, 1}, 3, 4, x3, 4),
              run_constant({scheme_kind::cross_layer, 1}, 3, 4, x3, 4));
    // m = 1: combined == cross-channel
    std::vector<std::vector<double>> x1(1, x3[0]);
    EXPECT_EQ(run_constant({scheme_kind::cross_layer_channel, 2}, 1, 4, x1, 4),
              run_constant({scheme_kind::cross_channel, 2}, 1, 4, x1, 4));
  }
}

TEST(Sharing, OrderMatters) {
  // Swapping the two groups' inputs changes the trace of a 2-group layer.
  const auto a = run_constant({scheme_kind::cross_channel, 2}, 1, 2, {{0.9, 0.3}}, 3);
  const auto b = run_constant({scheme_kind::cross_channel, 2}, 1, 2, {{0.3, 0.9}}, 3);
  std::vector<std::vector<std::vector<double>>> b_swapped = b;
  for (auto& t : b_swapped) std::swap(t[0][0], t[0][1]);
  EXPECT_NE(a, b_swapped);
}

// Full networks against the scalar oracle, spikes and membranes.
class OracleTrace : public ::testing::TestWithParam<sharing_scheme> {};

TEST_P(OracleTrace, EngineMatchesScalarOracle) {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    auto c = testing_util::make_random_case(GetParam(), seed, 5);
    for (auto fire : {fire_mode::spike, fire_mode::relaxed}) {
      network_engine<double> eng(c.spec, {fire, backward_mode::cached, false});
      const auto logits = eng.forward(c.model, c.input);
      const auto tr = oracle::run(testing_util::to_oracle(c.spec, c.model, fire == fire_mode::relaxed),
                                  testing_util::to_double(c.input));
      for (std::size_t t = 0; t < c.spec.timesteps; ++t)
        for (std::size_t l = 0; l < c.spec.spiking_layers(); ++l) {
          const auto u = eng.membrane(l, t);
          const auto o = eng.outputs(l, t);
          for (std::size_t i = 0; i < u.size(); ++i) {
            ASSERT_NEAR(u[i], tr.u[t][l][i], 1e-12) << "seed " << seed << " t " << t << " l " << l;
            ASSERT_NEAR(o[i], tr.o[t][l][i], 1e-12);
          }
        }
      for (std::size_t k = 0; k < logits.size(); ++k) EXPECT_NEAR(logits[k], tr.logits[k], 1e-10);
    }
  }
}

TEST_P(OracleTrace, HardResetMatchesOracle) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto c = testing_util::make_random_case(GetParam(), seed, 5);
    c.spec.lif.reset = reset_mode::hard;
    network_engine<double> eng(c.spec, {fire_mode::spike, backward_mode::cached, false});
    const auto logits = eng.forward(c.model, c.input);
    const auto tr = oracle::run(testing_util::to_oracle(c.spec, c.model, false), testing_util::to_double(c.input));
    for (std::size_t k = 0; k < logits.size(); ++k) EXPECT_NEAR(logits[k], tr.logits[k], 1e-10);
  }
}

INSTANTIATE_TEST_SUITE_P(Schemes, OracleTrace,
                         ::testing::Values(sharing_scheme{scheme_kind::baseline, 1},
                                           sharing_scheme{scheme_kind::cross_layer, 1},
                                           sharing_scheme{scheme_kind::cross_channel, 2},
                                           sharing_scheme{scheme_kind::cross_channel, 4},
                                           sharing_scheme{scheme_kind::cross_layer_channel, 2}),
                         [](const auto& info) {
                           std::string s = label(info.param);
                           for (auto& ch : s)
                             if (!std::isalnum(static_cast<unsigned char>(ch))) ch = '_';
                           return s;
                         });
