#include <gtest/gtest.h>

#include <random>

#include "efflif/tensor.hpp"

using namespace efflif;

TEST(Tensor, RejectsBadShapes) {
  EXPECT_THROW(tensor({2, 0}), dimension_error);
  EXPECT_THROW(tensor({2, 2}, {1, 2, 3}), dimension_error);
  EXPECT_NO_THROW(tensor({2, 2}, {1, 2, 3, 4}));
}

TEST(BitTensor, PackUnpackRoundTrip) {
  std::mt19937 rng(3);
  std::vector<float> v(37);
  for (auto& x : v) x = static_cast<float>(rng() & 1u);
  const auto b = bit_tensor::pack({37}, v);
  EXPECT_EQ(b.unpack<float>(), v);
  const auto again = bit_tensor::pack({37}, b.unpack<float>());
  EXPECT_TRUE(std::equal(b.bytes().begin(), b.bytes().end(), again.bytes().begin(), again.bytes().end()));
  EXPECT_EQ(b.bytes().size(), 5u);
}

TEST(BitTensor, RejectsNonBinary) {
  EXPECT_THROW(bit_tensor::pack({2}, std::vector<float>{1.0f, 0.5f}), numeric_error);
}

TEST(Matvec, MaskedRowSums) {
  const tensor w({2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(matvec(w, bit_tensor::pack({2}, std::vector<float>{1, 0})).values(), (std::vector<float>{1, 3}));
  EXPECT_EQ(matvec(w, bit_tensor::pack({2}, std::vector<float>{0, 0})).values(), (std::vector<float>{0, 0}));
  const tensor c({1, 2}, {0.5f, -0.5f});
  EXPECT_EQ(matvec(c, bit_tensor::pack({2}, std::vector<float>{1, 1})).values(), (std::vector<float>{0.0f}));
}

TEST(Matvec, ShapeMismatchNamesShapes) {
  const tensor w({2, 3});
  try {
    matvec(w, bit_tensor({2}));
    FAIL();
  } catch (const dimension_error& e) {
    EXPECT_NE(std::string(e.what()).find("[2x3]"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("[2]"), std::string::npos) << e.what();
  }
}

TEST(Matvec, DistributesOverDisjointSpikes) {
  std::mt19937 rng(11);
  std::normal_distribution<float> nd;
  tensor w({5, 16});
  for (auto& v : w.data()) v = nd(rng);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<float> a(16), b(16), ab(16);
    for (int i = 0; i < 16; ++i) {
      const auto r = rng() % 3;
      a[i] = r == 1;
      b[i] = r == 2;
      ab[i] = a[i] + b[i];
    }
    const auto ya = matvec(w, bit_tensor::pack({16}, a));
    const auto yb = matvec(w, bit_tensor::pack({16}, b));
    const auto yab = matvec(w, bit_tensor::pack({16}, ab));
    for (int i = 0; i < 5; ++i) EXPECT_NEAR(yab[i], ya[i] + yb[i], 1e-5);
  }
}

TEST(Conv1d, HandEvaluated) {
  auto in = [](std::vector<float> v) { return bit_tensor::pack({1, v.size()}, v); };
  EXPECT_EQ(conv1d(tensor({1, 1, 2}, {1, 1}), in({1, 0, 1}), 0).values(), (std::vector<float>{1, 1}));
  EXPECT_EQ(conv1d(tensor({1, 1, 1}, {1}), in({0, 1, 0}), 0).values(), (std::vector<float>{0, 1, 0}));
  EXPECT_EQ(conv1d(tensor({1, 1, 2}, {1, -1}), in({1, 1}), 0).values(), (std::vector<float>{0}));
  // padding extends both ends with zeros
  EXPECT_EQ(conv1d(tensor({1, 1, 3}, {1, 2, 3}), in({1, 0, 0}), 1).values(), (std::vector<float>{2, 1, 0}));
  EXPECT_THROW(conv1d(tensor({1, 1, 4}), in({1, 0}), 0), dimension_error);
}

TEST(Conv1d, MatchesNaiveMultiChannel) {
  std::mt19937 rng(5);
  std::normal_distribution<float> nd;
  const std::size_t cin = 3, cout = 2, k = 3, len = 7, pad = 1;
  tensor w({cout, cin, k});
  for (auto& v : w.data()) v = nd(rng);
  std::vector<float> x(cin * len);
  for (auto& v : x) v = static_cast<float>(rng() & 1u);
  const auto y = conv1d(w, bit_tensor::pack({cin, len}, x), pad);
  ASSERT_EQ(y.shape(), (shape_t{cout, len}));
  for (std::size_t co = 0; co < cout; ++co)
    for (std::size_t p = 0; p < len; ++p) {
      double s = 0;
      for (std::size_t ci = 0; ci < cin; ++ci)
        for (std::size_t j = 0; j < k; ++j) {
          const long q = static_cast<long>(p + j) - static_cast<long>(pad);
          if (q >= 0 && q < static_cast<long>(len)) s += w[(co * cin + ci) * k + j] * x[ci * len + q];
        }
      EXPECT_NEAR(y[co * len + p], s, 1e-5);
    }
}

TEST(ChannelSplit, SplitConcatIdentity) {
  const tensor x({4, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
  const auto parts = channel_split(x, 2);
  ASSERT_EQ(parts.size(), 2u);
  EXPECT_EQ(parts[0].shape(), (shape_t{2, 2}));
  EXPECT_EQ(parts[1].values(), (std::vector<float>{5, 6, 7, 8}));
  EXPECT_EQ(channel_concat(parts), x);
  const auto one = channel_split(x, 1);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0], x);
  for (std::size_t n : {1u, 2u, 4u}) EXPECT_EQ(channel_concat(channel_split(x, n)), x);
  EXPECT_THROW(channel_split(tensor({3, 2}), 2), dimension_error);
}
