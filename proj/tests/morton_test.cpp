#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <vector>

#include "support.hpp"
#include "zebra/error.hpp"
#include "zebra/morton.hpp"

namespace zebra {
namespace {

using testing::naive_encode;

// Two 3-bit dimensions: the 8x8 grid of the corner example.
QuantizationConfig grid8() { return QuantizationConfig::uniform(2, 0.0, 7.0, 3); }

MortonCode enc(std::uint64_t x, std::uint64_t y) {
  const std::uint64_t p[] = {x, y};
  return morton_encode(p, grid8());
}

TEST(Morton, CornerCodes) {
  EXPECT_EQ(enc(1, 4).value, 33u);
  EXPECT_EQ(enc(5, 6).value, 57u);
  EXPECT_EQ(morton_decode(MortonCode{33}, grid8()), (LatticePoint{1, 4}));
  EXPECT_EQ(morton_decode(MortonCode{57}, grid8()), (LatticePoint{5, 6}));
}

TEST(Morton, OriginIsZero) {
  const auto config = QuantizationConfig::uniform(4, -1.0, 1.0, 9);
  const LatticePoint zero(4, 0);
  EXPECT_EQ(morton_encode(zero, config).value, 0u);
  EXPECT_EQ(morton_decode(MortonCode{0}, config), zero);
}

TEST(Morton, MatchesNaiveInterleaveOnUnequalWidths) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 5;
    std::vector<DimensionRange> dims;
    std::vector<unsigned> bits;
    unsigned budget = 64;
    for (std::size_t d = 0; d < n; ++d) {
      const unsigned b = 1 + static_cast<unsigned>(rng() % std::min<unsigned>(budget - (n - d - 1), 24));
      budget -= b;
      bits.push_back(b);
      dims.push_back({0.0, 1.0, b});
    }
    const QuantizationConfig config(dims);
    for (int k = 0; k < 50; ++k) {
      LatticePoint p(n);
      for (std::size_t d = 0; d < n; ++d) p[d] = rng() & config.max_coord(d);
      ASSERT_EQ(morton_encode(p, config).value, naive_encode(p, bits));
    }
  }
}

TEST(Morton, ExhaustiveRoundTrip16Bits) {
  const auto config = QuantizationConfig::uniform(2, 0.0, 1.0, 8);
  for (std::uint64_t c = 0; c < (1u << 16); ++c) {
    const auto p = morton_decode(MortonCode{c}, config);
    ASSERT_EQ(morton_encode(p, config).value, c);
  }
}

TEST(Morton, ExhaustiveRoundTripUnequal16Bits) {
  const QuantizationConfig config({{0.0, 1.0, 3}, {0.0, 1.0, 8}, {0.0, 1.0, 5}});
  for (std::uint64_t c = 0; c < (1u << 16); ++c) {
    const auto p = morton_decode(MortonCode{c}, config);
    ASSERT_EQ(morton_encode(p, config).value, c);
  }
}

TEST(Morton, RandomRoundTrip64Bits) {
  const std::vector<QuantizationConfig> configs = {
      QuantizationConfig::uniform(2, 0.0, 1.0, 32),
      QuantizationConfig::uniform(4, 0.0, 1.0, 16),
      QuantizationConfig({{0.0, 1.0, 21}, {0.0, 1.0, 21}, {0.0, 1.0, 22}}),
      QuantizationConfig::uniform(1, 0.0, 1.0, 64),
  };
  std::mt19937_64 rng(5);
  for (const auto& config : configs) {
    const MortonCodec codec(config);
    LatticePoint p(config.dims());
    LatticePoint back(config.dims());
    for (int i = 0; i < 250000; ++i) {
      for (std::size_t d = 0; d < p.size(); ++d) p[d] = rng() & config.max_coord(d);
      codec.decode_into(codec.encode_unchecked(p), back);
      ASSERT_EQ(back, p);
    }
  }
}

TEST(Morton, RejectsOutOfRangeInput) {
  const LatticePoint too_big = {8, 0};
  EXPECT_THROW(morton_encode(too_big, grid8()), InvalidInput);
  const LatticePoint wrong_dims = {1, 2, 3};
  EXPECT_THROW(morton_encode(wrong_dims, grid8()), InvalidInput);
  EXPECT_THROW(morton_decode(MortonCode{64}, grid8()), InvalidInput);
}

TEST(Morton, ConfigValidation) {
  EXPECT_THROW(QuantizationConfig({}), InvalidInput);
  EXPECT_THROW(QuantizationConfig({{1.0, 1.0, 8}}), InvalidInput);
  EXPECT_THROW(QuantizationConfig({{2.0, 1.0, 8}}), InvalidInput);
  EXPECT_THROW(QuantizationConfig({{0.0, 1.0, 0}}), InvalidInput);
  EXPECT_THROW(QuantizationConfig({{0.0, 1.0, 40}, {0.0, 1.0, 25}}), InvalidInput);
  EXPECT_THROW(QuantizationConfig({{0.0, std::numeric_limits<double>::infinity(), 8}}), InvalidInput);
  EXPECT_NO_THROW(QuantizationConfig({{0.0, 1.0, 40}, {0.0, 1.0, 24}}));
}

TEST(Morton, BoxRange) {
  const LatticePoint lo = {1, 4};
  const LatticePoint hi = {5, 6};
  const auto [a, b] = box_to_code_range(lo, hi, grid8());
  EXPECT_EQ(a.value, 33u);
  EXPECT_EQ(b.value, 57u);

  const LatticePoint p = {3, 3};
  const auto [c, d] = box_to_code_range(p, p, grid8());
  EXPECT_EQ(c, enc(3, 3));
  EXPECT_EQ(d, enc(3, 3));

  EXPECT_THROW(box_to_code_range(hi, lo, grid8()), InvalidInput);
}

TEST(Morton, NoFalseNegativesOnEveryBoxOf8x8Grid) {
  std::size_t boxes = 0;
  for (std::uint64_t x0 = 0; x0 < 8; ++x0)
    for (std::uint64_t x1 = x0; x1 < 8; ++x1)
      for (std::uint64_t y0 = 0; y0 < 8; ++y0)
        for (std::uint64_t y1 = y0; y1 < 8; ++y1) {
          ++boxes;
          const LatticePoint lo = {x0, y0};
          const LatticePoint hi = {x1, y1};
          const auto [a, b] = box_to_code_range(lo, hi, grid8());
          for (std::uint64_t x = x0; x <= x1; ++x)
            for (std::uint64_t y = y0; y <= y1; ++y) {
              const auto c = enc(x, y);
              ASSERT_TRUE(a <= c && c <= b) << "point (" << x << "," << y << ") box " << x0 << x1 << y0 << y1;
            }
        }
  EXPECT_EQ(boxes, 1296u);
}

TEST(Morton, FalsePositivesOfCornerBox) {
  const LatticePoint lo = {1, 4};
  const LatticePoint hi = {5, 6};
  // Brute force over the grid with the reference interleave.
  std::set<std::uint64_t> expected;
  for (std::uint64_t x = 0; x < 8; ++x)
    for (std::uint64_t y = 0; y < 8; ++y) {
      const auto c = naive_encode({x, y}, {3, 3});
      const bool inside = x >= 1 && x <= 5 && y >= 4 && y <= 6;
      if (c >= 33 && c <= 57 && !inside) expected.insert(c);
    }
  std::set<std::uint64_t> flagged;
  for (std::uint64_t c = 33; c <= 57; ++c) {
    if (!code_in_box(MortonCode{c}, lo, hi, grid8())) flagged.insert(c);
  }
  EXPECT_EQ(flagged, expected);
  EXPECT_EQ(flagged, (std::set<std::uint64_t>{34, 40, 42, 43, 46, 47, 52, 53, 54, 55}));
}

TEST(Morton, CodeInBox) {
  const LatticePoint lo = {1, 4};
  const LatticePoint hi = {5, 6};
  EXPECT_TRUE(code_in_box(MortonCode{33}, lo, hi, grid8()));
  EXPECT_FALSE(code_in_box(enc(7, 5), lo, hi, grid8()));
  EXPECT_FALSE(code_in_box(MortonCode{0}, lo, hi, grid8()));
}

TEST(Morton, CodeFilterAgreesWithDecodedComparison) {
  const QuantizationConfig config({{0.0, 1.0, 5}, {0.0, 1.0, 7}, {0.0, 1.0, 4}});
  const MortonCodec codec(config);
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    LatticePoint lo(3);
    LatticePoint hi(3);
    for (std::size_t d = 0; d < 3; ++d) {
      auto a = rng() & config.max_coord(d);
      auto b = rng() & config.max_coord(d);
      if (a > b) std::swap(a, b);
      lo[d] = a;
      hi[d] = b;
    }
    const CodeBoxFilter filter(codec, lo, hi);
    for (int k = 0; k < 200; ++k) {
      const MortonCode code{rng() & config.max_code()};
      const auto p = morton_decode(code, config);
      bool inside = true;
      for (std::size_t d = 0; d < 3; ++d) inside = inside && lo[d] <= p[d] && p[d] <= hi[d];
      ASSERT_EQ(filter.contains(code), inside);
    }
  }
}

TEST(Morton, NeighbourDistanceMatchesOracle) {
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::uint64_t x = 0; x < 8; ++x)
    for (std::uint64_t y = 0; y < 8; ++y) {
      const auto c = static_cast<double>(naive_encode({x, y}, {3, 3}));
      if (x + 1 < 8) {
        const auto n = static_cast<double>(naive_encode({x + 1, y}, {3, 3}));
        EXPECT_GE(std::abs(c - n), 1.0);
        sum += std::abs(c - n);
        ++pairs;
      }
      if (y + 1 < 8) {
        const auto n = static_cast<double>(naive_encode({x, y + 1}, {3, 3}));
        EXPECT_GE(std::abs(c - n), 1.0);
        sum += std::abs(c - n);
        ++pairs;
      }
    }
  EXPECT_EQ(pairs, 112u);
  EXPECT_DOUBLE_EQ(mean_neighbor_code_distance(grid8()), sum / static_cast<double>(pairs));
  EXPECT_THROW(mean_neighbor_code_distance(QuantizationConfig::uniform(2, 0.0, 1.0, 13)), InvalidInput);
}

TEST(Quantize, CentreOfSymmetricRange) {
  const auto config = QuantizationConfig::uniform(2, -10.0, 10.0, 8);
  const double v[] = {0.0, 0.0};
  EXPECT_EQ(quantize(v, config), (LatticePoint{128, 128}));
}

TEST(Quantize, BoundsAndClamping) {
  const QuantizationConfig config({{-10.0, 10.0, 8}, {0.0, 5.0, 12}});
  const double lo[] = {-10.0, 0.0};
  const double hi[] = {10.0, 5.0};
  const double beyond[] = {-1e9, 1e9};
  EXPECT_EQ(quantize(lo, config), (LatticePoint{0, 0}));
  EXPECT_EQ(quantize(hi, config), (LatticePoint{255, 4095}));
  EXPECT_EQ(quantize(beyond, config), (LatticePoint{0, 4095}));
  const double inf[] = {std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  EXPECT_EQ(quantize(inf, config), (LatticePoint{255, 0}));
}

TEST(Quantize, Errors) {
  const auto config = QuantizationConfig::uniform(2, -10.0, 10.0, 8);
  const double one[] = {0.0};
  const double nan[] = {0.0, std::nan("")};
  EXPECT_THROW(quantize(one, config), InvalidInput);
  EXPECT_THROW(quantize(nan, config), InvalidInput);
}

TEST(Quantize, MatchesFormulaAndErrorBound) {
  const QuantizationConfig config({{-16.0, 16.0, 16}, {-3.0, 7.0, 5}});
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u0(-16.0, 16.0);
  std::uniform_real_distribution<double> u1(-3.0, 7.0);
  for (int i = 0; i < 100000; ++i) {
    const double v[] = {u0(rng), u1(rng)};
    const auto p = quantize(v, config);
    const auto back = dequantize(p, config);
    for (std::size_t d = 0; d < 2; ++d) {
      const auto& r = config.dim(d);
      const double top = std::ldexp(1.0, static_cast<int>(r.bits)) - 1.0;
      const double expected = std::floor((v[d] - r.min_value) / (r.max_value - r.min_value) * top + 0.5);
      ASSERT_EQ(static_cast<double>(p[d]), expected);
      ASSERT_LE(std::abs(back[d] - v[d]), config.step(d) / 2.0 + 1e-12);
    }
  }
}

TEST(Quantize, Monotone) {
  const auto config = QuantizationConfig::uniform(1, -1.0, 1.0, 10);
  std::uint64_t prev = 0;
  for (int i = -1200; i <= 1200; ++i) {
    const double v[] = {i / 1000.0};
    const auto c = quantize(v, config)[0];
    ASSERT_GE(c, prev);
    prev = c;
  }
}

}  // namespace
}  // namespace zebra
