#pragma once

// Quantization of real-valued sample vectors onto an unsigned lattice and
// Morton (Z-order) encoding of lattice points into a single 64-bit key.
//
// Bit layout: interleaving runs round-robin over the dimensions, low bits
// first, with dimension 0 in the least-significant slot of every round.
// Dimensions whose bit budget is exhausted drop out of later rounds. For two
// 3-bit dimensions this gives encode(x=1, y=4) == 33 and encode(5, 6) == 57.

#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace zebra {

struct MortonCode {
  std::uint64_t value = 0;

  friend constexpr auto operator<=>(MortonCode, MortonCode) = default;
};

using LatticePoint = std::vector<std::uint64_t>;

struct DimensionRange {
  double min_value = 0.0;
  double max_value = 1.0;
  unsigned bits = 16;

  friend bool operator==(const DimensionRange&, const DimensionRange&) = default;
};

class QuantizationConfig {
 public:
  static constexpr unsigned kMaxTotalBits = 64;

  // Throws InvalidInput unless every dimension has min < max (both finite),
  // bits >= 1, and the bit widths sum to at most 64.
  explicit QuantizationConfig(std::vector<DimensionRange> dims);

  // n identical dimensions.
  static QuantizationConfig uniform(std::size_t dims, double min_value, double max_value, unsigned bits);

  // Two dimensions over [-16, 16] m/s^2 at 16 bits each.
  static QuantizationConfig default_2d();

  std::size_t dims() const noexcept { return dims_.size(); }
  const DimensionRange& dim(std::size_t d) const { return dims_.at(d); }
  const std::vector<DimensionRange>& ranges() const noexcept { return dims_; }
  unsigned total_bits() const noexcept { return total_bits_; }

  // Largest lattice coordinate of dimension d, 2^bits - 1.
  std::uint64_t max_coord(std::size_t d) const;
  // Width of one quantization cell, (max - min) / (2^bits - 1).
  double step(std::size_t d) const;
  // Largest valid code, 2^total_bits - 1.
  std::uint64_t max_code() const noexcept;

  friend bool operator==(const QuantizationConfig&, const QuantizationConfig&) = default;

 private:
  std::vector<DimensionRange> dims_;
  unsigned total_bits_ = 0;
};

// One coordinate of quantize(); `top` is 2^bits - 1. Every code path that
// maps values to the lattice goes through here so they round identically.
inline std::uint64_t quantize_coord(double v, const DimensionRange& r, std::uint64_t top) noexcept {
  const double clamped = v < r.min_value ? r.min_value : (v > r.max_value ? r.max_value : v);
  const double scaled =
      std::floor((clamped - r.min_value) / (r.max_value - r.min_value) * static_cast<double>(top) + 0.5);
  return scaled >= static_cast<double>(top) ? top : static_cast<std::uint64_t>(scaled);
}

// Affine map to the lattice with round-half-up; out-of-range values clamp to
// the boundary cell. Throws InvalidInput on a length mismatch or NaN.
LatticePoint quantize(std::span<const double> values, const QuantizationConfig& config);

// Allocation-free form of quantize; `out` must have config.dims() elements.
void quantize_into(std::span<const double> values, const QuantizationConfig& config, std::span<std::uint64_t> out);

// Representative value of each cell, min + coord * step.
std::vector<double> dequantize(std::span<const std::uint64_t> point, const QuantizationConfig& config);

MortonCode morton_encode(std::span<const std::uint64_t> point, const QuantizationConfig& config);
LatticePoint morton_decode(MortonCode code, const QuantizationConfig& config);

// Inclusive code interval [encode(lo), encode(hi)] covering every lattice
// point of the box. Points outside the box may also map into the interval.
std::pair<MortonCode, MortonCode> box_to_code_range(std::span<const std::uint64_t> lo,
                                                    std::span<const std::uint64_t> hi,
                                                    const QuantizationConfig& config);

// True iff decode(code) lies component-wise within [lo, hi].
bool code_in_box(MortonCode code, std::span<const std::uint64_t> lo, std::span<const std::uint64_t> hi,
                 const QuantizationConfig& config);

// Mean |encode(p) - encode(q)| over all unordered pairs of lattice points
// that differ by one step in exactly one coordinate. Exhaustive, so limited
// to configs with total_bits <= 24.
double mean_neighbor_code_distance(const QuantizationConfig& config);

// Precomputed interleave masks for a config. Hot paths (ingest, index
// scans) use this instead of the free functions, which validate each call.
class MortonCodec {
 public:
  explicit MortonCodec(const QuantizationConfig& config);

  std::size_t dims() const noexcept { return lane_masks_.size(); }

  // Bits of the code owned by dimension d.
  std::uint64_t lane_mask(std::size_t d) const { return lane_masks_.at(d); }

  // No range checks; coordinates must already fit their bit widths.
  MortonCode encode_unchecked(std::span<const std::uint64_t> point) const noexcept;
  void decode_into(MortonCode code, std::span<std::uint64_t> out) const noexcept;

  // Coordinate c of dimension d moved into that dimension's code lanes. This
  // is order preserving, so per-dimension comparisons can run directly on
  // (code & lane_mask(d)).
  std::uint64_t spread(std::size_t d, std::uint64_t c) const noexcept;

 private:
  std::vector<std::uint64_t> lane_masks_;
};

// Box membership test on raw codes, without decoding.
class CodeBoxFilter {
 public:
  CodeBoxFilter(const MortonCodec& codec, std::span<const std::uint64_t> lo, std::span<const std::uint64_t> hi);

  bool contains(MortonCode code) const noexcept {
    for (const auto& lane : lanes_) {
      const std::uint64_t bits = code.value & lane.mask;
      if (bits < lane.lo || bits > lane.hi) return false;
    }
    return true;
  }

 private:
  struct Lane {
    std::uint64_t mask;
    std::uint64_t lo;
    std::uint64_t hi;
  };
  std::vector<Lane> lanes_;
};

}  // namespace zebra
