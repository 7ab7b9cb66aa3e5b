#include "zebra/morton.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#if defined(__BMI2__)
#include <immintrin.h>
#endif

#include "zebra/error.hpp"

namespace zebra {

namespace {

std::uint64_t low_mask(unsigned bits) { return bits >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << bits) - 1; }

// Scatter the low bits of `src` into the set positions of `mask`.
std::uint64_t deposit_bits(std::uint64_t src, std::uint64_t mask) {
#if defined(__BMI2__)
  return _pdep_u64(src, mask);
#else
  std::uint64_t out = 0;
  for (std::uint64_t bit = 1; mask != 0; bit <<= 1) {
    if (src & bit) out |= mask & (~mask + 1);
    mask &= mask - 1;
  }
  return out;
#endif
}

// Gather the bits of `src` at the set positions of `mask` into the low bits.
std::uint64_t extract_bits(std::uint64_t src, std::uint64_t mask) {
#if defined(__BMI2__)
  return _pext_u64(src, mask);
#else
  std::uint64_t out = 0;
  for (std::uint64_t bit = 1; mask != 0; bit <<= 1) {
    if (src & mask & (~mask + 1)) out |= bit;
    mask &= mask - 1;
  }
  return out;
#endif
}

void check_point(std::span<const std::uint64_t> point, const QuantizationConfig& config, const char* what) {
  if (point.size() != config.dims()) {
    throw InvalidInput(std::string(what) + ": point has " + std::to_string(point.size()) + " coordinates, config has " +
                       std::to_string(config.dims()) + " dimensions");
  }
  for (std::size_t d = 0; d < point.size(); ++d) {
    if (point[d] > config.max_coord(d)) {
      throw InvalidInput(std::string(what) + ": coordinate " + std::to_string(point[d]) + " of dimension " +
                         std::to_string(d) + " exceeds " + std::to_string(config.dim(d).bits) + " bits");
    }
  }
}

void check_box(std::span<const std::uint64_t> lo, std::span<const std::uint64_t> hi, const QuantizationConfig& config) {
  check_point(lo, config, "box lower corner");
  check_point(hi, config, "box upper corner");
  for (std::size_t d = 0; d < lo.size(); ++d) {
    if (lo[d] > hi[d]) throw InvalidInput("inverted box in dimension " + std::to_string(d));
  }
}

}  // namespace

QuantizationConfig::QuantizationConfig(std::vector<DimensionRange> dims) : dims_(std::move(dims)) {
  if (dims_.empty()) throw InvalidInput("quantization config needs at least one dimension");
  unsigned total = 0;
  for (std::size_t d = 0; d < dims_.size(); ++d) {
    const auto& r = dims_[d];
    if (!std::isfinite(r.min_value) || !std::isfinite(r.max_value) || !(r.min_value < r.max_value)) {
      throw InvalidInput("dimension " + std::to_string(d) + ": min_value must be below max_value");
    }
    if (r.bits < 1 || r.bits > kMaxTotalBits) {
      throw InvalidInput("dimension " + std::to_string(d) + ": bits must be in [1, 64]");
    }
    total += r.bits;
  }
  if (total > kMaxTotalBits) {
    throw InvalidInput("total bit width " + std::to_string(total) + " exceeds 64");
  }
  total_bits_ = total;
}

QuantizationConfig QuantizationConfig::uniform(std::size_t dims, double min_value, double max_value, unsigned bits) {
  return QuantizationConfig(std::vector<DimensionRange>(dims, DimensionRange{min_value, max_value, bits}));
}

QuantizationConfig QuantizationConfig::default_2d() { return uniform(2, -16.0, 16.0, 16); }

std::uint64_t QuantizationConfig::max_coord(std::size_t d) const { return low_mask(dim(d).bits); }

double QuantizationConfig::step(std::size_t d) const {
  const auto& r = dim(d);
  return (r.max_value - r.min_value) / static_cast<double>(max_coord(d));
}

std::uint64_t QuantizationConfig::max_code() const noexcept { return low_mask(total_bits_); }

void quantize_into(std::span<const double> values, const QuantizationConfig& config, std::span<std::uint64_t> out) {
  if (values.size() != config.dims() || out.size() != config.dims()) {
    throw InvalidInput("quantize: vector has " + std::to_string(values.size()) + " values, config has " +
                       std::to_string(config.dims()) + " dimensions");
  }
  for (std::size_t d = 0; d < values.size(); ++d) {
    const auto& r = config.dim(d);
    const double v = values[d];
    if (std::isnan(v)) throw InvalidInput("quantize: NaN in dimension " + std::to_string(d));
    out[d] = quantize_coord(v, r, config.max_coord(d));
  }
}

LatticePoint quantize(std::span<const double> values, const QuantizationConfig& config) {
  LatticePoint point(config.dims());
  quantize_into(values, config, point);
  return point;
}

std::vector<double> dequantize(std::span<const std::uint64_t> point, const QuantizationConfig& config) {
  check_point(point, config, "dequantize");
  std::vector<double> values(point.size());
  for (std::size_t d = 0; d < point.size(); ++d) {
    values[d] = config.dim(d).min_value + static_cast<double>(point[d]) * config.step(d);
  }
  return values;
}

MortonCode morton_encode(std::span<const std::uint64_t> point, const QuantizationConfig& config) {
  check_point(point, config, "morton_encode");
  return MortonCodec(config).encode_unchecked(point);
}

LatticePoint morton_decode(MortonCode code, const QuantizationConfig& config) {
  if (code.value > config.max_code()) {
    throw InvalidInput("morton_decode: code " + std::to_string(code.value) + " exceeds " +
                       std::to_string(config.total_bits()) + " bits");
  }
  LatticePoint point(config.dims());
  MortonCodec(config).decode_into(code, point);
  return point;
}

std::pair<MortonCode, MortonCode> box_to_code_range(std::span<const std::uint64_t> lo,
                                                    std::span<const std::uint64_t> hi,
                                                    const QuantizationConfig& config) {
  check_box(lo, hi, config);
  const MortonCodec codec(config);
  return {codec.encode_unchecked(lo), codec.encode_unchecked(hi)};
}

bool code_in_box(MortonCode code, std::span<const std::uint64_t> lo, std::span<const std::uint64_t> hi,
                 const QuantizationConfig& config) {
  check_box(lo, hi, config);
  if (code.value > config.max_code()) throw InvalidInput("code_in_box: code out of range");
  const MortonCodec codec(config);
  return CodeBoxFilter(codec, lo, hi).contains(code);
}

double mean_neighbor_code_distance(const QuantizationConfig& config) {
  if (config.total_bits() > 24) throw InvalidInput("mean_neighbor_code_distance: total_bits must be <= 24");
  const MortonCodec codec(config);
  const std::size_t n = config.dims();
  LatticePoint p(n, 0);
  LatticePoint q(n);
  double sum = 0.0;
  std::uint64_t pairs = 0;
  for (std::uint64_t code = 0; code <= config.max_code(); ++code) {
    codec.decode_into(MortonCode{code}, p);
    for (std::size_t d = 0; d < n; ++d) {
      if (p[d] == config.max_coord(d)) continue;
      q = p;
      ++q[d];
      const std::uint64_t other = codec.encode_unchecked(q).value;
      sum += static_cast<double>(other > code ? other - code : code - other);
      ++pairs;
    }
  }
  return pairs ? sum / static_cast<double>(pairs) : 0.0;
}

MortonCodec::MortonCodec(const QuantizationConfig& config) : lane_masks_(config.dims(), 0) {
  unsigned widest = 0;
  for (const auto& r : config.ranges()) widest = std::max(widest, r.bits);
  unsigned position = 0;
  for (unsigned round = 0; round < widest; ++round) {
    for (std::size_t d = 0; d < config.dims(); ++d) {
      if (round < config.dim(d).bits) lane_masks_[d] |= std::uint64_t{1} << position++;
    }
  }
}

MortonCode MortonCodec::encode_unchecked(std::span<const std::uint64_t> point) const noexcept {
  std::uint64_t code = 0;
  for (std::size_t d = 0; d < lane_masks_.size(); ++d) code |= deposit_bits(point[d], lane_masks_[d]);
  return MortonCode{code};
}

void MortonCodec::decode_into(MortonCode code, std::span<std::uint64_t> out) const noexcept {
  for (std::size_t d = 0; d < lane_masks_.size(); ++d) out[d] = extract_bits(code.value, lane_masks_[d]);
}

std::uint64_t MortonCodec::spread(std::size_t d, std::uint64_t c) const noexcept {
  return deposit_bits(c, lane_masks_[d]);
}

CodeBoxFilter::CodeBoxFilter(const MortonCodec& codec, std::span<const std::uint64_t> lo,
                             std::span<const std::uint64_t> hi) {
  lanes_.reserve(codec.dims());
  for (std::size_t d = 0; d < codec.dims(); ++d) {
    lanes_.push_back({codec.lane_mask(d), codec.spread(d, lo[d]), codec.spread(d, hi[d])});
  }
}

}  // namespace zebra
