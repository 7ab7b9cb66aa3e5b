#pragma once

// Event detectors over a Store and a SearchMask.
//
// A sample hits a stage when its quantized lattice point lies inside the
// stage box quantized with the store's config. All three detectors share
// that membership rule and the same segment/chain semantics, so they return
// identical event lists:
//
//   bf_primitive  one full scan of the primary log per stage
//   bf_improved   one scan for stage 1, then forward recursion into the
//                 windows where later stages may start
//   sfc           per stage, a code-range scan of the Morton index with
//                 false positives filtered on the codes
//
// Chaining rule: every stage-1 segment that starts at least one valid chain
// yields exactly one event, from its start to the earliest end among all
// valid chains starting there.

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "zebra/masks.hpp"
#include "zebra/morton.hpp"
#include "zebra/store.hpp"

namespace zebra {

struct Segment {
  TimestampMs t_start = 0;
  TimestampMs t_end = 0;

  friend constexpr auto operator<=>(const Segment&, const Segment&) = default;
};

enum class Detector { bf_primitive, bf_improved, sfc };

inline constexpr std::array<Detector, 3> kAllDetectors = {Detector::bf_primitive, Detector::bf_improved,
                                                          Detector::sfc};

std::string_view to_string(Detector detector);
// Throws InvalidInput for unknown names.
Detector parse_detector(std::string_view name);

// Maximal runs of `times` whose consecutive gaps are <= max_outlier_ms, kept
// when min_duration_ms <= last - first <= max_duration_ms. `times` must be
// strictly ascending.
std::vector<Segment> segments_from_times(std::span<const TimestampMs> times, const TemporalParams& params);

// Chains one segment per stage, in stage order, with
// min_gap_ms <= next.t_start - prev.t_end <= max_gap_ms.
std::vector<Event> chain_stages(std::span<const std::vector<Segment>> per_stage, const TemporalParams& params);

struct LatticeBox {
  LatticePoint lo;
  LatticePoint hi;
};

// Quantizes both corners; monotone quantization keeps lo <= hi.
LatticeBox quantize_box(const StageBox& box, const QuantizationConfig& config);

// Value-space membership test for one stage, evaluated on the lattice.
class StageMatcher {
 public:
  StageMatcher(const StageBox& box, const QuantizationConfig& config);

  bool contains(std::span<const double> values) const noexcept {
    for (std::size_t d = 0; d < dims_.size(); ++d) {
      const auto& dim = dims_[d];
      const std::uint64_t c = quantize_coord(values[d], dim.range, dim.top);
      if (c < dim.lo || c > dim.hi) return false;
    }
    return true;
  }

 private:
  struct Dim {
    DimensionRange range;
    std::uint64_t top;
    std::uint64_t lo;
    std::uint64_t hi;
  };
  std::vector<Dim> dims_;
};

// Ascending timestamps of the samples hitting `box`, by full scan.
std::vector<TimestampMs> stage_times_bf(const Store& store, const StageBox& box);

struct SfcStageStats {
  std::size_t candidates = 0;  // index entries inside the code range
  std::size_t hits = 0;        // candidates whose lattice point is in the box
};

// Ascending timestamps of the samples hitting `box`, via the Morton index:
// every entry in [encode(lo), encode(hi)] is filtered on its code.
std::vector<TimestampMs> stage_times_sfc(const Store& store, const StageBox& box, SfcStageStats* stats = nullptr);

// Each throws InvalidInput when the mask is invalid or its dimensionality
// differs from the store's.
std::vector<Event> detect_bf_primitive(const Store& store, const SearchMask& mask);
std::vector<Event> detect_bf_improved(const Store& store, const SearchMask& mask);
std::vector<Event> detect_sfc(const Store& store, const SearchMask& mask);
std::vector<Event> detect(const Store& store, const SearchMask& mask, Detector detector);

// CSV rows `t_start_ms,t_end_ms,mask_name,detector`.
void write_events_csv(std::ostream& out, std::span<const Event> events, std::string_view mask_name,
                      Detector detector, bool header = true);

}  // namespace zebra
