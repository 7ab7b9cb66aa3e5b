#pragma once

// Multi-stage search masks: value-space boxes plus the temporal rules that
// turn per-stage hits into events.
//
// Mask file format (one directive per line, '#' starts a comment):
//
//   name   lane_change
//   stage  lo0 hi0 lo1 hi1 ...     one line per stage, in order
//   dur    2000 3000               min/max segment duration, ms
//   gap    -200 2000               min/max gap between stages, ms
//   outlier 50                     max gap between hits inside a segment, ms
//
// Omitted dur/gap/outlier lines take the defaults in TemporalParams.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "zebra/store.hpp"

namespace zebra {

struct StageBox {
  std::vector<double> lo;
  std::vector<double> hi;

  std::size_t dims() const noexcept { return lo.size(); }
  friend bool operator==(const StageBox&, const StageBox&) = default;
};

struct TemporalParams {
  TimestampMs min_duration_ms = 2000;
  TimestampMs max_duration_ms = 3000;
  TimestampMs min_gap_ms = -200;  // negative: the next stage may overlap the previous one
  TimestampMs max_gap_ms = 2000;
  TimestampMs max_outlier_ms = 50;

  // Throws InvalidInput naming the offending field. Besides ordering of the
  // bounds this requires min_duration_ms >= 1 and min_gap_ms >= -min_duration_ms,
  // which together guarantee every event has t_start < t_end.
  void validate() const;

  friend bool operator==(const TemporalParams&, const TemporalParams&) = default;
};

struct SearchMask {
  std::string name;
  std::vector<StageBox> stages;
  TemporalParams params;

  std::size_t dims() const noexcept { return stages.empty() ? 0 : stages.front().dims(); }

  // Throws InvalidInput unless there is at least one stage, all stages share
  // the same dimensionality and every box has finite lo <= hi.
  void validate() const;

  friend bool operator==(const SearchMask&, const SearchMask&) = default;
};

// Closed interval [t_start, t_end] of one detected maneuver.
struct Event {
  TimestampMs t_start = 0;
  TimestampMs t_end = 0;

  friend constexpr auto operator<=>(const Event&, const Event&) = default;
};

struct Interval {
  double lo;
  double hi;
};

// Throws ParseError naming the line and field.
SearchMask parse_mask(std::string_view text);
std::string render_mask(const SearchMask& mask);
SearchMask load_mask(const std::filesystem::path& path);

// Shape of randomly drawn stage boxes. Per dimension the width is uniform
// in [min_width_fraction, max_width_fraction] of the bound's span and the
// box is placed uniformly inside the bound.
struct RandomBoxShape {
  double min_width_fraction = 1.0 / 6.0;
  double max_width_fraction = 2.0 / 3.0;
  // Boxes intersecting this region are redrawn (unused when empty).
  std::optional<StageBox> excluded;
};

// `count` masks of `stage_count` stages with default temporal parameters,
// every box inside value_bounds. Deterministic for a given seed. Whether a
// mask detects anything is left to the caller.
std::vector<SearchMask> random_masks(std::uint64_t seed, std::size_t stage_count, std::size_t count,
                                     std::span<const Interval> value_bounds, const RandomBoxShape& shape = {});

}  // namespace zebra
