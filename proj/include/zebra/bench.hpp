#pragma once

// Query-duration benchmark: every detector on every (mask, store) cell,
// with event-set equivalence enforced before any timing is reported.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "zebra/detect.hpp"
#include "zebra/masks.hpp"
#include "zebra/store.hpp"
#include "zebra/synth.hpp"

namespace zebra {

struct BenchResult {
  Detector detector;
  std::string mask_name;
  std::size_t stage_count;
  std::uint64_t entries;
  double duration_us;  // median over repetitions
  std::size_t events;
};

struct BenchOptions {
  std::size_t repetitions = 5;
  bool warmup = true;
  // Skip timing and only verify equivalence; cells may then run in parallel.
  bool equivalence_only = false;
  bool parallel = false;
};

// Throws DetectorMismatch, with a diff of the event sets, when any detector
// disagrees with bf_primitive on any cell.
std::vector<BenchResult> run_matrix(std::span<const Store> stores, std::span<const SearchMask> masks,
                                    std::span<const Detector> detectors, const BenchOptions& options = {});

// Human-readable difference between two event lists ("" when equal).
std::string diff_events(std::span<const Event> expected, std::span<const Event> actual, std::size_t max_lines = 10);

struct SummaryRow {
  std::size_t stage_count;
  std::uint64_t entries;
  Detector detector;
  std::size_t masks;
  double mean_us;
  double min_us;
  double max_us;
};

// Mean/min/max over masks per (stage_count, entries, detector), sorted by
// those keys. Throws InvalidInput for empty input.
std::vector<SummaryRow> summarize(std::span<const BenchResult> results);

void write_results_csv(std::ostream& out, std::span<const BenchResult> results);
void write_summary_csv(std::ostream& out, std::span<const SummaryRow> rows);
void write_summary_table(std::ostream& out, std::span<const SummaryRow> rows);

// Benchmark workload. The recording's first `active_samples` samples are
// manoeuvring (held acceleration levels plus braking and lane changes); the
// rest is steady cruising. Random masks are drawn inside value_bounds and
// never select the cruising state around zero acceleration.
struct BenchWorkload {
  ScenarioSpec scenario;
  std::vector<Interval> value_bounds;
  RandomBoxShape box_shape;
};

BenchWorkload bench_workload(std::uint64_t seed, std::uint64_t active_samples);

// Draws random masks until `per_stage` masks for each stage count detect at
// least one event in every store (checked with the SFC detector, smallest
// store first). Throws InvalidInput if `max_attempts` candidates per stage
// count are exhausted.
std::vector<SearchMask> select_masks(std::span<const Store> stores, std::uint64_t seed,
                                     std::span<const std::size_t> stage_counts, std::size_t per_stage,
                                     std::span<const Interval> value_bounds, const RandomBoxShape& shape = {},
                                     std::size_t max_attempts = 20000);

}  // namespace zebra
