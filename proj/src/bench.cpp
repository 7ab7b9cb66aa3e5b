#include "zebra/bench.hpp"

#include <algorithm>
#include <chrono>
#include <future>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <tuple>

#include "zebra/error.hpp"

namespace zebra {

namespace {

double median(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

double time_us(const Store& store, const SearchMask& mask, Detector detector, std::size_t& events) {
  const auto start = std::chrono::steady_clock::now();
  const auto found = detect(store, mask, detector);
  const auto stop = std::chrono::steady_clock::now();
  events = found.size();
  return std::chrono::duration<double, std::micro>(stop - start).count();
}

// Runs every detector once and checks it against bf_primitive.
void check_cell(const Store& store, const SearchMask& mask, std::span<const Detector> detectors) {
  const auto truth = detect_bf_primitive(store, mask);
  for (Detector d : detectors) {
    if (d == Detector::bf_primitive) continue;
    const auto got = detect(store, mask, d);
    if (got != truth) {
      throw DetectorMismatch(std::string(to_string(d)) + " disagrees with bf_primitive on mask '" + mask.name +
                             "', store of " + std::to_string(store.size()) + " entries:\n" + diff_events(truth, got));
    }
  }
}

}  // namespace

std::string diff_events(std::span<const Event> expected, std::span<const Event> actual, std::size_t max_lines) {
  std::ostringstream out;
  std::size_t lines = 0;
  std::size_t i = 0;
  std::size_t j = 0;
  auto emit = [&](char sign, const Event& e) {
    if (lines++ < max_lines) out << sign << " [" << e.t_start << ", " << e.t_end << "]\n";
  };
  while (i < expected.size() || j < actual.size()) {
    if (j == actual.size() || (i < expected.size() && expected[i] < actual[j])) {
      emit('-', expected[i++]);
    } else if (i == expected.size() || actual[j] < expected[i]) {
      emit('+', actual[j++]);
    } else {
      ++i;
      ++j;
    }
  }
  if (lines > max_lines) out << "... " << (lines - max_lines) << " more\n";
  return out.str();
}

std::vector<BenchResult> run_matrix(std::span<const Store> stores, std::span<const SearchMask> masks,
                                    std::span<const Detector> detectors, const BenchOptions& options) {
  if (stores.empty() || masks.empty() || detectors.empty()) {
    throw InvalidInput("run_matrix needs at least one store, mask and detector");
  }
  if (options.repetitions == 0) throw InvalidInput("run_matrix: repetitions must be >= 1");

  if (options.equivalence_only && options.parallel) {
    std::vector<std::future<void>> cells;
    for (const auto& store : stores) {
      for (const auto& mask : masks) {
        cells.push_back(std::async(std::launch::async, [&store, &mask, detectors] { check_cell(store, mask, detectors); }));
      }
    }
    for (auto& c : cells) c.get();
    return {};
  }

  std::vector<BenchResult> results;
  for (const auto& store : stores) {
    for (const auto& mask : masks) {
      check_cell(store, mask, detectors);
      if (options.equivalence_only) continue;
      for (Detector d : detectors) {
        std::size_t events = 0;
        if (options.warmup) time_us(store, mask, d, events);
        std::vector<double> samples;
        for (std::size_t r = 0; r < options.repetitions; ++r) samples.push_back(time_us(store, mask, d, events));
        results.push_back({d, mask.name, mask.stages.size(), store.size(), median(std::move(samples)), events});
      }
    }
  }
  return results;
}

std::vector<SummaryRow> summarize(std::span<const BenchResult> results) {
  if (results.empty()) throw InvalidInput("summarize: no results");
  using Key = std::tuple<std::size_t, std::uint64_t, Detector>;
  std::map<Key, std::vector<double>> groups;
  for (const auto& r : results) groups[{r.stage_count, r.entries, r.detector}].push_back(r.duration_us);

  std::vector<SummaryRow> rows;
  for (const auto& [key, durations] : groups) {
    double sum = 0.0;
    for (double d : durations) sum += d;
    const auto [lo, hi] = std::minmax_element(durations.begin(), durations.end());
    rows.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), durations.size(),
                    sum / static_cast<double>(durations.size()), *lo, *hi});
  }
  return rows;
}

void write_results_csv(std::ostream& out, std::span<const BenchResult> results) {
  out << "detector,mask_name,stage_count,entries,duration_us,events\n";
  for (const auto& r : results) {
    out << to_string(r.detector) << ',' << r.mask_name << ',' << r.stage_count << ',' << r.entries << ','
        << std::fixed << std::setprecision(1) << r.duration_us << std::defaultfloat << ',' << r.events << '\n';
  }
}

void write_summary_csv(std::ostream& out, std::span<const SummaryRow> rows) {
  out << "stage_count,entries,detector,masks,mean_us,min_us,max_us\n";
  out << std::fixed << std::setprecision(1);
  for (const auto& r : rows) {
    out << r.stage_count << ',' << r.entries << ',' << to_string(r.detector) << ',' << r.masks << ',' << r.mean_us
        << ',' << r.min_us << ',' << r.max_us << '\n';
  }
  out << std::defaultfloat;
}

void write_summary_table(std::ostream& out, std::span<const SummaryRow> rows) {
  out << std::left << std::setw(7) << "stages" << std::right << std::setw(12) << "entries" << "  " << std::left
      << std::setw(13) << "detector" << std::right << std::setw(14) << "mean_ms" << std::setw(14) << "min_ms"
      << std::setw(14) << "max_ms" << '\n';
  out << std::fixed << std::setprecision(3);
  for (const auto& r : rows) {
    out << std::left << std::setw(7) << r.stage_count << std::right << std::setw(12) << r.entries << "  " << std::left
        << std::setw(13) << to_string(r.detector) << std::right << std::setw(14) << r.mean_us / 1000.0
        << std::setw(14) << r.min_us / 1000.0 << std::setw(14) << r.max_us / 1000.0 << '\n';
  }
  out << std::defaultfloat;
}

std::vector<SearchMask> select_masks(std::span<const Store> stores, std::uint64_t seed,
                                     std::span<const std::size_t> stage_counts, std::size_t per_stage,
                                     std::span<const Interval> value_bounds, const RandomBoxShape& shape,
                                     std::size_t max_attempts) {
  if (stores.empty()) throw InvalidInput("select_masks: no stores");
  std::vector<const Store*> by_size;
  for (const auto& s : stores) by_size.push_back(&s);
  std::stable_sort(by_size.begin(), by_size.end(), [](const Store* a, const Store* b) { return a->size() < b->size(); });

  std::vector<SearchMask> selected;
  for (const std::size_t stages : stage_counts) {
    const auto candidates = random_masks(seed + stages, stages, max_attempts, value_bounds, shape);
    std::size_t kept = 0;
    for (const auto& mask : candidates) {
      if (kept == per_stage) break;
      const bool detects_everywhere =
          std::all_of(by_size.begin(), by_size.end(), [&](const Store* s) { return !detect_sfc(*s, mask).empty(); });
      if (!detects_everywhere) continue;
      selected.push_back(mask);
      ++kept;
    }
    if (kept < per_stage) {
      throw InvalidInput("select_masks: only " + std::to_string(kept) + " of " + std::to_string(per_stage) + " " +
                         std::to_string(stages) + "-stage masks detect an event after " +
                         std::to_string(max_attempts) + " attempts");
    }
  }
  return selected;
}

BenchWorkload bench_workload(std::uint64_t seed, std::uint64_t active_samples) {
  BenchWorkload w;
  ScenarioSpec& spec = w.scenario;
  spec.seed = seed;
  const TimestampMs active_ms = static_cast<TimestampMs>(active_samples) * spec.period_ms();
  spec.duration_s = static_cast<double>(active_ms) / 1000.0;
  // Held levels last about as long as a mask stage; cruising is quiet.
  spec.background_phases = {{0, 3.0, 50.0, 2500}, {active_ms, 0.05, 20.0, 0}};
  spec.maneuvers = schedule_maneuvers(seed ^ 0x9e3779b97f4a7c15ULL, spec.duration_s, 60.0, 3.0, 10.0);
  w.value_bounds = {{-3.0, 3.0}, {-3.0, 3.0}};
  w.box_shape.excluded = StageBox{{-0.25, -0.25}, {0.25, 0.25}};
  return w;
}

}  // namespace zebra
