#include "zebra/detect.hpp"

#include <algorithm>
#include <limits>
#include <optional>
#include <ostream>
#include <string>

#include "text.hpp"
#include "zebra/error.hpp"

namespace zebra {

std::string_view to_string(Detector detector) {
  switch (detector) {
    case Detector::bf_primitive:
      return "bf_primitive";
    case Detector::bf_improved:
      return "bf_improved";
    case Detector::sfc:
      return "sfc";
  }
  return "unknown";
}

Detector parse_detector(std::string_view name) {
  for (Detector d : kAllDetectors) {
    if (to_string(d) == name) return d;
  }
  throw InvalidInput("unknown detector '" + std::string(name) + "'");
}

std::vector<Segment> segments_from_times(std::span<const TimestampMs> times, const TemporalParams& params) {
  std::vector<Segment> out;
  std::size_t i = 0;
  while (i < times.size()) {
    std::size_t j = i;
    while (j + 1 < times.size() && times[j + 1] - times[j] <= params.max_outlier_ms) ++j;
    const TimestampMs duration = times[j] - times[i];
    if (duration >= params.min_duration_ms && duration <= params.max_duration_ms) {
      out.push_back({times[i], times[j]});
    }
    i = j + 1;
  }
  return out;
}

std::vector<Event> chain_stages(std::span<const std::vector<Segment>> per_stage, const TemporalParams& params) {
  if (per_stage.empty()) return {};
  constexpr TimestampMs kNone = std::numeric_limits<TimestampMs>::max();

  // completion[s][j]: earliest end of a valid chain from segment j of stage s
  // through the last stage.
  std::vector<std::vector<TimestampMs>> completion(per_stage.size());
  const std::size_t last = per_stage.size() - 1;
  for (const auto& seg : per_stage[last]) completion[last].push_back(seg.t_end);

  for (std::size_t s = last; s-- > 0;) {
    const auto& next = per_stage[s + 1];
    const auto& next_completion = completion[s + 1];
    completion[s].reserve(per_stage[s].size());
    for (const auto& seg : per_stage[s]) {
      const TimestampMs lo = seg.t_end + params.min_gap_ms;
      const TimestampMs hi = seg.t_end + params.max_gap_ms;
      auto it = std::lower_bound(next.begin(), next.end(), lo,
                                 [](const Segment& candidate, TimestampMs t) { return candidate.t_start < t; });
      TimestampMs best = kNone;
      for (; it != next.end() && it->t_start <= hi; ++it) {
        best = std::min(best, next_completion[static_cast<std::size_t>(it - next.begin())]);
      }
      completion[s].push_back(best);
    }
  }

  std::vector<Event> events;
  for (std::size_t j = 0; j < per_stage[0].size(); ++j) {
    if (completion[0][j] != kNone) events.push_back({per_stage[0][j].t_start, completion[0][j]});
  }
  return events;
}

LatticeBox quantize_box(const StageBox& box, const QuantizationConfig& config) {
  if (box.dims() != config.dims() || box.hi.size() != config.dims()) {
    throw InvalidInput("stage box has " + std::to_string(box.dims()) + " dimensions, store has " +
                       std::to_string(config.dims()));
  }
  return {quantize(box.lo, config), quantize(box.hi, config)};
}

StageMatcher::StageMatcher(const StageBox& box, const QuantizationConfig& config) {
  const auto lattice = quantize_box(box, config);
  for (std::size_t d = 0; d < config.dims(); ++d) {
    dims_.push_back({config.dim(d), config.max_coord(d), lattice.lo[d], lattice.hi[d]});
  }
}

std::vector<TimestampMs> stage_times_bf(const Store& store, const StageBox& box) {
  const StageMatcher matcher(box, store.config());
  std::vector<TimestampMs> times;
  for (std::size_t i = 0; i < store.size(); ++i) {
    if (matcher.contains(store.values_at(i))) times.push_back(store.time_at(i));
  }
  return times;
}

std::vector<TimestampMs> stage_times_sfc(const Store& store, const StageBox& box, SfcStageStats* stats) {
  const auto lattice = quantize_box(box, store.config());
  const auto [c_lo, c_hi] = box_to_code_range(lattice.lo, lattice.hi, store.config());
  const auto candidates = store.scan_code_range(c_lo, c_hi);
  const MortonCodec codec(store.config());
  const CodeBoxFilter filter(codec, lattice.lo, lattice.hi);

  std::vector<TimestampMs> times;
  for (const auto& entry : candidates) {
    if (filter.contains(entry.code)) times.push_back(entry.t);
  }
  std::sort(times.begin(), times.end());
  if (stats) *stats = {candidates.size(), times.size()};
  return times;
}

namespace {

void check_compatible(const Store& store, const SearchMask& mask) {
  mask.validate();
  if (mask.dims() != store.dims()) {
    throw InvalidInput("mask '" + mask.name + "' has " + std::to_string(mask.dims()) + " dimensions, store has " +
                       std::to_string(store.dims()));
  }
}

template <typename StageTimes>
std::vector<Event> detect_by_stage_times(const Store& store, const SearchMask& mask, StageTimes stage_times) {
  check_compatible(store, mask);
  std::vector<std::vector<Segment>> per_stage;
  per_stage.reserve(mask.stages.size());
  for (const auto& box : mask.stages) {
    const auto times = stage_times(store, box);
    per_stage.push_back(segments_from_times(times, mask.params));
  }
  return chain_stages(per_stage, mask.params);
}

// Single pass over the log for stage 1; each completed stage-1 segment
// triggers a forward search for the remaining stages.
class ImprovedBf {
 public:
  ImprovedBf(const Store& store, const SearchMask& mask) : store_(store), params_(mask.params) {
    for (const auto& box : mask.stages) matchers_.emplace_back(box, store.config());
  }

  std::vector<Event> run() {
    std::vector<Event> events;
    const StageMatcher& first = matchers_.front();
    std::optional<Segment> run;
    auto finish = [&](const Segment& seg) {
      if (!duration_ok(seg)) return;
      if (matchers_.size() == 1) {
        events.push_back({seg.t_start, seg.t_end});
      } else if (const auto end = complete(1, seg)) {
        events.push_back({seg.t_start, *end});
      }
    };
    for (std::size_t i = 0; i < store_.size(); ++i) {
      if (!first.contains(store_.values_at(i))) continue;
      const TimestampMs t = store_.time_at(i);
      if (run && t - run->t_end <= params_.max_outlier_ms) {
        run->t_end = t;
      } else {
        if (run) finish(*run);
        run = Segment{t, t};
      }
    }
    if (run) finish(*run);
    return events;
  }

 private:
  bool duration_ok(const Segment& seg) const {
    const TimestampMs duration = seg.t_end - seg.t_start;
    return duration >= params_.min_duration_ms && duration <= params_.max_duration_ms;
  }

  // Earliest completion of stages [stage, last] given the previous stage's
  // segment, or nullopt when no valid continuation exists.
  std::optional<TimestampMs> complete(std::size_t stage, const Segment& prev) const {
    const StageMatcher& matcher = matchers_[stage];
    const TimestampMs window_lo = prev.t_end + params_.min_gap_ms;
    const TimestampMs window_hi = prev.t_end + params_.max_gap_ms;
    const std::size_t n = store_.size();
    const bool last = stage + 1 == matchers_.size();

    std::optional<TimestampMs> best;
    std::size_t pos = store_.lower_bound(window_lo);
    bool first_run = true;
    while (true) {
      while (pos < n && !matcher.contains(store_.values_at(pos))) {
        if (store_.time_at(pos) > window_hi) return best;
        ++pos;
      }
      if (pos >= n) return best;
      if (store_.time_at(pos) > window_hi) return best;

      Segment run{store_.time_at(pos), store_.time_at(pos)};
      if (first_run) {
        // The run may have started before the window; walk back to its true start.
        for (std::size_t j = pos; j-- > 0;) {
          const TimestampMs t = store_.time_at(j);
          if (t < run.t_start - params_.max_outlier_ms) break;
          if (matcher.contains(store_.values_at(j))) run.t_start = t;
        }
        first_run = false;
      }
      std::size_t p = pos + 1;
      while (p < n && store_.time_at(p) <= run.t_end + params_.max_outlier_ms) {
        if (matcher.contains(store_.values_at(p))) run.t_end = store_.time_at(p);
        ++p;
      }
      pos = p;

      if (run.t_start > window_hi) return best;
      if (run.t_start < window_lo) continue;
      // Any completion through this run ends at or after its start.
      if (best && run.t_start >= *best) return best;
      if (!duration_ok(run)) continue;
      const std::optional<TimestampMs> end = last ? std::optional<TimestampMs>(run.t_end) : complete(stage + 1, run);
      if (end && (!best || *end < *best)) best = end;
    }
  }

  const Store& store_;
  TemporalParams params_;
  std::vector<StageMatcher> matchers_;
};

}  // namespace

std::vector<Event> detect_bf_primitive(const Store& store, const SearchMask& mask) {
  return detect_by_stage_times(store, mask, [](const Store& s, const StageBox& box) { return stage_times_bf(s, box); });
}

std::vector<Event> detect_bf_improved(const Store& store, const SearchMask& mask) {
  check_compatible(store, mask);
  return ImprovedBf(store, mask).run();
}

std::vector<Event> detect_sfc(const Store& store, const SearchMask& mask) {
  return detect_by_stage_times(store, mask,
                               [](const Store& s, const StageBox& box) { return stage_times_sfc(s, box); });
}

std::vector<Event> detect(const Store& store, const SearchMask& mask, Detector detector) {
  switch (detector) {
    case Detector::bf_primitive:
      return detect_bf_primitive(store, mask);
    case Detector::bf_improved:
      return detect_bf_improved(store, mask);
    case Detector::sfc:
      return detect_sfc(store, mask);
  }
  throw InvalidInput("unknown detector");
}

void write_events_csv(std::ostream& out, std::span<const Event> events, std::string_view mask_name,
                      Detector detector, bool header) {
  std::string buf;
  if (header) buf = "t_start_ms,t_end_ms,mask_name,detector\n";
  for (const auto& e : events) {
    text::append_int(buf, e.t_start);
    buf += ',';
    text::append_int(buf, e.t_end);
    buf += ',';
    buf += mask_name;
    buf += ',';
    buf += to_string(detector);
    buf += '\n';
  }
  out << buf;
}

}  // namespace zebra
