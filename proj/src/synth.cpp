#include "zebra/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <string>

#include "text.hpp"
#include "zebra/error.hpp"

namespace zebra {

std::string_view to_string(ManeuverKind kind) {
  return kind == ManeuverKind::braking ? "braking" : "lane_change";
}

ManeuverKind parse_maneuver_kind(std::string_view name) {
  if (name == "braking") return ManeuverKind::braking;
  if (name == "lane_change") return ManeuverKind::lane_change;
  throw InvalidInput("unknown maneuver kind '" + std::string(name) + "'");
}

namespace {

// 0 at both ends of [0, width], 1 in the middle.
double raised_cosine(double u, double width) { return 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * u / width)); }

std::vector<Maneuver> sorted_maneuvers(std::vector<Maneuver> maneuvers) {
  std::stable_sort(maneuvers.begin(), maneuvers.end(),
                   [](const Maneuver& a, const Maneuver& b) { return a.t_insert_ms < b.t_insert_ms; });
  return maneuvers;
}

}  // namespace

void ScenarioSpec::validate() const {
  if (sample_rate_hz == 0 || 1000 % sample_rate_hz != 0) {
    throw InvalidInput("sample_rate_hz must divide 1000");
  }
  if (!(duration_s >= 0.0) || !std::isfinite(duration_s)) throw InvalidInput("duration_s must be non-negative");
  if (!(noise_amplitude >= 0.0)) throw InvalidInput("noise_amplitude must be non-negative");
  if (!(noise_correlation_ms > 0.0)) throw InvalidInput("noise_correlation_ms must be positive");
  for (std::size_t i = 0; i < background_phases.size(); ++i) {
    const auto& p = background_phases[i];
    if (!(p.amplitude >= 0.0) || !(p.correlation_ms > 0.0) || p.hold_ms < 0) {
      throw InvalidInput("background phase at " + std::to_string(p.t_start_ms) +
                         " ms has a bad amplitude, time constant or hold time");
    }
    if (i > 0 && p.t_start_ms <= background_phases[i - 1].t_start_ms) {
      throw InvalidInput("background phases must have increasing start times");
    }
  }
  const auto duration_ms = static_cast<TimestampMs>(std::llround(duration_s * 1000.0));
  const auto sorted = sorted_maneuvers(maneuvers);
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const auto& m = sorted[i];
    if (!std::isfinite(m.magnitude) || m.magnitude < 0.0) throw InvalidInput("maneuver magnitude must be >= 0");
    if (m.t_insert_ms < 0 || m.t_insert_ms + kManeuverWidthMs > duration_ms) {
      throw InvalidInput("maneuver at " + std::to_string(m.t_insert_ms) + " ms does not fit in the recording");
    }
    if (i > 0 && m.t_insert_ms < sorted[i - 1].t_insert_ms + kManeuverWidthMs) {
      throw InvalidInput("maneuvers at " + std::to_string(sorted[i - 1].t_insert_ms) + " and " +
                         std::to_string(m.t_insert_ms) + " ms overlap");
    }
  }
}

std::uint64_t ScenarioSpec::sample_count() const noexcept {
  const auto duration_ms = static_cast<TimestampMs>(std::llround(duration_s * 1000.0));
  return static_cast<std::uint64_t>(duration_ms / period_ms());
}

SignalGenerator::SignalGenerator(ScenarioSpec spec, std::optional<std::uint64_t> sample_limit)
    : spec_(std::move(spec)), rng_(spec_.seed) {
  if (sample_limit) {
    spec_.duration_s = std::max(spec_.duration_s, static_cast<double>(*sample_limit * spec_.period_ms()) / 1000.0);
  }
  spec_.validate();
  spec_.maneuvers = sorted_maneuvers(std::move(spec_.maneuvers));
  count_ = sample_limit ? *sample_limit : spec_.sample_count();
  enter_phase({0, spec_.noise_amplitude, spec_.noise_correlation_ms, 0});
  for (double& s : state_) s = rng_.normal();
}

void SignalGenerator::enter_phase(const BackgroundPhase& phase) {
  phase_ = phase;
  rho_ = std::exp(-static_cast<double>(spec_.period_ms()) / phase.correlation_ms);
  innovation_ = std::sqrt(1.0 - rho_ * rho_);
  next_hold_ = phase.t_start_ms;
}

double SignalGenerator::background(TimestampMs t, std::size_t channel) {
  double& s = state_[channel];
  if (phase_.hold_ms == 0) {
    s = rho_ * s + innovation_ * rng_.normal();
    return phase_.amplitude * std::tanh(s);
  }
  if (channel == 0 && t >= next_hold_) {
    for (double& level : level_) level = rng_.uniform(-phase_.amplitude, phase_.amplitude);
    const double hold = static_cast<double>(phase_.hold_ms) * rng_.uniform(0.8, 1.2);
    next_hold_ = t + std::max<TimestampMs>(spec_.period_ms(), static_cast<TimestampMs>(hold));
  }
  s = rho_ * s + (1.0 - rho_) * level_[channel];
  return s;
}

double SignalGenerator::envelope(TimestampMs t) {
  const auto& ms = spec_.maneuvers;
  while (next_maneuver_ < ms.size() &&
         ms[next_maneuver_].t_insert_ms + kManeuverWidthMs + kNoiseGuardMs + kNoiseRampMs < t) {
    ++next_maneuver_;
  }
  double e = 1.0;
  for (std::size_t i = next_maneuver_; i < ms.size(); ++i) {
    const TimestampMs start = ms[i].t_insert_ms;
    const TimestampMs end = start + kManeuverWidthMs;
    if (start - kNoiseGuardMs - kNoiseRampMs > t) break;
    const TimestampMs outside = std::max<TimestampMs>({start - t, t - end, 0});
    if (outside <= kNoiseGuardMs) return 0.0;
    const double ramp = static_cast<double>(outside - kNoiseGuardMs) / static_cast<double>(kNoiseRampMs);
    if (ramp < 1.0) e = std::min(e, 0.5 * (1.0 - std::cos(std::numbers::pi * ramp)));
  }
  return e;
}

double SignalGenerator::maneuver_value(TimestampMs t, std::size_t channel) const {
  const auto& ms = spec_.maneuvers;
  for (std::size_t i = next_maneuver_; i < ms.size(); ++i) {
    const auto& m = ms[i];
    if (m.t_insert_ms > t) break;
    const auto u = static_cast<double>(t - m.t_insert_ms);
    const auto width = static_cast<double>(kManeuverWidthMs);
    if (u > width) continue;
    if (m.kind == ManeuverKind::braking && channel == 0) return -m.magnitude * raised_cosine(u, width);
    if (m.kind == ManeuverKind::lane_change && channel == 1) {
      const double half = width / 2.0;
      return u <= half ? -m.magnitude * raised_cosine(u, half) : m.magnitude * raised_cosine(u - half, half);
    }
  }
  return 0.0;
}

bool SignalGenerator::next(TimestampMs& t, std::span<double> values) {
  if (produced_ >= count_) return false;
  t = static_cast<TimestampMs>(produced_) * spec_.period_ms();
  ++produced_;
  const double e = envelope(t);
  const auto& phases = spec_.background_phases;
  while (next_phase_ < phases.size() && phases[next_phase_].t_start_ms <= t) enter_phase(phases[next_phase_++]);
  for (std::size_t c = 0; c < kSynthDims; ++c) {
    values[c] = maneuver_value(t, c) + e * background(t, c);
  }
  return true;
}

std::vector<Annotation> SignalGenerator::annotations() const {
  std::vector<Annotation> out;
  const auto horizon = static_cast<TimestampMs>(count_) * spec_.period_ms();
  for (const auto& m : spec_.maneuvers) {
    if (m.t_insert_ms + kManeuverWidthMs < horizon) {
      out.push_back({m.kind, m.t_insert_ms, m.t_insert_ms + kManeuverWidthMs});
    }
  }
  return out;
}

std::vector<Annotation> generate(const ScenarioSpec& spec, std::ostream& csv) {
  SignalGenerator gen(spec);
  std::string buf = "t_ms,v0,v1\n";
  TimestampMs t = 0;
  double values[kSynthDims];
  while (gen.next(t, values)) {
    text::append_int(buf, t);
    for (double v : values) {
      buf += ',';
      text::append_double(buf, v);
    }
    buf += '\n';
    if (buf.size() > (1 << 20)) {
      csv << buf;
      buf.clear();
    }
  }
  csv << buf;
  return gen.annotations();
}

void write_annotations_csv(std::ostream& out, std::span<const Annotation> annotations) {
  out << "kind,t_start_ms,t_end_ms\n";
  for (const auto& a : annotations) out << to_string(a.kind) << ',' << a.t_start << ',' << a.t_end << '\n';
}

std::vector<Maneuver> schedule_maneuvers(std::uint64_t seed, double duration_s, double interval_s,
                                         double min_magnitude, double max_magnitude) {
  if (!(interval_s * 1000.0 > 2.0 * static_cast<double>(kManeuverWidthMs))) {
    throw InvalidInput("schedule_maneuvers: interval must exceed two maneuver widths");
  }
  Rng rng(seed);
  std::vector<Maneuver> out;
  const auto slot = static_cast<TimestampMs>(interval_s * 1000.0);
  const auto duration_ms = static_cast<TimestampMs>(duration_s * 1000.0);
  const TimestampMs slack = slot - kManeuverWidthMs;
  for (TimestampMs begin = 0; begin + slot <= duration_ms; begin += slot) {
    Maneuver m;
    m.kind = out.size() % 2 == 0 ? ManeuverKind::braking : ManeuverKind::lane_change;
    // Round to 10 ms so maneuver edges land on samples at common rates.
    m.t_insert_ms = begin + static_cast<TimestampMs>(rng.below(static_cast<std::uint64_t>(slack / 10))) * 10;
    m.magnitude = rng.uniform(min_magnitude, max_magnitude);
    out.push_back(m);
  }
  return out;
}

std::vector<Store> scale_corpus(const ScenarioSpec& spec, std::span<const std::uint64_t> target_counts,
                                const std::filesystem::path& root, const QuantizationConfig& config) {
  if (target_counts.empty()) return {};
  if (!std::is_sorted(target_counts.begin(), target_counts.end())) {
    throw InvalidInput("scale_corpus: target counts must be ascending");
  }
  if (config.dims() != kSynthDims) throw InvalidInput("scale_corpus: config must have two dimensions");

  std::vector<StoreWriter> writers;
  for (const auto count : target_counts) writers.emplace_back(root / ("store-" + std::to_string(count)), config);

  SignalGenerator gen(spec, target_counts.back());
  TimestampMs t = 0;
  double values[kSynthDims];
  std::uint64_t produced = 0;
  std::size_t first_open = 0;
  while (gen.next(t, values)) {
    while (first_open < writers.size() && produced >= target_counts[first_open]) ++first_open;
    for (std::size_t w = first_open; w < writers.size(); ++w) writers[w].append(t, values);
    ++produced;
  }

  std::vector<Store> stores;
  for (auto& w : writers) stores.push_back(w.commit());
  return stores;
}

}  // namespace zebra
