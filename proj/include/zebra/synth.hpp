#pragma once

// Annotated synthetic kinematic recordings: two channels (longitudinal and
// lateral acceleration, m/s^2) at a fixed sample rate.
//
// Background is first-order low-pass filtered Gaussian noise, soft-limited
// to +/- amplitude. A background phase may instead hold piecewise-constant
// levels, drawn uniformly from [-amplitude, amplitude] per channel and held
// for 0.8 to 1.2 times hold_ms, which the output follows through the same
// low-pass filter. Background is switched off in a guard band
// around every maneuver and fades back in with a raised-cosine ramp, so the
// maneuver support is exactly the annotated window.
//
// Maneuvers last kManeuverWidthMs:
//   braking      raised-cosine dip of the longitudinal channel to -magnitude
//   lane_change  lateral S-profile: a negative raised-cosine lobe followed by
//                a positive one, each half the width

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "zebra/random.hpp"
#include "zebra/store.hpp"

namespace zebra {

enum class ManeuverKind { braking, lane_change };

std::string_view to_string(ManeuverKind kind);
ManeuverKind parse_maneuver_kind(std::string_view name);

inline constexpr TimestampMs kManeuverWidthMs = 2500;
inline constexpr TimestampMs kNoiseGuardMs = 100;
inline constexpr TimestampMs kNoiseRampMs = 400;
inline constexpr std::size_t kSynthDims = 2;

struct Maneuver {
  ManeuverKind kind = ManeuverKind::braking;
  TimestampMs t_insert_ms = 0;
  double magnitude = 8.0;  // m/s^2, peak absolute acceleration
};

// Background parameters in force from t_start_ms until the next phase.
struct BackgroundPhase {
  TimestampMs t_start_ms = 0;
  double amplitude = 0.0;       // m/s^2
  double correlation_ms = 20.0;  // low-pass time constant
  TimestampMs hold_ms = 0;       // > 0 selects held levels instead of noise

  friend bool operator==(const BackgroundPhase&, const BackgroundPhase&) = default;
};

struct ScenarioSpec {
  double duration_s = 60.0;
  unsigned sample_rate_hz = 100;  // must divide 1000
  std::uint64_t seed = 1;
  std::vector<Maneuver> maneuvers;
  double noise_amplitude = 0.05;      // m/s^2
  double noise_correlation_ms = 20.0;  // low-pass time constant
  // Optional changes of background, ascending by start. Before the first
  // phase the two noise fields above apply.
  std::vector<BackgroundPhase> background_phases;

  // Throws InvalidInput for a bad rate or duration, bad noise parameters,
  // overlapping maneuvers, or maneuvers that do not fit inside the recording.
  void validate() const;

  TimestampMs period_ms() const noexcept { return static_cast<TimestampMs>(1000 / sample_rate_hz); }
  std::uint64_t sample_count() const noexcept;
};

struct Annotation {
  ManeuverKind kind;
  TimestampMs t_start;
  TimestampMs t_end;

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

// Streams samples of a scenario in time order. Sample i has t = i * period.
class SignalGenerator {
 public:
  explicit SignalGenerator(ScenarioSpec spec, std::optional<std::uint64_t> sample_limit = std::nullopt);

  std::uint64_t size() const noexcept { return count_; }

  // Fills `values` (two entries) and returns the timestamp; false when done.
  bool next(TimestampMs& t, std::span<double> values);

  std::vector<Annotation> annotations() const;

 private:
  double envelope(TimestampMs t);
  void enter_phase(const BackgroundPhase& phase);
  double background(TimestampMs t, std::size_t channel);
  double maneuver_value(TimestampMs t, std::size_t channel) const;

  ScenarioSpec spec_;
  Rng rng_;
  std::uint64_t count_ = 0;
  std::uint64_t produced_ = 0;
  BackgroundPhase phase_;
  double rho_ = 0.0;
  double innovation_ = 0.0;
  std::size_t next_phase_ = 0;
  TimestampMs next_hold_ = 0;  // when held levels are redrawn
  double level_[kSynthDims] = {0.0, 0.0};
  double state_[kSynthDims] = {0.0, 0.0};
  std::size_t next_maneuver_ = 0;  // first maneuver whose guard band has not ended
};

// Writes the scenario as ingest CSV (`t_ms,v0,v1` with header) and returns
// the ground-truth annotations, sorted by start.
std::vector<Annotation> generate(const ScenarioSpec& spec, std::ostream& csv);

void write_annotations_csv(std::ostream& out, std::span<const Annotation> annotations);

// Evenly spread maneuvers over a recording: one per `interval_s`, jittered,
// alternating kinds, magnitudes drawn from [min_magnitude, max_magnitude].
std::vector<Maneuver> schedule_maneuvers(std::uint64_t seed, double duration_s, double interval_s,
                                         double min_magnitude, double max_magnitude);

// Stores holding nested prefixes of one recording with the given entry
// counts (ascending), written to root/"store-<count>". The recording is long
// enough for the largest count regardless of spec.duration_s.
std::vector<Store> scale_corpus(const ScenarioSpec& spec, std::span<const std::uint64_t> target_counts,
                                const std::filesystem::path& root, const QuantizationConfig& config);

}  // namespace zebra
