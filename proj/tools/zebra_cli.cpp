// zebra: command-line front end for generation, ingest, detection and
// benchmarking.
//
// Exit codes: 0 success, 1 invalid input or I/O error, 2 detectors disagree
// or an audit found problems.

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "zebra/bench.hpp"
#include "zebra/detect.hpp"
#include "zebra/error.hpp"
#include "zebra/masks.hpp"
#include "zebra/store.hpp"
#include "zebra/synth.hpp"

using namespace zebra;

namespace {

constexpr int kExitMismatch = 2;

// "T:M" with T in ms and M in m/s^2.
Maneuver parse_maneuver(ManeuverKind kind, const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw InvalidInput("maneuver '" + text + "' is not T_MS:MAGNITUDE");
  Maneuver m;
  m.kind = kind;
  try {
    std::size_t used = 0;
    m.t_insert_ms = std::stoll(text.substr(0, colon), &used);
    if (used != colon) throw std::invalid_argument("");
    const std::string mag = text.substr(colon + 1);
    m.magnitude = std::stod(mag, &used);
    if (used != mag.size()) throw std::invalid_argument("");
  } catch (const std::logic_error&) {
    throw InvalidInput("maneuver '" + text + "' is not T_MS:MAGNITUDE");
  }
  return m;
}

// "MIN:MAX:BITS"
DimensionRange parse_range(const std::string& text) {
  const auto a = text.find(':');
  const auto b = a == std::string::npos ? a : text.find(':', a + 1);
  if (b == std::string::npos) throw InvalidInput("range '" + text + "' is not MIN:MAX:BITS");
  try {
    return {std::stod(text.substr(0, a)), std::stod(text.substr(a + 1, b - a - 1)),
            static_cast<unsigned>(std::stoul(text.substr(b + 1)))};
  } catch (const std::logic_error&) {
    throw InvalidInput("range '" + text + "' is not MIN:MAX:BITS");
  }
}

// Accepts plain integers and exponent forms such as 1e6.
std::uint64_t parse_count(const std::string& text) {
  double v = 0.0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size() || !(v >= 1.0) || v != static_cast<double>(
      static_cast<std::uint64_t>(v))) {
    throw InvalidInput("'" + text + "' is not a positive entry count");
  }
  return static_cast<std::uint64_t>(v);
}

// Writes to `path`, or stdout for "" and "-".
template <typename Fn>
void with_output(const std::string& path, Fn fn) {
  if (path.empty() || path == "-") {
    fn(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  fn(out);
  if (!out) throw IoError("write to " + path + " failed");
}

struct GenerateArgs {
  double duration_s = 60.0;
  unsigned rate_hz = 100;
  std::uint64_t seed = 1;
  double noise = 0.05;
  double noise_corr_ms = 20.0;
  std::vector<std::string> braking;
  std::vector<std::string> lane_change;
  std::string out;
  std::string annotations;
};

int run_generate(const GenerateArgs& a) {
  ScenarioSpec spec;
  spec.duration_s = a.duration_s;
  spec.sample_rate_hz = a.rate_hz;
  spec.seed = a.seed;
  spec.noise_amplitude = a.noise;
  spec.noise_correlation_ms = a.noise_corr_ms;
  for (const auto& s : a.braking) spec.maneuvers.push_back(parse_maneuver(ManeuverKind::braking, s));
  for (const auto& s : a.lane_change) spec.maneuvers.push_back(parse_maneuver(ManeuverKind::lane_change, s));
  std::vector<Annotation> annotations;
  with_output(a.out, [&](std::ostream& os) { annotations = generate(spec, os); });
  if (!a.annotations.empty()) {
    with_output(a.annotations, [&](std::ostream& os) { write_annotations_csv(os, annotations); });
  }
  return 0;
}

QuantizationConfig config_from(const std::vector<std::string>& ranges) {
  if (ranges.empty()) return QuantizationConfig::default_2d();
  std::vector<DimensionRange> dims;
  for (const auto& r : ranges) dims.push_back(parse_range(r));
  return QuantizationConfig(std::move(dims));
}

int run_ingest(const std::string& csv, const std::string& store_dir, const std::vector<std::string>& ranges) {
  const auto config = config_from(ranges);
  Store store = [&] {
    if (csv == "-") return ingest_csv(std::cin, store_dir, config);
    std::ifstream in(csv, std::ios::binary);
    if (!in) throw IoError("cannot open " + csv);
    return ingest_csv(in, store_dir, config);
  }();
  std::cerr << "ingested " << store.size() << " samples into " << store_dir << '\n';
  return 0;
}

int run_query(const std::string& store_dir, const std::vector<std::string>& mask_paths, const std::string& detector,
              const std::string& out) {
  const Store store = Store::open(store_dir);
  std::vector<Detector> detectors;
  if (detector == "all") {
    detectors.assign(kAllDetectors.begin(), kAllDetectors.end());
  } else {
    detectors.push_back(parse_detector(detector));
  }

  int status = 0;
  with_output(out, [&](std::ostream& os) {
    bool header = true;
    for (const auto& path : mask_paths) {
      const SearchMask mask = load_mask(path);
      std::optional<std::vector<Event>> reference;
      for (Detector d : detectors) {
        const auto events = detect(store, mask, d);
        write_events_csv(os, events, mask.name, d, header);
        header = false;
        if (!reference) {
          reference = events;
        } else if (events != *reference) {
          std::cerr << "error: " << to_string(d) << " disagrees with " << to_string(detectors.front()) << " on mask '"
                    << mask.name << "':\n"
                    << diff_events(*reference, events);
          status = kExitMismatch;
        }
      }
    }
  });
  return status;
}

int run_spectrum(const std::string& store_dir, std::int64_t bucket_ms, const std::string& out) {
  const Store store = Store::open(store_dir);
  const auto points = store.spectrum(bucket_ms);
  with_output(out, [&](std::ostream& os) { write_spectrum_csv(os, points); });
  return 0;
}

int run_audit(const std::string& store_dir) {
  const Store store = Store::open(store_dir);
  const AuditReport report = store.audit();
  std::cout << "primary entries: " << report.primary_count << "\nindex entries:   " << report.index_count << '\n';
  for (const auto& p : report.problems) std::cout << "problem: " << p << '\n';
  std::cout << (report.ok() ? "ok" : "FAILED") << '\n';
  return report.ok() ? 0 : kExitMismatch;
}

struct BenchArgs {
  std::vector<std::string> sizes = {"1e5", "1e6"};
  std::vector<std::size_t> stages = {1, 2, 3};
  std::size_t masks_per_stage = 5;
  std::uint64_t seed = 7;
  std::size_t repetitions = 5;
  std::string workdir = "bench-work";
  std::string results;
  std::string summary;
};

int run_bench(const BenchArgs& a) {
  std::vector<std::uint64_t> sizes;
  for (const auto& s : a.sizes) sizes.push_back(parse_count(s));
  std::sort(sizes.begin(), sizes.end());
  sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());

  const auto workload = bench_workload(a.seed, sizes.front());
  std::cerr << "building corpus in " << a.workdir << '\n';
  const auto build_start = std::chrono::steady_clock::now();
  const auto stores = scale_corpus(workload.scenario, sizes, a.workdir, QuantizationConfig::default_2d());
  const std::chrono::duration<double> build_time = std::chrono::steady_clock::now() - build_start;
  std::cerr << "generated and ingested " << sizes.back() << " samples in " << build_time.count() << " s\n";
  const auto masks = select_masks(stores, a.seed, a.stages, a.masks_per_stage, workload.value_bounds,
                                  workload.box_shape);

  BenchOptions options;
  options.repetitions = a.repetitions;
  const auto results = run_matrix(stores, masks, kAllDetectors, options);
  const auto rows = summarize(results);
  write_summary_table(std::cout, rows);
  if (!a.results.empty()) with_output(a.results, [&](std::ostream& os) { write_results_csv(os, results); });
  if (!a.summary.empty()) with_output(a.summary, [&](std::ostream& os) { write_summary_csv(os, rows); });
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-stage maneuver detection over kinematic recordings"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* generate_cmd = app.add_subcommand("generate", "Write an annotated synthetic recording as CSV");
  generate_cmd->add_option("--duration", gen.duration_s, "Recording length in seconds")->capture_default_str();
  generate_cmd->add_option("--rate", gen.rate_hz, "Sample rate in Hz (must divide 1000)")->capture_default_str();
  generate_cmd->add_option("--seed", gen.seed)->capture_default_str();
  generate_cmd->add_option("--noise", gen.noise, "Background amplitude in m/s^2")->capture_default_str();
  generate_cmd->add_option("--noise-corr", gen.noise_corr_ms, "Background time constant in ms")->capture_default_str();
  generate_cmd->add_option("--braking", gen.braking, "Braking maneuver T_MS:MAGNITUDE (repeatable)");
  generate_cmd->add_option("--lane-change", gen.lane_change, "Lane change T_MS:MAGNITUDE (repeatable)");
  generate_cmd->add_option("--out", gen.out, "Output CSV (default stdout)");
  generate_cmd->add_option("--annotations", gen.annotations, "Ground-truth annotation CSV");

  std::string csv;
  std::string store_dir;
  std::vector<std::string> ranges;
  auto* ingest_cmd = app.add_subcommand("ingest", "Build a store from CSV");
  ingest_cmd->add_option("--csv", csv, "Input CSV, or - for stdin")->required();
  ingest_cmd->add_option("--store", store_dir, "Store directory")->required();
  ingest_cmd->add_option("--range", ranges, "Per-dimension MIN:MAX:BITS (repeat once per dimension)");

  std::vector<std::string> mask_paths;
  std::string detector = "sfc";
  std::string out;
  auto* query_cmd = app.add_subcommand("query", "Detect maneuvers matching search masks");
  query_cmd->add_option("--store", store_dir)->required();
  query_cmd->add_option("--mask", mask_paths, "Mask file (repeatable)")->required();
  query_cmd->add_option("--detector", detector, "bf_primitive, bf_improved, sfc or all")->capture_default_str();
  query_cmd->add_option("--out", out, "Event CSV (default stdout)");

  std::int64_t bucket_ms = 1000;
  auto* spectrum_cmd = app.add_subcommand("spectrum", "Write bucketed time against Morton code");
  spectrum_cmd->add_option("--store", store_dir)->required();
  spectrum_cmd->add_option("--bucket-ms", bucket_ms)->capture_default_str();
  spectrum_cmd->add_option("--out", out, "Output CSV (default stdout)");

  auto* audit_cmd = app.add_subcommand("audit", "Check store consistency");
  audit_cmd->add_option("--store", store_dir)->required();

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "Time every detector over a corpus and random masks");
  bench_cmd->add_option("--sizes", bench.sizes, "Store entry counts")->delimiter(',')->capture_default_str();
  bench_cmd->add_option("--stages", bench.stages, "Stage counts")->delimiter(',')->capture_default_str();
  bench_cmd->add_option("--masks-per-stage", bench.masks_per_stage)->capture_default_str();
  bench_cmd->add_option("--seed", bench.seed)->capture_default_str();
  bench_cmd->add_option("--repetitions", bench.repetitions)->capture_default_str();
  bench_cmd->add_option("--workdir", bench.workdir, "Directory for corpus stores")->capture_default_str();
  bench_cmd->add_option("--results", bench.results, "Per-cell results CSV");
  bench_cmd->add_option("--summary", bench.summary, "Summary CSV");

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate_cmd->parsed()) return run_generate(gen);
    if (ingest_cmd->parsed()) return run_ingest(csv, store_dir, ranges);
    if (query_cmd->parsed()) return run_query(store_dir, mask_paths, detector, out);
    if (spectrum_cmd->parsed()) return run_spectrum(store_dir, bucket_ms, out);
    if (audit_cmd->parsed()) return run_audit(store_dir);
    if (bench_cmd->parsed()) return run_bench(bench);
  } catch (const DetectorMismatch& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitMismatch;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
