#pragma once

// Timestamp-keyed sample store with a Morton-code secondary index.
//
// A store is a directory holding three files:
//   primary.log   fixed-width records: t (int64 LE) followed by n float64 LE
//   index.bin     (code: uint64 LE, t: int64 LE) records sorted by (code, t)
//   manifest.txt  key = value lines describing config, counts and checksums
//
// Stores are written once by StoreWriter and are read-only afterwards. A
// committed Store maps both data files and may be shared by any number of
// concurrent readers.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "zebra/morton.hpp"

namespace zebra {

using TimestampMs = std::int64_t;

struct Sample {
  TimestampMs t = 0;
  std::vector<double> v;

  friend bool operator==(const Sample&, const Sample&) = default;
};

// View of one primary record; `v` points into the mapped log.
struct SampleRef {
  TimestampMs t;
  std::span<const double> v;
};

struct IndexEntry {
  MortonCode code;
  TimestampMs t;

  friend constexpr auto operator<=>(const IndexEntry&, const IndexEntry&) = default;
};
static_assert(sizeof(IndexEntry) == 16, "index records are 16 bytes on disk");

struct Manifest {
  static constexpr int kFormatVersion = 1;

  int format_version = kFormatVersion;
  QuantizationConfig config = QuantizationConfig::default_2d();
  std::uint64_t entry_count = 0;
  TimestampMs t_min = 0;  // 0 when the store is empty
  TimestampMs t_max = 0;
  std::uint32_t primary_crc32 = 0;
  std::uint32_t index_crc32 = 0;

  std::string render() const;
  static Manifest parse(std::string_view text);

  friend bool operator==(const Manifest&, const Manifest&) = default;
};

struct SpectrumPoint {
  TimestampMs t_bucket;
  MortonCode code;

  friend bool operator==(const SpectrumPoint&, const SpectrumPoint&) = default;
};

struct AuditReport {
  std::uint64_t primary_count = 0;
  std::uint64_t index_count = 0;
  std::vector<std::string> problems;

  bool ok() const noexcept { return problems.empty(); }
};

namespace detail {

class MappedFile {
 public:
  MappedFile() = default;
  explicit MappedFile(const std::filesystem::path& path);
  MappedFile(MappedFile&& other) noexcept;
  MappedFile& operator=(MappedFile&& other) noexcept;
  MappedFile(const MappedFile&) = delete;
  MappedFile& operator=(const MappedFile&) = delete;
  ~MappedFile();

  std::span<const std::byte> bytes() const noexcept { return {data_, size_}; }

 private:
  const std::byte* data_ = nullptr;
  std::size_t size_ = 0;
};

}  // namespace detail

class Store;

// Ascending run of primary records, as returned by Store::lookup_time_range.
class SampleRange {
 public:
  class iterator {
   public:
    using value_type = SampleRef;
    using difference_type = std::ptrdiff_t;

    iterator() = default;
    iterator(const Store* store, std::size_t pos) : store_(store), pos_(pos) {}

    SampleRef operator*() const;
    iterator& operator++() {
      ++pos_;
      return *this;
    }
    iterator operator++(int) {
      auto tmp = *this;
      ++pos_;
      return tmp;
    }
    friend bool operator==(const iterator&, const iterator&) = default;

   private:
    const Store* store_ = nullptr;
    std::size_t pos_ = 0;
  };

  SampleRange(const Store* store, std::size_t first, std::size_t last) : store_(store), first_(first), last_(last) {}

  iterator begin() const { return {store_, first_}; }
  iterator end() const { return {store_, last_}; }
  std::size_t size() const noexcept { return last_ - first_; }
  bool empty() const noexcept { return first_ == last_; }
  std::size_t first_position() const noexcept { return first_; }

 private:
  const Store* store_;
  std::size_t first_;
  std::size_t last_;
};

class Store {
 public:
  static Store open(const std::filesystem::path& dir);

  const std::filesystem::path& directory() const noexcept { return dir_; }
  const Manifest& manifest() const noexcept { return manifest_; }
  const QuantizationConfig& config() const noexcept { return manifest_.config; }
  std::size_t dims() const noexcept { return manifest_.config.dims(); }
  std::size_t size() const noexcept { return count_; }
  bool empty() const noexcept { return count_ == 0; }

  // Positional access to the primary log, ascending by timestamp.
  TimestampMs time_at(std::size_t pos) const noexcept;
  std::span<const double> values_at(std::size_t pos) const noexcept;
  SampleRef sample_at(std::size_t pos) const noexcept { return {time_at(pos), values_at(pos)}; }

  // Position of the first record with t >= `t` (size() if none).
  std::size_t lower_bound(TimestampMs t) const noexcept;

  // All samples with t0 <= t < t1. Throws InvalidInput when t0 > t1.
  SampleRange lookup_time_range(TimestampMs t0, TimestampMs t1) const;

  // Index entries with c_lo <= code <= c_hi, in (code, t) order. Two binary
  // searches; the result is a view into the mapped index.
  std::span<const IndexEntry> scan_code_range(MortonCode c_lo, MortonCode c_hi) const;

  std::span<const IndexEntry> index() const noexcept { return index_; }

  // One (bucketed time, code) pair per sample in time order. Codes are
  // recomputed from the primary log. Throws InvalidInput when bucket_ms < 1.
  std::vector<SpectrumPoint> spectrum(TimestampMs bucket_ms) const;

  // Full consistency check: counts, sort order, code recomputation,
  // timestamp coverage and file checksums.
  AuditReport audit() const;

 private:
  Store() = default;

  std::filesystem::path dir_;
  Manifest manifest_;
  detail::MappedFile primary_file_;
  detail::MappedFile index_file_;
  const std::byte* primary_ = nullptr;
  std::size_t record_size_ = 0;
  std::size_t count_ = 0;
  std::span<const IndexEntry> index_;
};

// Single-writer builder. Samples are appended to the primary log as they
// arrive; the index is sorted once and written at commit.
class StoreWriter {
 public:
  // Creates `dir` if needed and replaces any store already in it.
  StoreWriter(std::filesystem::path dir, QuantizationConfig config);
  StoreWriter(StoreWriter&&) noexcept;
  StoreWriter& operator=(StoreWriter&&) noexcept;
  ~StoreWriter();

  // Throws InvalidInput on a dimension mismatch, a non-finite value, or a
  // timestamp that does not increase.
  void append(TimestampMs t, std::span<const double> values);

  std::uint64_t size() const noexcept;

  // Sorts and writes the index, writes the manifest and opens the store.
  // The writer is spent afterwards.
  Store commit();

 private:
  struct State;
  std::unique_ptr<State> state_;
};

// Builds a store from CSV rows `t_ms,v0,...,v(n-1)`. A header line is
// accepted when its first field is not an integer. Throws ParseError with
// the offending line number.
Store ingest_csv(std::istream& csv, const std::filesystem::path& dir, const QuantizationConfig& config);

void write_spectrum_csv(std::ostream& out, std::span<const SpectrumPoint> points);

std::uint32_t file_crc32(const std::filesystem::path& path);

}  // namespace zebra
