#include "zebra/store.hpp"

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>
#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "text.hpp"
#include "zebra/error.hpp"

namespace zebra {

static_assert(std::endian::native == std::endian::little, "store files are little-endian and mapped directly");
static_assert(std::numeric_limits<double>::is_iec559, "store files hold IEEE-754 doubles");

namespace fs = std::filesystem;

namespace {

constexpr const char* kPrimaryFile = "primary.log";
constexpr const char* kIndexFile = "index.bin";
constexpr const char* kManifestFile = "manifest.txt";

std::uint32_t crc_update(std::uint32_t crc, const void* data, std::size_t size) {
  const auto* p = static_cast<const Bytef*>(data);
  while (size > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(size, 1u << 30));
    crc = static_cast<std::uint32_t>(::crc32(crc, p, chunk));
    p += chunk;
    size -= chunk;
  }
  return crc;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Floor division, so negative timestamps bucket downwards.
TimestampMs floor_to_bucket(TimestampMs t, TimestampMs bucket) {
  TimestampMs q = t / bucket;
  if ((t % bucket != 0) && (t < 0)) --q;
  return q * bucket;
}

}  // namespace

std::uint32_t file_crc32(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<char> buf(1 << 20);
  std::uint32_t crc = static_cast<std::uint32_t>(::crc32(0, nullptr, 0));
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    crc = crc_update(crc, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return crc;
}

// ---- Manifest ---------------------------------------------------------------

std::string Manifest::render() const {
  std::string out;
  auto line = [&out](std::string_view key, const std::string& value) {
    out.append(key).append(" = ").append(value).append("\n");
  };
  line("format_version", std::to_string(format_version));
  line("dims", std::to_string(config.dims()));
  for (std::size_t d = 0; d < config.dims(); ++d) {
    const auto& r = config.dim(d);
    const std::string prefix = "dim" + std::to_string(d);
    line(prefix + ".min", text::format_double(r.min_value));
    line(prefix + ".max", text::format_double(r.max_value));
    line(prefix + ".bits", std::to_string(r.bits));
  }
  line("entry_count", std::to_string(entry_count));
  line("t_min", std::to_string(t_min));
  line("t_max", std::to_string(t_max));
  line("primary_crc32", std::to_string(primary_crc32));
  line("index_crc32", std::to_string(index_crc32));
  return out;
}

Manifest Manifest::parse(std::string_view text) {
  std::map<std::string, std::string, std::less<>> kv;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const auto line = text::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError("manifest: expected 'key = value'", line_no);
    kv[std::string(text::trim(line.substr(0, eq)))] = std::string(text::trim(line.substr(eq + 1)));
  }

  auto field = [&kv](const std::string& key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw ParseError("manifest: missing field '" + key + "'");
    return it->second;
  };
  auto int_field = [&]<typename Int>(const std::string& key, Int) {
    const auto v = text::parse_int<Int>(field(key));
    if (!v) throw ParseError("manifest: field '" + key + "' is not an integer");
    return *v;
  };
  auto real_field = [&](const std::string& key) {
    const auto v = text::parse_double(field(key));
    if (!v) throw ParseError("manifest: field '" + key + "' is not a number");
    return *v;
  };

  Manifest m;
  m.format_version = int_field("format_version", int{});
  if (m.format_version != kFormatVersion) {
    throw ParseError("manifest: unsupported format_version " + std::to_string(m.format_version));
  }
  const auto dims = int_field("dims", std::size_t{});
  std::vector<DimensionRange> ranges;
  for (std::size_t d = 0; d < dims; ++d) {
    const std::string prefix = "dim" + std::to_string(d);
    ranges.push_back({real_field(prefix + ".min"), real_field(prefix + ".max"), int_field(prefix + ".bits", unsigned{})});
  }
  try {
    m.config = QuantizationConfig(std::move(ranges));
  } catch (const InvalidInput& e) {
    throw ParseError(std::string("manifest: ") + e.what());
  }
  m.entry_count = int_field("entry_count", std::uint64_t{});
  m.t_min = int_field("t_min", TimestampMs{});
  m.t_max = int_field("t_max", TimestampMs{});
  m.primary_crc32 = int_field("primary_crc32", std::uint32_t{});
  m.index_crc32 = int_field("index_crc32", std::uint32_t{});
  return m;
}

// ---- MappedFile -------------------------------------------------------------

namespace detail {

MappedFile::MappedFile(const fs::path& path) {
  const int fd = ::open(path.c_str(), O_RDONLY | O_CLOEXEC);
  if (fd < 0) throw IoError("cannot open " + path.string());
  struct stat st {};
  if (::fstat(fd, &st) != 0) {
    ::close(fd);
    throw IoError("cannot stat " + path.string());
  }
  size_ = static_cast<std::size_t>(st.st_size);
  if (size_ > 0) {
    void* p = ::mmap(nullptr, size_, PROT_READ, MAP_SHARED, fd, 0);
    if (p == MAP_FAILED) {
      ::close(fd);
      throw IoError("cannot map " + path.string());
    }
    data_ = static_cast<const std::byte*>(p);
  }
  ::close(fd);
}

MappedFile::MappedFile(MappedFile&& other) noexcept
    : data_(std::exchange(other.data_, nullptr)), size_(std::exchange(other.size_, 0)) {}

MappedFile& MappedFile::operator=(MappedFile&& other) noexcept {
  if (this != &other) {
    if (data_) ::munmap(const_cast<std::byte*>(data_), size_);
    data_ = std::exchange(other.data_, nullptr);
    size_ = std::exchange(other.size_, 0);
  }
  return *this;
}

MappedFile::~MappedFile() {
  if (data_) ::munmap(const_cast<std::byte*>(data_), size_);
}

}  // namespace detail

// ---- Store ------------------------------------------------------------------

SampleRef SampleRange::iterator::operator*() const { return store_->sample_at(pos_); }

Store Store::open(const fs::path& dir) {
  Store s;
  s.dir_ = dir;
  s.manifest_ = Manifest::parse(read_file(dir / kManifestFile));
  s.record_size_ = sizeof(TimestampMs) + s.manifest_.config.dims() * sizeof(double);
  s.count_ = static_cast<std::size_t>(s.manifest_.entry_count);
  s.primary_file_ = detail::MappedFile(dir / kPrimaryFile);
  s.index_file_ = detail::MappedFile(dir / kIndexFile);

  const auto primary = s.primary_file_.bytes();
  const auto index = s.index_file_.bytes();
  if (primary.size() != s.count_ * s.record_size_) {
    throw IoError(dir.string() + ": primary log size does not match entry_count");
  }
  if (index.size() != s.count_ * sizeof(IndexEntry)) {
    throw IoError(dir.string() + ": index size does not match entry_count");
  }
  s.primary_ = primary.data();
  s.index_ = {reinterpret_cast<const IndexEntry*>(index.data()), s.count_};
  return s;
}

TimestampMs Store::time_at(std::size_t pos) const noexcept {
  TimestampMs t;
  std::memcpy(&t, primary_ + pos * record_size_, sizeof t);
  return t;
}

std::span<const double> Store::values_at(std::size_t pos) const noexcept {
  const auto* p = reinterpret_cast<const double*>(primary_ + pos * record_size_ + sizeof(TimestampMs));
  return {p, dims()};
}

std::size_t Store::lower_bound(TimestampMs t) const noexcept {
  std::size_t lo = 0;
  std::size_t hi = count_;
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (time_at(mid) < t) {
      lo = mid + 1;
    } else {
      hi = mid;
    }
  }
  return lo;
}

SampleRange Store::lookup_time_range(TimestampMs t0, TimestampMs t1) const {
  if (t0 > t1) throw InvalidInput("lookup_time_range: t0 > t1");
  return SampleRange(this, lower_bound(t0), lower_bound(t1));
}

std::span<const IndexEntry> Store::scan_code_range(MortonCode c_lo, MortonCode c_hi) const {
  if (c_lo > c_hi) throw InvalidInput("scan_code_range: c_lo > c_hi");
  const auto first = std::lower_bound(index_.begin(), index_.end(), c_lo,
                                      [](const IndexEntry& e, MortonCode c) { return e.code < c; });
  const auto last =
      std::upper_bound(first, index_.end(), c_hi, [](MortonCode c, const IndexEntry& e) { return c < e.code; });
  return {first, last};
}

std::vector<SpectrumPoint> Store::spectrum(TimestampMs bucket_ms) const {
  if (bucket_ms < 1) throw InvalidInput("spectrum: bucket_ms must be >= 1");
  const MortonCodec codec(config());
  LatticePoint point(dims());
  std::vector<SpectrumPoint> out;
  out.reserve(count_);
  for (std::size_t i = 0; i < count_; ++i) {
    quantize_into(values_at(i), config(), point);
    out.push_back({floor_to_bucket(time_at(i), bucket_ms), codec.encode_unchecked(point)});
  }
  return out;
}

AuditReport Store::audit() const {
  AuditReport report;
  report.primary_count = count_;
  report.index_count = index_.size();
  auto problem = [&report](std::string msg) {
    if (report.problems.size() < 20) report.problems.push_back(std::move(msg));
  };

  if (manifest_.entry_count != count_ || index_.size() != count_) {
    problem("cardinality mismatch: manifest " + std::to_string(manifest_.entry_count) + ", primary " +
            std::to_string(count_) + ", index " + std::to_string(index_.size()));
  }
  for (std::size_t i = 1; i < count_; ++i) {
    if (time_at(i) <= time_at(i - 1)) {
      problem("primary timestamps not increasing at position " + std::to_string(i));
      break;
    }
  }
  if (count_ > 0 && (time_at(0) != manifest_.t_min || time_at(count_ - 1) != manifest_.t_max)) {
    problem("manifest time range does not match primary log");
  }

  const MortonCodec codec(config());
  LatticePoint point(dims());
  std::vector<bool> seen(count_, false);
  for (std::size_t i = 0; i < index_.size(); ++i) {
    const auto& e = index_[i];
    if (i > 0 && !(index_[i - 1] < e)) problem("index not strictly sorted at entry " + std::to_string(i));
    const std::size_t pos = lower_bound(e.t);
    if (pos >= count_ || time_at(pos) != e.t) {
      problem("index entry " + std::to_string(i) + " refers to missing timestamp " + std::to_string(e.t));
      continue;
    }
    if (seen[pos]) problem("timestamp " + std::to_string(e.t) + " indexed twice");
    seen[pos] = true;
    quantize_into(values_at(pos), config(), point);
    if (codec.encode_unchecked(point) != e.code) {
      problem("index entry " + std::to_string(i) + " code does not match sample at t=" + std::to_string(e.t));
    }
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) problem("primary samples missing from index");

  if (file_crc32(dir_ / kPrimaryFile) != manifest_.primary_crc32) problem("primary log checksum mismatch");
  if (file_crc32(dir_ / kIndexFile) != manifest_.index_crc32) problem("index checksum mismatch");
  return report;
}

// ---- StoreWriter ------------------------------------------------------------

struct StoreWriter::State {
  fs::path dir;
  Manifest manifest;
  MortonCodec codec;
  std::ofstream primary;
  std::vector<char> buffer;
  std::uint32_t primary_crc = static_cast<std::uint32_t>(::crc32(0, nullptr, 0));
  std::vector<IndexEntry> index;
  LatticePoint point;
  bool committed = false;

  State(fs::path d, QuantizationConfig config) : dir(std::move(d)), codec(config), point(config.dims()) {
    manifest.config = std::move(config);
  }

  void flush() {
    if (buffer.empty()) return;
    primary.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
    primary_crc = crc_update(primary_crc, buffer.data(), buffer.size());
    buffer.clear();
  }
};

StoreWriter::StoreWriter(fs::path dir, QuantizationConfig config)
    : state_(std::make_unique<State>(std::move(dir), std::move(config))) {
  std::error_code ec;
  fs::create_directories(state_->dir, ec);
  if (ec) throw IoError("cannot create " + state_->dir.string() + ": " + ec.message());
  // Drop the old manifest first so a half-written store never opens.
  fs::remove(state_->dir / kManifestFile, ec);
  state_->primary.open(state_->dir / kPrimaryFile, std::ios::binary | std::ios::trunc);
  if (!state_->primary) throw IoError("cannot write " + (state_->dir / kPrimaryFile).string());
  state_->buffer.reserve(1 << 20);
}

StoreWriter::StoreWriter(StoreWriter&&) noexcept = default;
StoreWriter& StoreWriter::operator=(StoreWriter&&) noexcept = default;
StoreWriter::~StoreWriter() = default;

std::uint64_t StoreWriter::size() const noexcept { return state_ ? state_->manifest.entry_count : 0; }

void StoreWriter::append(TimestampMs t, std::span<const double> values) {
  auto& s = *state_;
  if (s.committed) throw InvalidInput("append after commit");
  if (values.size() != s.manifest.config.dims()) {
    throw InvalidInput("sample has " + std::to_string(values.size()) + " values, store has " +
                       std::to_string(s.manifest.config.dims()) + " dimensions");
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw InvalidInput("non-finite value at t=" + std::to_string(t));
  }
  if (s.manifest.entry_count > 0 && t <= s.manifest.t_max) {
    throw InvalidInput("timestamp " + std::to_string(t) + " does not increase past " + std::to_string(s.manifest.t_max));
  }
  if (s.manifest.entry_count == 0) s.manifest.t_min = t;
  s.manifest.t_max = t;
  ++s.manifest.entry_count;

  const auto* tb = reinterpret_cast<const char*>(&t);
  s.buffer.insert(s.buffer.end(), tb, tb + sizeof t);
  const auto* vb = reinterpret_cast<const char*>(values.data());
  s.buffer.insert(s.buffer.end(), vb, vb + values.size_bytes());
  if (s.buffer.size() >= (1 << 20)) s.flush();

  quantize_into(values, s.manifest.config, s.point);
  s.index.push_back({s.codec.encode_unchecked(s.point), t});
}

Store StoreWriter::commit() {
  auto& s = *state_;
  if (s.committed) throw InvalidInput("store already committed");
  s.committed = true;
  s.flush();
  s.primary.close();
  if (!s.primary) throw IoError("failed writing " + (s.dir / kPrimaryFile).string());
  s.manifest.primary_crc32 = s.primary_crc;

  std::sort(s.index.begin(), s.index.end());
  {
    std::ofstream out(s.dir / kIndexFile, std::ios::binary | std::ios::trunc);
    const auto bytes = std::as_bytes(std::span(s.index));
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing " + (s.dir / kIndexFile).string());
    s.manifest.index_crc32 = crc_update(static_cast<std::uint32_t>(::crc32(0, nullptr, 0)), bytes.data(), bytes.size());
  }
  std::vector<IndexEntry>().swap(s.index);
  {
    std::ofstream out(s.dir / kManifestFile, std::ios::binary | std::ios::trunc);
    out << s.manifest.render();
    if (!out) throw IoError("failed writing " + (s.dir / kManifestFile).string());
  }
  return Store::open(s.dir);
}

// ---- CSV --------------------------------------------------------------------

Store ingest_csv(std::istream& csv, const fs::path& dir, const QuantizationConfig& config) {
  StoreWriter writer(dir, config);
  std::string line;
  std::size_t line_no = 0;
  bool seen_content = false;
  TimestampMs last_t = 0;
  std::size_t last_line = 0;
  std::vector<double> values(config.dims());

  while (std::getline(csv, line)) {
    ++line_no;
    const auto row = text::trim(line);
    if (row.empty()) continue;
    const auto fields = text::split(row, ',');
    if (!seen_content) {
      seen_content = true;
      if (!text::parse_int<TimestampMs>(fields.front())) continue;  // header
    }
    if (fields.size() != config.dims() + 1) {
      throw ParseError("expected " + std::to_string(config.dims() + 1) + " columns, found " +
                           std::to_string(fields.size()),
                       line_no);
    }
    const auto t = text::parse_int<TimestampMs>(fields[0]);
    if (!t) throw ParseError("malformed timestamp '" + std::string(fields[0]) + "'", line_no);
    for (std::size_t d = 0; d < config.dims(); ++d) {
      const auto v = text::parse_double(fields[d + 1]);
      if (!v || !std::isfinite(*v)) {
        throw ParseError("malformed value '" + std::string(fields[d + 1]) + "' in column " + std::to_string(d + 1),
                         line_no);
      }
      values[d] = *v;
    }
    if (last_line != 0 && *t <= last_t) {
      throw ParseError("timestamp " + std::to_string(*t) + " does not increase past " + std::to_string(last_t) +
                           " (line " + std::to_string(last_line) + ")",
                       line_no);
    }
    writer.append(*t, values);
    last_t = *t;
    last_line = line_no;
  }
  if (csv.bad()) throw IoError("error reading CSV input");
  return writer.commit();
}

void write_spectrum_csv(std::ostream& out, std::span<const SpectrumPoint> points) {
  std::string buf = "t_ms,code\n";
  for (const auto& p : points) {
    text::append_int(buf, p.t_bucket);
    buf.push_back(',');
    text::append_int(buf, p.code.value);
    buf.push_back('\n');
    if (buf.size() > (1 << 20)) {
      out << buf;
      buf.clear();
    }
  }
  out << buf;
}

}  // namespace zebra
