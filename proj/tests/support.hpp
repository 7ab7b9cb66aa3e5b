#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "zebra/store.hpp"

namespace zebra::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::uint64_t counter = 0;
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("zebra-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

struct Row {
  TimestampMs t;
  std::vector<double> v;
};

inline Store make_store(const std::filesystem::path& dir, const QuantizationConfig& config,
                        const std::vector<Row>& rows) {
  StoreWriter writer(dir, config);
  for (const auto& r : rows) writer.append(r.t, r.v);
  return writer.commit();
}

// Reference bit interleave written straight from the definition: round j
// takes bit j of every dimension that still has bits, dimension 0 first.
inline std::uint64_t naive_encode(const std::vector<std::uint64_t>& p, const std::vector<unsigned>& bits) {
  std::uint64_t code = 0;
  unsigned pos = 0;
  unsigned widest = 0;
  for (unsigned b : bits) widest = b > widest ? b : widest;
  for (unsigned j = 0; j < widest; ++j) {
    for (std::size_t d = 0; d < p.size(); ++d) {
      if (j < bits[d]) code |= ((p[d] >> j) & 1u) << pos++;
    }
  }
  return code;
}

}  // namespace zebra::testing
