#include "zebra/masks.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "text.hpp"
#include "zebra/error.hpp"
#include "zebra/random.hpp"

namespace zebra {

void TemporalParams::validate() const {
  if (min_duration_ms < 1) throw InvalidInput("dur: minimum duration must be at least 1 ms");
  if (min_duration_ms > max_duration_ms) throw InvalidInput("dur: minimum duration exceeds maximum duration");
  if (min_gap_ms > max_gap_ms) throw InvalidInput("gap: minimum gap exceeds maximum gap");
  if (min_gap_ms < -min_duration_ms) throw InvalidInput("gap: minimum gap must not be below -(minimum duration)");
  if (max_outlier_ms < 0) throw InvalidInput("outlier: must be non-negative");
}

void SearchMask::validate() const {
  if (stages.empty()) throw InvalidInput("stage: mask '" + name + "' has no stages");
  const std::size_t n = stages.front().dims();
  if (n == 0) throw InvalidInput("stage 1: box has no dimensions");
  for (std::size_t s = 0; s < stages.size(); ++s) {
    const auto& box = stages[s];
    const std::string where = "stage " + std::to_string(s + 1);
    if (box.lo.size() != n || box.hi.size() != n) {
      throw InvalidInput(where + ": expected " + std::to_string(n) + " dimensions");
    }
    for (std::size_t d = 0; d < n; ++d) {
      if (!std::isfinite(box.lo[d]) || !std::isfinite(box.hi[d])) {
        throw InvalidInput(where + ": non-finite bound in dimension " + std::to_string(d));
      }
      if (box.lo[d] > box.hi[d]) throw InvalidInput(where + ": inverted box in dimension " + std::to_string(d));
    }
  }
  params.validate();
}

namespace {

TimestampMs parse_ms(std::string_view token, std::string_view field, std::size_t line) {
  const auto v = text::parse_int<TimestampMs>(token);
  if (!v) throw ParseError(std::string(field) + ": '" + std::string(token) + "' is not an integer", line);
  return *v;
}

void expect_args(const std::vector<std::string_view>& tokens, std::size_t n, std::size_t line) {
  if (tokens.size() != n + 1) {
    throw ParseError(std::string(tokens.front()) + ": expected " + std::to_string(n) + " values", line);
  }
}

}  // namespace

SearchMask parse_mask(std::string_view input) {
  SearchMask mask;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= input.size()) {
    const auto nl = input.find('\n', pos);
    auto line = input.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? input.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const auto tokens = text::split_ws(line);
    if (tokens.empty()) continue;

    const auto key = tokens.front();
    if (key == "name") {
      mask.name = std::string(text::trim(text::trim(line).substr(4)));
    } else if (key == "stage") {
      if (tokens.size() < 3 || tokens.size() % 2 == 0) {
        throw ParseError("stage: expected lo/hi pairs", line_no);
      }
      StageBox box;
      for (std::size_t i = 1; i < tokens.size(); i += 2) {
        const auto lo = text::parse_double(tokens[i]);
        const auto hi = text::parse_double(tokens[i + 1]);
        if (!lo || !hi) throw ParseError("stage: malformed bound", line_no);
        if (*lo > *hi) {
          throw ParseError("stage: inverted box in dimension " + std::to_string((i - 1) / 2), line_no);
        }
        box.lo.push_back(*lo);
        box.hi.push_back(*hi);
      }
      mask.stages.push_back(std::move(box));
    } else if (key == "dur") {
      expect_args(tokens, 2, line_no);
      mask.params.min_duration_ms = parse_ms(tokens[1], key, line_no);
      mask.params.max_duration_ms = parse_ms(tokens[2], key, line_no);
    } else if (key == "gap") {
      expect_args(tokens, 2, line_no);
      mask.params.min_gap_ms = parse_ms(tokens[1], key, line_no);
      mask.params.max_gap_ms = parse_ms(tokens[2], key, line_no);
    } else if (key == "outlier") {
      expect_args(tokens, 1, line_no);
      mask.params.max_outlier_ms = parse_ms(tokens[1], key, line_no);
    } else {
      throw ParseError("unknown directive '" + std::string(key) + "'", line_no);
    }
  }
  try {
    mask.validate();
  } catch (const InvalidInput& e) {
    throw ParseError(e.what());
  }
  return mask;
}

std::string render_mask(const SearchMask& mask) {
  std::string out;
  if (!mask.name.empty()) out += "name " + mask.name + "\n";
  for (const auto& box : mask.stages) {
    out += "stage";
    for (std::size_t d = 0; d < box.dims(); ++d) {
      out += ' ';
      text::append_double(out, box.lo[d]);
      out += ' ';
      text::append_double(out, box.hi[d]);
    }
    out += '\n';
  }
  const auto& p = mask.params;
  out += "dur " + std::to_string(p.min_duration_ms) + " " + std::to_string(p.max_duration_ms) + "\n";
  out += "gap " + std::to_string(p.min_gap_ms) + " " + std::to_string(p.max_gap_ms) + "\n";
  out += "outlier " + std::to_string(p.max_outlier_ms) + "\n";
  return out;
}

SearchMask load_mask(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open mask file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  SearchMask mask = parse_mask(ss.str());
  if (mask.name.empty()) mask.name = path.stem().string();
  return mask;
}

std::vector<SearchMask> random_masks(std::uint64_t seed, std::size_t stage_count, std::size_t count,
                                     std::span<const Interval> value_bounds, const RandomBoxShape& shape) {
  if (stage_count == 0) throw InvalidInput("random_masks: stage_count must be >= 1");
  if (value_bounds.empty()) throw InvalidInput("random_masks: value_bounds is empty");
  for (const auto& b : value_bounds) {
    if (!(b.lo < b.hi)) throw InvalidInput("random_masks: empty value bound");
  }
  if (!(shape.min_width_fraction >= 0.0 && shape.min_width_fraction <= shape.max_width_fraction &&
        shape.max_width_fraction <= 1.0)) {
    throw InvalidInput("random_masks: width fractions must satisfy 0 <= min <= max <= 1");
  }
  const StageBox* excluded = shape.excluded ? &*shape.excluded : nullptr;
  if (excluded && excluded->dims() != value_bounds.size()) {
    throw InvalidInput("random_masks: excluded region has the wrong dimensionality");
  }
  // A box inside the bounds that avoids the excluded region must exist, or
  // the redraw loop below would not terminate.
  if (excluded) {
    bool escapable = false;
    for (std::size_t d = 0; d < value_bounds.size(); ++d) {
      const double min_width = shape.min_width_fraction * (value_bounds[d].hi - value_bounds[d].lo);
      if (excluded->lo[d] - value_bounds[d].lo > min_width || value_bounds[d].hi - excluded->hi[d] > min_width) {
        escapable = true;
      }
    }
    if (!escapable) throw InvalidInput("random_masks: excluded region leaves no room for a box");
  }

  Rng rng(seed);
  auto draw_box = [&] {
    StageBox box;
    for (const auto& b : value_bounds) {
      const double span = b.hi - b.lo;
      const double width = span * rng.uniform(shape.min_width_fraction, shape.max_width_fraction);
      const double lo = b.lo + (span - width) * rng.uniform();
      box.lo.push_back(lo);
      box.hi.push_back(std::min(lo + width, b.hi));
    }
    return box;
  };
  auto intersects_excluded = [&](const StageBox& box) {
    if (!excluded) return false;
    for (std::size_t d = 0; d < box.dims(); ++d) {
      if (box.hi[d] < excluded->lo[d] || box.lo[d] > excluded->hi[d]) return false;
    }
    return true;
  };

  std::vector<SearchMask> masks;
  masks.reserve(count);
  for (std::size_t m = 0; m < count; ++m) {
    SearchMask mask;
    mask.name = "random-" + std::to_string(stage_count) + "s-" + std::to_string(seed) + "-" + std::to_string(m);
    for (std::size_t s = 0; s < stage_count; ++s) {
      StageBox box = draw_box();
      while (intersects_excluded(box)) box = draw_box();
      mask.stages.push_back(std::move(box));
    }
    masks.push_back(std::move(mask));
  }
  return masks;
}

}  // namespace zebra
