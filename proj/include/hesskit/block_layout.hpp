#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace hesskit {

struct Segment {
  std::string name;
  std::size_t offset = 0;
  std::size_t length = 0;

  friend bool operator==(const Segment&, const Segment&) = default;
};

/// Named partition of a flat coordinate vector. Segments are contiguous,
/// non-overlapping and cover [0, total) exactly.
class BlockLayout {
 public:
  BlockLayout() = default;

  /// Throws std::invalid_argument if segments have duplicate names, zero
  /// lengths, or do not tile [0, total) in offset order.
  explicit BlockLayout(std::vector<Segment> segments);

  /// Convenience: a single unnamed-by-default segment covering everything.
  static BlockLayout single(std::string name, std::size_t length);

  std::size_t total() const { return total_; }
  const std::vector<Segment>& segments() const { return segments_; }

  bool has(std::string_view name) const;
  const Segment& find(std::string_view name) const;  // throws if unknown

  friend bool operator==(const BlockLayout& a, const BlockLayout& b) {
    return a.segments_ == b.segments_;
  }

 private:
  std::vector<Segment> segments_;
  std::size_t total_ = 0;
};

}  // namespace hesskit
