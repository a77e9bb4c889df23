#include "hesskit/block_layout.hpp"

#include <stdexcept>
#include <unordered_set>
#include <utility>

namespace hesskit {

BlockLayout::BlockLayout(std::vector<Segment> segments)
    : segments_(std::move(segments)) {
  if (segments_.empty()) {
    throw std::invalid_argument("BlockLayout: no segments");
  }
  std::unordered_set<std::string> names;
  std::size_t expect = 0;
  for (const Segment& s : segments_) {
    if (s.length == 0) {
      throw std::invalid_argument("BlockLayout: zero-length segment '" +
                                  s.name + "'");
    }
    if (s.offset != expect) {
      throw std::invalid_argument(
          "BlockLayout: segments must be contiguous; '" + s.name +
          "' breaks the tiling");
    }
    if (!names.insert(s.name).second) {
      throw std::invalid_argument("BlockLayout: duplicate segment name '" +
                                  s.name + "'");
    }
    expect += s.length;
  }
  total_ = expect;
}

BlockLayout BlockLayout::single(std::string name, std::size_t length) {
  return BlockLayout({Segment{std::move(name), 0, length}});
}

bool BlockLayout::has(std::string_view name) const {
  for (const Segment& s : segments_) {
    if (s.name == name) return true;
  }
  return false;
}

const Segment& BlockLayout::find(std::string_view name) const {
  for (const Segment& s : segments_) {
    if (s.name == name) return s;
  }
  throw std::invalid_argument("BlockLayout: unknown segment '" +
                              std::string(name) + "'");
}

}  // namespace hesskit
