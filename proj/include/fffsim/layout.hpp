#pragma once

// Per-axis coarsening layouts. Level k merges `factor` segments of level k-1;
// a non-divisible remainder is absorbed by one oversized segment at the
// max-index end, bounded by 1.5 * factor^k fine elements. When merging would
// exceed that bound the oversized segment is carried to the next level as is.

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace fffsim {

struct Segment {
  int length = 0;        // in fine elements
  int formed_level = 0;  // level at which this segment was created
  bool uneven = false;

  bool operator==(const Segment&) const = default;
};

struct LevelLayout {
  int level = 0;
  int layer_thickness = 1;  // fine layers per element at this level (factor^level)
  std::vector<Segment> segments;

  /// Segment boundaries in fine-element units, starting at 0.
  std::vector<int> boundaries() const {
    std::vector<int> b{0};
    for (const auto& s : segments) b.push_back(b.back() + s.length);
    return b;
  }

  int total() const {
    int n = 0;
    for (const auto& s : segments) n += s.length;
    return n;
  }

  std::vector<int> lengths() const {
    std::vector<int> out;
    for (const auto& s : segments) out.push_back(s.length);
    return out;
  }

  bool operator==(const LevelLayout&) const = default;
};

inline int int_pow(int base, int exp) {
  int r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

/// Largest admissible length of an uneven segment formed at `level`.
inline double max_uneven_length(int factor, int level) { return 1.5 * int_pow(factor, level); }

namespace detail {

inline LevelLayout coarsen_once(const LevelLayout& prev, int factor) {
  const int k = prev.level + 1;
  const int regular = int_pow(factor, k - 1);
  LevelLayout next{k, int_pow(factor, k), {}};

  // Regular segments of the previous level, then at most one trailing
  // segment that is either uneven or carried from an earlier level.
  std::vector<Segment> tail;
  int n_regular = 0;
  for (const auto& s : prev.segments) {
    if (!s.uneven && s.length == regular && tail.empty())
      ++n_regular;
    else
      tail.push_back(s);
  }

  auto regular_groups = [&](int count) {
    for (int g = 0; g < count; ++g) next.segments.push_back({int_pow(factor, k), k, false});
  };

  const int count = n_regular + static_cast<int>(tail.size());
  if (count < factor) return LevelLayout{k, next.layer_thickness, prev.segments};

  const int rem = count % factor;
  const int tail_count = rem == 0 ? factor : factor + rem;
  if (tail_count <= count) {
    int tail_len = 0;
    for (const auto& s : tail) tail_len += s.length;
    const int regular_in_tail = tail_count - static_cast<int>(tail.size());
    if (regular_in_tail >= 0) {
      tail_len += regular_in_tail * regular;
      const bool is_regular = tail.empty() && rem == 0;
      if (is_regular || tail_len <= max_uneven_length(factor, k)) {
        regular_groups((n_regular - regular_in_tail) / factor);
        if (is_regular)
          regular_groups(1);
        else
          next.segments.push_back({tail_len, k, true});
        return next;
      }
    }
  }

  // Merging the remainder would exceed the bound: carry the trailing segments.
  const int q = n_regular / factor;
  const int r = n_regular % factor;
  regular_groups(q);
  if (r > 0) {
    const int len = r * regular;
    if (tail.empty() && len <= max_uneven_length(factor, k)) {
      next.segments.push_back({len, k, true});
    } else {
      for (int i = 0; i < r; ++i) next.segments.push_back({regular, k - 1, false});
    }
  }
  for (const auto& s : tail) next.segments.push_back(s);
  return next;
}

}  // namespace detail

/// Layouts for levels 0..max_levels of one axis with `n_fine` fine elements.
inline std::vector<LevelLayout> compute_level_layout(int n_fine, int factor, int max_levels) {
  if (n_fine < 1) throw std::invalid_argument("compute_level_layout: n_fine must be >= 1");
  if (factor < 2) throw std::invalid_argument("compute_level_layout: factor must be >= 2");
  if (max_levels < 0) throw std::invalid_argument("compute_level_layout: max_levels must be >= 0");

  std::vector<LevelLayout> out;
  LevelLayout fine{0, 1, std::vector<Segment>(n_fine, Segment{1, 0, false})};
  out.push_back(fine);
  for (int k = 1; k <= max_levels; ++k) out.push_back(detail::coarsen_once(out.back(), factor));
  return out;
}

}  // namespace fffsim
