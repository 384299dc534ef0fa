#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "hoikit/errors.hpp"

namespace hoikit {

// Axis-aligned box in normalized image coordinates, corners (x1,y1)-(x2,y2).
// An all-zero box is the reserved "no box" sentinel used by detections whose
// object is judged invisible.
struct Box {
  double x1 = 0.0, y1 = 0.0, x2 = 0.0, y2 = 0.0;

  bool is_null() const { return x1 == 0.0 && y1 == 0.0 && x2 == 0.0 && y2 == 0.0; }

  bool valid() const {
    return x1 >= 0.0 && y1 >= 0.0 && x2 <= 1.0 && y2 <= 1.0 && x1 < x2 && y1 < y2;
  }

  double area() const { return (x2 - x1) * (y2 - y1); }

  bool contains(double x, double y) const { return x >= x1 && x < x2 && y >= y1 && y < y2; }

  bool operator==(const Box& o) const {
    return x1 == o.x1 && y1 == o.y1 && x2 == o.x2 && y2 == o.y2;
  }
};

inline double iou(const Box& a, const Box& b) {
  if (a.is_null() || b.is_null()) return 0.0;
  const double ix1 = std::max(a.x1, b.x1);
  const double iy1 = std::max(a.y1, b.y1);
  const double ix2 = std::min(a.x2, b.x2);
  const double iy2 = std::min(a.y2, b.y2);
  const double iw = ix2 - ix1;
  const double ih = iy2 - iy1;
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

inline Box union_rect(const Box& a, const Box& b) {
  return Box{std::min(a.x1, b.x1), std::min(a.y1, b.y1), std::max(a.x2, b.x2),
             std::max(a.y2, b.y2)};
}

// Center of grid cell (row i, col j) on an h x w grid over the unit square.
inline double cell_center_x(int j, int w) { return (double(j) + 0.5) / double(w); }
inline double cell_center_y(int i, int h) { return (double(i) + 0.5) / double(h); }

// 0/1 mask over h*w cells (row-major): 1 where the cell center falls inside
// the box. Half-open boxes make edge ties resolve toward the lower cell.
inline std::vector<std::uint8_t> cells_in_box(const Box& b, int h, int w) {
  std::vector<std::uint8_t> mask(std::size_t(h) * w, 0);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      if (b.contains(cell_center_x(j, w), cell_center_y(i, h)))
        mask[std::size_t(i) * w + j] = 1;
  return mask;
}

inline std::vector<std::uint8_t> cells_in_union(const Box& a, const Box& b, int h, int w) {
  auto ma = cells_in_box(a, h, w);
  const auto mb = cells_in_box(b, h, w);
  for (std::size_t i = 0; i < ma.size(); ++i) ma[i] = ma[i] | mb[i];
  return ma;
}

}  // namespace hoikit
