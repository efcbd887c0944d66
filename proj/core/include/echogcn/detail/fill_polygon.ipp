#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

namespace echogcn {

template <class Visit>
void fill_polygon(std::span<const Point> polygon, int width, int height, Visit&& visit) {
  const std::size_t n = polygon.size();
  if (n < 3 || width <= 0 || height <= 0) return;

  double ymin = polygon[0].y;
  double ymax = polygon[0].y;
  for (const Point& p : polygon) {
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  const int row_begin = std::max(0, static_cast<int>(std::ceil(ymin - 0.5)));
  const int row_end = std::min(height, static_cast<int>(std::ceil(ymax - 0.5)));

  std::vector<double> crossings;
  crossings.reserve(n);
  for (int row = row_begin; row < row_end; ++row) {
    const double y = row + 0.5;
    crossings.clear();
    for (std::size_t i = 0; i < n; ++i) {
      const Point& p = polygon[i];
      const Point& q = polygon[(i + 1) % n];
      if ((p.y <= y && y < q.y) || (q.y <= y && y < p.y)) {
        crossings.push_back(p.x + (y - p.y) * (q.x - p.x) / (q.y - p.y));
      }
    }
    std::sort(crossings.begin(), crossings.end());
    for (std::size_t k = 0; k + 1 < crossings.size(); k += 2) {
      const int col_begin = std::max(0, static_cast<int>(std::ceil(crossings[k] - 0.5)));
      const int col_end = std::min(width, static_cast<int>(std::ceil(crossings[k + 1] - 0.5)));
      for (int col = col_begin; col < col_end; ++col) visit(col, row);
    }
  }
}

}  // namespace echogcn
