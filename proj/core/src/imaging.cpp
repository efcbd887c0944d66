#include "echogcn/imaging.hpp"

#include <algorithm>
#include <array>
#include <numeric>

#include "echogcn/error.hpp"

namespace echogcn {

Image::Image(int w, int h, float fill) : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

LabelMask::LabelMask(int w, int h, Label fill)
    : width(w), height(h), labels(static_cast<std::size_t>(w) * h, static_cast<std::uint8_t>(fill)) {}

std::size_t LabelMask::count(Label l) const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), static_cast<std::uint8_t>(l)));
}

ComponentMap label_components(const LabelMask& mask, LabelSet labels, int connectivity) {
  const int w = mask.width;
  const int h = mask.height;
  ComponentMap out;
  out.width = w;
  out.height = h;
  out.ids.assign(static_cast<std::size_t>(w) * h, -1);

  static constexpr std::array<std::array<int, 2>, 8> kOffsets{
      {{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, 1}, {-1, 1}, {1, -1}, {-1, -1}}};
  const int num_offsets = connectivity == 8 ? 8 : 4;

  std::vector<std::size_t> sizes;
  std::vector<std::size_t> firsts;
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < out.ids.size(); ++start) {
    if (out.ids[start] != -1 || !labels.contains(static_cast<Label>(mask.labels[start]))) continue;
    const int id = static_cast<int>(sizes.size());
    std::size_t size = 0;
    out.ids[start] = id;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      ++size;
      const int col = static_cast<int>(p % w);
      const int row = static_cast<int>(p / w);
      for (int k = 0; k < num_offsets; ++k) {
        const int c = col + kOffsets[k][0];
        const int r = row + kOffsets[k][1];
        if (c < 0 || r < 0 || c >= w || r >= h) continue;
        const std::size_t q = static_cast<std::size_t>(r) * w + c;
        if (out.ids[q] != -1 || !labels.contains(static_cast<Label>(mask.labels[q]))) continue;
        out.ids[q] = id;
        stack.push_back(q);
      }
    }
    sizes.push_back(size);
    firsts.push_back(start);
  }

  // Discovery order already follows first pixels; a stable sort by size keeps
  // that order among equal sizes.
  std::vector<int> order(sizes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return sizes[a] > sizes[b]; });
  std::vector<int> remap(sizes.size());
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    remap[order[rank]] = static_cast<int>(rank);
    out.sizes.push_back(sizes[order[rank]]);
    out.first_pixel.push_back(firsts[order[rank]]);
  }
  for (int& id : out.ids) {
    if (id >= 0) id = remap[id];
  }
  return out;
}

ComponentStats connected_components(const LabelMask& mask, Label label) {
  const ComponentMap map = label_components(mask, LabelSet{label}, 4);
  return {static_cast<int>(map.sizes.size()), map.sizes};
}

namespace {

// Counter-clockwise as displayed (y down), starting west.
constexpr std::array<std::array<int, 2>, 8> kMooreDirs{
    {{-1, 0}, {-1, 1}, {0, 1}, {1, 1}, {1, 0}, {1, -1}, {0, -1}, {-1, -1}}};

int direction_index(int dc, int dr) {
  for (int k = 0; k < 8; ++k) {
    if (kMooreDirs[k][0] == dc && kMooreDirs[k][1] == dr) return k;
  }
  return -1;
}

}  // namespace

Contour extract_contour(const LabelMask& mask, LabelSet labels, bool closed) {
  const ComponentMap map = label_components(mask, labels, 4);
  if (map.sizes.empty()) {
    throw Error(Errc::LabelAbsent, "imaging_core", "no pixel carries the requested label");
  }
  const int w = mask.width;
  const int h = mask.height;
  auto inside = [&](int c, int r) {
    return c >= 0 && r >= 0 && c < w && r < h && map.ids[static_cast<std::size_t>(r) * w + c] == 0;
  };

  const int start_col = static_cast<int>(map.first_pixel[0] % w);
  const int start_row = static_cast<int>(map.first_pixel[0] / w);

  Contour contour;
  contour.points.push_back(pixel_center(start_col, start_row));

  int col = start_col;
  int row = start_row;
  int back = 0;  // west of the start pixel is outside
  int first_dir = -1;
  // Stops when the first move out of the start pixel is about to repeat.
  const std::size_t max_steps = 8 * map.sizes[0] + 16;
  for (std::size_t step = 0; step < max_steps; ++step) {
    int next = -1;
    for (int k = 1; k <= 8; ++k) {
      const int d = (back + k) % 8;
      if (inside(col + kMooreDirs[d][0], row + kMooreDirs[d][1])) {
        next = d;
        break;
      }
    }
    if (next < 0) break;  // isolated pixel
    if (col == start_col && row == start_row) {
      if (first_dir < 0) {
        first_dir = next;
      } else if (next == first_dir) {
        contour.points.pop_back();  // the closing visit of the start pixel
        break;
      }
    }

    const int prev = (next + 7) % 8;
    const int prev_col = col + kMooreDirs[prev][0];
    const int prev_row = row + kMooreDirs[prev][1];
    col += kMooreDirs[next][0];
    row += kMooreDirs[next][1];
    back = direction_index(prev_col - col, prev_row - row);
    contour.points.push_back(pixel_center(col, row));
  }

  if (closed && contour.points.size() > 1) contour.points.push_back(contour.points.front());
  return contour;
}

Contour extract_contour(const LabelMask& mask, Label label, bool closed) {
  return extract_contour(mask, LabelSet{label}, closed);
}

Image resize(const Image& img, int width, int height) {
  if (img.width == width && img.height == height) return img;
  Image out(width, height);
  const double sx = static_cast<double>(img.width) / width;
  const double sy = static_cast<double>(img.height) / height;
  for (int r = 0; r < height; ++r) {
    const double y = std::clamp((r + 0.5) * sy - 0.5, 0.0, img.height - 1.0);
    const int y0 = static_cast<int>(std::floor(y));
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double fy = y - y0;
    for (int c = 0; c < width; ++c) {
      const double x = std::clamp((c + 0.5) * sx - 0.5, 0.0, img.width - 1.0);
      const int x0 = static_cast<int>(std::floor(x));
      const int x1 = std::min(x0 + 1, img.width - 1);
      const double fx = x - x0;
      const double top = (1 - fx) * img.at(x0, y0) + fx * img.at(x1, y0);
      const double bottom = (1 - fx) * img.at(x0, y1) + fx * img.at(x1, y1);
      out.at(c, r) = static_cast<float>((1 - fy) * top + fy * bottom);
    }
  }
  return out;
}

LabelMask resize(const LabelMask& mask, int width, int height) {
  if (mask.width == width && mask.height == height) return mask;
  LabelMask out(width, height);
  const double sx = static_cast<double>(mask.width) / width;
  const double sy = static_cast<double>(mask.height) / height;
  for (int r = 0; r < height; ++r) {
    const int sr = std::min(mask.height - 1, static_cast<int>(std::floor((r + 0.5) * sy)));
    for (int c = 0; c < width; ++c) {
      const int sc = std::min(mask.width - 1, static_cast<int>(std::floor((c + 0.5) * sx)));
      out.set(c, r, mask.at(sc, sr));
    }
  }
  return out;
}

double polygon_area(std::span<const Point> polygon) {
  double twice = 0.0;
  const std::size_t n = polygon.size();
  for (std::size_t i = 0; i < n; ++i) twice += cross(polygon[i], polygon[(i + 1) % n]);
  return 0.5 * twice;
}

}  // namespace echogcn
