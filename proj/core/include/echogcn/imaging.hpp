#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace echogcn {

/// 2-D point or vector. Pixel space uses continuous coordinates where the
/// image covers [0, width] x [0, height] and pixel (c, r) has its center at
/// (c + 0.5, r + 0.5). The y axis points down.
struct Point {
  double x = 0.0;
  double y = 0.0;

  friend Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
  friend Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
  friend Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }
  friend Point operator*(Point a, double s) { return {s * a.x, s * a.y}; }
  friend bool operator==(Point a, Point b) = default;
};

inline double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point a, Point b) { return a.x * b.y - a.y * b.x; }
inline double norm(Point a) { return std::hypot(a.x, a.y); }
inline double distance(Point a, Point b) { return norm(a - b); }

inline Point pixel_center(int col, int row) { return {col + 0.5, row + 0.5}; }

/// Grayscale image with intensities in [0, 1], row-major.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  Image() = default;
  Image(int w, int h, float fill = 0.0f);

  float at(int col, int row) const { return data[static_cast<std::size_t>(row) * width + col]; }
  float& at(int col, int row) { return data[static_cast<std::size_t>(row) * width + col]; }
};

enum class Label : std::uint8_t { Background = 0, LV = 1, MYO = 2, LA = 3 };

inline constexpr int kNumLabels = 4;

/// Per-pixel structure codes; exactly one code per pixel.
struct LabelMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> labels;

  LabelMask() = default;
  LabelMask(int w, int h, Label fill = Label::Background);

  Label at(int col, int row) const {
    return static_cast<Label>(labels[static_cast<std::size_t>(row) * width + col]);
  }
  void set(int col, int row, Label l) {
    labels[static_cast<std::size_t>(row) * width + col] = static_cast<std::uint8_t>(l);
  }
  bool contains(int col, int row) const { return col >= 0 && row >= 0 && col < width && row < height; }
  std::size_t count(Label l) const;

  friend bool operator==(const LabelMask&, const LabelMask&) = default;
};

/// Small bit set over the four label codes.
class LabelSet {
 public:
  constexpr LabelSet() = default;
  constexpr LabelSet(std::initializer_list<Label> labels) {
    for (Label l : labels) bits_ |= bit(l);
  }
  constexpr bool contains(Label l) const { return (bits_ & bit(l)) != 0; }
  constexpr bool empty() const { return bits_ == 0; }
  friend constexpr LabelSet operator|(LabelSet s, Label l) {
    s.bits_ |= bit(l);
    return s;
  }

 private:
  static constexpr std::uint8_t bit(Label l) { return static_cast<std::uint8_t>(1u << static_cast<unsigned>(l)); }
  std::uint8_t bits_ = 0;
};

/// Millimeters per pixel.
struct PixelSpacing {
  double sx = 1.0;
  double sy = 1.0;
};

/// Ordered contour points in pixel space.
struct Contour {
  std::vector<Point> points;
};

/// Ordered outer boundary of the largest 4-connected component carrying
/// `label`, traced with Moore-neighbor (8-connected) tracing. Traversal is
/// counter-clockwise as displayed and starts at the topmost, then leftmost,
/// pixel of the component. Points are pixel centers. With `closed` the start
/// point is repeated at the end.
/// Throws Errc::LabelAbsent when no pixel carries the label(s).
Contour extract_contour(const LabelMask& mask, Label label, bool closed = false);
Contour extract_contour(const LabelMask& mask, LabelSet labels, bool closed = false);

struct ComponentStats {
  int count = 0;
  std::vector<std::size_t> sizes;  // descending; ties by first pixel in row-major order
};

/// 4-connected component statistics for one label. An absent label yields
/// count 0.
ComponentStats connected_components(const LabelMask& mask, Label label);

/// Full component labeling of the pixels in `labels` (4- or 8-connectivity).
/// Components are numbered from 0 in the same order as ComponentStats; pixels
/// outside the set get -1.
struct ComponentMap {
  int width = 0;
  int height = 0;
  std::vector<int> ids;
  std::vector<std::size_t> sizes;
  std::vector<std::size_t> first_pixel;  // row-major index of each component's first pixel
};
ComponentMap label_components(const LabelMask& mask, LabelSet labels, int connectivity = 4);

/// Bilinear resize with pixel-center alignment.
Image resize(const Image& img, int width, int height);
/// Nearest-neighbor resize; never introduces new codes.
LabelMask resize(const LabelMask& mask, int width, int height);

/// Scanline fill of a closed polygon given in pixel coordinates. A pixel is
/// inside when its center lies inside under the half-open rule: an edge
/// covers scanline y when min(y0, y1) <= y < max(y0, y1), and a span covers
/// centers x with x_enter <= x < x_exit. Calls `visit(col, row)` per pixel.
template <class Visit>
void fill_polygon(std::span<const Point> polygon, int width, int height, Visit&& visit);

/// Signed shoelace area in pixel units (positive for clockwise-as-displayed).
double polygon_area(std::span<const Point> polygon);

}  // namespace echogcn

#include "echogcn/detail/fill_polygon.ipp"
