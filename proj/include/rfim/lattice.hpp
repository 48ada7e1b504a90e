#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdlib>
#include <ostream>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "rfim/errors.hpp"

namespace rfim {

/// A site of the square lattice Z^2. Adjacency is 4-neighbor (l1-distance 1).
struct Vertex {
  std::int32_t x = 0;
  std::int32_t y = 0;

  friend bool operator==(const Vertex&, const Vertex&) = default;
};

/// Row-major order: lower rows first, then left to right within a row.
inline bool row_major_less(const Vertex& a, const Vertex& b) {
  return a.y != b.y ? a.y < b.y : a.x < b.x;
}

inline std::ostream& operator<<(std::ostream& os, const Vertex& v) {
  return os << "(" << v.x << "," << v.y << ")";
}

/// Neighbor offsets in the fixed expansion order E, N, W, S.
inline constexpr std::array<Vertex, 4> kNeighbor4 = {Vertex{1, 0}, Vertex{0, 1}, Vertex{-1, 0},
                                                     Vertex{0, -1}};

/// 8-neighborhood (used only for dual / star-adjacency queries).
inline constexpr std::array<Vertex, 8> kNeighbor8 = {
    Vertex{1, 0},  Vertex{1, 1},   Vertex{0, 1},  Vertex{-1, 1},
    Vertex{-1, 0}, Vertex{-1, -1}, Vertex{0, -1}, Vertex{1, -1}};

inline Vertex operator+(const Vertex& a, const Vertex& b) { return {a.x + b.x, a.y + b.y}; }
inline Vertex operator-(const Vertex& a, const Vertex& b) { return {a.x - b.x, a.y - b.y}; }

inline std::int64_t chebyshev(const Vertex& a, const Vertex& b) {
  return std::max<std::int64_t>(std::abs(std::int64_t{a.x} - b.x),
                                std::abs(std::int64_t{a.y} - b.y));
}

inline bool adjacent4(const Vertex& a, const Vertex& b) {
  return std::abs(std::int64_t{a.x} - b.x) + std::abs(std::int64_t{a.y} - b.y) == 1;
}

/// The box of Chebyshev radius N about a center; (2N+1)^2 vertices.
/// Following the usual convention its nominal side length is 2N.
struct BoxRegion {
  Vertex center;
  std::int32_t radius = 0;

  BoxRegion() = default;
  BoxRegion(Vertex c, std::int32_t r) : center(c), radius(r) {
    if (r < 0) throw validation_error("BoxRegion: radius must be nonnegative");
  }

  bool contains(const Vertex& v) const { return chebyshev(v, center) <= radius; }
  std::int64_t vertex_count() const {
    const std::int64_t s = 2 * std::int64_t{radius} + 1;
    return s * s;
  }
  /// Nominal side length 2N used by scaling rules.
  std::int64_t side() const { return 2 * std::int64_t{radius}; }

  friend bool operator==(const BoxRegion&, const BoxRegion&) = default;
};

/// Concentric box pair; membership = outer minus inner.
struct AnnulusRegion {
  BoxRegion outer;
  BoxRegion inner;

  AnnulusRegion() = default;
  AnnulusRegion(BoxRegion out, BoxRegion in) : outer(out), inner(in) {
    if (!(outer.center == inner.center))
      throw validation_error("AnnulusRegion: boxes must share a center");
    if (inner.radius >= outer.radius)
      throw validation_error("AnnulusRegion: inner radius must be smaller than outer");
  }

  bool contains(const Vertex& v) const { return outer.contains(v) && !inner.contains(v); }
  std::int64_t vertex_count() const { return outer.vertex_count() - inner.vertex_count(); }

  friend bool operator==(const AnnulusRegion&, const AnnulusRegion&) = default;
};

/// Axis-parallel rectangle given by its row-major-smallest corner.
struct RectRegion {
  Vertex corner;
  std::int32_t width = 1;
  std::int32_t height = 1;

  RectRegion() = default;
  RectRegion(Vertex c, std::int32_t w, std::int32_t h) : corner(c), width(w), height(h) {
    if (w <= 0 || h <= 0) throw validation_error("RectRegion: width and height must be positive");
  }

  bool contains(const Vertex& v) const {
    return v.x >= corner.x && v.x < corner.x + width && v.y >= corner.y && v.y < corner.y + height;
  }
  std::int64_t vertex_count() const { return std::int64_t{width} * height; }
  std::int32_t long_side() const { return std::max(width, height); }
  std::int32_t short_side() const { return std::min(width, height); }
  double aspect_ratio() const { return double(long_side()) / double(short_side()); }
  /// Center vertex; for even extents the true center is rounded down.
  Vertex center() const { return {corner.x + (width - 1) / 2, corner.y + (height - 1) / 2}; }

  friend bool operator==(const RectRegion&, const RectRegion&) = default;
};

namespace detail {

template <class R>
std::vector<Vertex> enumerate_rows(std::int32_t x0, std::int32_t x1, std::int32_t y0,
                                   std::int32_t y1, const R& region) {
  std::vector<Vertex> out;
  for (std::int32_t y = y0; y <= y1; ++y)
    for (std::int32_t x = x0; x <= x1; ++x)
      if (region.contains({x, y})) out.push_back({x, y});
  return out;
}

}  // namespace detail

inline std::vector<Vertex> vertices_of(const BoxRegion& b) {
  return detail::enumerate_rows(b.center.x - b.radius, b.center.x + b.radius,
                                b.center.y - b.radius, b.center.y + b.radius, b);
}

inline std::vector<Vertex> vertices_of(const AnnulusRegion& a) {
  return detail::enumerate_rows(a.outer.center.x - a.outer.radius,
                                a.outer.center.x + a.outer.radius,
                                a.outer.center.y - a.outer.radius,
                                a.outer.center.y + a.outer.radius, a);
}

inline std::vector<Vertex> vertices_of(const RectRegion& r) {
  return detail::enumerate_rows(r.corner.x, r.corner.x + r.width - 1, r.corner.y,
                                r.corner.y + r.height - 1, r);
}

/// A region of Z^2: a box, an annulus, a rectangle or an explicit vertex set.
/// Explicit sets are kept sorted row-major and deduplicated.
class Region {
 public:
  Region() : shape_(BoxRegion{{0, 0}, 0}) {}
  Region(BoxRegion b) : shape_(b) {}
  Region(AnnulusRegion a) : shape_(a) {}
  Region(RectRegion r) : shape_(r) {}
  Region(std::vector<Vertex> cells) {
    std::sort(cells.begin(), cells.end(), row_major_less);
    cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
    shape_ = std::move(cells);
  }

  bool contains(const Vertex& v) const {
    return std::visit(
        [&](const auto& s) -> bool {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, std::vector<Vertex>>) {
            return std::binary_search(s.begin(), s.end(), v, row_major_less);
          } else {
            return s.contains(v);
          }
        },
        shape_);
  }

  /// All member vertices in row-major order.
  std::vector<Vertex> cells() const {
    return std::visit(
        [](const auto& s) -> std::vector<Vertex> {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, std::vector<Vertex>>) {
            return s;
          } else {
            return vertices_of(s);
          }
        },
        shape_);
  }

  std::int64_t vertex_count() const {
    return std::visit(
        [](const auto& s) -> std::int64_t {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, std::vector<Vertex>>) {
            return std::int64_t(s.size());
          } else {
            return s.vertex_count();
          }
        },
        shape_);
  }

  bool empty() const { return vertex_count() == 0; }

  const BoxRegion* as_box() const { return std::get_if<BoxRegion>(&shape_); }
  const AnnulusRegion* as_annulus() const { return std::get_if<AnnulusRegion>(&shape_); }
  const RectRegion* as_rect() const { return std::get_if<RectRegion>(&shape_); }

  friend bool operator==(const Region&, const Region&) = default;

 private:
  std::variant<BoxRegion, AnnulusRegion, RectRegion, std::vector<Vertex>> shape_;
};

/// Dense vertex -> slot lookup over a bounding box; -1 marks non-members.
class GridIndex {
 public:
  GridIndex() = default;

  explicit GridIndex(std::span<const Vertex> cells) {
    if (cells.empty()) return;
    x0_ = cells[0].x;
    y0_ = cells[0].y;
    std::int32_t x1 = cells[0].x, y1 = cells[0].y;
    for (const Vertex& v : cells) {
      x0_ = std::min(x0_, v.x);
      y0_ = std::min(y0_, v.y);
      x1 = std::max(x1, v.x);
      y1 = std::max(y1, v.y);
    }
    w_ = x1 - x0_ + 1;
    h_ = y1 - y0_ + 1;
    slot_.assign(std::size_t(w_) * h_, -1);
    for (std::size_t i = 0; i < cells.size(); ++i)
      slot_[flat(cells[i])] = std::int32_t(i);
  }

  /// Slot of v in the originating cell list, or -1.
  std::int32_t index_of(const Vertex& v) const {
    if (slot_.empty() || v.x < x0_ || v.y < y0_ || v.x >= x0_ + w_ || v.y >= y0_ + h_) return -1;
    return slot_[flat(v)];
  }

  bool contains(const Vertex& v) const { return index_of(v) >= 0; }

 private:
  std::size_t flat(const Vertex& v) const {
    return std::size_t(v.y - y0_) * w_ + std::size_t(v.x - x0_);
  }

  std::int32_t x0_ = 0, y0_ = 0, w_ = 0, h_ = 0;
  std::vector<std::int32_t> slot_;
};

/// Vertices outside `region` with at least one 4-neighbor inside it.
inline std::vector<Vertex> outer_boundary(std::span<const Vertex> region) {
  if (region.empty()) throw validation_error("outer_boundary: region is empty");
  GridIndex inside(region);
  std::vector<Vertex> out;
  for (const Vertex& u : region)
    for (const Vertex& d : kNeighbor4) {
      const Vertex v = u + d;
      if (!inside.contains(v)) out.push_back(v);
    }
  std::sort(out.begin(), out.end(), row_major_less);
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline std::vector<Vertex> outer_boundary(const Region& region) {
  const auto cells = region.cells();
  return outer_boundary(std::span<const Vertex>(cells));
}

inline std::vector<Vertex> outer_boundary(const BoxRegion& box) {
  return outer_boundary(Region(box));
}

/// All ordered pairs <u,v> with u in A, v in B, u ~ v. Each pair listed once,
/// sorted row-major by u then v.
inline std::vector<std::pair<Vertex, Vertex>> ordered_edges(std::span<const Vertex> a,
                                                            std::span<const Vertex> b) {
  GridIndex in_b(b);
  std::vector<std::pair<Vertex, Vertex>> edges;
  for (const Vertex& u : a)
    for (const Vertex& d : kNeighbor4) {
      const Vertex v = u + d;
      if (in_b.contains(v)) edges.emplace_back(u, v);
    }
  std::sort(edges.begin(), edges.end(), [](const auto& p, const auto& q) {
    if (!(p.first == q.first)) return row_major_less(p.first, q.first);
    return row_major_less(p.second, q.second);
  });
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

namespace detail {
inline void check_scale_factor(int factor) {
  if (factor != 2 && factor != 4 && factor != 8 && factor != 32)
    throw validation_error("scaled_box: factor must be one of {2, 4, 8, 32}");
}
}  // namespace detail

/// Concentric square companion box of side factor * l, where l is the long
/// side of the input. Radius is floor(factor * l / 2) about the input center.
inline BoxRegion scaled_box(const RectRegion& rect, int factor) {
  detail::check_scale_factor(factor);
  return BoxRegion(rect.center(), std::int32_t(std::int64_t{factor} * rect.long_side() / 2));
}

inline BoxRegion scaled_box(const BoxRegion& box, int factor) {
  detail::check_scale_factor(factor);
  return BoxRegion(box.center, std::int32_t(factor * box.side() / 2));
}

/// Box of radius N about the origin.
inline BoxRegion lambda_box(std::int32_t n) { return BoxRegion({0, 0}, n); }

/// The annulus Lambda_n \ Lambda_{n/2} about the origin (floor division).
inline AnnulusRegion lambda_annulus(std::int32_t n) {
  return AnnulusRegion(lambda_box(n), lambda_box(n / 2));
}

inline bool is_power_of_two(std::int64_t n) { return n > 0 && (n & (n - 1)) == 0; }

}  // namespace rfim
