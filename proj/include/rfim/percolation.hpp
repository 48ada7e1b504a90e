#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "rfim/errors.hpp"
#include "rfim/lattice.hpp"

namespace rfim {

/// Shortest number of unit steps of a lattice curve that starts on `src`,
/// ends on `dst` and whose intermediate vertices all lie in C. A curve
/// entering C from src pays one step for the entry hop and one for the exit
/// hop onto dst; src/dst vertices that are themselves in C need no extra hop.
/// Empty optional means no such curve exists.
///
/// With C the full box and src/dst the boundaries of nested boxes of radii r
/// and R this evaluates to exactly R - r, matching the l1 lower bound
/// distance >= R - r for arbitrary C.
inline std::optional<std::int64_t> induced_distance(std::span<const Vertex> c_set,
                                                    std::span<const Vertex> src,
                                                    std::span<const Vertex> dst) {
  if (c_set.empty()) return std::nullopt;
  const GridIndex in_c(c_set);
  const GridIndex in_src(src);
  const GridIndex in_dst(dst);

  constexpr std::int64_t kUnreached = -1;
  std::vector<std::int64_t> dist(c_set.size(), kUnreached);
  std::vector<std::int32_t> queue;
  queue.reserve(c_set.size());

  // Two-level seeding: C-vertices on src start at 0, C-vertices adjacent to
  // src at 1. Enqueue the zeros first so the BFS frontier stays monotone.
  for (std::size_t i = 0; i < c_set.size(); ++i)
    if (in_src.contains(c_set[i])) {
      dist[i] = 0;
      queue.push_back(std::int32_t(i));
    }
  for (std::size_t i = 0; i < c_set.size(); ++i) {
    if (dist[i] >= 0) continue;
    for (const Vertex& d : kNeighbor4)
      if (in_src.contains(c_set[i] + d)) {
        dist[i] = 1;
        queue.push_back(std::int32_t(i));
        break;
      }
  }

  for (std::size_t q = 0; q < queue.size(); ++q) {
    const std::int32_t i = queue[q];
    const Vertex u = c_set[std::size_t(i)];
    for (const Vertex& d : kNeighbor4) {
      const std::int32_t j = in_c.index_of(u + d);
      if (j >= 0 && dist[std::size_t(j)] == kUnreached) {
        dist[std::size_t(j)] = dist[std::size_t(i)] + 1;
        queue.push_back(j);
      }
    }
  }

  std::optional<std::int64_t> best;
  for (std::size_t i = 0; i < c_set.size(); ++i) {
    if (dist[i] == kUnreached) continue;
    std::optional<std::int64_t> candidate;
    if (in_dst.contains(c_set[i])) {
      candidate = dist[i];
    } else {
      for (const Vertex& d : kNeighbor4)
        if (in_dst.contains(c_set[i] + d)) {
          candidate = dist[i] + 1;
          break;
        }
    }
    if (candidate && (!best || *candidate < *best)) best = candidate;
  }
  return best;
}

namespace detail {

/// 4- or 8-connected reachability inside `allowed` from seeds to targets.
/// With contact_adjacent, a cell touches a zone when it lies in it or has a
/// neighbor (same adjacency) in it; otherwise membership alone counts.
template <class InZoneFrom, class InZoneTo, class Allowed>
bool zone_connected(std::span<const Vertex> cells, const GridIndex& cell_index,
                    const Allowed& allowed, const InZoneFrom& from_zone, const InZoneTo& to_zone,
                    bool use_diagonals, bool contact_adjacent) {
  std::span<const Vertex> offsets =
      use_diagonals ? std::span<const Vertex>(kNeighbor8) : std::span<const Vertex>(kNeighbor4);
  std::vector<char> seen(cells.size(), 0);
  std::vector<std::int32_t> queue;
  const auto touches = [&](const Vertex& v, const auto& zone) {
    if (zone(v)) return true;
    if (!contact_adjacent) return false;
    for (const Vertex& d : offsets)
      if (zone(v + d)) return true;
    return false;
  };
  for (std::size_t i = 0; i < cells.size(); ++i)
    if (allowed(i) && touches(cells[i], from_zone)) {
      seen[i] = 1;
      queue.push_back(std::int32_t(i));
    }
  for (std::size_t q = 0; q < queue.size(); ++q) {
    const Vertex u = cells[std::size_t(queue[q])];
    if (touches(u, to_zone)) return true;
    for (const Vertex& d : offsets) {
      const std::int32_t j = cell_index.index_of(u + d);
      if (j >= 0 && allowed(std::size_t(j)) && !seen[std::size_t(j)]) {
        seen[std::size_t(j)] = 1;
        queue.push_back(j);
      }
    }
  }
  return false;
}

}  // namespace detail

/// True iff a 4-connected path of C-vertices inside the rectangle joins its
/// two shorter sides (endpoints in the first and last column for a wide
/// rectangle, first and last row for a tall one).
inline bool cross(const RectRegion& rect, std::span<const Vertex> c_set) {
  if (rect.aspect_ratio() < 1.0) throw validation_error("cross: aspect ratio must be >= 1");
  const bool wide = rect.width >= rect.height;
  std::vector<Vertex> inside;
  for (const Vertex& v : c_set)
    if (rect.contains(v)) inside.push_back(v);
  if (inside.empty()) return false;
  const GridIndex index(inside);
  const auto all = [](std::size_t) { return true; };
  if (wide) {
    const std::int32_t x0 = rect.corner.x, x1 = rect.corner.x + rect.width - 1;
    return detail::zone_connected(
        inside, index, all, [&](const Vertex& v) { return v.x == x0 && rect.contains(v); },
        [&](const Vertex& v) { return v.x == x1 && rect.contains(v); }, false, false);
  }
  const std::int32_t y0 = rect.corner.y, y1 = rect.corner.y + rect.height - 1;
  return detail::zone_connected(
      inside, index, all, [&](const Vertex& v) { return v.y == y0 && rect.contains(v); },
      [&](const Vertex& v) { return v.y == y1 && rect.contains(v); }, false, false);
}

namespace detail {

template <bool Diagonals>
bool annulus_connects(const AnnulusRegion& annulus, std::span<const Vertex> cells) {
  const GridIndex index(cells);
  const auto all = [](std::size_t) { return true; };
  const auto inner = [&](const Vertex& v) { return annulus.inner.contains(v); };
  const auto outer = [&](const Vertex& v) { return !annulus.outer.contains(v); };
  return zone_connected(cells, index, all, inner, outer, Diagonals, true);
}

}  // namespace detail

/// True iff a 4-connected path of C-vertices within the annulus joins a
/// vertex adjacent to the inner hole to a vertex adjacent to the outer
/// boundary.
inline bool cross_easy(const AnnulusRegion& annulus, std::span<const Vertex> c_set) {
  std::vector<Vertex> inside;
  for (const Vertex& v : c_set)
    if (annulus.contains(v)) inside.push_back(v);
  if (inside.empty()) return false;
  return detail::annulus_connects<false>(annulus, inside);
}

/// Same connectivity question for an arbitrary cell set under 8-adjacency;
/// used by the duality checks on complements.
inline bool cross_easy_star(const AnnulusRegion& annulus, std::span<const Vertex> cells) {
  std::vector<Vertex> inside;
  for (const Vertex& v : cells)
    if (annulus.contains(v)) inside.push_back(v);
  if (inside.empty()) return false;
  return detail::annulus_connects<true>(annulus, inside);
}

/// Annulus cells not in the given set, row-major.
inline std::vector<Vertex> annulus_complement(const AnnulusRegion& annulus,
                                              std::span<const Vertex> c_set) {
  const GridIndex in_c(c_set);
  std::vector<Vertex> complement;
  for (const Vertex& v : vertices_of(annulus))
    if (!in_c.contains(v)) complement.push_back(v);
  return complement;
}

/// True iff C contains a circuit in the annulus separating the inner hole
/// from the outer boundary. By planar duality this holds exactly when no
/// 8-connected path of complement vertices within the annulus joins the two
/// boundaries, which is how it is computed.
inline bool cross_hard(const AnnulusRegion& annulus, std::span<const Vertex> c_set) {
  const std::vector<Vertex> complement = annulus_complement(annulus, c_set);
  if (complement.empty()) return true;  // full annulus always separates
  return !detail::annulus_connects<true>(annulus, complement);
}

/// Partition of the box of radius N into square tiles of side 2*N_prime,
/// row-major. Edge tiles absorb the one-vertex remainder ring, so the tiles
/// cover the (2N+1)-wide vertex box exactly.
struct CoarseGrid {
  std::int32_t N = 0;
  std::int32_t N_prime = 0;
  std::int32_t tiles_per_side = 0;
  std::vector<RectRegion> tiles;  // row-major
  std::vector<char> open;

  std::int64_t tile_count() const { return std::int64_t(tiles.size()); }
  std::int32_t tile_row(std::int32_t id) const { return id / tiles_per_side; }
  std::int32_t tile_col(std::int32_t id) const { return id % tiles_per_side; }

  /// Minimal Chebyshev distance between cells of two tiles.
  std::int64_t tile_distance(std::int32_t a, std::int32_t b) const {
    const auto gap = [](std::int32_t a0, std::int32_t a1, std::int32_t b0, std::int32_t b1) {
      if (b0 > a1) return std::int64_t(b0) - a1;
      if (a0 > b1) return std::int64_t(a0) - b1;
      return std::int64_t{0};
    };
    const RectRegion& ra = tiles[std::size_t(a)];
    const RectRegion& rb = tiles[std::size_t(b)];
    const std::int64_t dx = gap(ra.corner.x, ra.corner.x + ra.width - 1, rb.corner.x,
                                rb.corner.x + rb.width - 1);
    const std::int64_t dy = gap(ra.corner.y, ra.corner.y + ra.height - 1, rb.corner.y,
                                rb.corner.y + rb.height - 1);
    return std::max(dx, dy);
  }
};

inline CoarseGrid coarse_grid(std::int32_t n, std::int32_t n_prime) {
  if (!is_power_of_two(n) || !is_power_of_two(n_prime))
    throw validation_error("coarse_grid: N and N' must be powers of two");
  if (n_prime > n) throw validation_error("coarse_grid: N' must not exceed N");
  CoarseGrid grid;
  grid.N = n;
  grid.N_prime = n_prime;
  grid.tiles_per_side = n / n_prime;
  const std::int32_t side = 2 * n_prime;
  for (std::int32_t row = 0; row < grid.tiles_per_side; ++row)
    for (std::int32_t col = 0; col < grid.tiles_per_side; ++col) {
      const std::int32_t extra_x = col == grid.tiles_per_side - 1 ? 1 : 0;
      const std::int32_t extra_y = row == grid.tiles_per_side - 1 ? 1 : 0;
      grid.tiles.emplace_back(Vertex{-n + col * side, -n + row * side}, side + extra_x,
                              side + extra_y);
    }
  grid.open.assign(grid.tiles.size(), 0);
  return grid;
}

/// Size of the largest connected set of open tiles; tiles are adjacent when
/// their cell sets are within Chebyshev distance 1 (diagonals count).
inline std::int64_t max_open_animal(const CoarseGrid& grid) {
  if (grid.open.size() != grid.tiles.size())
    throw validation_error("max_open_animal: open flags not populated");
  const std::int32_t k = grid.tiles_per_side;
  std::vector<char> seen(grid.tiles.size(), 0);
  std::vector<std::int32_t> queue;
  std::int64_t best = 0;
  for (std::int32_t start = 0; start < std::int32_t(grid.tiles.size()); ++start) {
    if (!grid.open[std::size_t(start)] || seen[std::size_t(start)]) continue;
    seen[std::size_t(start)] = 1;
    queue.assign(1, start);
    std::int64_t size = 0;
    for (std::size_t q = 0; q < queue.size(); ++q) {
      ++size;
      const std::int32_t row = grid.tile_row(queue[q]);
      const std::int32_t col = grid.tile_col(queue[q]);
      for (std::int32_t dr = -1; dr <= 1; ++dr)
        for (std::int32_t dc = -1; dc <= 1; ++dc) {
          if (dr == 0 && dc == 0) continue;
          const std::int32_t r = row + dr, c = col + dc;
          if (r < 0 || c < 0 || r >= k || c >= k) continue;
          const std::int32_t j = r * k + c;
          if (grid.open[std::size_t(j)] && !seen[std::size_t(j)]) {
            seen[std::size_t(j)] = 1;
            queue.push_back(j);
          }
        }
    }
    best = std::max(best, size);
  }
  return best;
}

}  // namespace rfim
