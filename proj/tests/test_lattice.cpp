#include <catch2/catch.hpp>

#include <algorithm>
#include <set>

#include "rfim/lattice.hpp"
#include "rfim/rng.hpp"

using namespace rfim;

namespace {

// Enumeration oracle: boundary by scanning a padded bounding box.
std::set<std::pair<int, int>> boundary_by_enumeration(const std::vector<Vertex>& region) {
  std::set<std::pair<int, int>> members;
  for (const Vertex& v : region) members.insert({v.x, v.y});
  std::set<std::pair<int, int>> out;
  for (const Vertex& v : region)
    for (const Vertex& d : kNeighbor4) {
      const Vertex u = v + d;
      if (!members.count({u.x, u.y})) out.insert({u.x, u.y});
    }
  return out;
}

}  // namespace

TEST_CASE("box membership matches explicit enumeration up to radius 8") {
  for (int r = 0; r <= 8; ++r) {
    const BoxRegion box({0, 0}, r);
    const auto cells = vertices_of(box);
    REQUIRE(std::int64_t(cells.size()) == box.vertex_count());
    REQUIRE(std::is_sorted(cells.begin(), cells.end(), row_major_less));
    for (int y = -r - 2; y <= r + 2; ++y)
      for (int x = -r - 2; x <= r + 2; ++x) {
        const bool expected = std::abs(x) <= r && std::abs(y) <= r;
        REQUIRE(box.contains({x, y}) == expected);
      }
  }
}

TEST_CASE("annulus membership matches outer-minus-inner enumeration") {
  for (int outer = 1; outer <= 8; ++outer)
    for (int inner = 0; inner < outer; ++inner) {
      const AnnulusRegion annulus(BoxRegion({0, 0}, outer), BoxRegion({0, 0}, inner));
      REQUIRE(annulus.vertex_count() ==
              std::int64_t(vertices_of(annulus).size()));
      for (int y = -outer - 1; y <= outer + 1; ++y)
        for (int x = -outer - 1; x <= outer + 1; ++x) {
          const bool expected = std::max(std::abs(x), std::abs(y)) <= outer &&
                                std::max(std::abs(x), std::abs(y)) > inner;
          REQUIRE(annulus.contains({x, y}) == expected);
        }
    }
  REQUIRE_THROWS_AS(AnnulusRegion(BoxRegion({0, 0}, 2), BoxRegion({0, 0}, 2)), validation_error);
  REQUIRE_THROWS_AS(AnnulusRegion(BoxRegion({0, 0}, 2), BoxRegion({1, 0}, 1)), validation_error);
}

TEST_CASE("outer boundary of a single vertex is its 4 neighbors") {
  const auto boundary = outer_boundary(lambda_box(0));
  REQUIRE(boundary.size() == 4);
  for (const Vertex& v : boundary) REQUIRE(std::abs(v.x) + std::abs(v.y) == 1);
}

TEST_CASE("outer boundary of the 3x3 box is the 12-vertex ring") {
  const auto boundary = outer_boundary(lambda_box(1));
  REQUIRE(boundary.size() == 12);
  for (const Vertex& v : boundary) {
    REQUIRE(chebyshev(v, {0, 0}) == 2);
    REQUIRE(!(std::abs(v.x) == 2 && std::abs(v.y) == 2));  // ring corners excluded
  }
}

TEST_CASE("outer boundary of two diagonal vertices, overlap removed") {
  const std::vector<Vertex> region{{0, 0}, {1, 1}};
  const auto boundary = outer_boundary(std::span<const Vertex>(region));
  const auto expected = boundary_by_enumeration(region);
  REQUIRE(boundary.size() == expected.size());
  for (const Vertex& v : boundary) REQUIRE(expected.count({v.x, v.y}) == 1);
  // (1,0) and (0,1) neighbor both members but appear once each.
  REQUIRE(boundary.size() == 6);
}

TEST_CASE("outer boundary rejects an empty region") {
  const std::vector<Vertex> empty;
  REQUIRE_THROWS_AS(outer_boundary(std::span<const Vertex>(empty)), validation_error);
}

TEST_CASE("outer boundary agrees with the enumeration oracle on irregular sets") {
  const std::vector<Vertex> shapes[] = {
      {{0, 0}, {1, 0}, {2, 0}},
      {{0, 0}, {0, 1}, {1, 1}, {2, 2}},
      {{-1, -1}, {0, 0}, {1, 1}, {-1, 1}, {1, -1}},
  };
  for (const auto& region : shapes) {
    const auto boundary = outer_boundary(std::span<const Vertex>(region));
    const auto expected = boundary_by_enumeration(region);
    REQUIRE(boundary.size() == expected.size());
    for (const Vertex& v : boundary) REQUIRE(expected.count({v.x, v.y}) == 1);
  }
}

TEST_CASE("ordered edges between a vertex and its boundary") {
  const auto origin = vertices_of(lambda_box(0));
  const auto boundary = outer_boundary(std::span<const Vertex>(origin));
  REQUIRE(ordered_edges(origin, boundary).size() == 4);
  REQUIRE(ordered_edges(origin, origin).empty());  // no self-adjacency
}

TEST_CASE("ordered edges across the 3x3 box boundary") {
  const auto box = vertices_of(lambda_box(1));
  const auto boundary = outer_boundary(std::span<const Vertex>(box));
  const auto out = ordered_edges(box, boundary);
  const auto in = ordered_edges(boundary, box);
  REQUIRE(out.size() == 12);
  REQUIRE(in.size() == out.size());
}

TEST_CASE("ordered edge counts are symmetric for keyed random sets") {
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Vertex> a, b;
    for (int y = -4; y <= 4; ++y)
      for (int x = -4; x <= 4; ++x) {
        if (keyed_unit(7, std::uint64_t(trial), x, y, 10) < 0.4) a.push_back({x, y});
        if (keyed_unit(7, std::uint64_t(trial), x, y, 11) < 0.4) b.push_back({x, y});
      }
    REQUIRE(ordered_edges(a, b).size() == ordered_edges(b, a).size());
  }
}

TEST_CASE("scaled boxes") {
  REQUIRE(scaled_box(BoxRegion({3, -2}, 4), 2) == BoxRegion({3, -2}, 8));
  REQUIRE(scaled_box(RectRegion({0, 0}, 8, 2), 4) == BoxRegion({3, 0}, 16));
  REQUIRE(scaled_box(RectRegion({0, 0}, 3, 1), 32) == BoxRegion({1, 0}, 48));
  REQUIRE_THROWS_AS(scaled_box(BoxRegion({0, 0}, 1), 3), validation_error);
}

TEST_CASE("region values behave as sets") {
  const Region box(lambda_box(2));
  REQUIRE(box.vertex_count() == 25);
  const Region explicit_set(std::vector<Vertex>{{1, 1}, {0, 0}, {1, 1}});
  REQUIRE(explicit_set.vertex_count() == 2);  // duplicates removed
  REQUIRE(explicit_set.contains({0, 0}));
  REQUIRE(!explicit_set.contains({2, 2}));
  const auto cells = explicit_set.cells();
  REQUIRE(std::is_sorted(cells.begin(), cells.end(), row_major_less));
}

TEST_CASE("grid index round-trips cell slots") {
  const auto cells = vertices_of(lambda_annulus(4));
  const GridIndex index(cells);
  for (std::size_t i = 0; i < cells.size(); ++i)
    REQUIRE(index.index_of(cells[i]) == std::int32_t(i));
  REQUIRE(index.index_of({0, 0}) == -1);
  REQUIRE(index.index_of({100, 100}) == -1);
}
