#include <catch2/catch.hpp>

#include <sstream>

#include "rfim/disagreement.hpp"

using namespace rfim;

namespace {

FieldSample origin_field(double value) {
  FieldSample field = sample_field(Region(lambda_box(0)), 1.0, 1, 0);
  field.add_shift({0, 0}, value - field.value({0, 0}));
  return field;
}

/// A label grid assembled directly, for the pure set/count operations.
LabelGrid grid_from(const Region& region, const std::vector<Label>& labels) {
  LabelGrid grid;
  grid.region = region;
  grid.cells = region.cells();
  grid.index = GridIndex(grid.cells);
  grid.labels = labels;
  REQUIRE(grid.labels.size() == grid.cells.size());
  return grid;
}

}  // namespace

TEST_CASE("single-vertex labels across the field range") {
  const Region point(lambda_box(0));
  REQUIRE(labels(origin_field(0.0), point).label_at({0, 0}) == Label::zero);
  REQUIRE(labels(origin_field(5.0), point).label_at({0, 0}) == Label::plus);
  REQUIRE(labels(origin_field(-5.0), point).label_at({0, 0}) == Label::minus);
}

TEST_CASE("disagreement components: empty, singleton, checkerboard") {
  const Region point(lambda_box(0));
  const LabelGrid all_plus = grid_from(point, {Label::plus});
  REQUIRE(disagreement_set(all_plus).size() == 0);

  const LabelGrid zero = grid_from(point, {Label::zero});
  const DisagreementSet single = disagreement_set(zero);
  REQUIRE(single.size() == 1);
  REQUIRE(single.component_count == 1);

  const Region box(lambda_box(2));
  std::vector<Label> labels25;
  std::size_t zeros = 0;
  for (const Vertex& v : box.cells()) {
    const bool zero_site = (v.x + v.y) % 2 == 0;
    labels25.push_back(zero_site ? Label::zero : Label::plus);
    zeros += zero_site;
  }
  const DisagreementSet checker = disagreement_set(grid_from(box, labels25));
  REQUIRE(checker.size() == zeros);
  REQUIRE(checker.component_count == std::int32_t(zeros));  // diagonals do not connect
}

TEST_CASE("common disagreement intersects members and recounts components") {
  const Region box(lambda_box(2));
  // L-shape along the west and south edges; bar across the middle row.
  std::vector<Vertex> l_shape, bar;
  for (int y = -2; y <= 2; ++y) l_shape.push_back({-2, y});
  for (int x = -2; x <= 2; ++x) l_shape.push_back({x, -2});
  for (int x = -2; x <= 2; ++x) bar.push_back({x, 0});

  const auto as_set = [&](std::vector<Vertex> members) {
    std::vector<Label> labels25;
    GridIndex in_members{std::span<const Vertex>(members)};
    for (const Vertex& v : box.cells())
      labels25.push_back(in_members.contains(v) ? Label::zero : Label::plus);
    return disagreement_set(grid_from(box, labels25));
  };

  const DisagreementSet a = as_set(l_shape);
  const DisagreementSet b = as_set(bar);
  REQUIRE(common_disagreement(a, a).size() == a.size());
  const DisagreementSet both = common_disagreement(a, b);
  REQUIRE(both.size() == 1);  // only (-2, 0)
  REQUIRE(both.members[0] == Vertex{-2, 0});
  REQUIRE(both.component_count == 1);

  const DisagreementSet none = common_disagreement(b, as_set({{2, 2}}));
  REQUIRE(none.size() == 0);
  REQUIRE(none.component_count == 0);

  const Region other(lambda_box(3));
  std::vector<Label> labels49(other.cells().size(), Label::plus);
  REQUIRE_THROWS_AS(common_disagreement(a, disagreement_set(grid_from(other, labels49))),
                    validation_error);
}

TEST_CASE("edge partition counts around a single site") {
  const Region box(lambda_box(1));
  std::vector<Label> labels9(9, Label::plus);
  const LabelGrid grid = grid_from(box, labels9);
  const std::vector<Vertex> s{{0, 0}};
  const EdgePartition counts =
      boundary_edge_partition(std::span<const Vertex>(s), grid, BoundaryCondition::plus);
  REQUIRE(counts.plus == 4);
  REQUIRE(counts.minus == 0);
  REQUIRE(counts.zero == 0);
}

TEST_CASE("edge partition treats the outer boundary as the boundary label") {
  const Region point(lambda_box(0));
  const LabelGrid grid = grid_from(point, {Label::zero});
  const std::vector<Vertex> s{{0, 0}};
  const EdgePartition plus =
      boundary_edge_partition(std::span<const Vertex>(s), grid, BoundaryCondition::plus);
  REQUIRE(plus.plus == 4);
  REQUIRE(plus.total() == 4);
  const EdgePartition minus =
      boundary_edge_partition(std::span<const Vertex>(s), grid, BoundaryCondition::minus);
  REQUIRE(minus.minus == 4);
}

TEST_CASE("edge partition over a domino matches hand enumeration") {
  const Region box(lambda_box(1));
  std::vector<Label> labels9;
  for (const Vertex& v : box.cells()) {
    if (v == Vertex{0, 0} || v == Vertex{1, 0})
      labels9.push_back(Label::zero);  // the domino itself
    else if (v.y > 0)
      labels9.push_back(Label::plus);
    else
      labels9.push_back(Label::minus);
  }
  const LabelGrid grid = grid_from(box, labels9);
  const std::vector<Vertex> domino{{0, 0}, {1, 0}};
  const EdgePartition counts =
      boundary_edge_partition(std::span<const Vertex>(domino), grid, BoundaryCondition::plus);
  // Hand count over the 6 outside edges: north pair plus, south pair minus,
  // west neighbor (-1,0) minus, east neighbor (2,0) is the virtual boundary.
  REQUIRE(counts.total() == 6);
  REQUIRE(counts.plus == 3);
  REQUIRE(counts.minus == 3);
  REQUIRE(counts.zero == 0);
}

TEST_CASE("flip energy delta on the zero-labeled single vertex") {
  const Region point(lambda_box(0));
  const FieldSample field = origin_field(0.0);
  const LabelGrid grid = labels(field, point);
  REQUIRE(grid.label_at({0, 0}) == Label::zero);
  const std::vector<Vertex> s{{0, 0}};
  const double delta =
      flip_energy_delta(std::span<const Vertex>(s), field, grid, BoundaryCondition::plus);
  REQUIRE(delta == Approx(4.0).margin(1e-6));
  REQUIRE(delta >= 0.0);
}

TEST_CASE("flip energy delta rejects non-zero-labeled sets") {
  const Region point(lambda_box(0));
  const FieldSample field = origin_field(5.0);
  const LabelGrid grid = labels(field, point);
  const std::vector<Vertex> s{{0, 0}};
  REQUIRE_THROWS_AS(
      flip_energy_delta(std::span<const Vertex>(s), field, grid, BoundaryCondition::plus),
      validation_error);
}

TEST_CASE("stability inequality holds for every zero component") {
  const Region box(lambda_box(2));
  for (std::uint64_t index = 0; index < 100; ++index) {
    const FieldSample field = sample_field(box, 1.0, 0xabc, index);
    const LabelGrid grid = labels(field, box);
    const DisagreementSet zeros = disagreement_set(grid);
    for (std::int32_t id = 0; id < zeros.component_count; ++id) {
      const auto component = zeros.component_members(id);
      const double up = flip_energy_delta(std::span<const Vertex>(component), field, grid,
                                          BoundaryCondition::plus);
      const double down = flip_energy_delta(std::span<const Vertex>(component), field, grid,
                                            BoundaryCondition::minus);
      REQUIRE(up >= 0.0);
      REQUIRE(down >= 0.0);
    }
  }
}

TEST_CASE("upward shifts only move labels upward") {
  const Region box(lambda_box(2));
  for (std::uint64_t index = 0; index < 40; ++index) {
    const FieldSample field = sample_field(box, 1.0, 0xdef, index);
    const FieldSample shifted = perturb(field, GlobalShift{0.35});
    const TransitionAudit audit = label_transitions(labels(field, box), labels(shifted, box));
    REQUIRE(audit.forbidden_upward() == 0);
  }
}

TEST_CASE("domain monotonicity on nested boxes with a shared field") {
  for (std::uint64_t index = 0; index < 25; ++index) {
    const FieldSample big_field = sample_field(Region(lambda_box(8)), 1.0, 0x11, index);
    const LabelGrid big = labels(big_field, Region(lambda_box(8)));
    const FieldSample small_field = sample_field(Region(lambda_box(4)), 1.0, 0x11, index);
    const LabelGrid small = labels(small_field, Region(lambda_box(4)));
    const DisagreementSet big_set = disagreement_set(big);
    const DisagreementSet small_set = disagreement_set(small);
    for (const Vertex& v : big_set.members)
      if (chebyshev(v, {0, 0}) <= 4) REQUIRE(small_set.contains(v));
  }
}

TEST_CASE("label dump prints the grid") {
  const Region point(lambda_box(0));
  std::ostringstream os;
  dump_labels(labels(origin_field(0.0), point), os);
  REQUIRE(os.str() == "0\n");
}

TEST_CASE("fault injection hook breaks the coupling (negative control)") {
  const Region box(lambda_box(1));
  const FieldSample field = sample_field(box, 1.0, 0x77, 0);
  const LabelGrid clean = labels(field, box);
  REQUIRE(clean.cells.size() == 9);

  testing::fault_flip_origin = true;
  bool violated = false;
  try {
    for (std::uint64_t index = 0; index < 50 && !violated; ++index)
      labels(sample_field(box, 1.0, 0x77, index), box);
  } catch (const invariant_violation&) {
    violated = true;
  }
  testing::fault_flip_origin = false;
  REQUIRE(violated);
}
