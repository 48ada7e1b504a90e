#include <catch2/catch.hpp>

#include <cmath>
#include <sstream>

#include "rfim/disorder.hpp"

using namespace rfim;

TEST_CASE("sample_field rejects nonpositive epsilon") {
  REQUIRE_THROWS_AS(sample_field(Region(lambda_box(1)), 0.0, 1, 0), validation_error);
  REQUIRE_THROWS_AS(sample_field(Region(lambda_box(1)), -1.0, 1, 0), validation_error);
}

TEST_CASE("keyed values agree exactly across region shapes") {
  const FieldSample small = sample_field(Region(lambda_box(2)), 1.5, 42, 7);
  const FieldSample large = sample_field(Region(lambda_box(4)), 1.5, 42, 7);
  const FieldSample ring = sample_field(Region(lambda_annulus(4)), 1.5, 42, 7);
  for (const Vertex& v : small.cells()) REQUIRE(small.value(v) == large.value(v));
  for (const Vertex& v : ring.cells()) REQUIRE(ring.value(v) == large.value(v));
}

TEST_CASE("distinct seeds and sample indices decorrelate values") {
  const FieldSample a = sample_field(Region(lambda_box(1)), 1.0, 1, 0);
  const FieldSample b = sample_field(Region(lambda_box(1)), 1.0, 2, 0);
  const FieldSample c = sample_field(Region(lambda_box(1)), 1.0, 1, 1);
  bool differs_seed = false, differs_index = false;
  for (const Vertex& v : a.cells()) {
    differs_seed |= a.value(v) != b.value(v);
    differs_index |= a.value(v) != c.value(v);
  }
  REQUIRE(differs_seed);
  REQUIRE(differs_index);
}

TEST_CASE("large-sample mean and variance match the standard normal") {
  // 10^5 draws at eps=1: mean within 4e-2, variance within 5%.
  const int side = 158;  // 317^2 ~ 1.005e5 vertices
  const FieldSample field = sample_field(Region(lambda_box(side)), 1.0, 2024, 0);
  double sum = 0, sum2 = 0;
  const double n = double(field.cells().size());
  for (const Vertex& v : field.cells()) {
    sum += field.value(v);
    sum2 += field.value(v) * field.value(v);
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  REQUIRE(std::abs(mean) < 4e-2);
  REQUIRE(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("global shift raises every value by delta") {
  const FieldSample base = sample_field(Region(lambda_box(1)), 1.0, 5, 3);
  const FieldSample shifted = perturb(base, GlobalShift{0.25});
  for (const Vertex& v : base.cells()) REQUIRE(shifted.value(v) == base.value(v) + 0.25);
}

TEST_CASE("annulus shift leaves the complement untouched") {
  const BoxRegion box = lambda_box(8);
  const AnnulusRegion ring(lambda_box(2), lambda_box(1));
  const FieldSample base = sample_field(Region(box), 1.0, 5, 3);
  const FieldSample shifted = perturb(base, AnnulusShift{0.5, ring});
  for (const Vertex& v : base.cells()) {
    if (ring.contains(v))
      REQUIRE(shifted.value(v) == base.value(v) + 0.5);
    else
      REQUIRE(shifted.value(v) == base.value(v));
  }
}

TEST_CASE("annulus shift outside the region is rejected") {
  const FieldSample base = sample_field(Region(lambda_box(2)), 1.0, 5, 3);
  const AnnulusRegion ring(lambda_box(4), lambda_box(1));
  REQUIRE_THROWS_AS(perturb(base, AnnulusShift{0.5, ring}), validation_error);
}

TEST_CASE("successive global shifts compose additively and invert exactly") {
  const FieldSample base = sample_field(Region(lambda_box(2)), 2.0, 9, 1);
  const FieldSample two_steps = perturb(perturb(base, GlobalShift{0.125}), GlobalShift{0.375});
  const FieldSample one_step = perturb(base, GlobalShift{0.5});
  for (const Vertex& v : base.cells()) REQUIRE(two_steps.value(v) == one_step.value(v));

  FieldSample undone = two_steps;
  for (const Vertex& v : undone.cells()) undone.add_shift(v, -0.5);
  for (const Vertex& v : base.cells()) REQUIRE(undone.value(v) == base.value(v));
}

TEST_CASE("region sums") {
  const FieldSample field = sample_field(Region(lambda_box(1)), 1.0, 11, 0);
  const std::vector<Vertex> empty;
  REQUIRE(region_sum(field, std::span<const Vertex>(empty)) == 0.0);
  const std::vector<Vertex> one{{0, 0}};
  REQUIRE(region_sum(field, std::span<const Vertex>(one)) == field.value({0, 0}));

  const FieldSample shifted = perturb(field, GlobalShift{0.5});
  const double base_sum = region_sum(field, field.region());
  const double shifted_sum = region_sum(shifted, shifted.region());
  REQUIRE(shifted_sum == Approx(base_sum + 9 * 0.5).epsilon(1e-12));

  const std::vector<Vertex> outside{{5, 5}};
  REQUIRE_THROWS_AS(region_sum(field, std::span<const Vertex>(outside)), validation_error);
}

TEST_CASE("rn weight at the hand-evaluated reference points") {
  // Single vertex, eps = 1, delta = 1, shifted value 1 and 2.
  REQUIRE(std::exp(rn_log_weight(1.0, 1.0, 1.0, 1.0)) == Approx(0.606531).epsilon(1e-6));
  REQUIRE(std::exp(rn_log_weight(2.0, 1.0, 1.0, 1.0)) == Approx(0.223130).epsilon(1e-6));
}

TEST_CASE("rn_derivative evaluates the log weight of the sampled sum") {
  const Region box(lambda_box(3));
  for (std::uint64_t index : {0, 1, 2}) {
    const FieldSample field = sample_field(box, 0.7, 3, index);
    const FieldSample tilde = perturb(field, GlobalShift{0.3});
    const double h_sum = region_sum(tilde, box);
    const double expected = std::exp(rn_log_weight(h_sum, double(box.vertex_count()), 0.3, 0.7));
    REQUIRE(rn_derivative(tilde, 0.3, box, 0.7) == Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("rn_derivative validates its inputs") {
  const Region point(lambda_box(0));
  const FieldSample field = sample_field(point, 1.0, 3, 0);
  const FieldSample tilde = perturb(field, GlobalShift{0.5});
  REQUIRE_THROWS_AS(rn_derivative(tilde, 0.0, point, 1.0), validation_error);
  REQUIRE_THROWS_AS(rn_derivative(tilde, 0.25, point, 1.0), validation_error);  // wrong shift
  REQUIRE(rn_derivative(tilde, 0.5, point, 1.0) > 0);
}

TEST_CASE("rn_derivative tends to 1 as delta shrinks") {
  const Region box(lambda_box(2));
  const FieldSample field = sample_field(box, 1.0, 17, 4);
  double previous_gap = 1e9;
  for (double delta : {1e-2, 1e-4, 1e-6}) {
    const FieldSample tilde = perturb(field, GlobalShift{delta});
    const double gap = std::abs(rn_derivative(tilde, delta, box, 1.0) - 1.0);
    REQUIRE(gap < previous_gap);
    previous_gap = gap;
  }
  REQUIRE(previous_gap < 1e-4);
}

TEST_CASE("field dump is row-major x y value lines") {
  const FieldSample field = sample_field(Region(lambda_box(1)), 1.0, 1, 0);
  std::ostringstream os;
  dump_field(field, os);
  std::istringstream is(os.str());
  int x, y;
  double value;
  std::size_t lines = 0;
  Vertex previous{-2, -2};
  while (is >> x >> y >> value) {
    const Vertex v{x, y};
    REQUIRE(row_major_less(previous, v));
    REQUIRE(value == field.value(v));
    previous = v;
    ++lines;
  }
  REQUIRE(lines == field.cells().size());
}
