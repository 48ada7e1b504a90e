#include <catch2/catch.hpp>

#include <cmath>

#include "rfim/experiments.hpp"

using namespace rfim;

namespace {
constexpr std::uint64_t kSeed = 0xfeed2026;
}

TEST_CASE("m0 at eps=4 matches the closed form") {
  const DecayFit fit = estimate_mN({0}, 4.0, 2000, kSeed, 2);
  REQUIRE(!fit.failure);
  const double expected = std::erf(1.0 / std::sqrt(2.0));
  REQUIRE(proportion_within(fit.points[0].m_hat, expected, fit.points[0].samples, 3.0));
}

TEST_CASE("m0 in the strong-disorder regime") {
  const DecayFit fit = estimate_mN({0}, 100.0, 4000, kSeed ^ 1, 2);
  const double expected = std::erf(4.0 / (100.0 * std::sqrt(2.0)));  // ~0.0319
  REQUIRE(proportion_within(fit.points[0].m_hat, expected, fit.points[0].samples, 3.0));
}

TEST_CASE("estimate_mN is deterministic and monotone across nested boxes") {
  const DecayFit a = estimate_mN({4, 8}, 1.0, 150, kSeed ^ 2, 1);
  const DecayFit b = estimate_mN({4, 8}, 1.0, 150, kSeed ^ 2, 2);
  REQUIRE(!a.failure);
  REQUIRE(a.monotone_violations == 0);
  REQUIRE(a.points.size() == b.points.size());
  for (std::size_t k = 0; k < a.points.size(); ++k) {
    REQUIRE(a.points[k].zero_count == b.points[k].zero_count);
    REQUIRE(a.points[k].m_hat == b.points[k].m_hat);
  }
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    REQUIRE(a.records[i].scalars == b.records[i].scalars);
    REQUIRE(a.records[i].sample_index == b.records[i].sample_index);
  }
  // The per-sample origin indicator is itself monotone across N.
  REQUIRE(a.points[1].m_hat <= a.points[0].m_hat);
}

TEST_CASE("estimate_mN validates inputs") {
  REQUIRE_THROWS_AS(estimate_mN({}, 1.0, 10, kSeed, 1), validation_error);
  REQUIRE_THROWS_AS(estimate_mN({3}, 1.0, 10, kSeed, 1), validation_error);
  REQUIRE_THROWS_AS(estimate_mN({4}, 1.0, 0, kSeed, 1), validation_error);
}

TEST_CASE("perturbation exclusion never sees both conditions") {
  const ExclusionReport gamma_mode = check_perturbation_exclusion(
      16, 1.0, PerturbationParams::gamma_over_n(16, 100.0), 120, kSeed ^ 3, 2);
  REQUIRE(!gamma_mode.failure);
  REQUIRE(gamma_mode.both == 0);
  REQUIRE(gamma_mode.neither + gamma_mode.only_a + gamma_mode.only_b == 120);
  // With K = N/4 the distance condition holds by the l1 bound, always.
  REQUIRE(gamma_mode.only_b == 0);
  REQUIRE(gamma_mode.neither == 0);

  // Transition audits are retained per record; downward moves never occur.
  for (const ExperimentRecord& rec : gamma_mode.records) {
    REQUIRE(rec.scalars.at("trans_pm") == 0);
    REQUIRE(rec.scalars.at("trans_pz") == 0);
    REQUIRE(rec.scalars.at("trans_zm") == 0);
    REQUIRE(rec.scalars.at("trans_zz") + rec.scalars.at("trans_zp") +
                rec.scalars.at("trans_pp") + rec.scalars.at("trans_mm") +
                rec.scalars.at("trans_mz") + rec.scalars.at("trans_mp") ==
            double(33 * 33));  // every site of the radius-16 box transitions
  }

  const ExclusionReport power_mode = check_perturbation_exclusion(
      16, 0.5, PerturbationParams::power_law(16, 1.5, 0.9), 500, kSeed ^ 4, 2);
  REQUIRE(!power_mode.failure);
  REQUIRE(power_mode.both == 0);
}

TEST_CASE("star percolation finds no stranded common-set vertices") {
  const StarReport shifted = check_star_percolation(16, 1.0, 1.0, 60, kSeed ^ 5, 2);
  REQUIRE(!shifted.failure);
  REQUIRE(shifted.violations == 0);
  REQUIRE(shifted.samples_with_common > 0);

  // Zero shift: the common set is the plain disagreement set.
  const StarReport plain = check_star_percolation(16, 1.0, 0.0, 60, kSeed ^ 6, 2);
  REQUIRE(!plain.failure);
  REQUIRE(plain.violations == 0);
}

TEST_CASE("crossing diagnostics on the full lattice are certain") {
  const CrossingReport full = estimate_crossing_bounds(32, 1.0, 5, kSeed ^ 7, 4, 8, true, 1);
  REQUIRE(full.p_hard == 1.0);
  REQUIRE(full.p_easy == 1.0);
  REQUIRE(full.p_rect == 1.0);
}

TEST_CASE("strong disorder kills crossings") {
  const CrossingReport report = estimate_crossing_bounds(32, 100.0, 60, kSeed ^ 8, 4, 8, false, 2);
  REQUIRE(!report.failure);
  REQUIRE(report.p_hard < 0.05);
  REQUIRE(report.p_easy < 0.05);
}

TEST_CASE("moderate disorder keeps the minimum crossing away from one") {
  const CrossingReport report = estimate_crossing_bounds(32, 1.0, 300, kSeed ^ 9, 4, 8, false, 2);
  REQUIRE(!report.failure);
  const double min_p = std::min(report.p_hard, report.p_easy);
  const double min_se = std::min(report.se_hard, report.se_easy);
  REQUIRE(min_p + 1.96 * min_se < 1.0);
}

TEST_CASE("geodesic diagnostics: full lattice has exponent one") {
  const ExponentEstimate est = estimate_geodesic_exponent({16, 32}, 1.0, 3, kSeed ^ 10, true, 1);
  REQUIRE(est.valid);
  for (const GeodesicPoint& p : est.points) {
    REQUIRE(p.finite > 0);
    REQUIRE(p.median == double(p.N) / 4.0);
  }
  REQUIRE(est.alpha_hat == Approx(1.0).margin(1e-9));
}

TEST_CASE("geodesic distances respect the l1 bound on real samples") {
  const ExponentEstimate est =
      estimate_geodesic_exponent({16, 32}, 0.5, 80, kSeed ^ 11, false, 2);
  REQUIRE(!est.failure);  // the driver throws if any finite distance dips below N/4
  for (const GeodesicPoint& p : est.points) REQUIRE(p.finite > 0);
  REQUIRE(est.ci_low <= est.alpha_hat);
  REQUIRE(est.alpha_hat <= est.ci_high);
}

TEST_CASE("importance sampling at delta zero coincides sample by sample") {
  const ImportanceReport rep = importance_sampling_check(4, 1.0, 0.0, 200, kSeed ^ 12, 2);
  REQUIRE(!rep.failure);
  REQUIRE(rep.direct_zero == rep.weighted_zero);
  REQUIRE(rep.direct_core == rep.weighted_core);
  REQUIRE(rep.mean_weight == 1.0);
  REQUIRE(rep.weight_se == 0.0);
}

TEST_CASE("importance sampling identity holds within 3 SE") {
  const ImportanceReport rep = importance_sampling_check(8, 1.0, 0.25, 800, kSeed ^ 13, 2);
  REQUIRE(!rep.failure);
  REQUIRE(rep.zero_ok);
  REQUIRE(rep.core_ok);
  REQUIRE(rep.weight_ok);
}

TEST_CASE("annulus experiment: origin membership implies the ring crossing") {
  const AnnulusReport rep =
      annulus_mstar_experiment(32, 1.0, 1.5, 0.9, std::nullopt, 150, kSeed ^ 14, 2);
  REQUIRE(!rep.failure);
  REQUIRE(rep.implication_violations == 0);
  REQUIRE(rep.p_origin <= rep.p_ring);
  REQUIRE(rep.delta == Approx(std::pow(2.0, -1.5 * 0.81)));
}

TEST_CASE("annulus experiment with delta zero reduces to plain disagreement") {
  const AnnulusReport rep =
      annulus_mstar_experiment(32, 1.0, 1.5, 0.9, 0.0, 100, kSeed ^ 15, 2);
  REQUIRE(!rep.failure);
  const DecayFit mn = estimate_mN({32}, 1.0, 100, kSeed ^ 15, 2);
  REQUIRE(rep.p_origin == mn.points[0].m_hat);
}

TEST_CASE("coarse percolation: diagnostics and strong disorder") {
  const AnimalReport open = coarse_percolation_experiment(16, 4, 1.0, 5, kSeed ^ 16, true, 1);
  REQUIRE(open.animal_histogram.at(16) == 5);  // all 16 tiles open every time

  const AnimalReport strong = coarse_percolation_experiment(16, 4, 100.0, 60, kSeed ^ 17, false, 2);
  REQUIRE(!strong.failure);
  std::int64_t small_animals = 0, total = 0;
  for (const auto& [size, count] : strong.animal_histogram) {
    total += count;
    if (size <= 1) small_animals += count;
  }
  REQUIRE(total == 60);
  REQUIRE(small_animals > 45);  // mostly closed tiles
}

TEST_CASE("far tiles have statistically independent openness") {
  const AnimalReport rep = coarse_percolation_experiment(16, 2, 2.0, 400, kSeed ^ 18, false, 2);
  REQUIRE(!rep.failure);
  REQUIRE(rep.independence_pair_found);
  REQUIRE(std::abs(rep.independence_corr) <= 3.0 * rep.independence_se);
}

TEST_CASE("worker failure surfaces the lowest failing sample") {
  testing::fault_flip_origin = true;
  const DecayFit fit = estimate_mN({4}, 1.0, 50, kSeed ^ 19, 2);
  testing::fault_flip_origin = false;
  REQUIRE(fit.failure.has_value());
  REQUIRE(!fit.failure->message.empty());
}
