#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "rfim/disagreement.hpp"
#include "rfim/disorder.hpp"
#include "rfim/groundstate.hpp"
#include "rfim/lattice.hpp"
#include "rfim/percolation.hpp"
#include "rfim/stats.hpp"

namespace rfim {

/// One Monte Carlo observation. Reproducible from (kind, parameters,
/// master_seed, sample_index); wall_ms is diagnostic only and never
/// serialized.
struct ExperimentRecord {
  std::string kind;
  std::int32_t N = 0;
  double epsilon = 0;
  std::uint64_t master_seed = 0;
  std::uint64_t sample_index = 0;
  std::map<std::string, double> scalars;
  std::map<std::string, bool> flags;
  bool tie = false;
  double wall_ms = 0;
};

/// Consumer of completed per-sample records. emit() is called from worker
/// threads as soon as a sample finishes; implementations synchronize
/// internally and are free to persist out-of-order arrivals in index order.
class RecordSink {
 public:
  virtual ~RecordSink() = default;
  virtual void emit(std::int64_t sample_index, const std::vector<ExperimentRecord>& records) = 0;
};

namespace detail {

/// Runs fn(i) for i in [0, n) across a worker pool. Each index is processed
/// exactly once; callers write into index-addressed slots so the outcome is
/// identical for any worker count. The first exception wins and is rethrown
/// after the pool drains; its sample index is reported alongside.
struct SampleFailure {
  std::int64_t index = -1;
  std::string message;
};

inline std::optional<SampleFailure> parallel_samples(std::int64_t n, int workers,
                                                     const std::function<void(std::int64_t)>& fn,
                                                     std::vector<char>* completed = nullptr) {
  workers = std::max(1, workers);
  std::atomic<std::int64_t> next{0};
  std::mutex failure_mutex;
  std::optional<SampleFailure> failure;
  auto body = [&] {
    while (true) {
      const std::int64_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
        if (completed) (*completed)[std::size_t(i)] = 1;
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure || i < failure->index) failure = SampleFailure{i, e.what()};
        next.store(n);
        return;
      }
    }
  };
  if (workers == 1) {
    body();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(std::size_t(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(body);
    for (std::thread& t : pool) t.join();
  }
  return failure;
}

inline double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
      .count();
}

}  // namespace detail

/// Stability audit: every zero component S of the grid satisfies the flip
/// inequality under both boundary conditions. Returns the disagreement set
/// for reuse. Violations are library bugs, never statistics.
inline DisagreementSet audit_stability(const LabelGrid& grid, const FieldSample& field) {
  DisagreementSet zeros = disagreement_set(grid);
  for (std::int32_t id = 0; id < zeros.component_count; ++id) {
    const auto component = zeros.component_members(id);
    const std::span<const Vertex> s(component);
    if (flip_energy_delta(s, field, grid, BoundaryCondition::plus) < 0.0 ||
        flip_energy_delta(s, field, grid, BoundaryCondition::minus) < 0.0)
      throw invariant_violation("stability: a zero component has negative flip energy");
  }
  return zeros;
}

/// Transition audit for an upward field shift: no label may move downward.
inline void audit_upward_transitions(const LabelGrid& before, const LabelGrid& after,
                                     TransitionAudit* out = nullptr) {
  const TransitionAudit audit = label_transitions(before, after);
  if (audit.forbidden_upward() != 0)
    throw invariant_violation("monotonicity: an upward shift moved a label downward");
  if (out) *out = audit;
}

// ---------------------------------------------------------------------------
// m_N estimation and the decay fit
// ---------------------------------------------------------------------------

struct MnPoint {
  std::int32_t N = 0;
  std::int64_t samples = 0;
  std::int64_t zero_count = 0;
  double m_hat = 0;
  double se = 0;
};

struct DecayFit {
  std::vector<MnPoint> points;
  bool fit_valid = false;
  double rate = 0;       // fitted c in log m_N ~ intercept - c N
  double rate_se = 0;
  double intercept = 0;
  std::vector<double> residuals;
  std::int64_t monotone_violations = 0;  // nested-box containment failures
  std::optional<detail::SampleFailure> failure;
  std::vector<ExperimentRecord> records;
  double wall_ms = 0;
};

/// Estimates m_N = P(origin label is 0) for each N over a shared keyed field,
/// with the nested-box containment diagnostic run on every sample. The decay
/// rate is fitted on log m_hat by weighted least squares over the N with at
/// least five zero-label hits.
inline DecayFit estimate_mN(std::vector<std::int32_t> n_list, double epsilon,
                            std::int64_t samples, std::uint64_t master_seed, int workers,
                            RecordSink* sink = nullptr) {
  if (n_list.empty()) throw validation_error("estimate_mN: empty N list");
  std::sort(n_list.begin(), n_list.end());
  n_list.erase(std::unique(n_list.begin(), n_list.end()), n_list.end());
  for (std::int32_t n : n_list)
    if (n != 0 && !is_power_of_two(n))
      throw validation_error("estimate_mN: N must be 0 or a power of two");
  if (samples <= 0) throw validation_error("estimate_mN: samples must be positive");

  const auto start = std::chrono::steady_clock::now();
  struct SampleOut {
    std::vector<char> zero_at_origin;
    std::vector<char> ties;
    std::int64_t containment_violations = 0;
  };
  std::vector<SampleOut> results(static_cast<std::size_t>(samples));
  std::vector<std::vector<ExperimentRecord>> slot_records(static_cast<std::size_t>(samples));

  const auto run_one = [&](std::int64_t i) {
    SampleOut out;
    out.zero_at_origin.resize(n_list.size());
    out.ties.resize(n_list.size());
    std::vector<DisagreementSet> sets;
    sets.reserve(n_list.size());
    for (std::size_t k = 0; k < n_list.size(); ++k) {
      const Region region(lambda_box(n_list[k]));
      const FieldSample field = sample_field(region, epsilon, master_seed, std::uint64_t(i));
      const LabelGrid grid = labels(field, region);
      const DisagreementSet zeros = audit_stability(grid, field);
      out.zero_at_origin[k] = grid.label_at({0, 0}) == Label::zero;
      out.ties[k] = grid.tie_plus || grid.tie_minus;
      sets.push_back(zeros);
    }
    // Containment across nested boxes: members of the larger-box set inside
    // the smaller box must be members of the smaller-box set.
    for (std::size_t small = 0; small < n_list.size(); ++small)
      for (std::size_t big = small + 1; big < n_list.size(); ++big)
        for (const Vertex& v : sets[big].members)
          if (chebyshev(v, {0, 0}) <= n_list[small] && !sets[small].contains(v))
            ++out.containment_violations;

    std::vector<ExperimentRecord>& recs = slot_records[std::size_t(i)];
    for (std::size_t k = 0; k < n_list.size(); ++k) {
      ExperimentRecord rec;
      rec.kind = "mn";
      rec.N = n_list[k];
      rec.epsilon = epsilon;
      rec.master_seed = master_seed;
      rec.sample_index = std::uint64_t(i);
      rec.scalars["xi_o_zero"] = out.zero_at_origin[k] ? 1.0 : 0.0;
      rec.flags["containment_ok"] = out.containment_violations == 0;
      rec.tie = out.ties[k] != 0;
      recs.push_back(std::move(rec));
    }
    results[std::size_t(i)] = std::move(out);
    if (sink) sink->emit(i, recs);
  };

  DecayFit fit;
  std::vector<char> completed(std::size_t(samples), 0);
  fit.failure = detail::parallel_samples(samples, workers, run_one, &completed);

  for (std::int64_t i = 0; i < samples; ++i) {
    if (!completed[std::size_t(i)]) continue;
    fit.monotone_violations += results[std::size_t(i)].containment_violations;
    for (ExperimentRecord& rec : slot_records[std::size_t(i)])
      fit.records.push_back(std::move(rec));
  }

  for (std::size_t k = 0; k < n_list.size(); ++k) {
    MnPoint point;
    point.N = n_list[k];
    for (std::int64_t i = 0; i < samples; ++i)
      if (completed[std::size_t(i)]) {
        ++point.samples;
        point.zero_count += results[std::size_t(i)].zero_at_origin[k];
      }
    if (point.samples > 0) {
      point.m_hat = double(point.zero_count) / double(point.samples);
      point.se = wald_se(point.m_hat, point.samples);
    }
    fit.points.push_back(point);
  }

  // Weighted fit of log m_hat against N; var(log m_hat) ~ (1-p) / (n p).
  std::vector<double> xs, ys, ws;
  for (const MnPoint& p : fit.points)
    if (p.zero_count >= 5 && p.m_hat < 1.0) {
      xs.push_back(double(p.N));
      ys.push_back(std::log(p.m_hat));
      ws.push_back(double(p.samples) * p.m_hat / (1.0 - p.m_hat));
    }
  if (xs.size() >= 2) {
    const LineFit line = weighted_least_squares(xs, ys, ws);
    fit.fit_valid = true;
    fit.rate = -line.slope;
    fit.rate_se = line.slope_se;
    fit.intercept = line.intercept;
    fit.residuals = line.residuals;
  }
  fit.wall_ms = detail::elapsed_ms(start);
  return fit;
}

// ---------------------------------------------------------------------------
// Perturbation exclusion (distance vs volume conditions)
// ---------------------------------------------------------------------------

struct ExclusionReport {
  std::int64_t neither = 0;
  std::int64_t only_a = 0;
  std::int64_t only_b = 0;
  std::int64_t both = 0;  // contract: zero
  std::optional<detail::SampleFailure> failure;
  std::vector<ExperimentRecord> records;
  double wall_ms = 0;
};

/// Under a global upward shift of delta, evaluates per sample
///   (a) the common-set distance between the two inner box boundaries is >= K,
///   (b) |C* inside the core box| * delta > (8/K) |C* in the mid annulus|,
/// and tallies the four outcomes. The two conditions can never hold together;
/// a sample with both is surfaced as a violation.
inline ExclusionReport check_perturbation_exclusion(std::int32_t n, double epsilon,
                                                    const PerturbationParams& params,
                                                    std::int64_t samples,
                                                    std::uint64_t master_seed, int workers,
                                                    RecordSink* sink = nullptr) {
  if (!is_power_of_two(n) || n < 8)
    throw validation_error("check_perturbation_exclusion: N must be a power of two >= 8");
  if (samples <= 0) throw validation_error("check_perturbation_exclusion: samples > 0 required");

  const auto start = std::chrono::steady_clock::now();
  const Region region(lambda_box(n));
  const auto src = outer_boundary(lambda_box(n / 4));
  const auto dst = outer_boundary(lambda_box(n / 2));
  // The solver consumes the fixed-point shift, so condition (b) uses the
  // identical effective delta and the exclusion is exact, not approximate.
  const double delta_eff = double(round_fixed(params.delta)) / double(kFixedScale);

  struct SampleOut {
    bool holds_a = false, holds_b = false, tie = false;
  };
  std::vector<SampleOut> results(static_cast<std::size_t>(samples));
  std::vector<std::vector<ExperimentRecord>> slot_records(static_cast<std::size_t>(samples));

  const auto run_one = [&](std::int64_t i) {
    const FieldSample field = sample_field(region, epsilon, master_seed, std::uint64_t(i));
    const FieldSample shifted = perturb(field, GlobalShift{params.delta});
    const LabelGrid grid = labels(field, region);
    const LabelGrid grid_shifted = labels(shifted, region);
    TransitionAudit transitions;
    audit_upward_transitions(grid, grid_shifted, &transitions);
    const DisagreementSet c = audit_stability(grid, field);
    const DisagreementSet c_shifted = audit_stability(grid_shifted, shifted);
    const DisagreementSet common = common_disagreement(c, c_shifted);

    SampleOut out;
    out.tie = grid.tie_plus || grid.tie_minus || grid_shifted.tie_plus || grid_shifted.tie_minus;
    std::int64_t core = 0, ring = 0;
    for (const Vertex& v : common.members) {
      const std::int64_t r = chebyshev(v, {0, 0});
      if (r <= n / 4) ++core;
      if (r > n / 4 && r <= n / 2) ++ring;
    }
    const auto d = induced_distance(common.members, src, dst);
    out.holds_a = !d || double(*d) >= params.K;
    out.holds_b = double(core) * delta_eff > (8.0 / params.K) * double(ring);

    ExperimentRecord rec;
    rec.kind = "perturb";
    rec.N = n;
    rec.epsilon = epsilon;
    rec.master_seed = master_seed;
    rec.sample_index = std::uint64_t(i);
    rec.scalars["distance"] = d ? double(*d) : -1.0;
    rec.scalars["core_count"] = double(core);
    rec.scalars["ring_count"] = double(ring);
    rec.scalars["c_star_size"] = double(common.size());
    rec.scalars["delta"] = params.delta;
    rec.scalars["K"] = params.K;
    rec.flags["holds_a"] = out.holds_a;
    rec.flags["holds_b"] = out.holds_b;
    for (const auto& [name, value] : transition_scalars(transitions)) rec.scalars[name] = value;
    rec.tie = out.tie;
    slot_records[std::size_t(i)].push_back(std::move(rec));
    results[std::size_t(i)] = out;
    if (out.holds_a && out.holds_b)
      throw invariant_violation("exclusion: conditions (a) and (b) hold simultaneously");
    if (sink) sink->emit(i, slot_records[std::size_t(i)]);
  };

  ExclusionReport report;
  std::vector<char> completed(std::size_t(samples), 0);
  report.failure = detail::parallel_samples(samples, workers, run_one, &completed);

  for (std::int64_t i = 0; i < samples; ++i) {
    if (!completed[std::size_t(i)]) continue;
    const SampleOut& out = results[std::size_t(i)];
    if (out.holds_a && out.holds_b)
      ++report.both;
    else if (out.holds_a)
      ++report.only_a;
    else if (out.holds_b)
      ++report.only_b;
    else
      ++report.neither;
    for (ExperimentRecord& rec : slot_records[std::size_t(i)])
      report.records.push_back(std::move(rec));
  }
  report.wall_ms = detail::elapsed_ms(start);
  return report;
}

// ---------------------------------------------------------------------------
// Star percolation under nonnegative shifts
// ---------------------------------------------------------------------------

struct StarReport {
  std::int64_t violations = 0;  // contract: zero
  std::int64_t samples_with_common = 0;
  std::optional<detail::SampleFailure> failure;
  std::vector<ExperimentRecord> records;
  double wall_ms = 0;
};

/// Applies an independent nonnegative keyed shift in [0, max_shift] per site
/// and verifies that every vertex of the common disagreement set lies in a
/// component touching the ring adjacent to the outer boundary.
inline StarReport check_star_percolation(std::int32_t n, double epsilon, double max_shift,
                                         std::int64_t samples, std::uint64_t master_seed,
                                         int workers, RecordSink* sink = nullptr) {
  if (!is_power_of_two(n)) throw validation_error("check_star_percolation: N must be 2^k");
  if (max_shift < 0) throw validation_error("check_star_percolation: shifts must be nonnegative");
  if (samples <= 0) throw validation_error("check_star_percolation: samples > 0 required");

  const auto start = std::chrono::steady_clock::now();
  const Region region(lambda_box(n));

  struct SampleOut {
    std::int64_t violations = 0;
    std::int64_t c_star = 0;
  };
  std::vector<SampleOut> results(static_cast<std::size_t>(samples));
  std::vector<std::vector<ExperimentRecord>> slot_records(static_cast<std::size_t>(samples));

  const auto run_one = [&](std::int64_t i) {
    const FieldSample field = sample_field(region, epsilon, master_seed, std::uint64_t(i));
    FieldSample shifted = field;
    if (max_shift > 0)
      for (const Vertex& v : shifted.cells())
        shifted.add_shift(
            v, max_shift * keyed_unit(master_seed, std::uint64_t(i), v.x, v.y, kAuxLaneShift));
    const LabelGrid grid = labels(field, region);
    const LabelGrid grid_shifted = labels(shifted, region);
    TransitionAudit transitions;
    audit_upward_transitions(grid, grid_shifted, &transitions);
    const DisagreementSet common = common_disagreement(audit_stability(grid, field),
                                                       audit_stability(grid_shifted, shifted));
    SampleOut out;
    out.c_star = std::int64_t(common.size());
    // A component reaches the boundary iff it owns a cell at radius N.
    std::vector<char> touches(std::size_t(common.component_count), 0);
    for (std::size_t m = 0; m < common.members.size(); ++m)
      if (chebyshev(common.members[m], {0, 0}) == n)
        touches[std::size_t(common.component[m])] = 1;
    for (std::size_t m = 0; m < common.members.size(); ++m)
      if (!touches[std::size_t(common.component[m])]) ++out.violations;

    ExperimentRecord rec;
    rec.kind = "star";
    rec.N = n;
    rec.epsilon = epsilon;
    rec.master_seed = master_seed;
    rec.sample_index = std::uint64_t(i);
    rec.scalars["c_star_size"] = double(out.c_star);
    rec.scalars["violations"] = double(out.violations);
    rec.scalars["max_shift"] = max_shift;
    for (const auto& [name, value] : transition_scalars(transitions)) rec.scalars[name] = value;
    rec.flags["percolates"] = out.violations == 0;
    rec.tie = grid.tie_plus || grid.tie_minus || grid_shifted.tie_plus || grid_shifted.tie_minus;
    slot_records[std::size_t(i)].push_back(std::move(rec));
    results[std::size_t(i)] = out;
    if (sink) sink->emit(i, slot_records[std::size_t(i)]);
  };

  StarReport report;
  std::vector<char> completed(std::size_t(samples), 0);
  report.failure = detail::parallel_samples(samples, workers, run_one, &completed);

  for (std::int64_t i = 0; i < samples; ++i) {
    if (!completed[std::size_t(i)]) continue;
    const SampleOut& out = results[std::size_t(i)];
    report.violations += out.violations;
    report.samples_with_common += out.c_star > 0;
    for (ExperimentRecord& rec : slot_records[std::size_t(i)])
      report.records.push_back(std::move(rec));
  }
  report.wall_ms = detail::elapsed_ms(start);
  return report;
}

// ---------------------------------------------------------------------------
// Crossing probabilities
// ---------------------------------------------------------------------------

struct CrossingReport {
  std::int64_t samples_done = 0;
  std::int64_t hard_count = 0;
  std::int64_t easy_count = 0;
  std::int64_t rect_count = 0;
  double p_hard = 0, p_easy = 0, p_rect = 0;
  double se_hard = 0, se_easy = 0, se_rect = 0;
  std::optional<detail::SampleFailure> failure;
  std::vector<ExperimentRecord> records;
  double wall_ms = 0;
};

/// Hard and easy crossing probabilities of the annulus between radii N/32 and
/// N/8 for the disagreement set solved on the radius-N box, plus the
/// rectangle crossing probability on a companion box. diagnostic_full swaps
/// in the full lattice for the disagreement set.
inline CrossingReport estimate_crossing_bounds(std::int32_t n, double epsilon,
                                               std::int64_t samples, std::uint64_t master_seed,
                                               int aspect, int companion_factor,
                                               bool diagnostic_full, int workers,
                                               RecordSink* sink = nullptr) {
  if (!is_power_of_two(n) || n < 32)
    throw validation_error("estimate_crossing_bounds: N must be a power of two >= 32");
  if (samples <= 0) throw validation_error("estimate_crossing_bounds: samples > 0 required");
  if (aspect < 1) throw validation_error("estimate_crossing_bounds: aspect must be >= 1");

  const auto start = std::chrono::steady_clock::now();
  const Region region(lambda_box(n));
  const AnnulusRegion annulus(lambda_box(n / 8), lambda_box(n / 32));
  const std::int32_t rect_width = std::max(2, n / 8);
  const std::int32_t rect_height = std::max(1, rect_width / aspect);
  const RectRegion rect({-rect_width / 2, -rect_height / 2}, rect_width, rect_height);
  const Region companion(scaled_box(rect, companion_factor));

  struct SampleOut {
    bool hard = false, easy = false, rect_cross = false, tie = false;
  };
  std::vector<SampleOut> results(static_cast<std::size_t>(samples));
  std::vector<std::vector<ExperimentRecord>> slot_records(static_cast<std::size_t>(samples));

  const auto run_one = [&](std::int64_t i) {
    SampleOut out;
    if (diagnostic_full) {
      const auto everything = region.cells();
      out.hard = cross_hard(annulus, everything);
      out.easy = cross_easy(annulus, everything);
      out.rect_cross = cross(rect, companion.cells());
    } else {
      const FieldSample field = sample_field(region, epsilon, master_seed, std::uint64_t(i));
      const LabelGrid grid = labels(field, region);
      const DisagreementSet c = audit_stability(grid, field);
      out.hard = cross_hard(annulus, c.members);
      out.easy = cross_easy(annulus, c.members);
      out.tie = grid.tie_plus || grid.tie_minus;

      const FieldSample companion_field =
          sample_field(companion, epsilon, master_seed, std::uint64_t(i));
      const LabelGrid companion_grid = labels(companion_field, companion);
      const DisagreementSet companion_c = audit_stability(companion_grid, companion_field);
      out.rect_cross = cross(rect, companion_c.members);
      out.tie = out.tie || companion_grid.tie_plus || companion_grid.tie_minus;
    }
    ExperimentRecord rec;
    rec.kind = "crossing";
    rec.N = n;
    rec.epsilon = epsilon;
    rec.master_seed = master_seed;
    rec.sample_index = std::uint64_t(i);
    rec.flags["hard"] = out.hard;
    rec.flags["easy"] = out.easy;
    rec.flags["rect"] = out.rect_cross;
    rec.scalars["aspect"] = double(aspect);
    rec.scalars["factor"] = double(companion_factor);
    rec.tie = out.tie;
    slot_records[std::size_t(i)].push_back(std::move(rec));
    results[std::size_t(i)] = out;
    if (sink) sink->emit(i, slot_records[std::size_t(i)]);
  };

  CrossingReport report;
  std::vector<char> completed(std::size_t(samples), 0);
  report.failure = detail::parallel_samples(samples, workers, run_one, &completed);

  for (std::int64_t i = 0; i < samples; ++i) {
    if (!completed[std::size_t(i)]) continue;
    const SampleOut& out = results[std::size_t(i)];
    ++report.samples_done;
    report.hard_count += out.hard;
    report.easy_count += out.easy;
    report.rect_count += out.rect_cross;
    for (ExperimentRecord& rec : slot_records[std::size_t(i)])
      report.records.push_back(std::move(rec));
  }
  if (report.samples_done > 0) {
    report.p_hard = double(report.hard_count) / double(report.samples_done);
    report.p_easy = double(report.easy_count) / double(report.samples_done);
    report.p_rect = double(report.rect_count) / double(report.samples_done);
    report.se_hard = wald_se(report.p_hard, report.samples_done);
    report.se_easy = wald_se(report.p_easy, report.samples_done);
    report.se_rect = wald_se(report.p_rect, report.samples_done);
  }
  report.wall_ms = detail::elapsed_ms(start);
  return report;
}

// ---------------------------------------------------------------------------
// Geodesic length exponent
// ---------------------------------------------------------------------------

struct GeodesicPoint {
  std::int32_t N = 0;
  std::int64_t finite = 0;
  std::int64_t infinite = 0;
  double median = 0;
  double median_low = 0;
  double median_high = 0;
  std::map<std::string, double> tail;  // P(D <= N^a) for a grid of a
};

struct ExponentEstimate {
  double alpha_hat = 0;
  double ci_low = 0;
  double ci_high = 0;
  bool valid = false;
  std::vector<GeodesicPoint> points;
  std::vector<std::int32_t> excluded;  // N with no finite distances
  std::optional<detail::SampleFailure> failure;
  std::vector<ExperimentRecord> records;
  double wall_ms = 0;
};

/// Distribution of the induced distance between the two inner box boundaries
/// through the disagreement set, conditioned on finiteness; the exponent is
/// the slope of log median against log N with a bootstrap interval.
inline ExponentEstimate estimate_geodesic_exponent(std::vector<std::int32_t> n_list,
                                                   double epsilon, std::int64_t samples,
                                                   std::uint64_t master_seed,
                                                   bool diagnostic_full, int workers,
                                                   RecordSink* sink = nullptr) {
  if (n_list.empty()) throw validation_error("estimate_geodesic_exponent: empty N list");
  std::sort(n_list.begin(), n_list.end());
  n_list.erase(std::unique(n_list.begin(), n_list.end()), n_list.end());
  for (std::int32_t n : n_list)
    if (!is_power_of_two(n) || n < 16)
      throw validation_error("estimate_geodesic_exponent: each N must be a power of two >= 16");
  if (samples <= 0) throw validation_error("estimate_geodesic_exponent: samples > 0 required");

  const auto start = std::chrono::steady_clock::now();
  struct SampleOut {
    std::vector<double> distance;  // -1 encodes infinity
  };
  std::vector<SampleOut> results(static_cast<std::size_t>(samples));
  std::vector<std::vector<ExperimentRecord>> slot_records(static_cast<std::size_t>(samples));

  const auto run_one = [&](std::int64_t i) {
    SampleOut out;
    out.distance.resize(n_list.size(), -1.0);
    std::vector<ExperimentRecord>& recs = slot_records[std::size_t(i)];
    for (std::size_t k = 0; k < n_list.size(); ++k) {
      const std::int32_t n = n_list[k];
      const Region region(lambda_box(n));
      const auto src = outer_boundary(lambda_box(n / 4));
      const auto dst = outer_boundary(lambda_box(n / 2));
      std::optional<std::int64_t> d;
      bool tie = false;
      if (diagnostic_full) {
        d = induced_distance(region.cells(), src, dst);
      } else {
        const FieldSample field = sample_field(region, epsilon, master_seed, std::uint64_t(i));
        const LabelGrid grid = labels(field, region);
        const DisagreementSet c = audit_stability(grid, field);
        tie = grid.tie_plus || grid.tie_minus;
        d = induced_distance(c.members, src, dst);
      }
      if (d) {
        if (*d < n / 4)
          throw invariant_violation("geodesic: finite distance below the l1 lower bound");
        out.distance[k] = double(*d);
      }
      ExperimentRecord rec;
      rec.kind = "geodesic";
      rec.N = n;
      rec.epsilon = epsilon;
      rec.master_seed = master_seed;
      rec.sample_index = std::uint64_t(i);
      rec.scalars["distance"] = out.distance[k];
      rec.flags["finite"] = out.distance[k] >= 0;
      rec.tie = tie;
      recs.push_back(std::move(rec));
    }
    results[std::size_t(i)] = std::move(out);
    if (sink) sink->emit(i, recs);
  };

  ExponentEstimate estimate;
  std::vector<char> completed(std::size_t(samples), 0);
  estimate.failure = detail::parallel_samples(samples, workers, run_one, &completed);

  std::vector<std::vector<double>> finite_by_n(n_list.size());
  for (std::int64_t i = 0; i < samples; ++i) {
    if (!completed[std::size_t(i)]) continue;
    const SampleOut& out = results[std::size_t(i)];
    for (std::size_t k = 0; k < n_list.size(); ++k)
      if (out.distance[k] >= 0) finite_by_n[k].push_back(out.distance[k]);
    for (ExperimentRecord& rec : slot_records[std::size_t(i)])
      estimate.records.push_back(std::move(rec));
  }

  const std::array<double, 4> tail_exponents{0.9, 1.0, 1.1, 1.2};
  std::vector<double> log_n, log_median;
  for (std::size_t k = 0; k < n_list.size(); ++k) {
    GeodesicPoint point;
    point.N = n_list[k];
    point.finite = std::int64_t(finite_by_n[k].size());
    std::int64_t done = 0;
    for (std::int64_t i = 0; i < samples; ++i) done += completed[std::size_t(i)];
    point.infinite = done - point.finite;
    if (point.finite > 0) {
      const BootstrapCi ci =
          bootstrap_median(finite_by_n[k], 200, master_seed, std::uint64_t(1000 + k));
      point.median = ci.estimate;
      point.median_low = ci.low;
      point.median_high = ci.high;
      for (double a : tail_exponents) {
        const double cutoff = std::pow(double(point.N), a);
        std::int64_t hits = 0;
        for (double d : finite_by_n[k]) hits += d <= cutoff;
        char key[32];
        std::snprintf(key, sizeof key, "tail_a_%.1f", a);
        point.tail[key] = done > 0 ? double(hits) / double(done) : 0.0;
      }
      log_n.push_back(std::log(double(point.N)));
      log_median.push_back(std::log(point.median));
    } else {
      estimate.excluded.push_back(point.N);
    }
    estimate.points.push_back(std::move(point));
  }

  if (log_n.size() >= 2) {
    const std::vector<double> unit_weights(log_n.size(), 1.0);
    estimate.alpha_hat = weighted_least_squares(log_n, log_median, unit_weights).slope;
    estimate.valid = true;
    // Bootstrap the per-N medians jointly for the slope interval.
    std::vector<double> slopes;
    for (int r = 0; r < 200; ++r) {
      std::vector<double> ys;
      std::vector<double> xs;
      bool ok = true;
      std::size_t usable = 0;
      for (std::size_t k = 0; k < n_list.size(); ++k) {
        if (finite_by_n[k].empty()) continue;
        std::vector<double> draw(finite_by_n[k].size());
        for (std::size_t j = 0; j < draw.size(); ++j) {
          const std::uint64_t bits = keyed_bits(master_seed, std::uint64_t(2000 + k),
                                                std::int32_t(r), std::int32_t(j),
                                                kAuxLaneBootstrap);
          draw[j] = finite_by_n[k][bits % finite_by_n[k].size()];
        }
        const double m = median(draw);
        if (m <= 0) {
          ok = false;
          break;
        }
        xs.push_back(std::log(double(n_list[k])));
        ys.push_back(std::log(m));
        ++usable;
      }
      if (ok && usable >= 2) {
        const std::vector<double> w(xs.size(), 1.0);
        slopes.push_back(weighted_least_squares(xs, ys, w).slope);
      }
    }
    if (!slopes.empty()) {
      std::sort(slopes.begin(), slopes.end());
      const auto pick = [&](double q) {
        const std::size_t i = std::size_t(q * double(slopes.size() - 1) + 0.5);
        return slopes[std::min(i, slopes.size() - 1)];
      };
      estimate.ci_low = pick(0.025);
      estimate.ci_high = pick(0.975);
    }
  }
  estimate.wall_ms = detail::elapsed_ms(start);
  return estimate;
}

// ---------------------------------------------------------------------------
// Importance sampling identity
// ---------------------------------------------------------------------------

struct ImportanceReport {
  std::int64_t samples_done = 0;
  double direct_zero = 0, weighted_zero = 0, diff_zero_se = 0;
  double direct_core = 0, weighted_core = 0, diff_core_se = 0;
  double mean_weight = 0, weight_se = 0;
  bool zero_ok = false, core_ok = false, weight_ok = false;
  std::optional<detail::SampleFailure> failure;
  std::vector<ExperimentRecord> records;
  double wall_ms = 0;
};

/// Compares direct estimates of P(origin label 0) and E|C inside the core
/// box| against reweighted estimates under the globally shifted field. The
/// shifted run reuses the same base randomness, so the delta -> 0 limit
/// matches sample by sample.
inline ImportanceReport importance_sampling_check(std::int32_t n, double epsilon, double delta,
                                                  std::int64_t samples,
                                                  std::uint64_t master_seed, int workers,
                                                  RecordSink* sink = nullptr) {
  if (n != 0 && !is_power_of_two(n))
    throw validation_error("importance_sampling_check: N must be 0 or a power of two");
  if (delta < 0) throw validation_error("importance_sampling_check: delta must be nonnegative");
  if (samples <= 1) throw validation_error("importance_sampling_check: samples > 1 required");

  const auto start = std::chrono::steady_clock::now();
  const Region region(lambda_box(n));

  struct SampleOut {
    double f_zero = 0, f_core = 0;
    double f_zero_shifted = 0, f_core_shifted = 0;
    double weight = 1;
  };
  std::vector<SampleOut> results(static_cast<std::size_t>(samples));
  std::vector<std::vector<ExperimentRecord>> slot_records(static_cast<std::size_t>(samples));

  const auto observables = [&](const LabelGrid& grid, const FieldSample& field, double* zero,
                              double* core) {
    const DisagreementSet c = audit_stability(grid, field);
    *zero = grid.label_at({0, 0}) == Label::zero ? 1.0 : 0.0;
    std::int64_t inside = 0;
    for (const Vertex& v : c.members)
      if (chebyshev(v, {0, 0}) <= n / 4) ++inside;
    *core = double(inside);
  };

  const auto run_one = [&](std::int64_t i) {
    const FieldSample field = sample_field(region, epsilon, master_seed, std::uint64_t(i));
    SampleOut out;
    const LabelGrid grid = labels(field, region);
    observables(grid, field, &out.f_zero, &out.f_core);
    bool tie = grid.tie_plus || grid.tie_minus;
    if (delta > 0) {
      const FieldSample shifted = perturb(field, GlobalShift{delta});
      const LabelGrid grid_shifted = labels(shifted, region);
      audit_upward_transitions(grid, grid_shifted);
      observables(grid_shifted, shifted, &out.f_zero_shifted, &out.f_core_shifted);
      out.weight = rn_derivative(shifted, delta, region, epsilon);
      tie = tie || grid_shifted.tie_plus || grid_shifted.tie_minus;
    } else {
      out.f_zero_shifted = out.f_zero;
      out.f_core_shifted = out.f_core;
      out.weight = 1.0;
    }
    ExperimentRecord rec;
    rec.kind = "ischeck";
    rec.N = n;
    rec.epsilon = epsilon;
    rec.master_seed = master_seed;
    rec.sample_index = std::uint64_t(i);
    rec.scalars["f_zero"] = out.f_zero;
    rec.scalars["f_core"] = out.f_core;
    rec.scalars["f_zero_shifted"] = out.f_zero_shifted;
    rec.scalars["f_core_shifted"] = out.f_core_shifted;
    rec.scalars["weight"] = out.weight;
    rec.scalars["delta"] = delta;
    rec.tie = tie;
    slot_records[std::size_t(i)].push_back(std::move(rec));
    results[std::size_t(i)] = out;
    if (sink) sink->emit(i, slot_records[std::size_t(i)]);
  };

  ImportanceReport report;
  std::vector<char> completed(std::size_t(samples), 0);
  report.failure = detail::parallel_samples(samples, workers, run_one, &completed);

  std::vector<double> diff_zero, diff_core, weights;
  for (std::int64_t i = 0; i < samples; ++i) {
    if (!completed[std::size_t(i)]) continue;
    const SampleOut& out = results[std::size_t(i)];
    ++report.samples_done;
    diff_zero.push_back(out.f_zero - out.f_zero_shifted * out.weight);
    diff_core.push_back(out.f_core - out.f_core_shifted * out.weight);
    weights.push_back(out.weight);
    for (ExperimentRecord& rec : slot_records[std::size_t(i)])
      report.records.push_back(std::move(rec));
  }
  if (report.samples_done > 1) {
    std::vector<double> direct_z, weighted_z, direct_c, weighted_c;
    for (std::int64_t i = 0; i < samples; ++i) {
      if (!completed[std::size_t(i)]) continue;
      const SampleOut& out = results[std::size_t(i)];
      direct_z.push_back(out.f_zero);
      weighted_z.push_back(out.f_zero_shifted * out.weight);
      direct_c.push_back(out.f_core);
      weighted_c.push_back(out.f_core_shifted * out.weight);
    }
    report.direct_zero = mean(direct_z);
    report.weighted_zero = mean(weighted_z);
    report.direct_core = mean(direct_c);
    report.weighted_core = mean(weighted_c);
    report.diff_zero_se = standard_error(diff_zero);
    report.diff_core_se = standard_error(diff_core);
    report.mean_weight = mean(weights);
    report.weight_se = standard_error(weights);
    const auto within = [](double gap, double se) {
      return se == 0 ? gap == 0 : std::abs(gap) <= 3.0 * se;
    };
    report.zero_ok = within(report.direct_zero - report.weighted_zero, report.diff_zero_se);
    report.core_ok = within(report.direct_core - report.weighted_core, report.diff_core_se);
    report.weight_ok = within(report.mean_weight - 1.0, report.weight_se);
  }
  report.wall_ms = detail::elapsed_ms(start);
  return report;
}

// ---------------------------------------------------------------------------
// Annulus-shift experiment
// ---------------------------------------------------------------------------

struct AnnulusReport {
  std::int64_t samples_done = 0;
  std::int64_t origin_in_common = 0;
  std::int64_t ring_hits = 0;
  std::int64_t implication_violations = 0;  // contract: zero
  double p_origin = 0, p_ring = 0;
  double se_origin = 0, se_ring = 0;
  double delta = 0;
  std::optional<detail::SampleFailure> failure;
  std::vector<ExperimentRecord> records;
  double wall_ms = 0;
};

/// Shifts the annulus between radii N/8 and N/4 upward by
/// delta = (N/16)^(-alpha * alpha'^2) and estimates the probability that the
/// origin stays in the common disagreement set, together with the ring
/// statistic at radius 3N/16 + 1 that dominates it.
inline AnnulusReport annulus_mstar_experiment(std::int32_t n, double epsilon, double alpha,
                                              double alpha_prime,
                                              std::optional<double> delta_override,
                                              std::int64_t samples, std::uint64_t master_seed,
                                              int workers, RecordSink* sink = nullptr) {
  if (!is_power_of_two(n) || n < 32)
    throw validation_error("annulus_mstar_experiment: N must be a power of two >= 32");
  if (samples <= 0) throw validation_error("annulus_mstar_experiment: samples > 0 required");

  const auto start = std::chrono::steady_clock::now();
  const Region region(lambda_box(n));
  const AnnulusRegion shift_zone(lambda_box(n / 4), lambda_box(n / 8));
  double delta;
  if (delta_override) {
    delta = *delta_override;
    if (delta < 0) throw validation_error("annulus_mstar_experiment: delta must be nonnegative");
  } else {
    if (alpha <= 1 || alpha_prime <= 0 || alpha_prime >= 1)
      throw validation_error("annulus_mstar_experiment: need alpha > 1, alpha' in (0, 1)");
    delta = std::pow(double(n) / 16.0, -alpha * alpha_prime * alpha_prime);
  }
  const std::int32_t ring_radius = 3 * n / 16 + 1;

  struct SampleOut {
    bool origin_in = false, ring_hit = false;
  };
  std::vector<SampleOut> results(static_cast<std::size_t>(samples));
  std::vector<std::vector<ExperimentRecord>> slot_records(static_cast<std::size_t>(samples));

  const auto run_one = [&](std::int64_t i) {
    const FieldSample field = sample_field(region, epsilon, master_seed, std::uint64_t(i));
    const FieldSample shifted =
        delta > 0 ? perturb(field, AnnulusShift{delta, shift_zone}) : field;
    const LabelGrid grid = labels(field, region);
    const LabelGrid grid_shifted = labels(shifted, region);
    TransitionAudit transitions;
    audit_upward_transitions(grid, grid_shifted, &transitions);
    const DisagreementSet common = common_disagreement(audit_stability(grid, field),
                                                       audit_stability(grid_shifted, shifted));
    SampleOut out;
    out.origin_in = common.contains({0, 0});
    for (const Vertex& v : common.members)
      if (chebyshev(v, {0, 0}) == ring_radius) {
        out.ring_hit = true;
        break;
      }
    ExperimentRecord rec;
    rec.kind = "annulus";
    rec.N = n;
    rec.epsilon = epsilon;
    rec.master_seed = master_seed;
    rec.sample_index = std::uint64_t(i);
    rec.scalars["c_star_size"] = double(common.size());
    rec.scalars["delta"] = delta;
    for (const auto& [name, value] : transition_scalars(transitions)) rec.scalars[name] = value;
    rec.flags["origin_in_c_star"] = out.origin_in;
    rec.flags["ring_hit"] = out.ring_hit;
    rec.tie = grid.tie_plus || grid.tie_minus || grid_shifted.tie_plus || grid_shifted.tie_minus;
    slot_records[std::size_t(i)].push_back(std::move(rec));
    results[std::size_t(i)] = out;
    if (out.origin_in && !out.ring_hit)
      throw invariant_violation("annulus: origin in the common set without a ring crossing");
    if (sink) sink->emit(i, slot_records[std::size_t(i)]);
  };

  AnnulusReport report;
  report.delta = delta;
  std::vector<char> completed(std::size_t(samples), 0);
  report.failure = detail::parallel_samples(samples, workers, run_one, &completed);

  for (std::int64_t i = 0; i < samples; ++i) {
    if (!completed[std::size_t(i)]) continue;
    const SampleOut& out = results[std::size_t(i)];
    ++report.samples_done;
    report.origin_in_common += out.origin_in;
    report.ring_hits += out.ring_hit;
    report.implication_violations += out.origin_in && !out.ring_hit;
    for (ExperimentRecord& rec : slot_records[std::size_t(i)])
      report.records.push_back(std::move(rec));
  }
  if (report.samples_done > 0) {
    report.p_origin = double(report.origin_in_common) / double(report.samples_done);
    report.p_ring = double(report.ring_hits) / double(report.samples_done);
    report.se_origin = wald_se(report.p_origin, report.samples_done);
    report.se_ring = wald_se(report.p_ring, report.samples_done);
  }
  report.wall_ms = detail::elapsed_ms(start);
  return report;
}

// ---------------------------------------------------------------------------
// Coarse-grained percolation
// ---------------------------------------------------------------------------

struct AnimalReport {
  std::int64_t samples_done = 0;
  std::map<std::int64_t, std::int64_t> animal_histogram;
  double threshold = 0;                 // N / (16 N')
  std::int64_t at_or_above_threshold = 0;
  double independence_corr = 0;         // far-tile open-flag correlation
  double independence_se = 0;
  bool independence_pair_found = false;
  std::optional<detail::SampleFailure> failure;
  std::vector<ExperimentRecord> records;
  double wall_ms = 0;
};

/// Tile openness (disagreement set of the doubled companion box meets the
/// tile) aggregated into lattice-animal statistics, with an independence
/// check between far-apart tiles.
inline AnimalReport coarse_percolation_experiment(std::int32_t n, std::int32_t n_prime,
                                                  double epsilon, std::int64_t samples,
                                                  std::uint64_t master_seed, bool diagnostic_open,
                                                  int workers, RecordSink* sink = nullptr) {
  if (!is_power_of_two(n) || !is_power_of_two(n_prime) || n_prime > n)
    throw validation_error("coarse_percolation_experiment: need powers of two with N' <= N");
  if (n % n_prime != 0)
    throw validation_error("coarse_percolation_experiment: N' must divide N");
  if (samples <= 0) throw validation_error("coarse_percolation_experiment: samples > 0 required");

  const auto start = std::chrono::steady_clock::now();
  const CoarseGrid layout = coarse_grid(n, n_prime);
  // A far pair for the independence check: companion boxes are disjoint once
  // the tile gap is at least 4 N'.
  std::int32_t pair_a = -1, pair_b = -1;
  for (std::int32_t a = 0; a < std::int32_t(layout.tiles.size()) && pair_a < 0; ++a)
    for (std::int32_t b = a + 1; b < std::int32_t(layout.tiles.size()); ++b)
      if (layout.tile_distance(a, b) >= 4 * std::int64_t(n_prime)) {
        pair_a = a;
        pair_b = b;
        break;
      }

  const double threshold = double(n) / (16.0 * double(n_prime));
  struct SampleOut {
    std::int64_t animal = 0;
    bool pair_a_open = false, pair_b_open = false;
  };
  std::vector<SampleOut> results(static_cast<std::size_t>(samples));
  std::vector<std::vector<ExperimentRecord>> slot_records(static_cast<std::size_t>(samples));

  const auto run_one = [&](std::int64_t i) {
    CoarseGrid grid = layout;
    SampleOut out;
    std::int64_t open_count = 0;
    bool tie = false;
    for (std::size_t t = 0; t < grid.tiles.size(); ++t) {
      bool open;
      if (diagnostic_open) {
        open = true;
      } else {
        const Region companion(scaled_box(grid.tiles[t], 2));
        const FieldSample field =
            sample_field(companion, epsilon, master_seed, std::uint64_t(i));
        const LabelGrid lg = labels(field, companion);
        const DisagreementSet c = audit_stability(lg, field);
        open = false;
        for (const Vertex& v : c.members)
          if (grid.tiles[t].contains(v)) {
            open = true;
            break;
          }
        tie = tie || lg.tie_plus || lg.tie_minus;
      }
      grid.open[t] = open;
      open_count += open;
      if (std::int32_t(t) == pair_a) out.pair_a_open = open;
      if (std::int32_t(t) == pair_b) out.pair_b_open = open;
    }
    out.animal = max_open_animal(grid);
    ExperimentRecord rec;
    rec.kind = "animal";
    rec.N = n;
    rec.epsilon = epsilon;
    rec.master_seed = master_seed;
    rec.sample_index = std::uint64_t(i);
    rec.scalars["animal"] = double(out.animal);
    rec.scalars["open_count"] = double(open_count);
    rec.scalars["n_prime"] = double(n_prime);
    rec.flags["at_threshold"] = double(out.animal) >= threshold;
    rec.tie = tie;
    slot_records[std::size_t(i)].push_back(std::move(rec));
    results[std::size_t(i)] = out;
    if (sink) sink->emit(i, slot_records[std::size_t(i)]);
  };

  AnimalReport report;
  report.threshold = threshold;
  std::vector<char> completed(std::size_t(samples), 0);
  report.failure = detail::parallel_samples(samples, workers, run_one, &completed);

  std::vector<double> a_flags, b_flags;
  for (std::int64_t i = 0; i < samples; ++i) {
    if (!completed[std::size_t(i)]) continue;
    const SampleOut& out = results[std::size_t(i)];
    ++report.samples_done;
    ++report.animal_histogram[out.animal];
    report.at_or_above_threshold += double(out.animal) >= report.threshold;
    if (pair_a >= 0) {
      a_flags.push_back(out.pair_a_open ? 1.0 : 0.0);
      b_flags.push_back(out.pair_b_open ? 1.0 : 0.0);
    }
    for (ExperimentRecord& rec : slot_records[std::size_t(i)])
      report.records.push_back(std::move(rec));
  }
  if (pair_a >= 0 && report.samples_done > 1) {
    report.independence_pair_found = true;
    const double va = sample_variance(a_flags);
    const double vb = sample_variance(b_flags);
    if (va > 0 && vb > 0) {
      report.independence_corr = pearson_correlation(a_flags, b_flags);
      report.independence_se = 1.0 / std::sqrt(double(report.samples_done));
    }
  }
  report.wall_ms = detail::elapsed_ms(start);
  return report;
}

}  // namespace rfim
