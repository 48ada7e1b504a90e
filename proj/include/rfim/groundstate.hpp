#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <span>
#include <vector>

#include "rfim/disorder.hpp"
#include "rfim/errors.hpp"
#include "rfim/lattice.hpp"
#include "rfim/maxflow.hpp"

namespace rfim {

enum class BoundaryCondition { plus, minus };

inline int boundary_sign(BoundaryCondition bc) { return bc == BoundaryCondition::plus ? 1 : -1; }
inline const char* boundary_name(BoundaryCondition bc) {
  return bc == BoundaryCondition::plus ? "plus" : "minus";
}

/// Choice among minimum cuts: the spin configuration whose plus-set is the
/// intersection (minimal_plus) or the union (maximal_plus) of the plus-sets
/// over all minimizers.
enum class Extremality { minimal_plus, maximal_plus };

/// Fixed-point scale for cut capacities: 2^20 per unit of energy. Rounding is
/// half-even, so a uniform field shift maps to a uniform integer shift.
inline constexpr std::int64_t kFixedScale = 1 << 20;

/// Largest field magnitude the capacity arithmetic accepts.
inline constexpr double kMaxFieldMagnitude = double(std::int64_t{1} << 30);

inline std::int64_t round_fixed(double x) {
  if (!(std::abs(x) <= kMaxFieldMagnitude))
    throw validation_error("field magnitude exceeds the 2^30 capacity bound");
  return std::llrint(x * double(kFixedScale));
}

/// The rounded field value the solver consumes at a site: base and shift are
/// rounded separately, so a global shift of delta moves every site by the
/// identical integer round(delta * 2^20).
inline std::int64_t scaled_site_field(const FieldSample& field, const Vertex& v) {
  return round_fixed(field.base_value(v)) + round_fixed(field.shift(v));
}

namespace testing {
/// Test hook: when set, ground_state flips the origin spin after solving.
/// Used as a negative control for the coupling invariant checks.
inline std::atomic<bool> fault_flip_origin{false};
}  // namespace testing

/// A +/-1 assignment over a region together with its boundary condition and
/// energy. energy_scaled is the exact integer energy of the rounded field at
/// scale 2^20; energy is the real-field energy of the same spins.
struct SpinConfig {
  Region region;
  std::vector<Vertex> cells;  // row-major
  std::vector<std::int8_t> spins;
  BoundaryCondition boundary = BoundaryCondition::plus;
  double energy = 0;
  std::int64_t energy_scaled = 0;
  bool tie = false;  // the minimizer was not unique at fixed-point resolution
  GridIndex index;

  int spin_at(const Vertex& v) const {
    const std::int32_t i = index.index_of(v);
    if (i < 0) throw validation_error("SpinConfig: vertex outside the region");
    return spins[std::size_t(i)];
  }
};

/// Number of 4-neighbors of v lying outside the region (i.e. in its outer
/// boundary).
inline int boundary_neighbor_count(const GridIndex& region_index, const Vertex& v) {
  int count = 0;
  for (const Vertex& d : kNeighbor4)
    if (!region_index.contains(v + d)) ++count;
  return count;
}

/// Hamiltonian of Eq-style form: minus the sum of interior agreement terms,
/// signed boundary edge terms and field terms. Interior edges count once.
inline double hamiltonian(const SpinConfig& config, const FieldSample& field) {
  const int bsign = boundary_sign(config.boundary);
  double pair_sum = 0;
  double boundary_sum = 0;
  double field_sum = 0;
  for (std::size_t i = 0; i < config.cells.size(); ++i) {
    const Vertex u = config.cells[i];
    if (!field.covers(u)) throw validation_error("hamiltonian: spins not covered by the field");
    const int su = config.spins[i];
    // Count each interior edge once via its east/north endpoint.
    for (const Vertex& d : {Vertex{1, 0}, Vertex{0, 1}}) {
      const std::int32_t j = config.index.index_of(u + d);
      if (j >= 0) pair_sum += double(su) * double(config.spins[std::size_t(j)]);
    }
    boundary_sum += double(su) * boundary_neighbor_count(config.index, u);
    field_sum += double(su) * field.value(u);
  }
  return -(pair_sum + bsign * boundary_sum + field_sum);
}

namespace detail {

/// Exact integer energy of the rounded field: -(scale * sum_edges s_u s_v +
/// sum_u s_u * K_u) with K_u = rounded field + folded boundary term.
inline std::int64_t scaled_energy(std::span<const Vertex> cells, const GridIndex& index,
                                  std::span<const std::int8_t> spins,
                                  std::span<const std::int64_t> folded) {
  std::int64_t pair_sum = 0;
  std::int64_t field_sum = 0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const int su = spins[i];
    for (const Vertex& d : {Vertex{1, 0}, Vertex{0, 1}}) {
      const std::int32_t j = index.index_of(cells[i] + d);
      if (j >= 0) pair_sum += std::int64_t{su} * spins[std::size_t(j)];
    }
    field_sum += std::int64_t{su} * folded[i];
  }
  return -(pair_sum * kFixedScale + field_sum);
}

inline std::vector<std::int64_t> folded_scaled_field(const FieldSample& field,
                                                     std::span<const Vertex> cells,
                                                     const GridIndex& index,
                                                     BoundaryCondition bc) {
  std::vector<std::int64_t> folded(cells.size());
  const int bsign = boundary_sign(bc);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!field.covers(cells[i]))
      throw validation_error("ground_state: region not covered by the field");
    folded[i] = scaled_site_field(field, cells[i]) +
                std::int64_t{bsign} * boundary_neighbor_count(index, cells[i]) * kFixedScale;
  }
  return folded;
}

inline void apply_fault_hook(SpinConfig& config) {
  if (!testing::fault_flip_origin.load(std::memory_order_relaxed)) return;
  const std::int32_t i = config.index.index_of({0, 0});
  if (i >= 0) config.spins[std::size_t(i)] = std::int8_t(-config.spins[std::size_t(i)]);
}

}  // namespace detail

/// The field with the boundary edge terms folded in: sites adjacent to the
/// outer boundary gain +/-(number of boundary neighbors); interior sites are
/// unchanged. Returned per cell in region order.
inline std::vector<double> effective_field(const FieldSample& field, const Region& region,
                                           BoundaryCondition bc) {
  const auto cells = region.cells();
  const GridIndex index(cells);
  const int bsign = boundary_sign(bc);
  std::vector<double> h(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i)
    h[i] = field.value(cells[i]) + bsign * boundary_neighbor_count(index, cells[i]);
  return h;
}

/// Exact ground state via s-t min-cut.
///
/// Reduction: spin +1 <-> source side. A disagreeing lattice edge costs 2
/// (antiparallel arc pair of capacity 2*scale); a site with positive folded
/// field K gets a source arc of capacity 2K, a negative one a sink arc of
/// capacity 2|K|. Minimum cuts then correspond exactly to minimizers of the
/// rounded-field Hamiltonian, and the residual graph yields the extremal
/// minimizers on ties.
inline SpinConfig ground_state(const FieldSample& field, const Region& region,
                               BoundaryCondition bc, Extremality extremality) {
  SpinConfig config;
  config.region = region;
  config.cells = region.cells();
  if (config.cells.empty()) throw validation_error("ground_state: region is empty");
  config.boundary = bc;
  config.index = GridIndex(config.cells);

  const auto folded = detail::folded_scaled_field(field, config.cells, config.index, bc);

  const int n = int(config.cells.size());
  const int source = n, sink = n + 1;
  FlowNetwork net(n + 2, source, sink);
  std::int64_t abs_field_sum = 0;
  std::int64_t edge_count = 0;
  for (int i = 0; i < n; ++i) {
    for (const Vertex& d : {Vertex{1, 0}, Vertex{0, 1}}) {
      const std::int32_t j = config.index.index_of(config.cells[std::size_t(i)] + d);
      if (j >= 0) {
        net.add_arc(i, j, 2 * kFixedScale, 2 * kFixedScale);
        ++edge_count;
      }
    }
    if (folded[std::size_t(i)] > 0)
      net.add_arc(source, i, 2 * folded[std::size_t(i)]);
    else if (folded[std::size_t(i)] < 0)
      net.add_arc(i, sink, -2 * folded[std::size_t(i)]);
    abs_field_sum += std::abs(folded[std::size_t(i)]);
  }

  const std::int64_t cut_value = net.max_flow();

  const std::vector<char> minimal = net.source_side_minimal();
  const std::vector<char> maximal = net.source_side_maximal();
  config.tie = false;
  for (int i = 0; i < n; ++i)
    if (minimal[i] != maximal[i]) {
      config.tie = true;
      break;
    }

  const std::vector<char>& side = extremality == Extremality::minimal_plus ? minimal : maximal;
  config.spins.resize(config.cells.size());
  for (int i = 0; i < n; ++i) config.spins[std::size_t(i)] = side[i] ? 1 : -1;

  config.energy_scaled = detail::scaled_energy(config.cells, config.index, config.spins, folded);

  // Cut/energy bookkeeping: cut = E_scaled(sigma) + |edges|*scale + sum|K|.
  if (cut_value != config.energy_scaled + edge_count * kFixedScale + abs_field_sum)
    throw invariant_violation("ground_state: cut value disagrees with the spin energy");
  if (config.tie) {
    std::vector<std::int8_t> other(config.cells.size());
    const std::vector<char>& alt = extremality == Extremality::minimal_plus ? maximal : minimal;
    for (int i = 0; i < n; ++i) other[std::size_t(i)] = alt[i] ? 1 : -1;
    if (detail::scaled_energy(config.cells, config.index, other, folded) != config.energy_scaled)
      throw invariant_violation("ground_state: extremal cuts have different energies");
  }

  config.energy = hamiltonian(config, field);
  detail::apply_fault_hook(config);
  return config;
}

/// Exhaustive minimization over all 2^|region| configurations; the oracle for
/// the min-cut path. Consumes the identically rounded field. Ties resolve to
/// the row-major lexicographically largest spin vector (all-plus first),
/// which is the maximal_plus state.
inline SpinConfig ground_state_bruteforce(const FieldSample& field, const Region& region,
                                          BoundaryCondition bc) {
  SpinConfig config;
  config.region = region;
  config.cells = region.cells();
  if (config.cells.empty()) throw validation_error("ground_state_bruteforce: region is empty");
  if (config.cells.size() > 20)
    throw validation_error("ground_state_bruteforce: region larger than 20 vertices");
  config.boundary = bc;
  config.index = GridIndex(config.cells);

  const auto folded = detail::folded_scaled_field(field, config.cells, config.index, bc);
  const int n = int(config.cells.size());

  std::vector<std::int8_t> spins(config.cells.size());
  std::int64_t best_energy = 0;
  bool have_best = false;
  // Descending mask order = lexicographically decreasing spin vectors with
  // cell 0 most significant, so strict improvement keeps the lex-largest tie.
  for (std::int64_t mask = (std::int64_t{1} << n) - 1; mask >= 0; --mask) {
    for (int i = 0; i < n; ++i)
      spins[std::size_t(i)] = (mask >> (n - 1 - i)) & 1 ? 1 : -1;
    const std::int64_t e = detail::scaled_energy(config.cells, config.index, spins, folded);
    if (!have_best || e < best_energy) {
      best_energy = e;
      config.spins = spins;
      have_best = true;
    }
  }
  config.energy_scaled = best_energy;
  config.energy = hamiltonian(config, field);
  return config;
}

/// Debug dump: rows of '+'/'-' characters in row-major order.
inline void dump_spins(const SpinConfig& config, std::ostream& os) {
  for (std::size_t i = 0; i < config.cells.size(); ++i) {
    os << (config.spins[i] > 0 ? '+' : '-');
    const bool row_end =
        i + 1 == config.cells.size() || config.cells[i + 1].y != config.cells[i].y;
    if (row_end) os << "\n";
  }
}

}  // namespace rfim
