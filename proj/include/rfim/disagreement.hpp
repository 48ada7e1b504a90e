#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "rfim/disorder.hpp"
#include "rfim/errors.hpp"
#include "rfim/groundstate.hpp"
#include "rfim/lattice.hpp"

namespace rfim {

/// Three-valued site label: both ground states plus, both minus, or
/// disagreeing (plus under +, minus under -).
enum class Label : std::int8_t { minus = -1, zero = 0, plus = 1 };

inline char label_char(Label l) {
  switch (l) {
    case Label::plus: return '+';
    case Label::minus: return '-';
    default: return '0';
  }
}

struct LabelGrid {
  Region region;
  std::vector<Vertex> cells;  // row-major
  std::vector<Label> labels;
  GridIndex index;
  bool tie_plus = false;   // plus-boundary solve hit a fixed-point tie
  bool tie_minus = false;  // minus-boundary solve hit a fixed-point tie

  Label label_at(const Vertex& v) const {
    const std::int32_t i = index.index_of(v);
    if (i < 0) throw validation_error("LabelGrid: vertex outside the region");
    return labels[std::size_t(i)];
  }
};

/// Labels from the two extremal ground states: maximal_plus under the plus
/// boundary and minimal_plus under the minus boundary. The coupling
/// sigma+ >= sigma- is asserted site by site; the (-,+) combination is
/// impossible and treated as an invariant violation.
inline LabelGrid labels(const FieldSample& field, const Region& region) {
  const SpinConfig plus = ground_state(field, region, BoundaryCondition::plus,
                                       Extremality::maximal_plus);
  const SpinConfig minus = ground_state(field, region, BoundaryCondition::minus,
                                        Extremality::minimal_plus);
  LabelGrid grid;
  grid.region = region;
  grid.cells = plus.cells;
  grid.index = plus.index;
  grid.tie_plus = plus.tie;
  grid.tie_minus = minus.tie;
  grid.labels.resize(grid.cells.size());
  for (std::size_t i = 0; i < grid.cells.size(); ++i) {
    const int sp = plus.spins[i], sm = minus.spins[i];
    if (sp < sm)
      throw invariant_violation("labels: monotone coupling violated (sigma+ < sigma-)");
    grid.labels[i] = sp == sm ? (sp > 0 ? Label::plus : Label::minus) : Label::zero;
  }
  return grid;
}

/// The zero-labeled vertices with 4-connected components identified.
/// Component ids are assigned in row-major discovery order.
struct DisagreementSet {
  Region region;
  std::vector<Vertex> members;       // row-major
  std::vector<std::int32_t> component;  // per member
  std::int32_t component_count = 0;
  GridIndex member_index;

  bool contains(const Vertex& v) const { return member_index.contains(v); }
  std::size_t size() const { return members.size(); }

  std::vector<Vertex> component_members(std::int32_t id) const {
    std::vector<Vertex> out;
    for (std::size_t i = 0; i < members.size(); ++i)
      if (component[i] == id) out.push_back(members[i]);
    return out;
  }
};

namespace detail {

inline DisagreementSet build_disagreement(Region region, std::vector<Vertex> members) {
  DisagreementSet set;
  set.region = std::move(region);
  set.members = std::move(members);
  set.member_index = GridIndex(set.members);
  set.component.assign(set.members.size(), -1);
  std::vector<std::size_t> queue;
  for (std::size_t start = 0; start < set.members.size(); ++start) {
    if (set.component[start] >= 0) continue;
    const std::int32_t id = set.component_count++;
    set.component[start] = id;
    queue.assign(1, start);
    for (std::size_t q = 0; q < queue.size(); ++q) {
      const Vertex u = set.members[queue[q]];
      for (const Vertex& d : kNeighbor4) {
        const std::int32_t j = set.member_index.index_of(u + d);
        if (j >= 0 && set.component[std::size_t(j)] < 0) {
          set.component[std::size_t(j)] = id;
          queue.push_back(std::size_t(j));
        }
      }
    }
  }
  return set;
}

}  // namespace detail

inline DisagreementSet disagreement_set(const LabelGrid& grid) {
  std::vector<Vertex> members;
  for (std::size_t i = 0; i < grid.cells.size(); ++i)
    if (grid.labels[i] == Label::zero) members.push_back(grid.cells[i]);
  return detail::build_disagreement(grid.region, std::move(members));
}

/// Intersection of two disagreement sets over the same region, with
/// components recomputed.
inline DisagreementSet common_disagreement(const DisagreementSet& a, const DisagreementSet& b) {
  if (!(a.region == b.region))
    throw validation_error("common_disagreement: region mismatch");
  std::vector<Vertex> members;
  for (const Vertex& v : a.members)
    if (b.contains(v)) members.push_back(v);
  return detail::build_disagreement(a.region, std::move(members));
}

/// Counts of the edges from S to its complement, split by the label of the
/// outside endpoint. Outside endpoints beyond the region are the virtual
/// boundary sites and carry the boundary condition's label.
struct EdgePartition {
  std::int64_t plus = 0;
  std::int64_t minus = 0;
  std::int64_t zero = 0;

  std::int64_t total() const { return plus + minus + zero; }
};

inline EdgePartition boundary_edge_partition(std::span<const Vertex> s, const LabelGrid& grid,
                                             BoundaryCondition bc) {
  const GridIndex in_s(s);
  EdgePartition counts;
  for (const Vertex& u : s) {
    if (!grid.index.contains(u))
      throw validation_error("boundary_edge_partition: S extends outside the region");
    for (const Vertex& d : kNeighbor4) {
      const Vertex v = u + d;
      if (in_s.contains(v)) continue;
      const std::int32_t j = grid.index.index_of(v);
      Label l;
      if (j >= 0)
        l = grid.labels[std::size_t(j)];
      else
        l = bc == BoundaryCondition::plus ? Label::plus : Label::minus;
      if (l == Label::plus)
        ++counts.plus;
      else if (l == Label::minus)
        ++counts.minus;
      else
        ++counts.zero;
    }
  }
  return counts;
}

/// Energy change (in units of 2) of flipping a zero-labeled set S in the
/// ground state: h_S + n+ - n- + n0 under the plus boundary, and the mirror
/// -h_S + n- - n+ + n0 under minus. Ground-state minimality makes this
/// nonnegative; callers assert it sample by sample.
///
/// h_S is accumulated from the fixed-point site values the solver consumed,
/// so the inequality is exact in integer arithmetic.
inline double flip_energy_delta(std::span<const Vertex> s, const FieldSample& field,
                                const LabelGrid& grid, BoundaryCondition bc) {
  std::int64_t h_scaled = 0;
  for (const Vertex& v : s) {
    if (grid.label_at(v) != Label::zero)
      throw validation_error("flip_energy_delta: S must be zero-labeled");
    h_scaled += scaled_site_field(field, v);
  }
  const EdgePartition g = boundary_edge_partition(s, grid, bc);
  const double h_s = double(h_scaled) / double(kFixedScale);
  return bc == BoundaryCondition::plus ? h_s + double(g.plus) - double(g.minus) + double(g.zero)
                                       : -h_s + double(g.minus) - double(g.plus) + double(g.zero);
}

/// Counts of label transitions between two grids over the same region,
/// indexed [from][to] with order (minus, zero, plus).
struct TransitionAudit {
  std::array<std::array<std::int64_t, 3>, 3> count{};

  std::int64_t at(Label from, Label to) const {
    return count[std::size_t(int(from) + 1)][std::size_t(int(to) + 1)];
  }

  /// Transitions an upward field shift can never produce.
  std::int64_t forbidden_upward() const {
    return at(Label::plus, Label::zero) + at(Label::plus, Label::minus) +
           at(Label::zero, Label::minus);
  }
};

inline TransitionAudit label_transitions(const LabelGrid& from, const LabelGrid& to) {
  if (from.cells.size() != to.cells.size() || !(from.region == to.region))
    throw validation_error("label_transitions: region mismatch");
  TransitionAudit audit;
  for (std::size_t i = 0; i < from.cells.size(); ++i)
    ++audit.count[std::size_t(int(from.labels[i]) + 1)][std::size_t(int(to.labels[i]) + 1)];
  return audit;
}

/// Flat per-transition counts keyed "trans_<from><to>" over {m, z, p}.
inline std::map<std::string, double> transition_scalars(const TransitionAudit& audit) {
  static constexpr char kName[3] = {'m', 'z', 'p'};
  std::map<std::string, double> out;
  for (int from = 0; from < 3; ++from)
    for (int to = 0; to < 3; ++to)
      out[std::string("trans_") + kName[from] + kName[to]] =
          double(audit.count[std::size_t(from)][std::size_t(to)]);
  return out;
}

/// Debug dump: rows of '+', '-', '0' in row-major order.
inline void dump_labels(const LabelGrid& grid, std::ostream& os) {
  for (std::size_t i = 0; i < grid.cells.size(); ++i) {
    os << label_char(grid.labels[i]);
    const bool row_end = i + 1 == grid.cells.size() || grid.cells[i + 1].y != grid.cells[i].y;
    if (row_end) os << "\n";
  }
}

}  // namespace rfim
