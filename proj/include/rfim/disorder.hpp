#pragma once

#include <cmath>
#include <cstdint>
#include <ostream>
#include <span>
#include <variant>
#include <vector>

#include "rfim/errors.hpp"
#include "rfim/lattice.hpp"
#include "rfim/rng.hpp"

namespace rfim {

/// Add delta to every site of the field's region.
struct GlobalShift {
  double delta = 0;
};

/// Add delta on an annulus only; sites outside it keep their values.
struct AnnulusShift {
  double delta = 0;
  AnnulusRegion annulus;
};

using PerturbationSpec = std::variant<GlobalShift, AnnulusShift>;

/// Perturbation scales used by the exclusion experiments. The plain mode uses
/// K = N/4 and delta = gamma/N; the power-law mode uses K = N^(alpha*alpha')
/// and delta = N^(-alpha*alpha'^2).
struct PerturbationParams {
  double K = 0;
  double delta = 0;
  double gamma = 100.0;
  double alpha = 0;
  double alpha_prime = 0;

  static PerturbationParams gamma_over_n(std::int32_t n, double gamma) {
    if (gamma <= 0) throw validation_error("PerturbationParams: gamma must be positive");
    PerturbationParams p;
    p.gamma = gamma;
    p.K = double(n) / 4.0;
    p.delta = gamma / double(n);
    return p;
  }

  static PerturbationParams power_law(std::int32_t n_star, double alpha, double alpha_prime) {
    if (alpha <= 1) throw validation_error("PerturbationParams: alpha must exceed 1");
    if (alpha_prime <= std::sqrt(1.0 / alpha) || alpha_prime >= 1)
      throw validation_error("PerturbationParams: alpha_prime must lie in (sqrt(1/alpha), 1)");
    PerturbationParams p;
    p.alpha = alpha;
    p.alpha_prime = alpha_prime;
    p.K = std::pow(double(n_star), alpha * alpha_prime);
    p.delta = std::pow(double(n_star), -alpha * alpha_prime * alpha_prime);
    return p;
  }
};

/// One quenched disorder sample over a region: i.i.d. N(0, eps^2) values keyed
/// by (master_seed, sample_index, vertex) plus an additive shift map.
///
/// The base draw depends only on the key, never on the region, so restricting
/// a field to a sub-region reproduces exactly the same values. value(v) =
/// eps * base(v) + shift(v).
class FieldSample {
 public:
  FieldSample() = default;

  FieldSample(Region region, double epsilon, std::uint64_t master_seed,
              std::uint64_t sample_index)
      : region_(std::move(region)),
        epsilon_(epsilon),
        master_seed_(master_seed),
        sample_index_(sample_index),
        cells_(region_.cells()),
        index_(cells_) {
    if (epsilon <= 0) throw validation_error("sample_field: epsilon must be positive");
    base_.reserve(cells_.size());
    for (const Vertex& v : cells_) base_.push_back(keyed_gaussian(master_seed_, sample_index_, v));
    shift_.assign(cells_.size(), 0.0);
  }

  const Region& region() const { return region_; }
  const std::vector<Vertex>& cells() const { return cells_; }
  const GridIndex& index() const { return index_; }
  double epsilon() const { return epsilon_; }
  std::uint64_t master_seed() const { return master_seed_; }
  std::uint64_t sample_index() const { return sample_index_; }

  bool covers(const Vertex& v) const { return index_.contains(v); }

  double base_value(const Vertex& v) const { return epsilon_ * base_[slot(v)]; }
  double shift(const Vertex& v) const { return shift_[slot(v)]; }
  double value(const Vertex& v) const {
    const std::size_t i = slot(v);
    return epsilon_ * base_[i] + shift_[i];
  }

  double base_value_at(std::size_t slot) const { return epsilon_ * base_[slot]; }
  double shift_at(std::size_t slot) const { return shift_[slot]; }
  double value_at(std::size_t slot) const { return epsilon_ * base_[slot] + shift_[slot]; }

  void add_shift(const Vertex& v, double delta) { shift_[slot(v)] += delta; }

 private:
  std::size_t slot(const Vertex& v) const {
    const std::int32_t i = index_.index_of(v);
    if (i < 0) throw validation_error("FieldSample: vertex outside the sampled region");
    return std::size_t(i);
  }

  Region region_;
  double epsilon_ = 1.0;
  std::uint64_t master_seed_ = 0;
  std::uint64_t sample_index_ = 0;
  std::vector<Vertex> cells_;
  GridIndex index_;
  std::vector<double> base_;
  std::vector<double> shift_;
};

inline FieldSample sample_field(Region region, double epsilon, std::uint64_t master_seed,
                                std::uint64_t sample_index) {
  return FieldSample(std::move(region), epsilon, master_seed, sample_index);
}

/// Returns a copy of the field with the shift map updated additively. The base
/// randomness is untouched, so applying the opposite shift restores the
/// original values exactly.
inline FieldSample perturb(const FieldSample& field, const PerturbationSpec& spec) {
  FieldSample out = field;
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if (s.delta <= 0) throw validation_error("perturb: delta must be positive");
        if constexpr (std::is_same_v<T, GlobalShift>) {
          for (const Vertex& v : out.cells()) out.add_shift(v, s.delta);
        } else {
          const auto annulus_cells = vertices_of(s.annulus);
          for (const Vertex& v : annulus_cells)
            if (!field.covers(v))
              throw validation_error("perturb: annulus extends outside the field region");
          for (const Vertex& v : annulus_cells) out.add_shift(v, s.delta);
        }
      },
      spec);
  return out;
}

/// Neumaier-compensated sum of field values over a sub-region.
inline double region_sum(const FieldSample& field, std::span<const Vertex> subregion) {
  double sum = 0.0, comp = 0.0;
  for (const Vertex& v : subregion) {
    if (!field.covers(v)) throw validation_error("region_sum: subregion outside the field");
    const double x = field.value(v);
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x))
      comp += (sum - t) + x;
    else
      comp += (x - t) + sum;
    sum = t;
  }
  return sum + comp;
}

inline double region_sum(const FieldSample& field, const Region& subregion) {
  const auto cells = subregion.cells();
  return region_sum(field, std::span<const Vertex>(cells));
}

/// Log of the density of the unshifted disorder law against the globally
/// shifted one, as a function of the shifted region sum:
///   -delta * (h_sum - delta*n) / eps^2 - delta^2 * n / (2 eps^2).
inline double rn_log_weight(double h_sum, double n, double delta, double epsilon) {
  const double e2 = epsilon * epsilon;
  return -delta * (h_sum - delta * n) / e2 - delta * delta * n / (2.0 * e2);
}

/// Density of the unshifted disorder law against the globally shifted one,
/// evaluated at the shifted sample. Computed in log space and exponentiated
/// once, so large regions cannot underflow term by term.
inline double rn_derivative(const FieldSample& field_tilde, double delta,
                            std::span<const Vertex> region, double epsilon) {
  if (delta <= 0) throw validation_error("rn_derivative: delta must be positive");
  for (const Vertex& v : region)
    if (field_tilde.shift(v) != delta)
      throw validation_error("rn_derivative: field does not carry a global shift of delta");
  const double h_sum = region_sum(field_tilde, region);
  return std::exp(rn_log_weight(h_sum, double(region.size()), delta, epsilon));
}

inline double rn_derivative(const FieldSample& field_tilde, double delta, const Region& region,
                            double epsilon) {
  const auto cells = region.cells();
  return rn_derivative(field_tilde, delta, std::span<const Vertex>(cells), epsilon);
}

/// Debug dump: "x y value" per line in row-major order. Values carry full
/// round-trip precision.
inline void dump_field(const FieldSample& field, std::ostream& os) {
  const auto old_precision = os.precision(17);
  for (const Vertex& v : field.cells()) os << v.x << " " << v.y << " " << field.value(v) << "\n";
  os.precision(old_precision);
}

}  // namespace rfim
