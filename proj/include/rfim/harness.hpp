#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "rfim/records.hpp"

namespace rfim {

/// CLI exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 1,
  kExitInvariant = 2,
  kExitIo = 3,
};

/// A validated experiment run request. Every field is also a command-line
/// flag; a config file provides defaults that flags override.
struct RunConfig {
  std::string kind;                 // mn, perturb, star, crossing, geodesic,
                                    // ischeck, annulus, animal
  std::vector<std::int32_t> n_list{16};
  std::vector<double> eps_list{1.0};
  std::int64_t samples = 1000;
  std::uint64_t master_seed = 1;
  int workers = 1;

  double gamma = 100.0;             // perturbation scale delta = gamma / N
  double alpha = 1.5;               // power-law mode exponents
  double alpha_prime = 0.9;
  std::optional<double> delta;      // explicit delta override (ischeck, annulus)
  bool power_law = false;           // perturb: use the power-law K/delta pair
  double max_shift = 1.0;           // star: shift upper bound
  int aspect = 4;                   // crossing rectangle aspect ratio
  int factor = 8;                   // crossing companion box factor
  std::int32_t n_prime = 0;         // animal tile parameter (0: N/4)
  bool diagnostic_full = false;     // crossing/geodesic: use the full lattice
  bool diagnostic_open = false;     // animal: force all tiles open
  std::string out_dir = "out";

  void validate() const {
    static const std::vector<std::string> kinds{"mn",      "perturb", "star",
                                                "crossing", "geodesic", "ischeck",
                                                "annulus", "animal"};
    if (std::find(kinds.begin(), kinds.end(), kind) == kinds.end())
      throw validation_error("unknown experiment kind: " + kind);
    if (n_list.empty()) throw validation_error("empty N list");
    if (eps_list.empty()) throw validation_error("empty epsilon list");
    for (double e : eps_list)
      if (e <= 0 || e > 100) throw validation_error("epsilon must lie in (0, 100]");
    if (samples <= 0) throw validation_error("samples must be positive");
    if (workers < 1 || workers > 256) throw validation_error("workers must lie in [1, 256]");
    for (std::int32_t n : n_list)
      if (n < 0 || (n != 0 && !is_power_of_two(n)))
        throw validation_error("N must be 0 or a power of two");
    if (out_dir.empty()) throw validation_error("output directory must be named");
  }

  json to_json() const {
    json j;
    j["kind"] = kind;
    j["N"] = n_list;
    j["eps"] = eps_list;
    j["samples"] = samples;
    j["seed"] = master_seed;
    j["workers"] = workers;
    j["gamma"] = gamma;
    j["alpha"] = alpha;
    j["alpha_prime"] = alpha_prime;
    if (delta) j["delta"] = *delta;
    j["power_law"] = power_law;
    j["max_shift"] = max_shift;
    j["aspect"] = aspect;
    j["factor"] = factor;
    j["n_prime"] = n_prime;
    j["diagnostic_full"] = diagnostic_full;
    j["diagnostic_open"] = diagnostic_open;
    return j;
  }
};

/// Everything a run produces, before it is written anywhere.
struct RunOutput {
  std::vector<ExperimentRecord> records;
  json summary;            // per-(kind, N, eps) aggregates from the records
  json analysis;           // experiment-level results (fits, counts, checks)
  std::string csv;
  std::vector<std::pair<std::string, std::string>> svgs;  // mn decay charts
  bool invariant_violated = false;
  std::string violation_message;
};

namespace detail {

inline std::string decay_chart_name(const std::string& eps_key, bool single) {
  return single ? "decay.svg" : "decay_eps" + eps_key + ".svg";
}

/// Prefixes per-subrun sample indices with a running base so one stream sink
/// sees a single strictly ordered index space across (eps, N) sub-runs.
class OffsetSink : public RecordSink {
 public:
  explicit OffsetSink(RecordSink* inner) : inner_(inner) {}
  void emit(std::int64_t sample_index, const std::vector<ExperimentRecord>& records) override {
    if (inner_) inner_->emit(base_ + sample_index, records);
  }
  void advance(std::int64_t samples) { base_ += samples; }

 private:
  RecordSink* inner_;
  std::int64_t base_ = 0;
};

inline void append_failure(json* analysis, const std::optional<SampleFailure>& failure,
                           RunOutput* out) {
  if (!failure) return;
  (*analysis)["failed_sample"] = failure->index;
  (*analysis)["failure_message"] = failure->message;
  out->invariant_violated = true;
  out->violation_message = failure->message;
}

}  // namespace detail

/// Runs the configured experiment for every (N-list, eps) combination and
/// assembles records, summary and analysis. An optional sink receives each
/// sample's records as workers complete them.
inline RunOutput execute(const RunConfig& config, RecordSink* sink = nullptr) {
  config.validate();
  RunOutput out;
  json analysis = json::object();
  detail::OffsetSink offset(sink);

  for (double eps : config.eps_list) {
    const std::string eps_key = json(eps).dump();
    if (config.kind == "mn") {
      DecayFit fit = estimate_mN(config.n_list, eps, config.samples, config.master_seed,
                                 config.workers, &offset);
      offset.advance(config.samples);
      json a;
      a["monotone_violations"] = fit.monotone_violations;
      a["fit_valid"] = fit.fit_valid;
      if (fit.fit_valid) {
        a["rate"] = fit.rate;
        a["rate_se"] = fit.rate_se;
        a["intercept"] = fit.intercept;
      }
      json pts = json::array();
      for (const MnPoint& p : fit.points) {
        json pj;
        pj["N"] = p.N;
        pj["samples"] = p.samples;
        pj["zero_count"] = p.zero_count;
        pj["m_hat"] = p.m_hat;
        pj["se"] = p.se;
        pts.push_back(pj);
      }
      a["points"] = pts;
      detail::append_failure(&a, fit.failure, &out);
      analysis[eps_key] = a;
      out.svgs.emplace_back(
          detail::decay_chart_name(eps_key, config.eps_list.size() == 1),
          decay_svg(fit.points, fit.fit_valid, fit.rate, fit.rate_se, fit.intercept));
      out.records.insert(out.records.end(), fit.records.begin(), fit.records.end());
    } else if (config.kind == "perturb") {
      for (std::int32_t n : config.n_list) {
        const PerturbationParams params =
            config.power_law ? PerturbationParams::power_law(n, config.alpha, config.alpha_prime)
                             : PerturbationParams::gamma_over_n(n, config.gamma);
        ExclusionReport rep =
            check_perturbation_exclusion(n, eps, params, config.samples, config.master_seed,
                                         config.workers, &offset);
        offset.advance(config.samples);
        json a;
        a["neither"] = rep.neither;
        a["only_a"] = rep.only_a;
        a["only_b"] = rep.only_b;
        a["both"] = rep.both;
        a["K"] = params.K;
        a["delta"] = params.delta;
        detail::append_failure(&a, rep.failure, &out);
        analysis[eps_key + "/N=" + std::to_string(n)] = a;
        out.records.insert(out.records.end(), rep.records.begin(), rep.records.end());
      }
    } else if (config.kind == "star") {
      for (std::int32_t n : config.n_list) {
        StarReport rep = check_star_percolation(n, eps, config.max_shift, config.samples,
                                                config.master_seed, config.workers, &offset);
        offset.advance(config.samples);
        json a;
        a["violations"] = rep.violations;
        a["samples_with_common"] = rep.samples_with_common;
        detail::append_failure(&a, rep.failure, &out);
        analysis[eps_key + "/N=" + std::to_string(n)] = a;
        out.records.insert(out.records.end(), rep.records.begin(), rep.records.end());
      }
    } else if (config.kind == "crossing") {
      for (std::int32_t n : config.n_list) {
        CrossingReport rep =
            estimate_crossing_bounds(n, eps, config.samples, config.master_seed, config.aspect,
                                     config.factor, config.diagnostic_full, config.workers,
                                     &offset);
        offset.advance(config.samples);
        json a;
        a["p_hard"] = rep.p_hard;
        a["p_easy"] = rep.p_easy;
        a["p_rect"] = rep.p_rect;
        a["se_hard"] = rep.se_hard;
        a["se_easy"] = rep.se_easy;
        a["se_rect"] = rep.se_rect;
        a["min_crossing"] = std::min(rep.p_hard, rep.p_easy);
        detail::append_failure(&a, rep.failure, &out);
        analysis[eps_key + "/N=" + std::to_string(n)] = a;
        out.records.insert(out.records.end(), rep.records.begin(), rep.records.end());
      }
    } else if (config.kind == "geodesic") {
      ExponentEstimate est =
          estimate_geodesic_exponent(config.n_list, eps, config.samples, config.master_seed,
                                     config.diagnostic_full, config.workers, &offset);
      offset.advance(config.samples);
      json a;
      a["alpha_hat"] = est.alpha_hat;
      a["ci_low"] = est.ci_low;
      a["ci_high"] = est.ci_high;
      a["valid"] = est.valid;
      a["excluded_N"] = est.excluded;
      json pts = json::array();
      for (const GeodesicPoint& p : est.points) {
        json pj;
        pj["N"] = p.N;
        pj["finite"] = p.finite;
        pj["infinite"] = p.infinite;
        pj["median"] = p.median;
        pj["median_low"] = p.median_low;
        pj["median_high"] = p.median_high;
        pj["tail"] = p.tail;
        pts.push_back(pj);
      }
      a["points"] = pts;
      detail::append_failure(&a, est.failure, &out);
      analysis[eps_key] = a;
      out.records.insert(out.records.end(), est.records.begin(), est.records.end());
    } else if (config.kind == "ischeck") {
      for (std::int32_t n : config.n_list) {
        const double delta = config.delta.value_or(0.25);
        ImportanceReport rep = importance_sampling_check(n, eps, delta, config.samples,
                                                         config.master_seed, config.workers,
                                                         &offset);
        offset.advance(config.samples);
        json a;
        a["direct_zero"] = rep.direct_zero;
        a["weighted_zero"] = rep.weighted_zero;
        a["diff_zero_se"] = rep.diff_zero_se;
        a["direct_core"] = rep.direct_core;
        a["weighted_core"] = rep.weighted_core;
        a["diff_core_se"] = rep.diff_core_se;
        a["mean_weight"] = rep.mean_weight;
        a["weight_se"] = rep.weight_se;
        a["zero_ok"] = rep.zero_ok;
        a["core_ok"] = rep.core_ok;
        a["weight_ok"] = rep.weight_ok;
        detail::append_failure(&a, rep.failure, &out);
        if (!rep.zero_ok || !rep.core_ok || !rep.weight_ok) {
          out.invariant_violated = true;
          out.violation_message = "importance sampling estimates disagree beyond 3 SE";
        }
        analysis[eps_key + "/N=" + std::to_string(n)] = a;
        out.records.insert(out.records.end(), rep.records.begin(), rep.records.end());
      }
    } else if (config.kind == "annulus") {
      for (std::int32_t n : config.n_list) {
        AnnulusReport rep =
            annulus_mstar_experiment(n, eps, config.alpha, config.alpha_prime, config.delta,
                                     config.samples, config.master_seed, config.workers,
                                     &offset);
        offset.advance(config.samples);
        json a;
        a["p_origin"] = rep.p_origin;
        a["p_ring"] = rep.p_ring;
        a["se_origin"] = rep.se_origin;
        a["se_ring"] = rep.se_ring;
        a["delta"] = rep.delta;
        a["implication_violations"] = rep.implication_violations;
        detail::append_failure(&a, rep.failure, &out);
        analysis[eps_key + "/N=" + std::to_string(n)] = a;
        out.records.insert(out.records.end(), rep.records.begin(), rep.records.end());
      }
    } else if (config.kind == "animal") {
      for (std::int32_t n : config.n_list) {
        const std::int32_t n_prime = config.n_prime > 0 ? config.n_prime : std::max(1, n / 4);
        AnimalReport rep =
            coarse_percolation_experiment(n, n_prime, eps, config.samples, config.master_seed,
                                          config.diagnostic_open, config.workers, &offset);
        offset.advance(config.samples);
        json a;
        json hist = json::object();
        for (const auto& [size, count] : rep.animal_histogram)
          hist[std::to_string(size)] = count;
        a["animal_histogram"] = hist;
        a["threshold"] = rep.threshold;
        a["at_or_above_threshold"] = rep.at_or_above_threshold;
        a["independence_pair_found"] = rep.independence_pair_found;
        if (rep.independence_pair_found) {
          a["independence_corr"] = rep.independence_corr;
          a["independence_se"] = rep.independence_se;
        }
        detail::append_failure(&a, rep.failure, &out);
        analysis[eps_key + "/N=" + std::to_string(n)] = a;
        out.records.insert(out.records.end(), rep.records.begin(), rep.records.end());
      }
    }
  }

  out.analysis = analysis;
  out.summary = summarize_records(out.records);
  out.csv = summary_to_csv(out.summary);
  return out;
}

/// Executes and persists a run: records.jsonl (streamed as samples finish),
/// summary.json, analysis.json, report.csv, decay.svg (mn only) and the
/// validated config echo. Partial records survive an invariant violation;
/// the exit code reports it.
inline int run(const RunConfig& config) {
  config.validate();
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(config.out_dir, ec);
  if (ec) throw io_error("cannot create output directory: " + config.out_dir);

  FileRecordSink records_file((fs::path(config.out_dir) / "records.jsonl").string());
  const RunOutput out = execute(config, &records_file);
  records_file.finalize();

  const auto write_file = [&](const std::string& name, const std::string& contents) {
    const fs::path path = fs::path(config.out_dir) / name;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open for writing: " + path.string());
    f << contents;
    if (!f) throw io_error("write failed: " + path.string());
  };

  write_file("summary.json", out.summary.dump(2) + "\n");
  write_file("analysis.json", out.analysis.dump(2) + "\n");
  write_file("report.csv", out.csv);
  write_file("config.json", config.to_json().dump(2) + "\n");
  for (const auto& [name, contents] : out.svgs) write_file(name, contents);

  if (out.invariant_violated) {
    std::cerr << "invariant violation: " << out.violation_message << "\n";
    return kExitInvariant;
  }
  return kExitOk;
}

/// Rebuilds summary.json, report.csv and decay.svg from an existing records
/// file; the summary is bit-identical to the one the run emitted.
inline int rebuild_report(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path records_path = fs::path(dir) / "records.jsonl";
  const std::vector<ExperimentRecord> records = read_records_file(records_path.string());
  const json summary = summarize_records(records);

  const auto write_file = [&](const std::string& name, const std::string& contents) {
    const fs::path path = fs::path(dir) / name;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open for writing: " + path.string());
    f << contents;
  };
  write_file("summary.json", summary.dump(2) + "\n");
  write_file("report.csv", summary_to_csv(summary));

  // Regenerate one decay chart per epsilon present in the mn records.
  std::map<double, std::vector<MnPoint>> points_by_eps;
  for (const json& g : summary) {
    if (g.at("kind").get<std::string>() != "mn") continue;
    MnPoint p;
    p.N = g.at("N").get<std::int32_t>();
    p.samples = g.at("samples").get<std::int64_t>();
    p.m_hat = g.at("scalars").at("xi_o_zero").at("mean").get<double>();
    p.zero_count = std::int64_t(std::llround(p.m_hat * double(p.samples)));
    p.se = p.samples > 0 ? wald_se(p.m_hat, p.samples) : 0.0;
    points_by_eps[g.at("eps").get<double>()].push_back(p);
  }
  for (const auto& [eps, points] : points_by_eps) {
    std::vector<double> xs, ys, ws;
    for (const MnPoint& p : points)
      if (p.zero_count >= 5 && p.m_hat < 1.0 && p.m_hat > 0.0) {
        xs.push_back(double(p.N));
        ys.push_back(std::log(p.m_hat));
        ws.push_back(double(p.samples) * p.m_hat / (1.0 - p.m_hat));
      }
    bool fit_valid = false;
    double rate = 0, rate_se = 0, intercept = 0;
    if (xs.size() >= 2) {
      const LineFit line = weighted_least_squares(xs, ys, ws);
      fit_valid = true;
      rate = -line.slope;
      rate_se = line.slope_se;
      intercept = line.intercept;
    }
    write_file(detail::decay_chart_name(json(eps).dump(), points_by_eps.size() == 1),
               decay_svg(points, fit_valid, rate, rate_se, intercept));
  }
  return kExitOk;
}

}  // namespace rfim
