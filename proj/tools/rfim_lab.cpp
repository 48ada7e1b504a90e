// rfim_lab: zero-temperature random-field Ising laboratory.
//
// Subcommands solve single samples (gs), run seeded Monte Carlo experiments
// (mn, geodesic, crossing, perturb, star, annulus, animal, ischeck), rebuild
// reports from records (report), and run the acceptance suite (verify).

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "rfim/disagreement.hpp"
#include "rfim/harness.hpp"
#include "rfim/verify.hpp"

namespace {

struct GsOptions {
  std::int32_t n = 8;
  double epsilon = 1.0;
  std::uint64_t seed = 1;
  std::uint64_t index = 0;
  std::string out_dir;  // empty: stdout only
};

int run_gs(const GsOptions& opt) {
  using namespace rfim;
  if (opt.n < 0 || (opt.n != 0 && !is_power_of_two(opt.n)))
    throw validation_error("gs: N must be 0 or a power of two");
  if (opt.epsilon <= 0 || opt.epsilon > 100)
    throw validation_error("gs: epsilon must lie in (0, 100]");

  const Region region(lambda_box(opt.n));
  const FieldSample field = sample_field(region, opt.epsilon, opt.seed, opt.index);
  const SpinConfig plus =
      ground_state(field, region, BoundaryCondition::plus, Extremality::maximal_plus);
  const SpinConfig minus =
      ground_state(field, region, BoundaryCondition::minus, Extremality::minimal_plus);
  const LabelGrid grid = labels(field, region);
  const DisagreementSet zeros = disagreement_set(grid);

  std::cout << "N=" << opt.n << " eps=" << opt.epsilon << " seed=" << opt.seed
            << " index=" << opt.index << "\n";
  std::cout << "energy_plus=" << plus.energy << " energy_minus=" << minus.energy
            << " tie_plus=" << plus.tie << " tie_minus=" << minus.tie << "\n";
  std::cout << "disagreement_size=" << zeros.size() << " components=" << zeros.component_count
            << "\n";
  std::cout << "labels:\n";
  dump_labels(grid, std::cout);

  if (!opt.out_dir.empty()) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(opt.out_dir, ec);
    if (ec) throw io_error("gs: cannot create " + opt.out_dir);
    const auto write_with = [&](const std::string& name, auto writer) {
      std::ofstream f(fs::path(opt.out_dir) / name, std::ios::binary);
      if (!f) throw io_error("gs: cannot write " + name);
      writer(f);
    };
    write_with("field.txt", [&](std::ostream& os) { dump_field(field, os); });
    write_with("spins_plus.txt", [&](std::ostream& os) { dump_spins(plus, os); });
    write_with("spins_minus.txt", [&](std::ostream& os) { dump_spins(minus, os); });
    write_with("labels.txt", [&](std::ostream& os) { dump_labels(grid, os); });
    std::cout << "wrote field/spins/labels to " << opt.out_dir << "\n";
  }
  return rfim::kExitOk;
}

void add_common_options(CLI::App* cmd, rfim::RunConfig* config) {
  cmd->add_option("--N", config->n_list, "box radii (0 or powers of two)");
  cmd->add_option("--eps", config->eps_list, "disorder standard deviations");
  cmd->add_option("--samples", config->samples, "Monte Carlo samples");
  cmd->add_option("--seed", config->master_seed, "master seed")->envname("RFIM_LAB_SEED");
  cmd->add_option("--workers", config->workers, "worker threads");
  cmd->add_option("--out", config->out_dir, "output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"zero-temperature random-field Ising model laboratory"};
  app.require_subcommand(1);
  app.set_config("--config", "", "config file (INI: key=value, sections nest)");
  app.allow_config_extras(CLI::config_extras_mode::error);

  GsOptions gs;
  CLI::App* gs_cmd = app.add_subcommand("gs", "solve one sample and dump spins/labels");
  gs_cmd->add_option("--N", gs.n, "box radius");
  gs_cmd->add_option("--eps", gs.epsilon, "disorder standard deviation");
  gs_cmd->add_option("--seed", gs.seed, "master seed")->envname("RFIM_LAB_SEED");
  gs_cmd->add_option("--index", gs.index, "sample index");
  gs_cmd->add_option("--out", gs.out_dir, "directory for field/spin/label dumps");

  rfim::RunConfig config;
  CLI::App* mn = app.add_subcommand("mn", "estimate m_N and the decay fit");
  CLI::App* geodesic = app.add_subcommand("geodesic", "geodesic length distributions");
  CLI::App* crossing = app.add_subcommand("crossing", "annulus and rectangle crossings");
  CLI::App* perturb = app.add_subcommand("perturb", "distance/volume exclusion check");
  CLI::App* star = app.add_subcommand("star", "star percolation of the common set");
  CLI::App* annulus = app.add_subcommand("annulus", "annulus-shift common-set estimates");
  CLI::App* animal = app.add_subcommand("animal", "coarse-grid lattice animals");
  CLI::App* ischeck = app.add_subcommand("ischeck", "importance sampling identity");
  for (CLI::App* cmd : {mn, geodesic, crossing, perturb, star, annulus, animal, ischeck})
    add_common_options(cmd, &config);

  perturb->add_option("--gamma", config.gamma, "shift scale: delta = gamma / N");
  perturb->add_flag("--power-law", config.power_law, "use the K = N^(a a') parameterization");
  perturb->add_option("--alpha", config.alpha, "power-law alpha");
  perturb->add_option("--alpha-prime", config.alpha_prime, "power-law alpha'");
  star->add_option("--max-shift", config.max_shift, "upper bound of the keyed shifts");
  crossing->add_option("--aspect", config.aspect, "rectangle aspect ratio");
  crossing->add_option("--factor", config.factor, "companion box side factor");
  crossing->add_flag("--diagnostic-full", config.diagnostic_full,
                     "use the full lattice instead of the disagreement set");
  geodesic->add_flag("--diagnostic-full", config.diagnostic_full,
                     "use the full lattice instead of the disagreement set");
  double delta_option = -1;
  ischeck->add_option("--delta", delta_option, "global shift (default 0.25)");
  annulus->add_option("--delta", delta_option, "explicit annulus shift override");
  annulus->add_option("--alpha", config.alpha, "exponent alpha");
  annulus->add_option("--alpha-prime", config.alpha_prime, "exponent alpha'");
  animal->add_option("--n-prime", config.n_prime, "tile parameter N' (default N/4)");
  animal->add_flag("--diagnostic-open", config.diagnostic_open, "force all tiles open");

  rfim::VerifyOptions verify_options;
  CLI::App* verify_cmd = app.add_subcommand("verify", "run the acceptance suite (pinned seeds)");
  verify_cmd->add_option("--workers", verify_options.workers, "worker threads");
  verify_cmd->add_flag("--inject-fault", verify_options.inject_fault,
                       "negative control: corrupt solves and expect failures");

  std::string report_dir = "out";
  CLI::App* report_cmd =
      app.add_subcommand("report", "rebuild summary/CSV/SVG from records.jsonl");
  report_cmd->add_option("--out", report_dir, "run directory containing records.jsonl");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return rfim::kExitValidation;
  }

  try {
    if (gs_cmd->parsed()) return run_gs(gs);
    if (verify_cmd->parsed())
      return rfim::print_acceptance(rfim::run_acceptance(verify_options), std::cout);
    if (report_cmd->parsed()) return rfim::rebuild_report(report_dir);

    for (const auto& [cmd, kind] :
         {std::pair{mn, "mn"}, {geodesic, "geodesic"}, {crossing, "crossing"},
          {perturb, "perturb"}, {star, "star"}, {annulus, "annulus"}, {animal, "animal"},
          {ischeck, "ischeck"}}) {
      if (!cmd->parsed()) continue;
      config.kind = kind;
      if (delta_option >= 0) config.delta = delta_option;
      const int code = rfim::run(config);
      if (code == rfim::kExitOk)
        std::cout << "run complete; artifacts in " << config.out_dir << "\n";
      return code;
    }
    std::cerr << "no subcommand\n";
    return rfim::kExitValidation;
  } catch (const rfim::validation_error& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return rfim::kExitValidation;
  } catch (const rfim::invariant_violation& e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return rfim::kExitInvariant;
  } catch (const rfim::io_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return rfim::kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return rfim::kExitIo;
  }
}
