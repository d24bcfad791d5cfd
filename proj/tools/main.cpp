#include <CLI11.hpp>
#include <exception>
#include <iostream>

#include <smcglmm/errors.hpp>

#include "commands.hpp"
#include "config.hpp"

// Exit codes: 0 success, 2 validation, 3 numeric, 4 IO.

namespace cli = smcglmm::cli;

int main(int argc, char** argv) {
  CLI::App app{"Bayesian GLMM inference via sequential Monte Carlo"};
  app.require_subcommand(1);

  // --- simulate -----------------------------------------------------------
  cli::SimulateArgs sim;
  CLI::App* simulate =
      app.add_subcommand("simulate", "generate a reproducible dataset");
  simulate->add_option("kind", sim.kind, "poisson | logit")->required();
  simulate->add_option("--n", sim.n, "rows (poisson)");
  simulate->add_option("--subjects", sim.subjects, "subjects (logit)");
  simulate->add_option("--visits", sim.visits, "max visits per subject (logit)");
  simulate->add_option("--sigma-u", sim.sigma_u, "subject-intercept sd (logit)");
  simulate->add_option("--seed", sim.seed, "generator seed");
  simulate->add_option("--out", sim.out_dir, "output directory");

  // --- fit ----------------------------------------------------------------
  std::string config_path, preset, data, sampler, out_dir;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int threads = -1;
  std::vector<std::string> overrides;
  CLI::App* fit = app.add_subcommand(
      "fit", "run design -> PQL -> sampler -> diagnostics on a dataset");
  fit->add_option("--config", config_path, "JSON config file");
  fit->add_option("--preset", preset, "paper-4.1 | paper-4.2-structure");
  fit->add_option("--data", data, "dataset CSV (overrides config)");
  fit->add_option("--sampler", sampler, "smc | is | rwmh | slice");
  fit->add_option("--seed", seed, "run seed (overrides config)")
      ->each([&](const std::string&) { seed_given = true; });
  fit->add_option("--out", out_dir, "output directory");
  fit->add_option("--threads", threads, "worker threads (0 = hardware)");
  fit->add_option("--set", overrides,
                  "dotted-path override, e.g. smc.n_stages=50");

  // --- compare ------------------------------------------------------------
  cli::CompareArgs cmp;
  CLI::App* compare = app.add_subcommand(
      "compare", "QQ pairs, density overlays, and cross-run ESS tables");
  compare->add_option("--runs", cmp.run_dirs, "completed run directories")
      ->required()
      ->expected(-1);
  compare->add_option("--parameter", cmp.parameter, "coefficient name")
      ->required();
  compare->add_option("--quantiles", cmp.n_quantiles, "QQ quantile count");
  compare->add_option("--grid", cmp.grid_points, "density grid size");
  compare->add_option("--out", cmp.out_dir, "output directory");

  try {
    app.parse(argc, argv);

    if (simulate->parsed()) return cli::cmd_simulate(sim);
    if (fit->parsed()) {
      if (!data.empty()) overrides.push_back("model.data=\"" + data + "\"");
      if (!sampler.empty()) overrides.push_back("sampler=\"" + sampler + "\"");
      if (seed_given) overrides.push_back("seed=" + std::to_string(seed));
      if (!out_dir.empty()) overrides.push_back("out_dir=\"" + out_dir + "\"");
      if (threads >= 0)
        overrides.push_back("smc.threads=" + std::to_string(threads));
      return cli::cmd_fit(cli::resolve_config(config_path, preset, overrides));
    }
    if (compare->parsed()) return cli::cmd_compare(cmp);
    return 2;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << "argument error: " << e.what() << "\n";
    return 2;
  } catch (const smcglmm::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const smcglmm::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const smcglmm::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
