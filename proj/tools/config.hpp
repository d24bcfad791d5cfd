#pragma once

#include <json.hpp>
#include <smcglmm/design.hpp>
#include <smcglmm/smc.hpp>
#include <string>

namespace smcglmm::cli {

using nlohmann::json;

// Fully resolved run configuration. The JSON form is what lands in each
// run directory as config.json; a run is reproducible from that file alone.
struct RunConfig {
  json raw;  // resolved config with defaults applied

  std::string data_path() const;
  std::string sampler() const;
  std::string out_dir() const;
  std::uint64_t seed_for(const std::string& section) const;

  Family family() const;
  DesignConfig design() const;
  double sigma_beta_sq() const;
  std::vector<double> a_u(std::size_t n_blocks) const;

  PqlOptions pql_options(Eigen::Index p, Eigen::Index n_blocks) const;
  SmcConfig smc_config(const BuiltDesign& built) const;
  MoveConfig move_config(const BuiltDesign& built) const;

  int mcmc_iters() const;
  int mcmc_burnin() const;
  int slice_iters() const;
  int slice_burnin() const;
  double slice_width() const;
  Eigen::Index is_draws() const;
  int threads() const;
};

json default_config();
json preset_config(const std::string& name);  // paper-4.1, paper-4.2-structure

// Load config file (optional), apply preset, then dotted-path overrides
// ("smc.n_stages=50"), then direct flag overrides already encoded as dotted
// pairs by the caller.
RunConfig resolve_config(const std::string& config_path,
                         const std::string& preset,
                         const std::vector<std::string>& overrides);

void apply_dotted_override(json& j, const std::string& key_eq_value);

std::string default_out_root();

}  // namespace smcglmm::cli
