#pragma once

#include <string>
#include <vector>

#include "config.hpp"

namespace smcglmm::cli {

struct SimulateArgs {
  std::string kind;  // poisson | logit
  Eigen::Index n = 500;
  Eigen::Index subjects = 275;
  int visits = 6;
  double sigma_u = 1.0;
  std::uint64_t seed = 1;
  std::string out_dir;
};

int cmd_simulate(const SimulateArgs& args);
int cmd_fit(const RunConfig& config);

struct CompareArgs {
  std::vector<std::string> run_dirs;
  std::string parameter;
  int n_quantiles = 99;
  int grid_points = 200;
  std::string out_dir;
};

int cmd_compare(const CompareArgs& args);

}  // namespace smcglmm::cli
