#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <map>
#include <string>

#include "smcglmm/csv.hpp"

namespace smcglmm {

// Everything needed to check an estimate against the generating process.
struct TruthRecord {
  std::uint64_t seed = 0;
  std::string family;
  std::map<std::string, double> coefficients;
  Eigen::VectorXd curve_x;  // true nonlinear effect on a grid
  Eigen::VectorXd curve_f;
  Eigen::VectorXd mean_parameter;  // per-row rate / success probability
};

struct SimulatedDataset {
  CsvTable table;
  TruthRecord truth;
};

// y_i ~ Poisson(exp{0.7 x1 + 2 x2 + cos(4 pi x2)}) with x1 ~ Bernoulli(1/2)
// and x2 ~ Uniform[0,1]. Columns: y, x1, x2.
SimulatedDataset simulate_poisson(Eigen::Index n, std::uint64_t seed);

struct LogitLongitudinalConfig {
  Eigen::Index n_subjects = 275;
  int max_visits = 6;
  double sigma_u = 1.0;                      // sd of the subject intercepts
  double intercept = -2.0;
  std::map<std::string, double> fixed_effects;  // defaults if empty
  std::function<double(double)> age_curve;      // default bump if null
  std::uint64_t seed = 1;
};

// Binary longitudinal model: logit P(y=1) = b0 + U_i + beta'x + f(age) with
// per-subject random intercepts, binary covariates, visit indicators, and a
// continuous age effect. Columns: y, subject, vita, male, height, stunted,
// visit2..visit6, age.
SimulatedDataset simulate_logit_longitudinal(const LogitLongitudinalConfig& cfg);

double default_age_curve(double age);

}  // namespace smcglmm
