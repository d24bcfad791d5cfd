#pragma once

#include <Eigen/Dense>
#include <span>
#include <utility>
#include <vector>

#include "smcglmm/design.hpp"

namespace smcglmm {

struct ParamSummary {
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double q975 = 0.0;
};

// Weighted mean/sd and equal-tailed 95% interval per column. An empty
// weight vector means uniform weights. Weights are renormalised internally.
std::vector<ParamSummary> summarize(const Eigen::MatrixXd& draws,
                                    const Eigen::VectorXd& weights);

// Weighted empirical quantile by CDF inversion with linear interpolation
// between the cumulative-weight knots.
double weighted_quantile(std::span<const double> values,
                         std::span<const double> weights, double level);

// Unweighted type-7 quantile (linear interpolation between order
// statistics), as used for QQ pairs and knot selection.
double quantile_type7(std::vector<double> values, double level);

// Cross-run effective sample size: mean within-run posterior-variance
// estimate over the variance of run means (divisor R-1).
struct CarpenterEss {
  double value = 0.0;
  bool identical_runs = false;  // zero across-run variance: +inf sentinel
};

CarpenterEss carpenter_ess(std::span<const double> run_means,
                           std::span<const double> run_var_estimates);

// Gaussian-kernel weighted density on a grid. Bandwidth is the Silverman
// rule with the weight ESS in place of n, which keeps the bandwidth honest
// when resampling has duplicated particles.
Eigen::VectorXd kde(const Eigen::VectorXd& draws,
                    const Eigen::VectorXd& weights,
                    const Eigen::VectorXd& grid);

// Matched empirical quantiles at levels (i - 0.5)/n for both samples.
std::vector<std::pair<double, double>> qq_pairs(const Eigen::VectorXd& a,
                                                const Eigen::VectorXd& b,
                                                int n_quantiles);

// Posterior-mean fitted curve for one spline term on a raw-scale grid:
// beta_x * std(x) + Z(std(x)) * u_hat.
Eigen::VectorXd curve_estimate(const BuiltDesign& design,
                               std::size_t spline_index,
                               const Eigen::VectorXd& posterior_mean_nu,
                               const Eigen::VectorXd& raw_grid);

// Linear-predictor offset with all other covariates at their averages
// (continuous covariates standardise to 0; random intercepts sit at 0).
double curve_offset(const BuiltDesign& design, std::size_t spline_index,
                    const Eigen::VectorXd& posterior_mean_nu);

}  // namespace smcglmm
