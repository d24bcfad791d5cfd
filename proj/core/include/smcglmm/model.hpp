#pragma once

#include <Eigen/Dense>
#include <vector>

#include "smcglmm/errors.hpp"

namespace smcglmm {

struct PqlFit;  // defined in pql.hpp

// Canonical one-parameter exponential families supported by the engine.
// Poisson: b(x) = exp(x). Bernoulli-logit: b(x) = log(1 + exp(x)).
enum class Family { poisson, bernoulli_logit };

// b, b' or b''. The logit branch is evaluated through log1p so that extreme
// linear predictors (routine during early tempering stages) saturate instead
// of overflowing.
double cumulant(Family family, double x, int order);

// One contiguous random-effect coefficient block u_l inside C's columns.
struct RandomBlock {
  Eigen::Index offset = 0;  // first column of the block in C
  Eigen::Index size = 0;    // q_l
};

// The full Bayesian GLMM: response, design C = [X Z], block structure, and
// the prior hyperparameters (diffuse Gaussian on beta, IG(A, A) on each
// variance component).
struct ModelSpec {
  Eigen::VectorXd y;
  Eigen::MatrixXd C;
  Eigen::Index q_beta = 0;
  std::vector<RandomBlock> blocks;
  double sigma_beta_sq = 1e8;
  std::vector<double> a_u;  // one A per block
  Family family = Family::poisson;

  Eigen::Index n() const { return C.rows(); }
  Eigen::Index p() const { return C.cols(); }
  Eigen::Index n_blocks() const { return static_cast<Eigen::Index>(blocks.size()); }
};

// Validates block layout, hyperparameters, and the response's support for
// the chosen family (counts for Poisson, {0,1} for logit). Throws
// ValidationError; returns its argument for factory-style use.
ModelSpec make_model_spec(ModelSpec spec);

// One parameter state theta = (nu, sigma^2): P regression coefficients
// (beta first, then the u blocks) plus L variance components.
struct ParamState {
  Eigen::VectorXd nu;
  Eigen::VectorXd sigma_sq;
};

// Log of the unnormalised posterior:
//   y'Cnu - 1'b(Cnu) - |beta|^2/(2 sigma_beta^2)
//   - sum_l [ (A_l + q_l/2 + 1) log s2_l + (A_l + |u_l|^2/2) / s2_l ].
// Constants in (nu, sigma^2) are dropped.
double log_pi(const ModelSpec& model, const ParamState& state);

// Log of the unnormalised initial distribution: Gaussian centred at the PQL
// estimate for nu times the conditional inverse-gamma pieces for sigma^2:
//   -1/2 (nu - nu_hat)' Sigma^{-1} (nu - nu_hat)
//   + sum_l [ (A_l + q_l/2) log(A_l + |u_l|^2/2)
//             - (A_l + q_l/2 + 1) log s2_l - (A_l + |u_l|^2/2) / s2_l ].
double log_pi0(const ModelSpec& model, const PqlFit& pql,
               const ParamState& state);

// Geometric bridge: gamma * log_pi + (1 - gamma) * log_pi0, with exact
// passthrough at the endpoints.
double log_pi_s(const ModelSpec& model, const PqlFit& pql,
                const ParamState& state, double gamma);

// C' diag{b''(Cnu)} C + V^{-1}: the negated Hessian of the log-likelihood
// plus Gaussian prior in nu. Its inverse is the pi_0 covariance.
Eigen::MatrixXd neg_hessian_nu(const ModelSpec& model,
                               const Eigen::VectorXd& nu,
                               const Eigen::VectorXd& v_diag);

// Prior variance of each nu coordinate: sigma_beta^2 for fixed-effect slots,
// sigma_ul^2 for block l's slots.
Eigen::VectorXd prior_variance_diag(const ModelSpec& model,
                                    const Eigen::VectorXd& sigma_sq);

}  // namespace smcglmm
