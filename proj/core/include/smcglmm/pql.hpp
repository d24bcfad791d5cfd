#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "smcglmm/model.hpp"
#include "smcglmm/numerics.hpp"
#include "smcglmm/rng.hpp"

namespace smcglmm {

// Proposal geometry for one coefficient block: the conditional covariance of
// nu_I given nu_{-I} under the pi_0 Gaussian, plus its Cholesky factor.
struct BlockProposal {
  std::vector<Eigen::Index> indices;
  Eigen::MatrixXd cov;
  Eigen::MatrixXd chol_lower;
};

// Penalised quasi-likelihood fit: the centre and shape of pi_0. Immutable
// once built; shared read-only by all particle workers.
struct PqlFit {
  Eigen::VectorXd nu_hat;
  Eigen::VectorXd sigma_sq_hat;     // one entry per random-effect block
  Eigen::MatrixXd sigma;            // covariance of the nu Gaussian
  CholeskyFactor sigma_chol;
  Eigen::MatrixXd precision;        // sigma^{-1}, reused for block proposals
  std::vector<BlockProposal> block_cond_covs;
  bool converged = false;
  int iterations = 0;
};

struct PqlOptions {
  int max_outer = 50;
  double tol = 1e-6;
  double inflate = 1.0;  // variance multiplier applied to Sigma
  // Supplied estimates bypass the IRLS/EM iterations entirely; Sigma is
  // still built from Eq.-8 curvature at the supplied point.
  std::optional<Eigen::VectorXd> init_nu;
  std::optional<Eigen::VectorXd> init_sigma_sq;
};

// Iteratively reweighted least squares on the working model, with an
// EM-style variance-component update per outer iteration. Non-convergence
// sets the flag rather than throwing: pi_0 only needs to be near the
// posterior, not exact.
PqlFit pql_fit(const ModelSpec& model, const PqlOptions& opts = {});

// Fills fit.block_cond_covs for the given partition of {0..P-1}.
void add_block_proposals(PqlFit& fit,
                         const std::vector<std::vector<Eigen::Index>>& partition);

// One draw from pi_0: nu ~ N(nu_hat, Sigma), then each sigma_ul^2 from its
// conditional inverse gamma IG(A + q/2, A + |u_l|^2/2).
ParamState sample_pi0(const PqlFit& fit, const ModelSpec& model,
                      RngStream& rng);

}  // namespace smcglmm
