#pragma once

#include <Eigen/Dense>
#include <functional>

#include "smcglmm/model.hpp"
#include "smcglmm/pql.hpp"
#include "smcglmm/smc.hpp"

namespace smcglmm {

// N weighted draws from pi_0 scored against pi.
struct ImportanceSample {
  std::vector<ParamState> states;
  Eigen::VectorXd log_weights;  // normalised
  double ess = 0.0;
  bool depleted = false;  // ess/N < 1%: estimates are unreliable
};

ImportanceSample importance_sampler(const ModelSpec& model, const PqlFit& pql,
                                    Eigen::Index n_draws, std::uint64_t seed);

// MCMC chain output; rows are every post-move state (nu then sigma^2).
struct ChainOutput {
  Eigen::MatrixXd draws;          // iters x (P + L)
  Eigen::VectorXd accept_rate;    // per move block; empty for the slice chain
  int burnin = 0;

  Eigen::MatrixXd post_burnin() const {
    return draws.bottomRows(draws.rows() - burnin);
  }
};

// Random-walk Metropolis-Hastings: the SMC move kernel applied at gamma = 1
// from the PQL estimate. Iteration t draws from the same stream a
// single-particle SMC move at stage t would use, so the kernels can be
// checked for equality.
ChainOutput rwmh_chain(const ModelSpec& model, const PqlFit& pql,
                       const MoveConfig& move, int iters, int burnin,
                       std::uint64_t seed);

// Single-variable slice sampler (stepping out + shrinkage) on each
// coordinate of nu in turn; sigma^2 by the shared Gibbs draw.
ChainOutput slice_sampler(const ModelSpec& model, const PqlFit& pql, int iters,
                          int burnin, double width_init, std::uint64_t seed);

// One Neal slice update for a scalar coordinate. log_density need only be
// correct up to an additive constant. Throws NumericError with `what` on
// bracket failure.
double slice_update_1d(double x0,
                       const std::function<double(double)>& log_density,
                       double width, int max_steps, RngStream& rng,
                       const std::string& what);

}  // namespace smcglmm
