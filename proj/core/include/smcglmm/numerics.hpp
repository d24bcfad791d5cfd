#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "smcglmm/errors.hpp"
#include "smcglmm/rng.hpp"

namespace smcglmm {

struct CholeskyFactor {
  Eigen::MatrixXd lower;  // L with L * L^T = M + jitter * I
  double jitter = 0.0;

  Eigen::Index dim() const { return lower.rows(); }
};

// Factor of M + eps*I for the smallest eps on the ladder
// {0, 1e-12, 1e-11, ..., jitter_max} that yields a strictly positive
// diagonal. Rejects asymmetric input (relative asymmetry > 1e-10).
CholeskyFactor cholesky(const Eigen::MatrixXd& m, double jitter_max = 1e-4);

// log(sum_i exp(v_i)) via max shift; exactly -inf when every entry is -inf.
double log_sum_exp(std::span<const double> v);
double log_sum_exp(const Eigen::VectorXd& v);

// mean + L*z with z iid standard normal.
Eigen::VectorXd sample_mvn(const Eigen::VectorXd& mean,
                           const CholeskyFactor& factor, RngStream& rng);

// Draw with density proportional to x^(-shape-1) * exp(-rate/x) on x > 0.
double sample_inverse_gamma(double shape, double rate, RngStream& rng);

// Conditional covariance of the block coordinates given the rest under
// N(., Sigma): (Q_bb)^{-1} with Q = Sigma^{-1}.
Eigen::MatrixXd conditional_gaussian_cov(const Eigen::MatrixXd& sigma,
                                         std::span<const Eigen::Index> block);

// Same, from a precomputed precision matrix; used when many blocks share
// one Sigma so the inverse is formed once.
Eigen::MatrixXd conditional_cov_from_precision(
    const Eigen::MatrixXd& precision, std::span<const Eigen::Index> block);

// Symmetric positive-definite inverse via Cholesky.
Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& m,
                            double jitter_max = 1e-4);

}  // namespace smcglmm
