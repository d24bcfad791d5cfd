#include "smcglmm/model.hpp"

#include <cmath>
#include <limits>

#include "smcglmm/pql.hpp"

namespace smcglmm {

double cumulant(Family family, double x, int order) {
  switch (family) {
    case Family::poisson:
      // b = b' = b'' = exp
      return std::exp(x);
    case Family::bernoulli_logit: {
      if (order == 0) {
        // log(1 + e^x), stable on both tails
        return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
      }
      const double p = x > 0.0 ? 1.0 / (1.0 + std::exp(-x))
                               : std::exp(x) / (1.0 + std::exp(x));
      if (order == 1) return p;
      return p * (1.0 - p);
    }
  }
  throw ValidationError("cumulant: unknown family");
}

ModelSpec make_model_spec(ModelSpec spec) {
  const Eigen::Index n = spec.C.rows();
  const Eigen::Index p = spec.C.cols();
  if (spec.y.size() != n)
    throw DimensionMismatch("model: y length does not match C rows");
  if (spec.q_beta < 0 || spec.q_beta > p)
    throw ValidationError("model: q_beta out of range");
  if (!(spec.sigma_beta_sq > 0.0))
    throw ValidationError("model: sigma_beta_sq must be positive");
  if (spec.a_u.size() != spec.blocks.size())
    throw ValidationError("model: one A hyperparameter required per block");
  for (double a : spec.a_u)
    if (!(a > 0.0)) throw ValidationError("model: A_ul must be positive");

  Eigen::Index expect = spec.q_beta;
  for (const RandomBlock& b : spec.blocks) {
    if (b.size <= 0) throw ValidationError("model: empty random-effect block");
    if (b.offset != expect)
      throw ValidationError(
          "model: random-effect blocks must be contiguous, disjoint, and "
          "ordered after the fixed-effect columns");
    expect += b.size;
  }
  if (expect != p)
    throw ValidationError("model: q_beta + sum(q_l) must equal C's columns");

  for (Eigen::Index i = 0; i < n; ++i) {
    const double yi = spec.y[i];
    if (spec.family == Family::poisson) {
      if (!(yi >= 0.0) || yi != std::floor(yi))
        throw ValidationError("model: Poisson response must be nonnegative integers");
    } else {
      if (yi != 0.0 && yi != 1.0)
        throw ValidationError("model: Bernoulli response must be 0/1");
    }
  }
  return spec;
}

namespace {

void check_state(const ModelSpec& model, const ParamState& state) {
  if (state.nu.size() != model.p())
    throw DimensionMismatch("state: nu length does not match model");
  if (state.sigma_sq.size() != model.n_blocks())
    throw DimensionMismatch("state: sigma_sq length does not match blocks");
  for (Eigen::Index l = 0; l < state.sigma_sq.size(); ++l)
    if (!(state.sigma_sq[l] > 0.0))
      throw ValidationError("state: sigma_sq entries must be positive");
}

double block_norm_sq(const ParamState& state, const RandomBlock& b) {
  return state.nu.segment(b.offset, b.size).squaredNorm();
}

}  // namespace

double log_pi(const ModelSpec& model, const ParamState& state) {
  check_state(model, state);
  const Eigen::VectorXd eta = model.C * state.nu;
  double out = model.y.dot(eta);
  for (Eigen::Index i = 0; i < eta.size(); ++i)
    out -= cumulant(model.family, eta[i], 0);
  out -= state.nu.head(model.q_beta).squaredNorm() / (2.0 * model.sigma_beta_sq);
  for (Eigen::Index l = 0; l < model.n_blocks(); ++l) {
    const RandomBlock& b = model.blocks[l];
    const double a = model.a_u[l];
    const double s2 = state.sigma_sq[l];
    const double half_q = 0.5 * static_cast<double>(b.size);
    out -= (a + half_q + 1.0) * std::log(s2);
    out -= (a + 0.5 * block_norm_sq(state, b)) / s2;
  }
  return out;
}

double log_pi0(const ModelSpec& model, const PqlFit& pql,
               const ParamState& state) {
  check_state(model, state);
  if (pql.nu_hat.size() != model.p())
    throw DimensionMismatch("log_pi0: fit dimension does not match model");
  const Eigen::VectorXd d = state.nu - pql.nu_hat;
  // d' Sigma^{-1} d = |L^{-1} d|^2
  const Eigen::VectorXd z =
      pql.sigma_chol.lower.triangularView<Eigen::Lower>().solve(d);
  double out = -0.5 * z.squaredNorm();
  for (Eigen::Index l = 0; l < model.n_blocks(); ++l) {
    const RandomBlock& b = model.blocks[l];
    const double a = model.a_u[l];
    const double s2 = state.sigma_sq[l];
    const double half_q = 0.5 * static_cast<double>(b.size);
    const double rate = a + 0.5 * block_norm_sq(state, b);
    out += (a + half_q) * std::log(rate);
    out -= (a + half_q + 1.0) * std::log(s2);
    out -= rate / s2;
  }
  return out;
}

double log_pi_s(const ModelSpec& model, const PqlFit& pql,
                const ParamState& state, double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0))
    throw ValidationError("log_pi_s: gamma must lie in [0, 1]");
  if (gamma == 0.0) return log_pi0(model, pql, state);
  if (gamma == 1.0) return log_pi(model, state);
  return gamma * log_pi(model, state) +
         (1.0 - gamma) * log_pi0(model, pql, state);
}

Eigen::VectorXd prior_variance_diag(const ModelSpec& model,
                                    const Eigen::VectorXd& sigma_sq) {
  if (sigma_sq.size() != model.n_blocks())
    throw DimensionMismatch("prior_variance_diag: sigma_sq length mismatch");
  Eigen::VectorXd v(model.p());
  v.head(model.q_beta).setConstant(model.sigma_beta_sq);
  for (Eigen::Index l = 0; l < model.n_blocks(); ++l) {
    const RandomBlock& b = model.blocks[l];
    if (!(sigma_sq[l] > 0.0))
      throw ValidationError("prior_variance_diag: non-positive variance");
    v.segment(b.offset, b.size).setConstant(sigma_sq[l]);
  }
  return v;
}

Eigen::MatrixXd neg_hessian_nu(const ModelSpec& model,
                               const Eigen::VectorXd& nu,
                               const Eigen::VectorXd& v_diag) {
  if (nu.size() != model.p())
    throw DimensionMismatch("neg_hessian_nu: nu length mismatch");
  if (v_diag.size() != model.p())
    throw DimensionMismatch("neg_hessian_nu: V diagonal length mismatch");
  for (Eigen::Index j = 0; j < v_diag.size(); ++j)
    if (!(v_diag[j] > 0.0))
      throw ValidationError("neg_hessian_nu: prior variances must be positive");
  const Eigen::VectorXd eta = model.C * nu;
  Eigen::VectorXd w(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i)
    w[i] = cumulant(model.family, eta[i], 2);
  Eigen::MatrixXd h = model.C.transpose() * w.asDiagonal() * model.C;
  h.diagonal() += v_diag.cwiseInverse();
  return 0.5 * (h + h.transpose());
}

}  // namespace smcglmm
