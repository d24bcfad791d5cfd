#include "smcglmm/pql.hpp"

#include <algorithm>
#include <cmath>

namespace smcglmm {

namespace {

constexpr double kEtaClamp = 30.0;
constexpr double kSigmaSqFloor = 1e-6;

double clamp_eta(double eta) {
  return std::clamp(eta, -kEtaClamp, kEtaClamp);
}

// Canonical-link intercept start: b'^{-1}(mean(y)) with ybar clamped away
// from the boundary of the mean space.
double intercept_start(const ModelSpec& model) {
  const double n = static_cast<double>(model.n());
  double ybar = model.y.mean();
  const double lo = 1.0 / (n + 1.0);
  if (model.family == Family::poisson) {
    return std::log(std::max(ybar, lo));
  }
  ybar = std::clamp(ybar, lo, n / (n + 1.0));
  return std::log(ybar / (1.0 - ybar));
}

bool is_intercept_column(const Eigen::MatrixXd& c, Eigen::Index j) {
  return (c.col(j).array() == 1.0).all();
}

}  // namespace

PqlFit pql_fit(const ModelSpec& model, const PqlOptions& opts) {
  if (opts.max_outer < 1)
    throw ValidationError("pql: max_outer must be at least 1");
  const Eigen::Index p = model.p();
  const Eigen::Index n = model.n();
  const Eigen::Index nblocks = model.n_blocks();

  PqlFit fit;
  const bool external =
      opts.init_nu.has_value() && opts.init_sigma_sq.has_value();

  Eigen::VectorXd nu = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd sigma_sq = Eigen::VectorXd::Ones(nblocks);
  if (opts.init_nu) {
    if (opts.init_nu->size() != p)
      throw ValidationError("pql: init.nu length does not match design");
    nu = *opts.init_nu;
  } else if (n > 0 && model.q_beta > 0 && is_intercept_column(model.C, 0)) {
    nu[0] = intercept_start(model);
  }
  if (opts.init_sigma_sq) {
    if (opts.init_sigma_sq->size() != nblocks)
      throw ValidationError("pql: init.sigma_sq length does not match blocks");
    sigma_sq = opts.init_sigma_sq->cwiseMax(kSigmaSqFloor);
  }

  fit.converged = external;
  fit.iterations = 0;
  if (!external) {
    for (int it = 0; it < opts.max_outer; ++it) {
      fit.iterations = it + 1;
      const Eigen::VectorXd eta = model.C * nu;
      Eigen::VectorXd w(n), z(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double e = clamp_eta(eta[i]);
        const double mu = cumulant(model.family, e, 1);
        const double wi = cumulant(model.family, e, 2);
        w[i] = wi;
        z[i] = eta[i] + (model.y[i] - mu) / wi;
      }
      const Eigen::VectorXd v_diag = prior_variance_diag(model, sigma_sq);
      Eigen::MatrixXd a = model.C.transpose() * w.asDiagonal() * model.C;
      a.diagonal() += v_diag.cwiseInverse();
      const Eigen::LLT<Eigen::MatrixXd> llt(a);
      if (llt.info() != Eigen::Success)
        throw NotPositiveDefinite("pql: working normal equations singular");
      const Eigen::VectorXd rhs = model.C.transpose() * (w.asDiagonal() * z);
      const Eigen::VectorXd nu_new = llt.solve(rhs);

      Eigen::VectorXd sigma_new = sigma_sq;
      if (nblocks > 0) {
        const Eigen::MatrixXd h =
            llt.solve(Eigen::MatrixXd::Identity(p, p));
        for (Eigen::Index l = 0; l < nblocks; ++l) {
          const RandomBlock& b = model.blocks[l];
          const double usq = nu_new.segment(b.offset, b.size).squaredNorm();
          const double tr =
              h.block(b.offset, b.offset, b.size, b.size).trace();
          sigma_new[l] =
              std::max((usq + tr) / static_cast<double>(b.size), kSigmaSqFloor);
        }
      }

      double delta = 0.0;
      for (Eigen::Index j = 0; j < p; ++j)
        delta = std::max(delta,
                         std::abs(nu_new[j] - nu[j]) / std::max(1.0, std::abs(nu[j])));
      for (Eigen::Index l = 0; l < nblocks; ++l)
        delta = std::max(delta, std::abs(sigma_new[l] - sigma_sq[l]) /
                                    std::max(1.0, std::abs(sigma_sq[l])));
      nu = nu_new;
      sigma_sq = sigma_new;
      if (delta < opts.tol) {
        fit.converged = true;
        break;
      }
    }
  }

  fit.nu_hat = nu;
  fit.sigma_sq_hat = sigma_sq.cwiseMax(kSigmaSqFloor);

  const Eigen::VectorXd v_hat = prior_variance_diag(model, fit.sigma_sq_hat);
  const Eigen::MatrixXd curvature = neg_hessian_nu(model, fit.nu_hat, v_hat);
  fit.sigma = spd_inverse(curvature);
  if (!(opts.inflate > 0.0))
    throw ValidationError("pql: inflate must be positive");
  fit.sigma *= opts.inflate;
  fit.sigma_chol = cholesky(fit.sigma);
  fit.precision = spd_inverse(fit.sigma);
  return fit;
}

void add_block_proposals(
    PqlFit& fit, const std::vector<std::vector<Eigen::Index>>& partition) {
  fit.block_cond_covs.clear();
  fit.block_cond_covs.reserve(partition.size());
  for (const auto& block : partition) {
    BlockProposal bp;
    bp.indices = block;
    bp.cov = conditional_cov_from_precision(fit.precision, block);
    bp.chol_lower = cholesky(bp.cov).lower;
    fit.block_cond_covs.push_back(std::move(bp));
  }
}

ParamState sample_pi0(const PqlFit& fit, const ModelSpec& model,
                      RngStream& rng) {
  ParamState state;
  state.nu = sample_mvn(fit.nu_hat, fit.sigma_chol, rng);
  state.sigma_sq.resize(model.n_blocks());
  for (Eigen::Index l = 0; l < model.n_blocks(); ++l) {
    const RandomBlock& b = model.blocks[l];
    const double a = model.a_u[l];
    const double usq = state.nu.segment(b.offset, b.size).squaredNorm();
    state.sigma_sq[l] = sample_inverse_gamma(
        a + 0.5 * static_cast<double>(b.size), a + 0.5 * usq, rng);
  }
  return state;
}

}  // namespace smcglmm
