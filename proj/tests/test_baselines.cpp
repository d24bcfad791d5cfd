#include <doctest.h>

#include <cmath>
#include <smcglmm/baselines.hpp>
#include <smcglmm/numerics.hpp>

#include "support/models.hpp"
#include "support/quadrature.hpp"

using namespace smcglmm;

TEST_CASE("importance sampler: self-importance yields equal weights") {
  // With no observations the posterior is exactly the Gaussian prior on
  // beta, and pi_0 built from PQL coincides with it, so every weight is
  // equal.
  ModelSpec m;
  m.C = Eigen::MatrixXd::Zero(0, 2);
  m.y = Eigen::VectorXd::Zero(0);
  m.q_beta = 2;
  m.sigma_beta_sq = 25.0;
  m.family = Family::poisson;
  m = make_model_spec(m);
  const PqlFit fit = pql_fit(m, {});
  CHECK((fit.nu_hat.array() == 0.0).all());

  const ImportanceSample is = importance_sampler(m, fit, 500, 3);
  for (Eigen::Index i = 0; i < 500; ++i)
    CHECK(is.log_weights[i] == doctest::Approx(-std::log(500.0)).epsilon(1e-10));
  CHECK(is.ess == doctest::Approx(500.0).epsilon(1e-9));
  CHECK_FALSE(is.depleted);
}

TEST_CASE("importance sampler: posterior mean matches quadrature") {
  // 1-coefficient Poisson model
  ModelSpec m;
  const Eigen::Index n = 40;
  RngStream gen(51, RngDomain::generic, 0, 0);
  m.C = Eigen::MatrixXd::Ones(n, 1);
  m.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i)
    m.y[i] = static_cast<double>(gen.poisson(std::exp(0.4)));
  m.q_beta = 1;
  m.sigma_beta_sq = 100.0;
  m.family = Family::poisson;
  m = make_model_spec(m);
  const PqlFit fit = pql_fit(m, {});

  const auto logdens = [&](double v) {
    ParamState st;
    st.nu = Eigen::VectorXd::Constant(1, v);
    st.sigma_sq.resize(0);
    return log_pi(m, st);
  };
  const double sd = std::sqrt(fit.sigma(0, 0));
  const auto quad = testsupport::quadrature_moments_1d(
      logdens, fit.nu_hat[0] - 8 * sd, fit.nu_hat[0] + 8 * sd);

  const Eigen::Index draws = 20000;
  const ImportanceSample is = importance_sampler(m, fit, draws, 4);
  double mean = 0.0;
  for (Eigen::Index i = 0; i < draws; ++i)
    mean += std::exp(is.log_weights[i]) * is.states[static_cast<std::size_t>(i)].nu[0];
  // weighted-MC standard error ~ sd/sqrt(ess)
  const double se = std::sqrt(quad.var / is.ess);
  CHECK(std::abs(mean - quad.mean) < 3.0 * se);
  CHECK(is.ess <= static_cast<double>(draws) + 1e-9);
}

TEST_CASE("rwmh: tau 0 freezes nu while sigma^2 keeps mixing") {
  const ModelSpec m = testsupport::poisson_with_block();
  const PqlFit fit = testsupport::fitted(m);
  MoveConfig mc = singleton_move_config(m.p());
  for (double& t : mc.tau) t = 0.0;
  const ChainOutput chain = rwmh_chain(m, fit, mc, 50, 10, 8);
  for (int t = 0; t < 50; ++t)
    for (Eigen::Index j = 0; j < m.p(); ++j)
      CHECK(chain.draws(t, j) == fit.nu_hat[j]);
  // sigma^2 column must not be constant
  const Eigen::VectorXd s2 = chain.draws.col(m.p());
  CHECK((s2.array() != s2[0]).any());
  CHECK(chain.post_burnin().rows() == 40);
}

TEST_CASE("rwmh: chain agrees with 2-D quadrature") {
  const ModelSpec m = testsupport::poisson_two_coef(60, 99, 100.0);
  const PqlFit fit = testsupport::fitted(m);
  const auto logdens = [&](double a, double b) {
    ParamState st;
    st.nu = Eigen::Vector2d(a, b);
    st.sigma_sq.resize(0);
    return log_pi(m, st);
  };
  const Eigen::Vector2d sd(std::sqrt(fit.sigma(0, 0)), std::sqrt(fit.sigma(1, 1)));
  const auto quad = testsupport::quadrature_moments_2d(
      logdens, fit.nu_hat - 8.0 * sd, fit.nu_hat + 8.0 * sd, 301);

  MoveConfig mc = singleton_move_config(2);
  const int iters = 50000, burnin = 5000;
  const ChainOutput chain = rwmh_chain(m, fit, mc, iters, burnin, 12);
  const Eigen::MatrixXd post = chain.post_burnin();

  for (int j = 0; j < 2; ++j) {
    const double mean = post.col(j).mean();
    // batch-means standard error absorbs the autocorrelation
    const int n_batch = 30;
    const Eigen::Index bs = post.rows() / n_batch;
    Eigen::VectorXd bm(n_batch);
    for (int b = 0; b < n_batch; ++b)
      bm[b] = post.col(j).segment(b * bs, bs).mean();
    const double se =
        std::sqrt((bm.array() - bm.mean()).square().sum() / (n_batch - 1.0) /
                  n_batch);
    CHECK(std::abs(mean - quad.mean[j]) < 3.0 * se);
  }
  for (Eigen::Index b = 0; b < chain.accept_rate.size(); ++b) {
    CHECK(chain.accept_rate[b] > 0.0);
    CHECK(chain.accept_rate[b] < 1.0);
  }
}

TEST_CASE("rwmh single iteration equals one SMC move at gamma 1") {
  const ModelSpec m = testsupport::poisson_with_block();
  const PqlFit fit = testsupport::fitted(m);
  const MoveConfig mc = singleton_move_config(m.p());
  const std::uint64_t seed = 99;

  const ChainOutput chain = rwmh_chain(m, fit, mc, 1, 0, seed);

  ParticleSystem sys;
  sys.seed = seed;
  sys.stage = 1;  // chain iteration 1 draws from the stage-1 stream
  sys.states = {ParamState{fit.nu_hat, fit.sigma_sq_hat}};
  sys.log_weights = Eigen::VectorXd::Zero(1);
  (void)move_step(sys, 1.0, m, fit, mc, 1);

  for (Eigen::Index j = 0; j < m.p(); ++j)
    CHECK(chain.draws(0, j) == sys.states[0].nu[j]);
  CHECK(chain.draws(0, m.p()) == sys.states[0].sigma_sq[0]);
}

TEST_CASE("slice_update_1d: standard normal target") {
  const auto logdens = [](double x) { return -0.5 * x * x; };
  RngStream rng(71, RngDomain::generic, 0, 0);
  double x = 0.0;
  const int n = 100000;
  double m1 = 0.0, m2 = 0.0;
  for (int i = 0; i < n; ++i) {
    x = slice_update_1d(x, logdens, 1.0, 100, rng, "z");
    m1 += x;
    m2 += x * x;
  }
  m1 /= n;
  m2 /= n;
  CHECK(std::abs(m1) < 0.02);
  CHECK(std::abs(m2 - m1 * m1 - 1.0) < 0.05);
}

TEST_CASE("slice_update_1d: draw respects the slice level") {
  const auto logdens = [](double x) { return -0.5 * x * x; };
  RngStream rng(72, RngDomain::generic, 0, 0);
  double x = 0.3;
  for (int i = 0; i < 2000; ++i) {
    RngStream probe = rng;  // same stream position as the update will use
    const double level = logdens(x) - probe.exponential();
    const double x1 = slice_update_1d(x, logdens, 0.8, 100, rng, "z");
    CHECK(logdens(x1) >= level);
    x = x1;
  }
}

TEST_CASE("slice sampler: chain agrees with 2-D quadrature") {
  const ModelSpec m = testsupport::poisson_two_coef(60, 99, 100.0);
  const PqlFit fit = testsupport::fitted(m);
  const auto logdens = [&](double a, double b) {
    ParamState st;
    st.nu = Eigen::Vector2d(a, b);
    st.sigma_sq.resize(0);
    return log_pi(m, st);
  };
  const Eigen::Vector2d sd(std::sqrt(fit.sigma(0, 0)), std::sqrt(fit.sigma(1, 1)));
  const auto quad = testsupport::quadrature_moments_2d(
      logdens, fit.nu_hat - 8.0 * sd, fit.nu_hat + 8.0 * sd, 301);

  const ChainOutput chain = slice_sampler(m, fit, 12000, 2000, 1.0, 13);
  const Eigen::MatrixXd post = chain.post_burnin();
  for (int j = 0; j < 2; ++j) {
    const double mean = post.col(j).mean();
    const int n_batch = 25;
    const Eigen::Index bs = post.rows() / n_batch;
    Eigen::VectorXd bm(n_batch);
    for (int b = 0; b < n_batch; ++b)
      bm[b] = post.col(j).segment(b * bs, bs).mean();
    const double se =
        std::sqrt((bm.array() - bm.mean()).square().sum() / (n_batch - 1.0) /
                  n_batch);
    CHECK(std::abs(mean - quad.mean[j]) < 3.0 * se);
    const double var = (post.col(j).array() - mean).square().mean();
    CHECK(var == doctest::Approx(quad.var[j]).epsilon(0.15));
  }
}

TEST_CASE("slice sampler: rejects bad arguments") {
  const ModelSpec m = testsupport::poisson_two_coef();
  const PqlFit fit = testsupport::fitted(m);
  CHECK_THROWS_AS((void)slice_sampler(m, fit, 10, 20, 1.0, 1), ValidationError);
  CHECK_THROWS_AS((void)slice_sampler(m, fit, 10, 2, -1.0, 1), ValidationError);
}

TEST_CASE("smc posterior mean agrees with a long rwmh run") {
  const ModelSpec m = testsupport::poisson_two_coef(60, 99, 100.0);
  const PqlFit fit = testsupport::fitted(m);

  SmcConfig cfg;
  cfg.n_particles = 2000;
  cfg.n_stages = 30;
  cfg.seed = 17;
  cfg.threads = 0;
  const SmcResult res = run(m, fit, cfg);
  double smc_mean = 0.0;
  for (const ParamState& st : res.system.states) smc_mean += st.nu[1];
  smc_mean /= static_cast<double>(cfg.n_particles);

  const ChainOutput chain =
      rwmh_chain(m, fit, singleton_move_config(2), 30000, 5000, 18);
  const Eigen::VectorXd draws = chain.post_burnin().col(1);
  const double chain_mean = draws.mean();

  // combined MC standard error: batch means for the chain, sd/sqrt(N) for
  // the (approximately independent) final particle set
  const int n_batch = 25;
  const Eigen::Index bs = draws.size() / n_batch;
  Eigen::VectorXd bm(n_batch);
  for (int b = 0; b < n_batch; ++b) bm[b] = draws.segment(b * bs, bs).mean();
  const double se_chain = std::sqrt(
      (bm.array() - bm.mean()).square().sum() / (n_batch - 1.0) / n_batch);
  const double sd_smc = std::sqrt(
      [&] {
        double acc = 0.0;
        for (const ParamState& st : res.system.states)
          acc += (st.nu[1] - smc_mean) * (st.nu[1] - smc_mean);
        return acc / static_cast<double>(cfg.n_particles);
      }());
  const double se_smc = sd_smc / std::sqrt(static_cast<double>(cfg.n_particles));
  const double se = std::sqrt(se_chain * se_chain + se_smc * se_smc);
  CHECK(std::abs(smc_mean - chain_mean) < 3.0 * se);
}
