#pragma once

// Small deterministic model fixtures shared across test suites.

#include <smcglmm/model.hpp>
#include <smcglmm/pql.hpp>
#include <smcglmm/rng.hpp>

namespace testsupport {

// Poisson regression with two fixed effects (intercept + slope), no random
// effects. Small n keeps quadrature oracles cheap.
inline smcglmm::ModelSpec poisson_two_coef(Eigen::Index n = 60,
                                           std::uint64_t seed = 99,
                                           double sigma_beta_sq = 100.0) {
  smcglmm::RngStream rng(seed, smcglmm::RngDomain::generic, 0, 0);
  smcglmm::ModelSpec m;
  m.C.resize(n, 2);
  m.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = rng.uniform(-1.0, 1.0);
    m.C(i, 0) = 1.0;
    m.C(i, 1) = x;
    const double rate = std::exp(0.3 + 0.5 * x);
    m.y[i] = static_cast<double>(rng.poisson(rate));
  }
  m.q_beta = 2;
  m.sigma_beta_sq = sigma_beta_sq;
  m.family = smcglmm::Family::poisson;
  return smcglmm::make_model_spec(m);
}

// Poisson model with one fixed effect and one small random-effect block,
// exercising the Gibbs path.
inline smcglmm::ModelSpec poisson_with_block(Eigen::Index n = 120,
                                             Eigen::Index q = 4,
                                             std::uint64_t seed = 7) {
  smcglmm::RngStream rng(seed, smcglmm::RngDomain::generic, 0, 1);
  smcglmm::ModelSpec m;
  m.C.resize(n, 1 + q);
  m.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    m.C(i, 0) = 1.0;
    for (Eigen::Index j = 0; j < q; ++j)
      m.C(i, 1 + j) = (i % q == j) ? 1.0 : 0.0;
    const double rate = std::exp(0.5 + 0.3 * ((i % q) == 0 ? 1.0 : -0.5));
    m.y[i] = static_cast<double>(rng.poisson(rate));
  }
  m.q_beta = 1;
  m.blocks = {{1, q}};
  m.a_u = {0.01};
  m.sigma_beta_sq = 1e4;
  m.family = smcglmm::Family::poisson;
  return smcglmm::make_model_spec(m);
}

inline smcglmm::PqlFit fitted(const smcglmm::ModelSpec& m) {
  return smcglmm::pql_fit(m, {});
}

}  // namespace testsupport
