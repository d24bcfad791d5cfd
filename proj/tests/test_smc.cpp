#include <doctest.h>

#include <cmath>
#include <smcglmm/numerics.hpp>
#include <smcglmm/smc.hpp>

#include "support/models.hpp"
#include "support/quadrature.hpp"

using namespace smcglmm;

TEST_CASE("schedule: linear climb with five terminal stages") {
  const Schedule s = make_schedule(105);
  CHECK(s.gammas.size() == 106);
  CHECK(s.gammas[0] == 0.0);
  CHECK(s.gammas[50] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(s.gammas[100] == 1.0);
  CHECK(s.gammas[105] == 1.0);
  for (std::size_t i = 1; i < s.gammas.size(); ++i)
    CHECK(s.gammas[i] >= s.gammas[i - 1]);

  const Schedule s6 = make_schedule(6);
  for (int i = 1; i <= 6; ++i) CHECK(s6.gammas[static_cast<std::size_t>(i)] == 1.0);
  CHECK(s6.gammas[0] == 0.0);

  CHECK_THROWS_AS((void)make_schedule(5), ValidationError);
}

TEST_CASE("ess: closed forms exact to 1e-12") {
  const double n = 7.0;
  std::vector<double> equal(7, -std::log(n));
  CHECK(std::abs(ess(equal) - n) < 1e-12);

  std::vector<double> point(5, -std::numeric_limits<double>::infinity());
  point[2] = 0.0;
  CHECK(std::abs(ess(point) - 1.0) < 1e-12);

  std::vector<double> prop{std::log(2.0), 0.0, 0.0};
  CHECK(std::abs(ess(prop) - 16.0 / 6.0) < 1e-12);

  std::vector<double> degenerate(3, -std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS((void)ess(degenerate), NumericError);
}

TEST_CASE("reweight: delta 0 leaves weights untouched; softmax arithmetic") {
  const ModelSpec m = testsupport::poisson_with_block();
  const PqlFit fit = testsupport::fitted(m);
  ParticleSystem sys;
  sys.seed = 5;
  sys.states.resize(2);
  for (int i = 0; i < 2; ++i) {
    RngStream rng = init_stream(5, static_cast<std::uint64_t>(i));
    sys.states[static_cast<std::size_t>(i)] = sample_pi0(fit, m, rng);
  }
  sys.log_weights = Eigen::VectorXd::Constant(2, -std::log(2.0));
  const Eigen::VectorXd before = sys.log_weights;
  reweight(sys, 0.0, m, fit);
  CHECK(sys.log_weights == before);

  // two-particle softmax identity used by the reweight step: incremental
  // log-ratios (0, ln 3) from equal weights give (1/4, 3/4)
  Eigen::VectorXd lw(2);
  lw << -std::log(2.0), -std::log(2.0) + std::log(3.0);
  lw.array() -= log_sum_exp(lw);
  CHECK(std::exp(lw[0]) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(std::exp(lw[1]) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("reweight: matches an independent evaluation of the ratio") {
  ModelSpec m;
  m.C = Eigen::MatrixXd::Ones(1, 1);
  m.y = Eigen::VectorXd::Constant(1, 2.0);
  m.q_beta = 1;
  m.sigma_beta_sq = 100.0;
  m.family = Family::poisson;
  m = make_model_spec(m);

  PqlFit fit;
  fit.nu_hat = Eigen::VectorXd::Zero(1);
  fit.sigma_sq_hat.resize(0);
  fit.sigma = Eigen::MatrixXd::Identity(1, 1);
  fit.sigma_chol = CholeskyFactor{Eigen::MatrixXd::Identity(1, 1), 0.0};
  fit.precision = Eigen::MatrixXd::Identity(1, 1);

  ParticleSystem sys;
  sys.seed = 1;
  sys.states.resize(2);
  sys.states[0].nu = Eigen::VectorXd::Zero(1);
  sys.states[1].nu = Eigen::VectorXd::Constant(1, 0.5);
  sys.log_weights = Eigen::VectorXd::Constant(2, -std::log(2.0));

  // independent: log pi = 2v - e^v - v^2/200, log pi0 = -v^2/2
  const auto ratio = [](double v) {
    return (2.0 * v - std::exp(v) - v * v / 200.0) - (-0.5 * v * v);
  };
  const double dg = 0.35;
  Eigen::VectorXd expect(2);
  expect << dg * ratio(0.0), dg * ratio(0.5);
  expect.array() += -std::log(2.0);
  expect.array() -= log_sum_exp(expect);

  reweight(sys, dg, m, fit);
  CHECK(sys.log_weights[0] == doctest::Approx(expect[0]).epsilon(1e-12));
  CHECK(sys.log_weights[1] == doctest::Approx(expect[1]).epsilon(1e-12));
  CHECK(std::abs(log_sum_exp(sys.log_weights)) < 1e-10);
}

TEST_CASE("stratified resampling: closed-form cases") {
  RngStream rng(61, RngDomain::generic, 0, 0);

  // equal weights: every index exactly once, sorted
  std::vector<double> equal(8, -std::log(8.0));
  const auto anc = stratified_resample(equal, rng);
  for (Eigen::Index i = 0; i < 8; ++i) CHECK(anc[static_cast<std::size_t>(i)] == i);

  // point mass: all ancestors are the heavy particle
  std::vector<double> point(6, -std::numeric_limits<double>::infinity());
  point[3] = 0.0;
  for (Eigen::Index a : stratified_resample(point, rng)) CHECK(a == 3);

  // (1/2, 1/2): always one of each
  std::vector<double> half(2, -std::log(2.0));
  for (int rep = 0; rep < 200; ++rep) {
    const auto a = stratified_resample(half, rng);
    CHECK(a[0] == 0);
    CHECK(a[1] == 1);
  }
}

TEST_CASE("stratified resampling: unbiased and within one of N*w") {
  // Weight intervals touch at most one partial stratum each (cumulative
  // boundaries alternate with stratum edges), where the within-one
  // guarantee is exact.
  const Eigen::Index n = 10;
  Eigen::VectorXd w(n);
  w << 0.1, 0.15, 0.15, 0.1, 0.15, 0.15, 0.1, 0.05, 0.025, 0.025;
  std::vector<double> lw(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    lw[static_cast<std::size_t>(i)] = std::log(w[i]);

  const int trials = 10000;
  Eigen::VectorXd mean_count = Eigen::VectorXd::Zero(n);
  RngStream rng(62, RngDomain::generic, 0, 0);
  for (int t = 0; t < trials; ++t) {
    const auto anc = stratified_resample(lw, rng);
    Eigen::VectorXd count = Eigen::VectorXd::Zero(n);
    Eigen::Index prev = 0;
    for (Eigen::Index a : anc) {
      CHECK(a >= prev);  // sorted by construction
      prev = a;
      count[a] += 1.0;
    }
    for (Eigen::Index i = 0; i < n; ++i)
      CHECK(std::abs(count[i] - static_cast<double>(n) * w[i]) < 1.0);
    mean_count += count;
  }
  mean_count /= trials;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double se =
        std::sqrt(static_cast<double>(n) * w[i] * (1.0 - w[i]) / trials);
    CHECK(std::abs(mean_count[i] - static_cast<double>(n) * w[i]) <=
          3.0 * se + 1e-9);
  }
}

TEST_CASE("move config validation") {
  CHECK_THROWS_AS(validate_move_config(MoveConfig{}, 3), ValidationError);
  MoveConfig gap;
  gap.partition = {{0}, {2}};
  gap.tau = {1.0, 1.0};
  CHECK_THROWS_AS(validate_move_config(gap, 3), ValidationError);
  MoveConfig dup;
  dup.partition = {{0, 1}, {1, 2}};
  dup.tau = {1.0, 1.0};
  CHECK_THROWS_AS(validate_move_config(dup, 3), ValidationError);
  const MoveConfig ok = singleton_move_config(4);
  CHECK_NOTHROW(validate_move_config(ok, 4));
  CHECK(ok.tau[0] == doctest::Approx(2.4));
  const MoveConfig one = single_block_move_config(4);
  CHECK(one.tau[0] == doctest::Approx(2.4 / 2.0));
}

TEST_CASE("kernel sweep: tau 0 keeps nu and Gibbs-draws sigma^2 exactly") {
  const ModelSpec m = testsupport::poisson_with_block();  // q = 4, A = 0.01
  const PqlFit fit = testsupport::fitted(m);
  MoveConfig cfg = singleton_move_config(m.p());
  for (double& t : cfg.tau) t = 0.0;
  const MovePlan plan = make_move_plan(m, fit, cfg);

  ParamState st;
  st.nu = fit.nu_hat;
  st.sigma_sq = Eigen::VectorXd::Ones(1);
  const Eigen::VectorXd nu_before = st.nu;
  const double usq = st.nu.segment(1, 4).squaredNorm();

  RngStream rng = particle_stream(77, 1, 0);
  RngStream replay = rng;  // value copy
  const Eigen::VectorXi acc = kernel_sweep(st, 0.6, m, fit, plan, rng);
  CHECK(st.nu == nu_before);
  CHECK(acc.sum() == m.p());  // zero proposals always accept

  // Each singleton block consumes one normal (2 words) and one accept
  // uniform (1 word); the Gibbs draw then starts at word 3P. The draw must
  // be IG(A + q/2, A + |u|^2/2) from exactly that stream position.
  for (Eigen::Index j = 0; j < 3 * m.p(); ++j) (void)replay.next_u64();
  const double expect =
      sample_inverse_gamma(0.01 + 2.0, 0.01 + 0.5 * usq, replay);
  CHECK(st.sigma_sq[0] == expect);
}

TEST_CASE("move step: invariance against a discretised bridge target") {
  const ModelSpec m = testsupport::poisson_two_coef(60, 99, 100.0);
  const PqlFit fit = testsupport::fitted(m);
  const double gamma = 0.5;

  const auto logdens = [&](double a, double b) {
    ParamState st;
    st.nu = Eigen::Vector2d(a, b);
    st.sigma_sq.resize(0);
    return log_pi_s(m, fit, st, gamma);
  };

  const Eigen::Vector2d sd(std::sqrt(fit.sigma(0, 0)), std::sqrt(fit.sigma(1, 1)));
  const Eigen::Vector2d lo = fit.nu_hat - 6.0 * sd;
  const Eigen::Vector2d hi = fit.nu_hat + 6.0 * sd;
  const auto quad = testsupport::quadrature_moments_2d(logdens, lo, hi, 301);

  // draw 1e4 particles from the discretised density
  const int grid_n = 201;
  std::vector<double> cell_lp;
  cell_lp.reserve(grid_n * grid_n);
  double mx = -1e300;
  for (int i = 0; i < grid_n; ++i)
    for (int j = 0; j < grid_n; ++j) {
      const double a = lo[0] + (hi[0] - lo[0]) * i / (grid_n - 1.0);
      const double b = lo[1] + (hi[1] - lo[1]) * j / (grid_n - 1.0);
      cell_lp.push_back(logdens(a, b));
      mx = std::max(mx, cell_lp.back());
    }
  std::vector<double> cdf(cell_lp.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < cell_lp.size(); ++k)
    cdf[k] = (acc += std::exp(cell_lp[k] - mx));

  const Eigen::Index n_particles = 10000;
  ParticleSystem sys;
  sys.seed = 314;
  sys.states.resize(static_cast<std::size_t>(n_particles));
  RngStream draw_rng(314, RngDomain::generic, 0, 0);
  for (Eigen::Index p = 0; p < n_particles; ++p) {
    const double u = draw_rng.uniform01() * acc;
    const std::size_t k = static_cast<std::size_t>(
        std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    const int i = static_cast<int>(k) / grid_n;
    const int j = static_cast<int>(k) % grid_n;
    ParamState st;
    st.nu = Eigen::Vector2d(lo[0] + (hi[0] - lo[0]) * i / (grid_n - 1.0),
                            lo[1] + (hi[1] - lo[1]) * j / (grid_n - 1.0));
    st.sigma_sq.resize(0);
    sys.states[static_cast<std::size_t>(p)] = st;
  }
  sys.log_weights = Eigen::VectorXd::Constant(
      n_particles, -std::log(static_cast<double>(n_particles)));

  const MovePlan plan = make_move_plan(m, fit, singleton_move_config(2));
  for (int sweep = 1; sweep <= 50; ++sweep) {
    sys.stage = sweep;
    (void)move_step(sys, gamma, m, fit, plan, 2);
  }

  Eigen::Vector2d m1 = Eigen::Vector2d::Zero();
  Eigen::Vector2d m2 = Eigen::Vector2d::Zero();
  for (const ParamState& st : sys.states) {
    m1 += st.nu;
    m2 += st.nu.cwiseProduct(st.nu);
  }
  m1 /= static_cast<double>(n_particles);
  m2 /= static_cast<double>(n_particles);

  for (int j = 0; j < 2; ++j) {
    const double se_mean = std::sqrt(quad.var[j] / n_particles);
    CHECK(std::abs(m1[j] - quad.mean[j]) < 3.0 * se_mean);
    const double var_of_sq = quad.raw4[j] - quad.raw2[j] * quad.raw2[j];
    const double se_sq = std::sqrt(var_of_sq / n_particles);
    CHECK(std::abs(m2[j] - quad.raw2[j]) < 3.0 * se_sq);
  }
}

TEST_CASE("run: resampling bookkeeping and final uniform weights") {
  const ModelSpec m = testsupport::poisson_with_block();
  const PqlFit fit = testsupport::fitted(m);
  SmcConfig cfg;
  cfg.n_particles = 200;
  cfg.n_stages = 12;
  cfg.seed = 9;
  cfg.move = singleton_move_config(m.p());
  for (double& t : cfg.move.tau) t = 1.0;

  const SmcResult res = run(m, fit, cfg);
  CHECK(res.trace.ess.size() == 12);
  CHECK(res.trace.gammas.size() == 13);
  for (double e : res.trace.ess) {
    CHECK(e >= 1.0);
    CHECK(e <= 200.0 + 1e-9);
  }
  // final sample unweighted
  for (Eigen::Index i = 0; i < cfg.n_particles; ++i)
    CHECK(res.system.log_weights[i] == doctest::Approx(-std::log(200.0)));
  CHECK(std::abs(log_sum_exp(res.system.log_weights)) < 1e-10);
  // forced resample happened at the first gamma = 1 stage (s = 7 for S = 12)
  bool has7 = false;
  for (int s : res.trace.resample_stages) has7 |= (s == 7);
  CHECK(has7);
  // acceptance rates lie in [0, 1]
  CHECK((res.trace.block_acceptance.array() >= 0.0).all());
  CHECK((res.trace.block_acceptance.array() <= 1.0).all());
}

TEST_CASE("run: k = 0 resamples exactly once (the forced one)") {
  const ModelSpec m = testsupport::poisson_two_coef();
  const PqlFit fit = testsupport::fitted(m);
  SmcConfig cfg;
  cfg.n_particles = 100;
  cfg.n_stages = 12;
  cfg.resample_threshold = 0.0;
  cfg.seed = 10;
  const SmcResult res = run(m, fit, cfg);
  REQUIRE(res.trace.resample_stages.size() == 1);
  CHECK(res.trace.resample_stages[0] == 7);
}

TEST_CASE("run: telescoped weights with moves and resampling disabled") {
  const ModelSpec m = testsupport::poisson_with_block();
  const PqlFit fit = testsupport::fitted(m);
  SmcConfig cfg;
  cfg.n_particles = 64;
  cfg.n_stages = 12;
  cfg.resample_threshold = 0.0;
  cfg.force_resample_at_target = false;
  cfg.seed = 21;
  cfg.move = singleton_move_config(m.p());
  for (double& t : cfg.move.tau) t = 0.0;  // no nu moves

  const SmcResult res = run(m, fit, cfg);
  CHECK(res.trace.resample_stages.empty());

  // expected: normalised (log pi - log pi0) at the *initial* particles
  Eigen::VectorXd expect(cfg.n_particles);
  for (Eigen::Index i = 0; i < cfg.n_particles; ++i) {
    RngStream rng = init_stream(cfg.seed, static_cast<std::uint64_t>(i));
    const ParamState st = sample_pi0(fit, m, rng);
    CHECK(st.nu == res.system.states[static_cast<std::size_t>(i)].nu);
    expect[i] = log_pi(m, st) - log_pi0(m, fit, st);
  }
  expect.array() -= log_sum_exp(expect);
  for (Eigen::Index i = 0; i < cfg.n_particles; ++i)
    CHECK(res.system.log_weights[i] ==
          doctest::Approx(expect[i]).epsilon(1e-10));
}

TEST_CASE("run: bitwise deterministic across thread counts") {
  const ModelSpec m = testsupport::poisson_with_block();
  const PqlFit fit = testsupport::fitted(m);
  SmcConfig cfg;
  cfg.n_particles = 150;
  cfg.n_stages = 10;
  cfg.seed = 33;

  cfg.threads = 1;
  const SmcResult a = run(m, fit, cfg);
  cfg.threads = 0;  // hardware concurrency
  const SmcResult b = run(m, fit, cfg);

  CHECK(a.system.log_weights == b.system.log_weights);
  for (Eigen::Index i = 0; i < cfg.n_particles; ++i) {
    CHECK(a.system.states[static_cast<std::size_t>(i)].nu ==
          b.system.states[static_cast<std::size_t>(i)].nu);
    CHECK(a.system.states[static_cast<std::size_t>(i)].sigma_sq ==
          b.system.states[static_cast<std::size_t>(i)].sigma_sq);
  }
  CHECK(a.trace.ess == b.trace.ess);
  CHECK(a.trace.block_acceptance == b.trace.block_acceptance);
}

TEST_CASE("ess equals N right after a resample reset") {
  Eigen::VectorXd lw(5);
  lw << -0.1, -3.0, -0.5, -7.0, -1.0;
  lw.array() -= log_sum_exp(lw);
  RngStream rng(64, RngDomain::generic, 0, 0);
  (void)stratified_resample(
      std::span<const double>(lw.data(), static_cast<std::size_t>(lw.size())), rng);
  const Eigen::VectorXd uniform = Eigen::VectorXd::Constant(5, -std::log(5.0));
  CHECK(ess(uniform) == doctest::Approx(5.0).epsilon(1e-12));
}
