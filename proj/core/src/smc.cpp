#include "smcglmm/smc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include "smcglmm/numerics.hpp"

namespace smcglmm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Deterministic static-chunk parallel loop. Work for index i never depends
// on which worker runs it, so results are bitwise identical for any thread
// count.
template <typename Fn>
void parallel_for(Eigen::Index n, int threads, Fn&& fn) {
  if (threads == 0)
    threads = static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, threads);
  if (threads == 1 || n < 2) {
    for (Eigen::Index i = 0; i < n; ++i) fn(i);
    return;
  }
  const Eigen::Index chunk = (n + threads - 1) / threads;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) {
    const Eigen::Index lo = t * chunk;
    const Eigen::Index hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (Eigen::Index i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace

Schedule make_schedule(int n_stages) {
  if (n_stages < 6)
    throw ValidationError("schedule: need S >= 6 (five terminal stages at the target)");
  Schedule s;
  s.gammas.resize(static_cast<std::size_t>(n_stages) + 1);
  const double denom = static_cast<double>(n_stages - 5);
  for (int i = 0; i <= n_stages; ++i)
    s.gammas[static_cast<std::size_t>(i)] =
        std::min(1.0, static_cast<double>(i) / denom);
  return s;
}

double default_tau(std::size_t block_size) {
  return 2.4 / std::sqrt(static_cast<double>(block_size));
}

MoveConfig singleton_move_config(Eigen::Index p) {
  MoveConfig c;
  c.partition.reserve(static_cast<std::size_t>(p));
  for (Eigen::Index j = 0; j < p; ++j) {
    c.partition.push_back({j});
    c.tau.push_back(default_tau(1));
  }
  return c;
}

MoveConfig single_block_move_config(Eigen::Index p) {
  MoveConfig c;
  std::vector<Eigen::Index> all(static_cast<std::size_t>(p));
  for (Eigen::Index j = 0; j < p; ++j) all[static_cast<std::size_t>(j)] = j;
  c.partition.push_back(std::move(all));
  c.tau.push_back(default_tau(static_cast<std::size_t>(p)));
  return c;
}

void validate_move_config(const MoveConfig& config, Eigen::Index p) {
  if (config.partition.empty())
    throw ValidationError("move config: empty partition");
  if (config.tau.size() != config.partition.size())
    throw ValidationError("move config: one tau required per block");
  for (double t : config.tau)
    if (!(t >= 0.0))
      throw ValidationError("move config: tau must be nonnegative");
  std::vector<char> seen(static_cast<std::size_t>(p), 0);
  for (const auto& block : config.partition) {
    if (block.empty()) throw ValidationError("move config: empty block");
    for (Eigen::Index idx : block) {
      if (idx < 0 || idx >= p)
        throw ValidationError("move config: index out of range");
      if (seen[static_cast<std::size_t>(idx)]++)
        throw ValidationError("move config: blocks must be disjoint");
    }
  }
  for (char c : seen)
    if (!c) throw ValidationError("move config: partition must cover all coefficients");
}

double ess(std::span<const double> log_weights) {
  if (log_weights.empty()) throw ValidationError("ess: empty weights");
  const double lse1 = log_sum_exp(log_weights);
  if (lse1 == kNegInf) throw NumericError("ess: all weights are zero");
  std::vector<double> doubled(log_weights.size());
  for (std::size_t i = 0; i < log_weights.size(); ++i)
    doubled[i] = 2.0 * log_weights[i];
  return std::exp(2.0 * lse1 - log_sum_exp(doubled));
}

double ess(const Eigen::VectorXd& log_weights) {
  return ess(std::span<const double>(log_weights.data(),
                                     static_cast<std::size_t>(log_weights.size())));
}

void reweight(ParticleSystem& system, double delta_gamma,
              const ModelSpec& model, const PqlFit& pql, int threads) {
  if (delta_gamma < 0.0)
    throw ValidationError("reweight: delta_gamma must be nonnegative");
  if (delta_gamma == 0.0) return;
  const Eigen::Index n = system.size();
  Eigen::VectorXd ratio(n);
  parallel_for(n, threads, [&](Eigen::Index i) {
    const ParamState& st = system.states[static_cast<std::size_t>(i)];
    ratio[i] = log_pi(model, st) - log_pi0(model, pql, st);
  });
  system.log_weights += delta_gamma * ratio;
  const double total = log_sum_exp(system.log_weights);
  if (total == kNegInf)
    throw NumericError("reweight: total particle degeneracy (all weights zero)");
  system.log_weights.array() -= total;
}

std::vector<Eigen::Index> stratified_resample(
    std::span<const double> log_weights, RngStream& rng) {
  const Eigen::Index n = static_cast<Eigen::Index>(log_weights.size());
  if (n == 0) throw ValidationError("resample: empty weights");
  const double lse = log_sum_exp(log_weights);
  if (lse == kNegInf)
    throw NumericError("resample: degenerate weights");
  std::vector<double> cum(static_cast<std::size_t>(n));
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    acc += std::exp(log_weights[static_cast<std::size_t>(i)] - lse);
    cum[static_cast<std::size_t>(i)] = acc;
  }
  std::vector<Eigen::Index> ancestors(static_cast<std::size_t>(n));
  Eigen::Index j = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u =
        (static_cast<double>(i) + rng.uniform01()) / static_cast<double>(n);
    while (j < n - 1 && cum[static_cast<std::size_t>(j)] < u) ++j;
    ancestors[static_cast<std::size_t>(i)] = j;
  }
  return ancestors;
}

MovePlan make_move_plan(const ModelSpec& model, const PqlFit& pql,
                        const MoveConfig& config) {
  validate_move_config(config, model.p());
  const Eigen::Index n = model.n();

  // Owner of each column: -1 for beta, else the random-effect block index.
  std::vector<int> owner(static_cast<std::size_t>(model.p()), -1);
  for (Eigen::Index l = 0; l < model.n_blocks(); ++l)
    for (Eigen::Index c = 0; c < model.blocks[l].size; ++c)
      owner[static_cast<std::size_t>(model.blocks[l].offset + c)] =
          static_cast<int>(l);

  MovePlan plan;
  plan.blocks.resize(config.partition.size());
  for (std::size_t j = 0; j < config.partition.size(); ++j) {
    MovePlan::Block& b = plan.blocks[j];
    b.cols = config.partition[j];
    b.tau_sqrt = std::sqrt(config.tau[j]);

    // Reuse a matching precomputed proposal if the fit carries one.
    const BlockProposal* match = nullptr;
    if (j < pql.block_cond_covs.size() &&
        pql.block_cond_covs[j].indices == b.cols)
      match = &pql.block_cond_covs[j];
    if (match) {
      b.proposal_chol = match->chol_lower;
    } else {
      b.proposal_chol =
          cholesky(conditional_cov_from_precision(pql.precision, b.cols)).lower;
    }

    std::vector<char> active(static_cast<std::size_t>(n), 0);
    for (Eigen::Index col : b.cols)
      for (Eigen::Index r = 0; r < n; ++r)
        if (model.C(r, col) != 0.0) active[static_cast<std::size_t>(r)] = 1;
    Eigen::Index n_active = 0;
    for (char a : active) n_active += a;
    const bool dense = n_active > (3 * n) / 5;
    b.rows.clear();
    if (dense) {
      b.rows.resize(static_cast<std::size_t>(n));
      for (Eigen::Index r = 0; r < n; ++r) b.rows[static_cast<std::size_t>(r)] = r;
    } else {
      b.rows.reserve(static_cast<std::size_t>(n_active));
      for (Eigen::Index r = 0; r < n; ++r)
        if (active[static_cast<std::size_t>(r)]) b.rows.push_back(r);
    }
    const Eigen::Index nr = static_cast<Eigen::Index>(b.rows.size());
    b.c_active.resize(nr, static_cast<Eigen::Index>(b.cols.size()));
    b.y_active.resize(nr);
    for (Eigen::Index r = 0; r < nr; ++r) {
      b.y_active[r] = model.y[b.rows[static_cast<std::size_t>(r)]];
      for (std::size_t c = 0; c < b.cols.size(); ++c)
        b.c_active(r, static_cast<Eigen::Index>(c)) =
            model.C(b.rows[static_cast<std::size_t>(r)], b.cols[c]);
    }

    b.col_owner.resize(b.cols.size());
    b.touches_beta = false;
    for (std::size_t c = 0; c < b.cols.size(); ++c) {
      b.col_owner[c] = owner[static_cast<std::size_t>(b.cols[c])];
      if (b.col_owner[c] < 0) b.touches_beta = true;
    }
    std::vector<Eigen::Index> touched;
    for (int o : b.col_owner)
      if (o >= 0) touched.push_back(o);
    std::sort(touched.begin(), touched.end());
    touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
    b.touched_ublocks = std::move(touched);
  }
  return plan;
}

namespace {

// Per-particle sweep cache, rebuilt at every kernel_sweep call and updated
// incrementally across the block moves within the sweep.
struct SweepCache {
  Eigen::VectorXd eta;    // C * nu
  Eigen::VectorXd b_eta;  // b(eta) per row
  Eigen::VectorXd d;      // nu - nu_hat
  Eigen::VectorXd usq;    // |u_l|^2 per block
};

SweepCache build_cache(const ParamState& state, const ModelSpec& model,
                       const PqlFit& pql) {
  SweepCache c;
  c.eta = model.C * state.nu;
  c.b_eta.resize(c.eta.size());
  for (Eigen::Index i = 0; i < c.eta.size(); ++i)
    c.b_eta[i] = cumulant(model.family, c.eta[i], 0);
  c.d = state.nu - pql.nu_hat;
  c.usq.resize(model.n_blocks());
  for (Eigen::Index l = 0; l < model.n_blocks(); ++l)
    c.usq[l] =
        state.nu.segment(model.blocks[l].offset, model.blocks[l].size).squaredNorm();
  return c;
}

}  // namespace

Eigen::VectorXi kernel_sweep(ParamState& state, double gamma,
                             const ModelSpec& model, const PqlFit& pql,
                             const MovePlan& plan, RngStream& rng) {
  if (!(gamma >= 0.0 && gamma <= 1.0))
    throw ValidationError("kernel_sweep: gamma must lie in [0, 1]");
  const bool bridge = gamma < 1.0;  // pi_0 terms carry weight (1 - gamma)
  SweepCache cache = build_cache(state, model, pql);

  Eigen::VectorXi accepted(plan.n_blocks());
  Eigen::VectorXd z, delta, eta_delta, eta_new, b_new;
  std::vector<double> dusq;

  for (Eigen::Index j = 0; j < plan.n_blocks(); ++j) {
    const MovePlan::Block& blk = plan.blocks[j];
    const Eigen::Index bsize = static_cast<Eigen::Index>(blk.cols.size());
    const Eigen::Index nr = static_cast<Eigen::Index>(blk.rows.size());

    z.resize(bsize);
    for (Eigen::Index c = 0; c < bsize; ++c) z[c] = rng.normal();
    delta.noalias() = blk.proposal_chol.triangularView<Eigen::Lower>() * z;
    delta *= blk.tau_sqrt;

    eta_delta.noalias() = blk.c_active * delta;
    eta_new.resize(nr);
    for (Eigen::Index r = 0; r < nr; ++r)
      eta_new[r] = cache.eta[blk.rows[static_cast<std::size_t>(r)]] + eta_delta[r];
    b_new.resize(nr);
    if (model.family == Family::poisson) {
      b_new = eta_new.array().exp();
    } else {
      for (Eigen::Index r = 0; r < nr; ++r)
        b_new[r] = cumulant(model.family, eta_new[r], 0);
    }
    double delta_lik = blk.y_active.dot(eta_delta);
    for (Eigen::Index r = 0; r < nr; ++r)
      delta_lik -= b_new[r] - cache.b_eta[blk.rows[static_cast<std::size_t>(r)]];

    double delta_beta_sq = 0.0;
    dusq.assign(static_cast<std::size_t>(model.n_blocks()), 0.0);
    for (Eigen::Index c = 0; c < bsize; ++c) {
      const Eigen::Index col = blk.cols[static_cast<std::size_t>(c)];
      const double old_v = state.nu[col];
      const double new_v = old_v + delta[c];
      const double dsq = new_v * new_v - old_v * old_v;
      const int o = blk.col_owner[static_cast<std::size_t>(c)];
      if (o < 0)
        delta_beta_sq += dsq;
      else
        dusq[static_cast<std::size_t>(o)] += dsq;
    }

    // sigma^2 terms shared by pi and pi_0 carry total weight 1 at any gamma.
    double delta_g2 = 0.0;
    double delta_h2 = 0.0;
    for (Eigen::Index l : blk.touched_ublocks) {
      const double change = dusq[static_cast<std::size_t>(l)];
      if (change == 0.0) continue;
      delta_g2 -= 0.5 * change / state.sigma_sq[l];
      if (bridge) {
        const double a = model.a_u[l];
        const double half_q = 0.5 * static_cast<double>(model.blocks[l].size);
        const double old_rate = a + 0.5 * cache.usq[l];
        const double new_rate = a + 0.5 * (cache.usq[l] + change);
        delta_h2 += (a + half_q) * (std::log(new_rate) - std::log(old_rate));
      }
    }

    double delta_quad = 0.0;
    if (bridge) {
      // d' Q d change: 2 delta' (Q d)_I + delta' Q_II delta
      for (Eigen::Index c = 0; c < bsize; ++c) {
        const Eigen::Index col = blk.cols[static_cast<std::size_t>(c)];
        delta_quad += 2.0 * delta[c] * pql.precision.row(col).dot(cache.d);
        for (Eigen::Index c2 = 0; c2 < bsize; ++c2)
          delta_quad += delta[c] * delta[c2] *
                        pql.precision(col, blk.cols[static_cast<std::size_t>(c2)]);
      }
    }

    double log_alpha =
        gamma * (delta_lik -
                 delta_beta_sq / (2.0 * model.sigma_beta_sq)) +
        delta_g2;
    if (bridge)
      log_alpha += (1.0 - gamma) * (-0.5 * delta_quad + delta_h2);

    const double log_u = std::log(rng.uniform_open());
    const bool accept = log_u < log_alpha;  // NaN log_alpha rejects
    accepted[j] = accept ? 1 : 0;
    if (accept) {
      for (Eigen::Index c = 0; c < bsize; ++c) {
        const Eigen::Index col = blk.cols[static_cast<std::size_t>(c)];
        state.nu[col] += delta[c];
        cache.d[col] += delta[c];
      }
      for (Eigen::Index r = 0; r < nr; ++r) {
        const Eigen::Index row = blk.rows[static_cast<std::size_t>(r)];
        cache.eta[row] = eta_new[r];
        cache.b_eta[row] = b_new[r];
      }
      for (Eigen::Index l : blk.touched_ublocks)
        cache.usq[l] += dusq[static_cast<std::size_t>(l)];
    }
  }

  // Gibbs refresh of the variance components; exact at every gamma because
  // the sigma^2 factors of pi and pi_0 coincide.
  for (Eigen::Index l = 0; l < model.n_blocks(); ++l) {
    const double a = model.a_u[l];
    const double shape = a + 0.5 * static_cast<double>(model.blocks[l].size);
    const double rate = a + 0.5 * cache.usq[l];
    state.sigma_sq[l] = sample_inverse_gamma(shape, rate, rng);
  }
  return accepted;
}

MoveStats move_step(ParticleSystem& system, double stage_gamma,
                    const ModelSpec& model, const PqlFit& pql,
                    const MovePlan& plan, int threads) {
  const Eigen::Index n = system.size();
  Eigen::MatrixXi accepts(plan.n_blocks(), n);
  parallel_for(n, threads, [&](Eigen::Index i) {
    RngStream rng = particle_stream(system.seed,
                                    static_cast<std::uint64_t>(system.stage),
                                    static_cast<std::uint64_t>(i));
    accepts.col(i) = kernel_sweep(system.states[static_cast<std::size_t>(i)],
                                  stage_gamma, model, pql, plan, rng);
  });
  MoveStats stats;
  stats.accept_count = accepts.rowwise().sum().cast<double>();
  return stats;
}

MoveStats move_step(ParticleSystem& system, double stage_gamma,
                    const ModelSpec& model, const PqlFit& pql,
                    const MoveConfig& config, int threads) {
  const MovePlan plan = make_move_plan(model, pql, config);
  return move_step(system, stage_gamma, model, pql, plan, threads);
}

SmcResult run(const ModelSpec& model, const PqlFit& pql,
              const SmcConfig& config) {
  if (config.n_particles < 2)
    throw ValidationError("smc: need at least 2 particles");
  const Schedule schedule = make_schedule(config.n_stages);
  MoveConfig move = config.move;
  if (move.partition.empty()) move = singleton_move_config(model.p());
  const MovePlan plan = make_move_plan(model, pql, move);

  const Eigen::Index n = config.n_particles;
  SmcResult out;
  ParticleSystem& sys = out.system;
  sys.seed = config.seed;
  sys.stage = 0;
  sys.states.resize(static_cast<std::size_t>(n));
  parallel_for(n, config.threads, [&](Eigen::Index i) {
    RngStream rng = init_stream(config.seed, static_cast<std::uint64_t>(i));
    sys.states[static_cast<std::size_t>(i)] = sample_pi0(pql, model, rng);
  });
  sys.log_weights =
      Eigen::VectorXd::Constant(n, -std::log(static_cast<double>(n)));

  RunTrace& trace = out.trace;
  trace.gammas = schedule.gammas;
  const int s_total = schedule.n_stages();
  trace.ess.reserve(static_cast<std::size_t>(s_total));
  trace.block_acceptance.resize(plan.n_blocks(), s_total);

  for (int s = 1; s <= s_total; ++s) {
    sys.stage = s;
    const double gamma = schedule.gammas[static_cast<std::size_t>(s)];
    const double prev = schedule.gammas[static_cast<std::size_t>(s) - 1];
    reweight(sys, gamma - prev, model, pql, config.threads);

    const double stage_ess = ess(sys.log_weights);
    trace.ess.push_back(stage_ess);

    const bool first_at_target = gamma == 1.0 && prev < 1.0;
    const bool trigger =
        stage_ess < config.resample_threshold * static_cast<double>(n) ||
        (first_at_target && config.force_resample_at_target);
    if (trigger) {
      RngStream rng = resample_stream(config.seed, static_cast<std::uint64_t>(s));
      const auto ancestors = stratified_resample(
          std::span<const double>(sys.log_weights.data(),
                                  static_cast<std::size_t>(n)),
          rng);
      std::vector<ParamState> next(static_cast<std::size_t>(n));
      for (Eigen::Index i = 0; i < n; ++i)
        next[static_cast<std::size_t>(i)] =
            sys.states[static_cast<std::size_t>(ancestors[static_cast<std::size_t>(i)])];
      sys.states = std::move(next);
      sys.log_weights.setConstant(-std::log(static_cast<double>(n)));
      trace.resample_stages.push_back(s);
    }

    const MoveStats stats =
        move_step(sys, gamma, model, pql, plan, config.threads);
    trace.block_acceptance.col(s - 1) =
        stats.accept_count / static_cast<double>(n);
  }
  return out;
}

}  // namespace smcglmm
