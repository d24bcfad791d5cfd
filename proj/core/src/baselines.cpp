#include "smcglmm/baselines.hpp"

#include <cmath>

#include "smcglmm/numerics.hpp"

namespace smcglmm {

ImportanceSample importance_sampler(const ModelSpec& model, const PqlFit& pql,
                                    Eigen::Index n_draws, std::uint64_t seed) {
  if (n_draws < 1) throw ValidationError("importance sampler: need draws");
  ImportanceSample out;
  out.states.resize(static_cast<std::size_t>(n_draws));
  out.log_weights.resize(n_draws);
  for (Eigen::Index i = 0; i < n_draws; ++i) {
    RngStream rng = init_stream(seed, static_cast<std::uint64_t>(i));
    ParamState st = sample_pi0(pql, model, rng);
    out.log_weights[i] = log_pi(model, st) - log_pi0(model, pql, st);
    out.states[static_cast<std::size_t>(i)] = std::move(st);
  }
  const double total = log_sum_exp(out.log_weights);
  if (total == -std::numeric_limits<double>::infinity())
    throw NumericError("importance sampler: all weights are zero");
  out.log_weights.array() -= total;
  out.ess = ess(out.log_weights);
  out.depleted = out.ess / static_cast<double>(n_draws) < 0.01;
  return out;
}

namespace {

Eigen::MatrixXd allocate_draws(const ModelSpec& model, int iters) {
  return Eigen::MatrixXd(iters, model.p() + model.n_blocks());
}

void record_row(Eigen::MatrixXd& draws, int row, const ParamState& state) {
  draws.row(row).head(state.nu.size()) = state.nu.transpose();
  draws.row(row).tail(state.sigma_sq.size()) = state.sigma_sq.transpose();
}

}  // namespace

ChainOutput rwmh_chain(const ModelSpec& model, const PqlFit& pql,
                       const MoveConfig& move, int iters, int burnin,
                       std::uint64_t seed) {
  if (iters <= burnin || burnin < 0)
    throw ValidationError("rwmh: need iters > burnin >= 0");
  const MovePlan plan = make_move_plan(model, pql, move);

  ParamState state{pql.nu_hat, pql.sigma_sq_hat};
  ChainOutput out;
  out.burnin = burnin;
  out.draws = allocate_draws(model, iters);
  Eigen::VectorXd accepts = Eigen::VectorXd::Zero(plan.n_blocks());
  for (int t = 1; t <= iters; ++t) {
    RngStream rng = particle_stream(seed, static_cast<std::uint64_t>(t), 0);
    accepts += kernel_sweep(state, 1.0, model, pql, plan, rng).cast<double>();
    record_row(out.draws, t - 1, state);
  }
  out.accept_rate = accepts / static_cast<double>(iters);
  return out;
}

double slice_update_1d(double x0,
                       const std::function<double(double)>& log_density,
                       double width, int max_steps, RngStream& rng,
                       const std::string& what) {
  if (!(width > 0.0)) throw ValidationError("slice: width must be positive");
  const double level = log_density(x0) - rng.exponential();

  double left = x0 - width * rng.uniform01();
  double right = left + width;
  int steps = 0;
  while (log_density(left) > level) {
    left -= width;
    if (++steps > max_steps)
      throw NumericError("slice: bracket failure stepping left on " + what);
  }
  steps = 0;
  while (log_density(right) > level) {
    right += width;
    if (++steps > max_steps)
      throw NumericError("slice: bracket failure stepping right on " + what);
  }

  for (int tries = 0; tries < 1000; ++tries) {
    const double x = rng.uniform(left, right);
    if (log_density(x) >= level) return x;
    if (x < x0)
      left = x;
    else
      right = x;
  }
  throw NumericError("slice: shrinkage failed to terminate on " + what);
}

ChainOutput slice_sampler(const ModelSpec& model, const PqlFit& pql, int iters,
                          int burnin, double width_init, std::uint64_t seed) {
  if (iters <= burnin || burnin < 0)
    throw ValidationError("slice: need iters > burnin >= 0");
  if (!(width_init > 0.0))
    throw ValidationError("slice: width must be positive");
  const MovePlan plan =
      make_move_plan(model, pql, singleton_move_config(model.p()));

  ParamState state{pql.nu_hat, pql.sigma_sq_hat};
  ChainOutput out;
  out.burnin = burnin;
  out.draws = allocate_draws(model, iters);

  // Incremental caches, same bookkeeping as the MH kernel.
  Eigen::VectorXd eta = model.C * state.nu;
  Eigen::VectorXd b_eta(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i)
    b_eta[i] = cumulant(model.family, eta[i], 0);

  for (int t = 1; t <= iters; ++t) {
    RngStream rng = particle_stream(seed, static_cast<std::uint64_t>(t), 0);
    for (Eigen::Index col = 0; col < model.p(); ++col) {
      const MovePlan::Block& blk = plan.blocks[static_cast<std::size_t>(col)];
      const Eigen::Index nr = static_cast<Eigen::Index>(blk.rows.size());
      const double x0 = state.nu[col];
      const int o = blk.col_owner[0];

      // Full conditional of log pi in this coordinate, relative to x0.
      const auto conditional = [&](double v) {
        const double dv = v - x0;
        double acc = 0.0;
        for (Eigen::Index r = 0; r < nr; ++r) {
          const Eigen::Index row = blk.rows[static_cast<std::size_t>(r)];
          const double shift = blk.c_active(r, 0) * dv;
          acc += model.y[row] * shift;
          acc -= cumulant(model.family, eta[row] + shift, 0) - b_eta[row];
        }
        const double dsq = v * v - x0 * x0;
        if (o < 0)
          acc -= dsq / (2.0 * model.sigma_beta_sq);
        else
          acc -= 0.5 * dsq / state.sigma_sq[o];
        return acc;
      };

      const double x1 =
          slice_update_1d(x0, conditional, width_init, 100, rng,
                          "coordinate " + std::to_string(col));
      if (x1 != x0) {
        state.nu[col] = x1;
        const double dv = x1 - x0;
        for (Eigen::Index r = 0; r < nr; ++r) {
          const Eigen::Index row = blk.rows[static_cast<std::size_t>(r)];
          eta[row] += blk.c_active(r, 0) * dv;
          b_eta[row] = cumulant(model.family, eta[row], 0);
        }
      }
    }
    for (Eigen::Index l = 0; l < model.n_blocks(); ++l) {
      const RandomBlock& b = model.blocks[l];
      const double a = model.a_u[l];
      const double usq = state.nu.segment(b.offset, b.size).squaredNorm();
      state.sigma_sq[l] = sample_inverse_gamma(
          a + 0.5 * static_cast<double>(b.size), a + 0.5 * usq, rng);
    }
    record_row(out.draws, t - 1, state);
  }
  return out;
}

}  // namespace smcglmm
