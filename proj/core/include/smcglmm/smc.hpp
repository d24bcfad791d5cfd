#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "smcglmm/model.hpp"
#include "smcglmm/pql.hpp"
#include "smcglmm/rng.hpp"

namespace smcglmm {

// gamma_s = min{1, s/(S-5)}: linear climb to 1 at stage S-5, then five
// terminal stages at the target so the final sample is moved but never
// resampled again.
struct Schedule {
  std::vector<double> gammas;  // S+1 entries, gammas[0] = 0, gammas[S] = 1

  int n_stages() const { return static_cast<int>(gammas.size()) - 1; }
};

Schedule make_schedule(int n_stages);

// Partition of the coefficient indices plus one proposal-covariance
// multiplier per block. tau scales the conditional covariance Sigma_I
// directly; the default is 2.4/sqrt(|I|).
struct MoveConfig {
  std::vector<std::vector<Eigen::Index>> partition;
  std::vector<double> tau;
};

MoveConfig singleton_move_config(Eigen::Index p);
MoveConfig single_block_move_config(Eigen::Index p);
double default_tau(std::size_t block_size);
void validate_move_config(const MoveConfig& config, Eigen::Index p);

struct ParticleSystem {
  std::vector<ParamState> states;
  Eigen::VectorXd log_weights;  // kept normalised: log_sum_exp == 0
  std::uint64_t seed = 1;
  int stage = 0;

  Eigen::Index size() const { return static_cast<Eigen::Index>(states.size()); }
};

struct RunTrace {
  std::vector<double> gammas;
  std::vector<double> ess;  // post-reweight, pre-resample, stages 1..S
  std::vector<int> resample_stages;
  Eigen::MatrixXd block_acceptance;  // J x S acceptance rates
};

// (sum w)^2 / sum w^2, evaluated in log space.
double ess(std::span<const double> log_weights);
double ess(const Eigen::VectorXd& log_weights);

// log_w_i += delta_gamma * (log_pi - log_pi0)(theta_i), then renormalise.
void reweight(ParticleSystem& system, double delta_gamma,
              const ModelSpec& model, const PqlFit& pql, int threads = 1);

// One uniform per stratum ((i-1)/N, i/N), CDF inversion; ancestors come out
// sorted by construction.
std::vector<Eigen::Index> stratified_resample(
    std::span<const double> log_weights, RngStream& rng);

// Precomputed geometry for the blocked MH sweep: per-block design columns,
// the rows they touch (indicator blocks are very sparse), proposal Cholesky
// factors, and which prior region each column belongs to.
struct MovePlan {
  struct Block {
    std::vector<Eigen::Index> cols;
    double tau_sqrt = 1.0;
    Eigen::MatrixXd proposal_chol;   // chol of Sigma_I (tau applied at use)
    Eigen::MatrixXd c_active;        // active rows x |I| design slice
    std::vector<Eigen::Index> rows;  // active rows (all rows if dense block)
    Eigen::VectorXd y_active;
    std::vector<int> col_owner;      // -1 = beta, else random-block index
    std::vector<Eigen::Index> touched_ublocks;
    bool touches_beta = false;
  };
  std::vector<Block> blocks;
  Eigen::Index n_blocks() const { return static_cast<Eigen::Index>(blocks.size()); }
};

MovePlan make_move_plan(const ModelSpec& model, const PqlFit& pql,
                        const MoveConfig& config);

// One full MH sweep over the blocks followed by the Gibbs sigma^2 draws,
// targeting pi_s at the given gamma. Returns per-block accept flags (0/1
// per block). Shared verbatim with the RWMH baseline at gamma = 1.
Eigen::VectorXi kernel_sweep(ParamState& state, double gamma,
                             const ModelSpec& model, const PqlFit& pql,
                             const MovePlan& plan, RngStream& rng);

struct MoveStats {
  Eigen::VectorXd accept_count;  // per block, summed over particles
};

MoveStats move_step(ParticleSystem& system, double stage_gamma,
                    const ModelSpec& model, const PqlFit& pql,
                    const MovePlan& plan, int threads = 1);
MoveStats move_step(ParticleSystem& system, double stage_gamma,
                    const ModelSpec& model, const PqlFit& pql,
                    const MoveConfig& config, int threads = 1);

struct SmcConfig {
  Eigen::Index n_particles = 1000;
  int n_stages = 105;
  double resample_threshold = 0.5;  // k: resample when ESS < k*N
  std::uint64_t seed = 1;
  MoveConfig move;
  int threads = 1;  // 0 = hardware concurrency
  // Test hook: the forced resample at the first gamma = 1 stage is part of
  // the sampler contract; tests of the telescoped weights switch it off.
  bool force_resample_at_target = true;
};

struct SmcResult {
  ParticleSystem system;
  RunTrace trace;
};

// Full sampler: init from pi_0, then reweight / resample-if-needed / move
// per stage. The final sample is unweighted.
SmcResult run(const ModelSpec& model, const PqlFit& pql,
              const SmcConfig& config);

}  // namespace smcglmm
