#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "smcglmm/csv.hpp"
#include "smcglmm/model.hpp"

namespace smcglmm {

// Location/scale transform for one continuous predictor. Population sd
// (divisor n). Persisted with every fit so curves can be reported on the
// raw predictor scale.
struct Standardisation {
  double mean = 0.0;
  double sd = 1.0;

  double apply(double x) const { return (x - mean) / sd; }
  double invert(double z) const { return mean + sd * z; }
};

Standardisation fit_standardisation(const Eigen::VectorXd& x);
Eigen::VectorXd apply_standardisation(const Standardisation& s,
                                      const Eigen::VectorXd& x);

// Radial cubic basis ingredients: knots plus Omega^{-1/2} where
// Omega_{kk'} = |kappa_k - kappa_k'|^3. Omega has zero trace and is always
// indefinite, so the inverse square root uses eigenvalue magnitudes:
// U diag(|lambda|^{-1/2}) U', with near-null eigenvalues dropped.
struct SplineBasisSpec {
  Eigen::VectorXd knots;           // strictly increasing
  Eigen::MatrixXd omega_inv_sqrt;  // K x K symmetric
};

SplineBasisSpec make_spline_basis(const Eigen::VectorXd& knots);

// kappa_k = quantile of unique(x) at level (k+1)/(K+2), k = 1..K, with
// linear interpolation between order statistics.
Eigen::VectorXd select_knots(const Eigen::VectorXd& x, int k_knots);

// Z = R * Omega^{-1/2} with R_ik = |x_i - kappa_k|^3.
Eigen::MatrixXd radial_cubic_basis(const Eigen::VectorXd& x,
                                   const SplineBasisSpec& spec);

struct AssembledDesign {
  Eigen::MatrixXd C;
  Eigen::Index q_beta = 0;
  std::vector<RandomBlock> blocks;
};

// [X Z] with block descriptors; optionally prepends an intercept column.
AssembledDesign assemble_design(const Eigen::MatrixXd& fixed_columns,
                                const std::vector<Eigen::MatrixXd>& random_blocks,
                                bool add_intercept = false);

// --- config-driven dataset -> design construction ------------------------

enum class PredictorType { continuous, binary };

struct FixedTermSpec {
  std::string name;
  PredictorType type = PredictorType::continuous;
};

struct SplineTermSpec {
  std::string predictor;  // continuous column; also enters X linearly
  int knots = 10;
};

struct DesignConfig {
  bool intercept = true;
  std::vector<FixedTermSpec> fixed;
  std::vector<std::string> random_intercepts;  // categorical grouping columns
  std::vector<SplineTermSpec> splines;
};

// Everything diagnostics need to interpret a coefficient vector.
struct SplineTermInfo {
  std::string predictor;
  Eigen::Index linear_col = 0;   // column of the standardised linear term
  Eigen::Index block = 0;        // index into ModelSpec::blocks
  SplineBasisSpec basis;         // knots on the standardised scale
  Standardisation standardisation;
};

struct BuiltDesign {
  Eigen::MatrixXd C;
  Eigen::Index q_beta = 0;
  std::vector<RandomBlock> blocks;
  std::vector<std::string> coef_names;   // length P
  std::vector<std::string> block_names;  // length L
  std::vector<SplineTermInfo> splines;
  Eigen::VectorXd covariate_means;       // raw-scale mean of each X column
};

// Standardises continuous predictors, validates binary ones, expands
// categorical grouping columns to indicator blocks, builds spline bases.
// Column order: intercept, fixed terms, spline linear terms; then indicator
// blocks, then spline blocks.
BuiltDesign build_design(const CsvTable& data, const DesignConfig& config);

}  // namespace smcglmm
