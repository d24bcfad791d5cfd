#include "smcglmm/design.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace smcglmm {

Standardisation fit_standardisation(const Eigen::VectorXd& x) {
  if (x.size() == 0)
    throw ValidationError("standardise: empty predictor");
  Standardisation s;
  s.mean = x.mean();
  s.sd = std::sqrt((x.array() - s.mean).square().mean());
  if (!(s.sd > 0.0))
    throw ValidationError("standardise: predictor is constant");
  return s;
}

Eigen::VectorXd apply_standardisation(const Standardisation& s,
                                      const Eigen::VectorXd& x) {
  return (x.array() - s.mean) / s.sd;
}

Eigen::VectorXd select_knots(const Eigen::VectorXd& x, int k_knots) {
  if (k_knots < 2)
    throw ValidationError("select_knots: need at least 2 knots");
  std::vector<double> uniq(x.data(), x.data() + x.size());
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  if (static_cast<int>(uniq.size()) < k_knots + 2)
    throw ValidationError("select_knots: fewer than K+2 unique values");

  const auto quantile = [&uniq](double level) {
    const double h = level * static_cast<double>(uniq.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, uniq.size() - 1);
    const double frac = h - std::floor(h);
    return uniq[lo] + frac * (uniq[hi] - uniq[lo]);
  };

  Eigen::VectorXd knots(k_knots);
  for (int k = 1; k <= k_knots; ++k)
    knots[k - 1] = quantile(static_cast<double>(k + 1) /
                            static_cast<double>(k_knots + 2));
  for (int k = 1; k < k_knots; ++k)
    if (!(knots[k] > knots[k - 1]))
      throw ValidationError("select_knots: knots not strictly increasing");
  return knots;
}

SplineBasisSpec make_spline_basis(const Eigen::VectorXd& knots) {
  const Eigen::Index k = knots.size();
  if (k < 2) throw ValidationError("spline basis: need at least 2 knots");
  for (Eigen::Index i = 1; i < k; ++i)
    if (!(knots[i] > knots[i - 1]))
      throw ValidationError("spline basis: knots must be strictly increasing");

  Eigen::MatrixXd omega(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j)
      omega(i, j) = std::pow(std::abs(knots[i] - knots[j]), 3.0);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(omega);
  if (es.info() != Eigen::Success)
    throw NumericError("spline basis: eigendecomposition failed");
  const Eigen::VectorXd lam = es.eigenvalues();
  const double lam_max = lam.cwiseAbs().maxCoeff();
  Eigen::VectorXd inv_sqrt(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const double mag = std::abs(lam[i]);
    inv_sqrt[i] = mag < 1e-10 * lam_max ? 0.0 : 1.0 / std::sqrt(mag);
  }
  SplineBasisSpec spec;
  spec.knots = knots;
  spec.omega_inv_sqrt =
      es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().transpose();
  spec.omega_inv_sqrt =
      0.5 * (spec.omega_inv_sqrt + spec.omega_inv_sqrt.transpose()).eval();
  return spec;
}

Eigen::MatrixXd radial_cubic_basis(const Eigen::VectorXd& x,
                                   const SplineBasisSpec& spec) {
  const Eigen::Index k = spec.knots.size();
  if (spec.omega_inv_sqrt.rows() != k || spec.omega_inv_sqrt.cols() != k)
    throw DimensionMismatch("radial_cubic_basis: malformed spec");
  Eigen::MatrixXd r(x.size(), k);
  for (Eigen::Index i = 0; i < x.size(); ++i)
    for (Eigen::Index j = 0; j < k; ++j)
      r(i, j) = std::pow(std::abs(x[i] - spec.knots[j]), 3.0);
  return r * spec.omega_inv_sqrt;
}

AssembledDesign assemble_design(
    const Eigen::MatrixXd& fixed_columns,
    const std::vector<Eigen::MatrixXd>& random_blocks, bool add_intercept) {
  Eigen::Index n = fixed_columns.rows();
  for (const auto& z : random_blocks) {
    if (n == 0) n = z.rows();
    if (z.rows() != n)
      throw DimensionMismatch("assemble_design: row-count mismatch");
  }
  AssembledDesign out;
  out.q_beta = (add_intercept ? 1 : 0) + fixed_columns.cols();
  Eigen::Index p = out.q_beta;
  for (const auto& z : random_blocks) p += z.cols();

  out.C.resize(n, p);
  Eigen::Index col = 0;
  if (add_intercept) out.C.col(col++).setOnes();
  out.C.middleCols(col, fixed_columns.cols()) = fixed_columns;
  col += fixed_columns.cols();
  for (const auto& z : random_blocks) {
    out.blocks.push_back({col, z.cols()});
    out.C.middleCols(col, z.cols()) = z;
    col += z.cols();
  }
  return out;
}

BuiltDesign build_design(const CsvTable& data, const DesignConfig& config) {
  const Eigen::Index n = static_cast<Eigen::Index>(data.n_rows());
  if (n == 0) throw ValidationError("build_design: dataset has no rows");

  BuiltDesign out;
  std::vector<Eigen::VectorXd> fixed_cols;
  std::vector<std::string> fixed_names;
  std::vector<double> fixed_means;

  for (const auto& term : config.fixed) {
    Eigen::VectorXd col = data.numeric(term.name);
    fixed_means.push_back(col.mean());
    if (term.type == PredictorType::binary) {
      for (Eigen::Index i = 0; i < n; ++i)
        if (col[i] != 0.0 && col[i] != 1.0)
          throw ValidationError("predictor '" + term.name +
                                "' declared binary but has value " +
                                format_double(col[i]));
      fixed_cols.push_back(col);
    } else {
      fixed_cols.push_back(
          apply_standardisation(fit_standardisation(col), col));
    }
    fixed_names.push_back(term.name);
  }

  // Spline linear terms come after the plain fixed terms.
  std::vector<Eigen::VectorXd> spline_std_x;
  for (const auto& term : config.splines) {
    const Eigen::VectorXd raw = data.numeric(term.predictor);
    const Standardisation s = fit_standardisation(raw);
    const Eigen::VectorXd xs = apply_standardisation(s, raw);
    fixed_means.push_back(raw.mean());
    fixed_cols.push_back(xs);
    fixed_names.push_back(term.predictor);
    spline_std_x.push_back(xs);
    SplineTermInfo info;
    info.predictor = term.predictor;
    info.standardisation = s;
    out.splines.push_back(std::move(info));
  }

  // Random blocks: indicator blocks first, then spline blocks.
  std::vector<Eigen::MatrixXd> random;
  std::vector<std::string> block_names;
  std::vector<std::vector<std::string>> block_coef_names;

  for (const auto& group : config.random_intercepts) {
    const auto& labels = data.strings(group);
    std::map<std::string, Eigen::Index> level_of;
    for (const auto& s : labels) level_of.emplace(s, 0);
    Eigen::Index next = 0;
    for (auto& [label, idx] : level_of) idx = next++;
    if (next < 2)
      throw ValidationError("random intercept '" + group +
                            "' needs at least 2 levels");
    Eigen::MatrixXd z = Eigen::MatrixXd::Zero(n, next);
    for (Eigen::Index i = 0; i < n; ++i)
      z(i, level_of.at(labels[static_cast<std::size_t>(i)])) = 1.0;
    random.push_back(std::move(z));
    block_names.push_back(group);
    std::vector<std::string> names;
    for (const auto& [label, idx] : level_of) names.push_back(group + ":" + label);
    block_coef_names.push_back(std::move(names));
  }

  for (std::size_t t = 0; t < config.splines.size(); ++t) {
    const auto& term = config.splines[t];
    const Eigen::VectorXd knots = select_knots(spline_std_x[t], term.knots);
    SplineBasisSpec basis = make_spline_basis(knots);
    random.push_back(radial_cubic_basis(spline_std_x[t], basis));
    block_names.push_back("spline:" + term.predictor);
    std::vector<std::string> names;
    for (int k = 1; k <= term.knots; ++k)
      names.push_back("spline:" + term.predictor + ":" + std::to_string(k));
    block_coef_names.push_back(std::move(names));
    out.splines[t].basis = std::move(basis);
  }

  Eigen::MatrixXd fixed(n, static_cast<Eigen::Index>(fixed_cols.size()));
  for (std::size_t j = 0; j < fixed_cols.size(); ++j)
    fixed.col(static_cast<Eigen::Index>(j)) = fixed_cols[j];

  AssembledDesign asm_ = assemble_design(fixed, random, config.intercept);
  out.C = std::move(asm_.C);
  out.q_beta = asm_.q_beta;
  out.blocks = std::move(asm_.blocks);

  if (config.intercept) out.coef_names.push_back("(intercept)");
  for (const auto& nm : fixed_names) out.coef_names.push_back(nm);
  for (const auto& names : block_coef_names)
    out.coef_names.insert(out.coef_names.end(), names.begin(), names.end());
  out.block_names = std::move(block_names);

  out.covariate_means.resize(static_cast<Eigen::Index>(fixed_means.size()));
  for (std::size_t j = 0; j < fixed_means.size(); ++j)
    out.covariate_means[static_cast<Eigen::Index>(j)] = fixed_means[j];

  // Locate each spline's linear column and Z block now that the full layout
  // is known.
  const Eigen::Index base =
      (config.intercept ? 1 : 0) + static_cast<Eigen::Index>(config.fixed.size());
  const Eigen::Index first_spline_block =
      static_cast<Eigen::Index>(config.random_intercepts.size());
  for (std::size_t t = 0; t < out.splines.size(); ++t) {
    out.splines[t].linear_col = base + static_cast<Eigen::Index>(t);
    out.splines[t].block = first_spline_block + static_cast<Eigen::Index>(t);
  }
  return out;
}

}  // namespace smcglmm
