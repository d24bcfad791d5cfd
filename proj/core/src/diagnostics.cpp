#include "smcglmm/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "smcglmm/numerics.hpp"
#include "smcglmm/smc.hpp"

namespace smcglmm {

namespace {

Eigen::VectorXd normalised_weights(Eigen::Index n,
                                   const Eigen::VectorXd& weights) {
  if (weights.size() == 0)
    return Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  if (weights.size() != n)
    throw DimensionMismatch("weights length does not match draws");
  if ((weights.array() < 0.0).any())
    throw ValidationError("weights must be nonnegative");
  const double total = weights.sum();
  if (!(total > 0.0)) throw ValidationError("weights sum to zero");
  return weights / total;
}

}  // namespace

double weighted_quantile(std::span<const double> values,
                         std::span<const double> weights, double level) {
  if (values.empty()) throw ValidationError("quantile: empty sample");
  if (values.size() != weights.size())
    throw DimensionMismatch("quantile: values/weights mismatch");
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  double total = 0.0;
  for (double w : weights) total += w;
  double prev_c = 0.0, prev_x = values[order[0]];
  double c = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    c += weights[order[k]] / total;
    const double x = values[order[k]];
    if (c >= level) {
      if (k == 0 || c == prev_c) return x;
      const double t = (level - prev_c) / (c - prev_c);
      return prev_x + t * (x - prev_x);
    }
    prev_c = c;
    prev_x = x;
  }
  return values[order.back()];
}

double quantile_type7(std::vector<double> values, double level) {
  if (values.empty()) throw ValidationError("quantile: empty sample");
  std::sort(values.begin(), values.end());
  const double h = level * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(
      std::clamp(std::floor(h), 0.0, static_cast<double>(values.size() - 1)));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = h - std::floor(h);
  return values[lo] + frac * (values[hi] - values[lo]);
}

std::vector<ParamSummary> summarize(const Eigen::MatrixXd& draws,
                                    const Eigen::VectorXd& weights) {
  if (draws.rows() == 0) throw ValidationError("summarize: no draws");
  const Eigen::VectorXd w = normalised_weights(draws.rows(), weights);
  std::vector<ParamSummary> out(static_cast<std::size_t>(draws.cols()));
  for (Eigen::Index j = 0; j < draws.cols(); ++j) {
    const Eigen::VectorXd col = draws.col(j);
    ParamSummary& s = out[static_cast<std::size_t>(j)];
    s.mean = w.dot(col);
    s.sd = std::sqrt((w.array() * (col.array() - s.mean).square()).sum());
    const std::span<const double> vals(col.data(),
                                       static_cast<std::size_t>(col.size()));
    const std::span<const double> ws(w.data(), static_cast<std::size_t>(w.size()));
    s.q025 = weighted_quantile(vals, ws, 0.025);
    s.q975 = weighted_quantile(vals, ws, 0.975);
  }
  return out;
}

CarpenterEss carpenter_ess(std::span<const double> run_means,
                           std::span<const double> run_var_estimates) {
  const std::size_t r = run_means.size();
  if (r < 2 || run_var_estimates.size() != r)
    throw ValidationError("carpenter_ess: need R >= 2 runs");
  double mean_var = 0.0;
  for (double v : run_var_estimates) mean_var += v;
  mean_var /= static_cast<double>(r);

  double mbar = 0.0;
  for (double m : run_means) mbar += m;
  mbar /= static_cast<double>(r);
  double var_means = 0.0;
  for (double m : run_means) var_means += (m - mbar) * (m - mbar);
  var_means /= static_cast<double>(r - 1);

  CarpenterEss out;
  if (mean_var == 0.0) {
    out.value = 0.0;
    return out;
  }
  if (var_means == 0.0) {
    out.value = std::numeric_limits<double>::infinity();
    out.identical_runs = true;
    return out;
  }
  out.value = mean_var / var_means;
  return out;
}

Eigen::VectorXd kde(const Eigen::VectorXd& draws,
                    const Eigen::VectorXd& weights,
                    const Eigen::VectorXd& grid) {
  if (draws.size() < 2) throw ValidationError("kde: need at least 2 draws");
  const Eigen::VectorXd w = normalised_weights(draws.size(), weights);

  const double mn = draws.minCoeff();
  const double mx = draws.maxCoeff();
  if (mn == mx)
    throw NumericError(
        "kde: all draws identical (duplicated particles); density estimate "
        "undefined");

  const double mean = w.dot(draws);
  const double sd = std::sqrt((w.array() * (draws.array() - mean).square()).sum());
  const std::span<const double> vals(draws.data(),
                                     static_cast<std::size_t>(draws.size()));
  const std::span<const double> ws(w.data(), static_cast<std::size_t>(w.size()));
  const double iqr = weighted_quantile(vals, ws, 0.75) -
                     weighted_quantile(vals, ws, 0.25);
  double spread = sd;
  if (iqr > 0.0) spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0))
    throw NumericError("kde: zero spread (duplicated particles)");

  Eigen::VectorXd lw(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i)
    lw[i] = w[i] > 0.0 ? std::log(w[i])
                       : -std::numeric_limits<double>::infinity();
  const double n_eff = ess(lw);
  const double bandwidth = 0.9 * spread * std::pow(n_eff, -0.2);

  Eigen::VectorXd density(grid.size());
  const double norm = 1.0 / (bandwidth * std::sqrt(2.0 * M_PI));
  for (Eigen::Index g = 0; g < grid.size(); ++g) {
    const Eigen::ArrayXd z = (grid[g] - draws.array()) / bandwidth;
    density[g] = norm * (w.array() * (-0.5 * z.square()).exp()).sum();
  }
  return density;
}

std::vector<std::pair<double, double>> qq_pairs(const Eigen::VectorXd& a,
                                                const Eigen::VectorXd& b,
                                                int n_quantiles) {
  if (a.size() == 0 || b.size() == 0)
    throw ValidationError("qq_pairs: empty sample");
  if (n_quantiles < 1) throw ValidationError("qq_pairs: need n >= 1");
  std::vector<double> av(a.data(), a.data() + a.size());
  std::vector<double> bv(b.data(), b.data() + b.size());
  std::vector<std::pair<double, double>> out;
  out.reserve(static_cast<std::size_t>(n_quantiles));
  for (int i = 1; i <= n_quantiles; ++i) {
    const double level = (static_cast<double>(i) - 0.5) /
                         static_cast<double>(n_quantiles);
    out.emplace_back(quantile_type7(av, level), quantile_type7(bv, level));
  }
  return out;
}

Eigen::VectorXd curve_estimate(const BuiltDesign& design,
                               std::size_t spline_index,
                               const Eigen::VectorXd& posterior_mean_nu,
                               const Eigen::VectorXd& raw_grid) {
  if (spline_index >= design.splines.size())
    throw ValidationError("curve_estimate: no such spline term");
  if (posterior_mean_nu.size() != design.C.cols())
    throw DimensionMismatch("curve_estimate: coefficient length mismatch");
  const SplineTermInfo& term = design.splines[spline_index];
  const Eigen::VectorXd xs = apply_standardisation(term.standardisation, raw_grid);
  const Eigen::MatrixXd z = radial_cubic_basis(xs, term.basis);
  const RandomBlock& blk = design.blocks[static_cast<std::size_t>(term.block)];
  const Eigen::VectorXd u = posterior_mean_nu.segment(blk.offset, blk.size);
  return posterior_mean_nu[term.linear_col] * xs + z * u;
}

double curve_offset(const BuiltDesign& design, std::size_t spline_index,
                    const Eigen::VectorXd& posterior_mean_nu) {
  if (spline_index >= design.splines.size())
    throw ValidationError("curve_offset: no such spline term");
  const SplineTermInfo& term = design.splines[spline_index];
  double offset = 0.0;
  // Fixed-effect columns at their column means (standardised continuous
  // columns and spline linear terms average to zero by construction; the
  // spline's own linear term is part of the curve, not the offset).
  for (Eigen::Index j = 0; j < design.q_beta; ++j) {
    if (j == term.linear_col) continue;
    offset += posterior_mean_nu[j] * design.C.col(j).mean();
  }
  return offset;
}

}  // namespace smcglmm
