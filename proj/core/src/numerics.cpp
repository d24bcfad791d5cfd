#include "smcglmm/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace smcglmm {

namespace {

bool try_llt(const Eigen::MatrixXd& m, Eigen::MatrixXd& lower) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) return false;
  lower = llt.matrixL();
  for (Eigen::Index i = 0; i < lower.rows(); ++i) {
    if (!(lower(i, i) > 0.0) || !std::isfinite(lower(i, i))) return false;
  }
  return true;
}

}  // namespace

CholeskyFactor cholesky(const Eigen::MatrixXd& m, double jitter_max) {
  if (m.rows() != m.cols())
    throw DimensionMismatch("cholesky: matrix is not square");
  const double scale = m.cwiseAbs().maxCoeff();
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (scale > 0.0 && asym > 1e-10 * scale)
    throw ValidationError("cholesky: matrix is not symmetric");

  CholeskyFactor out;
  if (try_llt(m, out.lower)) {
    out.jitter = 0.0;
    return out;
  }
  const Eigen::MatrixXd eye =
      Eigen::MatrixXd::Identity(m.rows(), m.cols());
  for (double eps = 1e-12; eps <= jitter_max * (1.0 + 1e-12); eps *= 10.0) {
    if (try_llt(m + eps * eye, out.lower)) {
      out.jitter = eps;
      return out;
    }
  }
  throw NotPositiveDefinite(
      "cholesky: matrix not positive definite within jitter ladder up to " +
      std::to_string(jitter_max));
}

double log_sum_exp(std::span<const double> v) {
  if (v.empty()) throw ValidationError("log_sum_exp: empty input");
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : v) mx = std::max(mx, x);
  if (mx == -std::numeric_limits<double>::infinity()) return mx;
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - mx);
  return mx + std::log(acc);
}

double log_sum_exp(const Eigen::VectorXd& v) {
  return log_sum_exp(std::span<const double>(v.data(),
                                             static_cast<size_t>(v.size())));
}

Eigen::VectorXd sample_mvn(const Eigen::VectorXd& mean,
                           const CholeskyFactor& factor, RngStream& rng) {
  if (mean.size() != factor.dim())
    throw DimensionMismatch("sample_mvn: mean/factor dimension mismatch");
  Eigen::VectorXd z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  return mean + factor.lower.triangularView<Eigen::Lower>() * z;
}

double sample_inverse_gamma(double shape, double rate, RngStream& rng) {
  if (!(shape > 0.0) || !(rate > 0.0))
    throw ValidationError("sample_inverse_gamma: parameters must be positive");
  return rate / rng.gamma(shape);
}

Eigen::MatrixXd conditional_cov_from_precision(
    const Eigen::MatrixXd& precision, std::span<const Eigen::Index> block) {
  if (block.empty())
    throw ValidationError("conditional_gaussian_cov: empty block");
  const Eigen::Index p = precision.rows();
  for (Eigen::Index idx : block) {
    if (idx < 0 || idx >= p)
      throw ValidationError("conditional_gaussian_cov: index out of range");
  }
  const Eigen::Index b = static_cast<Eigen::Index>(block.size());
  Eigen::MatrixXd qbb(b, b);
  for (Eigen::Index i = 0; i < b; ++i)
    for (Eigen::Index j = 0; j < b; ++j) qbb(i, j) = precision(block[i], block[j]);
  Eigen::MatrixXd cov = spd_inverse(qbb);
  return 0.5 * (cov + cov.transpose());
}

Eigen::MatrixXd conditional_gaussian_cov(const Eigen::MatrixXd& sigma,
                                         std::span<const Eigen::Index> block) {
  if (sigma.rows() != sigma.cols())
    throw DimensionMismatch("conditional_gaussian_cov: Sigma not square");
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw NotPositiveDefinite("conditional_gaussian_cov: singular Sigma");
  const Eigen::MatrixXd precision =
      llt.solve(Eigen::MatrixXd::Identity(sigma.rows(), sigma.cols()));
  return conditional_cov_from_precision(precision, block);
}

Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& m, double jitter_max) {
  const CholeskyFactor f = cholesky(m, jitter_max);
  // (L L^T)^{-1} = L^{-T} L^{-1}
  const Eigen::MatrixXd linv = f.lower.triangularView<Eigen::Lower>().solve(
      Eigen::MatrixXd::Identity(m.rows(), m.cols()));
  Eigen::MatrixXd inv = linv.transpose() * linv;
  return 0.5 * (inv + inv.transpose());
}

}  // namespace smcglmm
