#include "smcglmm/simulate.hpp"

#include <cmath>

#include "smcglmm/errors.hpp"
#include "smcglmm/rng.hpp"

namespace smcglmm {

namespace {

constexpr double kFourPi = 12.566370614359172953850573533118;

std::string int_cell(long v) { return std::to_string(v); }

}  // namespace

SimulatedDataset simulate_poisson(Eigen::Index n, std::uint64_t seed) {
  if (n < 1) throw ValidationError("simulate poisson: need n >= 1");
  RngStream rng = simulate_stream(seed);

  std::vector<std::string> y(static_cast<std::size_t>(n));
  std::vector<std::string> x1(static_cast<std::size_t>(n));
  std::vector<std::string> x2(static_cast<std::size_t>(n));
  Eigen::VectorXd rate(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double b = rng.bernoulli(0.5) ? 1.0 : 0.0;
    const double u = rng.uniform01();
    const double lambda = std::exp(0.7 * b + 2.0 * u + std::cos(kFourPi * u));
    rate[i] = lambda;
    const long yi = rng.poisson(lambda);
    y[static_cast<std::size_t>(i)] = int_cell(yi);
    x1[static_cast<std::size_t>(i)] = int_cell(static_cast<long>(b));
    x2[static_cast<std::size_t>(i)] = format_double(u);
  }

  SimulatedDataset out;
  out.table = CsvTable::from_columns({"y", "x1", "x2"},
                                     {std::move(y), std::move(x1), std::move(x2)});
  out.truth.seed = seed;
  out.truth.family = "poisson";
  out.truth.coefficients = {{"x1", 0.7}, {"x2_linear", 2.0}};
  const Eigen::Index grid_n = 200;
  out.truth.curve_x.resize(grid_n);
  out.truth.curve_f.resize(grid_n);
  for (Eigen::Index g = 0; g < grid_n; ++g) {
    const double x = static_cast<double>(g) / static_cast<double>(grid_n - 1);
    out.truth.curve_x[g] = x;
    out.truth.curve_f[g] = 2.0 * x + std::cos(kFourPi * x);
  }
  out.truth.mean_parameter = rate;
  return out;
}

double default_age_curve(double age) {
  const double z = (age - 2.5) / 1.5;
  return 1.5 * std::exp(-z * z) - 0.75;
}

SimulatedDataset simulate_logit_longitudinal(
    const LogitLongitudinalConfig& cfg) {
  if (cfg.n_subjects < 2)
    throw ValidationError("simulate logit: need at least 2 subjects");
  if (cfg.max_visits < 1 || cfg.max_visits > 6)
    throw ValidationError("simulate logit: visits must lie in 1..6");
  if (cfg.sigma_u < 0.0)
    throw ValidationError("simulate logit: sigma_u must be nonnegative");

  std::map<std::string, double> beta = cfg.fixed_effects;
  if (beta.empty()) {
    beta = {{"vita", 0.6},    {"male", 0.5},    {"height", 0.05},
            {"stunted", 0.45}, {"visit2", -1.2}, {"visit3", -0.6},
            {"visit4", -1.3},  {"visit5", 0.5},  {"visit6", 0.0}};
  }
  const auto f = cfg.age_curve ? cfg.age_curve : default_age_curve;

  RngStream rng = simulate_stream(cfg.seed);

  std::vector<std::string> col_y, col_subject, col_vita, col_male, col_height,
      col_stunted, col_age;
  std::vector<std::vector<std::string>> col_visit(5);
  std::vector<double> prob;

  for (Eigen::Index s = 0; s < cfg.n_subjects; ++s) {
    const double u_i = cfg.sigma_u * rng.normal();
    const double vita = rng.bernoulli(0.10) ? 1.0 : 0.0;
    const double male = rng.bernoulli(0.5) ? 1.0 : 0.0;
    const double stunted = rng.bernoulli(0.15) ? 1.0 : 0.0;
    const double height = 95.0 + 10.0 * rng.normal();
    const double base_age = rng.uniform(0.0, 5.5);
    const int visits =
        1 + static_cast<int>(rng.uniform01() * cfg.max_visits) % cfg.max_visits;

    for (int j = 1; j <= visits; ++j) {
      const double age = base_age + 0.3 * (j - 1);
      double eta = cfg.intercept + u_i + beta.at("vita") * vita +
                   beta.at("male") * male + beta.at("height") * height +
                   beta.at("stunted") * stunted + f(age);
      for (int v = 2; v <= 6; ++v)
        if (j == v) eta += beta.at("visit" + std::to_string(v));
      const double p = 1.0 / (1.0 + std::exp(-eta));
      const long yi = rng.bernoulli(p) ? 1 : 0;

      col_y.push_back(int_cell(yi));
      col_subject.push_back("s" + std::to_string(s + 1));
      col_vita.push_back(int_cell(static_cast<long>(vita)));
      col_male.push_back(int_cell(static_cast<long>(male)));
      col_height.push_back(format_double(height));
      col_stunted.push_back(int_cell(static_cast<long>(stunted)));
      for (int v = 2; v <= 6; ++v)
        col_visit[static_cast<std::size_t>(v - 2)].push_back(
            int_cell(j == v ? 1 : 0));
      col_age.push_back(format_double(age));
      prob.push_back(p);
    }
  }

  SimulatedDataset out;
  out.table = CsvTable::from_columns(
      {"y", "subject", "vita", "male", "height", "stunted", "visit2", "visit3",
       "visit4", "visit5", "visit6", "age"},
      {std::move(col_y), std::move(col_subject), std::move(col_vita),
       std::move(col_male), std::move(col_height), std::move(col_stunted),
       std::move(col_visit[0]), std::move(col_visit[1]), std::move(col_visit[2]),
       std::move(col_visit[3]), std::move(col_visit[4]), std::move(col_age)});
  out.truth.seed = cfg.seed;
  out.truth.family = "bernoulli_logit";
  out.truth.coefficients = beta;
  out.truth.coefficients["(intercept)"] = cfg.intercept;
  out.truth.coefficients["sigma_u"] = cfg.sigma_u;
  const Eigen::Index grid_n = 200;
  out.truth.curve_x.resize(grid_n);
  out.truth.curve_f.resize(grid_n);
  for (Eigen::Index g = 0; g < grid_n; ++g) {
    const double a = 7.0 * static_cast<double>(g) / static_cast<double>(grid_n - 1);
    out.truth.curve_x[g] = a;
    out.truth.curve_f[g] = f(a);
  }
  out.truth.mean_parameter =
      Eigen::Map<Eigen::VectorXd>(prob.data(), static_cast<Eigen::Index>(prob.size()));
  return out;
}

}  // namespace smcglmm
