#include "commands.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include <smcglmm/baselines.hpp>
#include <smcglmm/csv.hpp>
#include <smcglmm/diagnostics.hpp>
#include <smcglmm/simulate.hpp>

namespace smcglmm::cli {

namespace fs = std::filesystem;

namespace {

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir);
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path);
}

json truth_to_json(const TruthRecord& t) {
  json j;
  j["seed"] = t.seed;
  j["family"] = t.family;
  j["coefficients"] = t.coefficients;
  j["curve"] = json::array();
  for (Eigen::Index i = 0; i < t.curve_x.size(); ++i)
    j["curve"].push_back({{"x", t.curve_x[i]}, {"f", t.curve_f[i]}});
  return j;
}

std::vector<std::string> sample_header(const BuiltDesign& built) {
  std::vector<std::string> header = built.coef_names;
  for (const auto& b : built.block_names) header.push_back("sigma_sq:" + b);
  header.push_back("weight");
  return header;
}

// rows: states (nu then sigma^2) plus a trailing normalised weight column
Eigen::MatrixXd sample_matrix(const std::vector<ParamState>& states,
                              const Eigen::VectorXd& log_weights) {
  const Eigen::Index n = static_cast<Eigen::Index>(states.size());
  const Eigen::Index p = states.front().nu.size();
  const Eigen::Index l = states.front().sigma_sq.size();
  Eigen::MatrixXd m(n, p + l + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    m.row(i).head(p) = states[static_cast<std::size_t>(i)].nu.transpose();
    if (l > 0)
      m.row(i).segment(p, l) =
          states[static_cast<std::size_t>(i)].sigma_sq.transpose();
    m(i, p + l) = std::exp(log_weights[i]);
  }
  return m;
}

Eigen::MatrixXd chain_sample_matrix(const Eigen::MatrixXd& post_burnin) {
  Eigen::MatrixXd m(post_burnin.rows(), post_burnin.cols() + 1);
  m.leftCols(post_burnin.cols()) = post_burnin;
  m.col(post_burnin.cols())
      .setConstant(1.0 / static_cast<double>(post_burnin.rows()));
  return m;
}

void write_summary(const std::string& path,
                   const std::vector<std::string>& names,
                   const Eigen::MatrixXd& draws, const Eigen::VectorXd& weights) {
  const auto stats = summarize(draws, weights);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "parameter,mean,sd,q025,q975\n";
  for (std::size_t j = 0; j < stats.size(); ++j)
    out << names[j] << ',' << format_double(stats[j].mean) << ','
        << format_double(stats[j].sd) << ',' << format_double(stats[j].q025)
        << ',' << format_double(stats[j].q975) << '\n';
}

json trace_to_json(const RunTrace& trace, const MoveConfig& move) {
  json j;
  j["gammas"] = trace.gammas;
  j["ess"] = trace.ess;
  j["resample_stages"] = trace.resample_stages;
  json acc = json::array();
  for (Eigen::Index b = 0; b < trace.block_acceptance.rows(); ++b) {
    json row = json::array();
    for (Eigen::Index s = 0; s < trace.block_acceptance.cols(); ++s)
      row.push_back(trace.block_acceptance(b, s));
    acc.push_back(std::move(row));
  }
  j["block_acceptance"] = std::move(acc);
  json blocks = json::array();
  for (const auto& blk : move.partition) blocks.push_back(blk);
  j["partition"] = std::move(blocks);
  j["tau"] = move.tau;
  return j;
}

void write_curves(const std::string& dir, const BuiltDesign& built,
                  const CsvTable& data, const Eigen::VectorXd& nu_mean,
                  int grid_points) {
  for (std::size_t t = 0; t < built.splines.size(); ++t) {
    const auto& term = built.splines[t];
    const Eigen::VectorXd raw = data.numeric(term.predictor);
    Eigen::VectorXd grid(grid_points);
    const double lo = raw.minCoeff(), hi = raw.maxCoeff();
    for (int g = 0; g < grid_points; ++g)
      grid[g] = lo + (hi - lo) * g / static_cast<double>(grid_points - 1);
    const Eigen::VectorXd f = curve_estimate(built, t, nu_mean, grid);
    const double offset = curve_offset(built, t, nu_mean);
    Eigen::MatrixXd out(grid_points, 3);
    out.col(0) = grid;
    out.col(1) = f;
    out.col(2).setConstant(offset);
    write_csv(dir + "/curve_" + term.predictor + ".csv",
              {term.predictor, "f_centered", "offset"}, out);
  }
}

struct LoadedRun {
  std::string dir;
  std::string label;
  json config;
  std::vector<std::string> names;
  Eigen::MatrixXd draws;     // without the weight column
  Eigen::VectorXd weights;   // normalised
};

LoadedRun load_run(const std::string& dir) {
  LoadedRun run;
  run.dir = dir;
  run.label = fs::path(dir).filename().string();
  std::ifstream cfg(dir + "/config.json");
  if (!cfg) throw IoError("run " + dir + " has no config.json");
  run.config = json::parse(cfg, nullptr, false);
  if (run.config.is_discarded())
    throw IoError("run " + dir + ": config.json is not valid JSON");

  const CsvTable t = CsvTable::read_file(dir + "/sample.csv");
  const auto& header = t.header();
  if (header.empty() || header.back() != "weight")
    throw IoError("run " + dir + ": sample.csv must end with a weight column");
  run.names.assign(header.begin(), header.end() - 1);
  run.draws.resize(static_cast<Eigen::Index>(t.n_rows()),
                   static_cast<Eigen::Index>(run.names.size()));
  for (std::size_t j = 0; j < run.names.size(); ++j)
    run.draws.col(static_cast<Eigen::Index>(j)) = t.numeric(run.names[j]);
  run.weights = t.numeric("weight");
  const double total = run.weights.sum();
  if (!(total > 0.0)) throw IoError("run " + dir + ": weights sum to zero");
  run.weights /= total;
  return run;
}

Eigen::Index column_of(const LoadedRun& run, const std::string& parameter) {
  for (std::size_t j = 0; j < run.names.size(); ++j)
    if (run.names[j] == parameter) return static_cast<Eigen::Index>(j);
  throw ValidationError("parameter '" + parameter + "' missing from run " +
                        run.dir);
}

// Configuration signature used to group replicate runs: everything except
// seeds and the output directory.
std::string run_signature(json config) {
  config.erase("out_dir");
  config.erase("seed");
  for (const char* section : {"smc", "is", "mcmc", "slice"})
    if (config.contains(section)) config[section].erase("seed");
  return config.dump();
}

}  // namespace

int cmd_simulate(const SimulateArgs& args) {
  std::string out = args.out_dir;
  if (out.empty())
    out = default_out_root() + "/sim-" + args.kind + "-seed" +
          std::to_string(args.seed);
  ensure_dir(out);

  SimulatedDataset data;
  json echo;
  echo["command"] = "simulate";
  echo["kind"] = args.kind;
  echo["seed"] = args.seed;
  if (args.kind == "poisson") {
    if (args.n < 1) throw ValidationError("simulate: --n must be at least 1");
    data = simulate_poisson(args.n, args.seed);
    echo["n"] = args.n;
  } else if (args.kind == "logit") {
    LogitLongitudinalConfig cfg;
    cfg.n_subjects = args.subjects;
    cfg.max_visits = args.visits;
    cfg.sigma_u = args.sigma_u;
    cfg.seed = args.seed;
    data = simulate_logit_longitudinal(cfg);
    echo["subjects"] = args.subjects;
    echo["visits"] = args.visits;
    echo["sigma_u"] = args.sigma_u;
  } else {
    throw ValidationError("simulate: kind must be poisson or logit");
  }

  data.table.write_file(out + "/dataset.csv");
  write_json(out + "/truth.json", truth_to_json(data.truth));
  write_json(out + "/config.json", echo);
  std::cout << "wrote " << data.table.n_rows() << " rows to " << out << "\n";
  return 0;
}

int cmd_fit(const RunConfig& config) {
  const double t0 = now_seconds();
  std::string out = config.out_dir();
  if (out.empty())
    out = default_out_root() + "/fit-" + config.sampler() + "-seed" +
          std::to_string(config.seed_for(config.sampler() == "rwmh"
                                             ? "mcmc"
                                             : config.sampler()));
  ensure_dir(out);

  if (config.data_path().empty())
    throw ValidationError("fit: model.data (or --data) is required");
  const CsvTable data = CsvTable::read_file(config.data_path());
  const BuiltDesign built = build_design(data, config.design());

  ModelSpec model;
  model.y = data.numeric(config.raw.at("model").at("response").get<std::string>());
  model.C = built.C;
  model.q_beta = built.q_beta;
  model.blocks = built.blocks;
  model.sigma_beta_sq = config.sigma_beta_sq();
  model.a_u = config.a_u(built.blocks.size());
  model.family = config.family();
  model = make_model_spec(std::move(model));

  const double t_design = now_seconds();
  PqlFit fit = pql_fit(model, config.pql_options(model.p(), model.n_blocks()));
  const MoveConfig move = config.move_config(built);
  add_block_proposals(fit, move.partition);
  const double t_pql = now_seconds();
  if (!fit.converged)
    std::cerr << "note: PQL did not converge in "
              << fit.iterations << " iterations; using the last iterate\n";

  const std::string sampler = config.sampler();
  json meta;
  meta["sampler"] = sampler;
  meta["pql"] = {{"converged", fit.converged}, {"iterations", fit.iterations}};

  const auto header = sample_header(built);
  std::vector<std::string> names(header.begin(), header.end() - 1);

  if (sampler == "smc") {
    SmcConfig smc_cfg = config.smc_config(built);
    smc_cfg.move = move;
    const SmcResult res = run(model, fit, smc_cfg);
    const Eigen::MatrixXd sample =
        sample_matrix(res.system.states, res.system.log_weights);
    write_csv(out + "/sample.csv", header, sample);
    write_summary(out + "/summary.csv", names,
                  sample.leftCols(sample.cols() - 1), sample.col(sample.cols() - 1));
    write_json(out + "/run_trace.json", trace_to_json(res.trace, move));

    Eigen::MatrixXd ess_tr(static_cast<Eigen::Index>(res.trace.ess.size()), 4);
    for (std::size_t s = 0; s < res.trace.ess.size(); ++s) {
      const auto i = static_cast<Eigen::Index>(s);
      ess_tr(i, 0) = static_cast<double>(s + 1);
      ess_tr(i, 1) = res.trace.gammas[s + 1];
      ess_tr(i, 2) = res.trace.ess[s];
      ess_tr(i, 3) = 0.0;
    }
    for (int s : res.trace.resample_stages) ess_tr(s - 1, 3) = 1.0;
    write_csv(out + "/ess_trace.csv", {"stage", "gamma", "ess", "resampled"},
              ess_tr);

    const auto stats = summarize(sample.leftCols(sample.cols() - 1),
                                 sample.col(sample.cols() - 1));
    Eigen::VectorXd nu_mean(model.p());
    for (Eigen::Index j = 0; j < model.p(); ++j) nu_mean[j] = stats[static_cast<std::size_t>(j)].mean;
    write_curves(out, built, data, nu_mean, 200);
  } else if (sampler == "is") {
    const ImportanceSample is =
        importance_sampler(model, fit, config.is_draws(), config.seed_for("is"));
    if (is.depleted)
      std::cerr << "warning: importance sampler is depleted (ESS/N = "
                << is.ess / static_cast<double>(config.is_draws())
                << " < 0.01); estimates are unreliable\n";
    const Eigen::MatrixXd sample = sample_matrix(is.states, is.log_weights);
    write_csv(out + "/sample.csv", header, sample);
    write_summary(out + "/summary.csv", names,
                  sample.leftCols(sample.cols() - 1), sample.col(sample.cols() - 1));
    meta["is"] = {{"ess", is.ess}, {"depleted", is.depleted}};

    const auto stats = summarize(sample.leftCols(sample.cols() - 1),
                                 sample.col(sample.cols() - 1));
    Eigen::VectorXd nu_mean(model.p());
    for (Eigen::Index j = 0; j < model.p(); ++j) nu_mean[j] = stats[static_cast<std::size_t>(j)].mean;
    write_curves(out, built, data, nu_mean, 200);
  } else if (sampler == "rwmh" || sampler == "slice") {
    ChainOutput chain;
    if (sampler == "rwmh") {
      chain = rwmh_chain(model, fit, move, config.mcmc_iters(),
                         config.mcmc_burnin(), config.seed_for("mcmc"));
      meta["mcmc"] = {{"iters", config.mcmc_iters()},
                      {"burnin", config.mcmc_burnin()}};
      json acc = json::array();
      for (Eigen::Index b = 0; b < chain.accept_rate.size(); ++b)
        acc.push_back(chain.accept_rate[b]);
      meta["mcmc"]["block_accept_rate"] = std::move(acc);
    } else {
      chain = slice_sampler(model, fit, config.slice_iters(),
                            config.slice_burnin(), config.slice_width(),
                            config.seed_for("slice"));
      meta["slice"] = {{"iters", config.slice_iters()},
                       {"burnin", config.slice_burnin()},
                       {"width", config.slice_width()}};
    }
    const Eigen::MatrixXd sample = chain_sample_matrix(chain.post_burnin());
    write_csv(out + "/sample.csv", header, sample);
    write_summary(out + "/summary.csv", names,
                  sample.leftCols(sample.cols() - 1), sample.col(sample.cols() - 1));

    const auto stats = summarize(sample.leftCols(sample.cols() - 1),
                                 sample.col(sample.cols() - 1));
    Eigen::VectorXd nu_mean(model.p());
    for (Eigen::Index j = 0; j < model.p(); ++j) nu_mean[j] = stats[static_cast<std::size_t>(j)].mean;
    write_curves(out, built, data, nu_mean, 200);
  } else {
    throw ValidationError("unknown sampler '" + sampler + "'");
  }

  const double t_done = now_seconds();
  meta["timings_seconds"] = {{"design_and_io", t_design - t0},
                             {"pql", t_pql - t_design},
                             {"sampling_and_output", t_done - t_pql},
                             {"total", t_done - t0}};
  meta["version"] = "0.1.0";
  write_json(out + "/metadata.json", meta);
  write_json(out + "/config.json", config.raw);
  std::cout << "fit (" << sampler << ") written to " << out << "\n";
  return 0;
}

int cmd_compare(const CompareArgs& args) {
  if (args.run_dirs.size() < 2)
    throw ValidationError("compare: need at least 2 completed runs");
  if (args.parameter.empty())
    throw ValidationError("compare: --parameter is required");
  std::string out = args.out_dir;
  if (out.empty()) out = default_out_root() + "/compare-" + args.parameter;
  ensure_dir(out);

  std::vector<LoadedRun> runs;
  runs.reserve(args.run_dirs.size());
  for (const auto& dir : args.run_dirs) runs.push_back(load_run(dir));
  for (const auto& run : runs) (void)column_of(run, args.parameter);

  // QQ pairs of every run against the first
  const Eigen::VectorXd base =
      runs[0].draws.col(column_of(runs[0], args.parameter));
  for (std::size_t r = 1; r < runs.size(); ++r) {
    const Eigen::VectorXd other =
        runs[r].draws.col(column_of(runs[r], args.parameter));
    const auto pairs = qq_pairs(base, other, args.n_quantiles);
    Eigen::MatrixXd table(static_cast<Eigen::Index>(pairs.size()), 2);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      table(static_cast<Eigen::Index>(i), 0) = pairs[i].first;
      table(static_cast<Eigen::Index>(i), 1) = pairs[i].second;
    }
    write_csv(out + "/qq_" + args.parameter + "_" + runs[0].label + "_vs_" +
                  runs[r].label + ".csv",
              {runs[0].label, runs[r].label}, table);
  }

  // Overlaid kernel density estimates on a common grid
  double lo = 1e300, hi = -1e300;
  for (const auto& run : runs) {
    const Eigen::VectorXd col = run.draws.col(column_of(run, args.parameter));
    lo = std::min(lo, col.minCoeff());
    hi = std::max(hi, col.maxCoeff());
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
  Eigen::VectorXd grid(args.grid_points);
  for (int g = 0; g < args.grid_points; ++g)
    grid[g] = lo + (hi - lo) * g / static_cast<double>(args.grid_points - 1);
  Eigen::MatrixXd kde_table(args.grid_points,
                            static_cast<Eigen::Index>(runs.size()) + 1);
  kde_table.col(0) = grid;
  std::vector<std::string> kde_header{args.parameter};
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const Eigen::VectorXd col = runs[r].draws.col(column_of(runs[r], args.parameter));
    kde_table.col(static_cast<Eigen::Index>(r) + 1) =
        kde(col, runs[r].weights, grid);
    kde_header.push_back(runs[r].label);
  }
  write_csv(out + "/kde_" + args.parameter + ".csv", kde_header, kde_table);

  // Cross-run ESS per replicate group (same config signature modulo seeds)
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t r = 0; r < runs.size(); ++r)
    groups[run_signature(runs[r].config)].push_back(r);

  std::ofstream ctab(out + "/carpenter_" + args.parameter + ".csv");
  if (!ctab) throw IoError("cannot write carpenter table");
  ctab << "group,replicates,carpenter_ess,identical_runs\n";
  int group_id = 0;
  for (const auto& [sig, members] : groups) {
    ++group_id;
    std::string label = "group" + std::to_string(group_id);
    if (!members.empty()) {
      const json& c = runs[members[0]].config;
      if (c.contains("sampler")) {
        label = c.at("sampler").get<std::string>();
        if (label == "smc" && c.contains("smc"))
          label += "-S" + std::to_string(c.at("smc").value("n_stages", 0));
      }
    }
    if (members.size() < 2) {
      std::cout << "notice: run group '" << label
                << "' has a single replicate; cross-run ESS needs R >= 2\n";
      continue;
    }
    std::vector<double> means, vars;
    for (std::size_t r : members) {
      const Eigen::VectorXd col =
          runs[r].draws.col(column_of(runs[r], args.parameter));
      const double m = runs[r].weights.dot(col);
      means.push_back(m);
      vars.push_back((runs[r].weights.array() * (col.array() - m).square()).sum());
    }
    const CarpenterEss c = carpenter_ess(means, vars);
    ctab << label << ',' << members.size() << ',' << format_double(c.value)
         << ',' << (c.identical_runs ? 1 : 0) << '\n';
  }
  std::cout << "comparison written to " << out << "\n";
  return 0;
}

}  // namespace smcglmm::cli
