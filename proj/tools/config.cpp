#include "config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>

#include <smcglmm/errors.hpp>

namespace smcglmm::cli {

json default_config() {
  return json{
      {"model",
       {{"data", ""},
        {"family", "poisson"},
        {"response", "y"},
        {"intercept", true},
        {"fixed", json::array()},
        {"random_intercepts", json::array()},
        {"splines", json::array()},
        {"sigma_beta_sq", 1e8},
        {"a_u", 0.01}}},
      {"pql", {{"max_outer", 50}, {"tol", 1e-6}, {"inflate", 1.0}}},
      {"sampler", "smc"},
      {"smc",
       {{"n_particles", 1000},
        {"n_stages", 105},
        {"resample_threshold", 0.5},
        {"partition", "singleton"},
        {"tau", "default"},
        {"threads", 0}}},
      {"is", {{"n", 5000}}},
      {"mcmc", {{"iters", 20000}, {"burnin", 10000}}},
      {"slice", {{"iters", 20000}, {"burnin", 10000}, {"width", 1.0}}},
      {"seed", 1},
      {"out_dir", ""}};
}

json preset_config(const std::string& name) {
  json j = default_config();
  if (name == "paper-4.1") {
    j["model"]["family"] = "poisson";
    j["model"]["response"] = "y";
    j["model"]["fixed"] = json::array({{{"name", "x1"}, {"type", "binary"}}});
    j["model"]["splines"] =
        json::array({{{"predictor", "x2"}, {"knots", 10}}});
    j["smc"]["n_particles"] = 1000;
    j["smc"]["n_stages"] = 105;
    j["smc"]["partition"] = "singleton";
    j["smc"]["tau"] = 1.0 / 3.0;
    j["mcmc"]["iters"] = 20000;
    j["mcmc"]["burnin"] = 10000;
    j["slice"]["iters"] = 20000;
    j["slice"]["burnin"] = 10000;
    j["is"]["n"] = 5000;
    return j;
  }
  if (name == "paper-4.2-structure") {
    j["model"]["family"] = "bernoulli_logit";
    j["model"]["response"] = "y";
    j["model"]["fixed"] = json::array({
        {{"name", "vita"}, {"type", "binary"}},
        {{"name", "male"}, {"type", "binary"}},
        {{"name", "height"}, {"type", "continuous"}},
        {{"name", "stunted"}, {"type", "binary"}},
        {{"name", "visit2"}, {"type", "binary"}},
        {{"name", "visit3"}, {"type", "binary"}},
        {{"name", "visit4"}, {"type", "binary"}},
        {{"name", "visit5"}, {"type", "binary"}},
        {{"name", "visit6"}, {"type", "binary"}},
    });
    j["model"]["random_intercepts"] = json::array({"subject"});
    j["model"]["splines"] =
        json::array({{{"predictor", "age"}, {"knots", 20}}});
    j["smc"]["n_particles"] = 1000;
    j["smc"]["n_stages"] = 305;
    j["smc"]["partition"] = "singleton";
    j["smc"]["tau"] = {{"fixed", 3.0}, {"random", 6.0}, {"spline", 5.0}};
    j["mcmc"]["iters"] = 10000;
    j["mcmc"]["burnin"] = 5000;
    j["slice"]["iters"] = 10000;
    j["slice"]["burnin"] = 5000;
    j["is"]["n"] = 5000;
    return j;
  }
  throw ValidationError("unknown preset '" + name + "'");
}

void apply_dotted_override(json& j, const std::string& key_eq_value) {
  const auto eq = key_eq_value.find('=');
  if (eq == std::string::npos)
    throw ValidationError("override must look like section.key=value: " +
                          key_eq_value);
  const std::string path = key_eq_value.substr(0, eq);
  const std::string value = key_eq_value.substr(eq + 1);

  json* node = &j;
  std::size_t start = 0;
  for (;;) {
    const auto dot = path.find('.', start);
    const std::string part = path.substr(
        start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ValidationError("bad override path: " + path);
    if (dot == std::string::npos) {
      json parsed = json::parse(value, nullptr, false);
      (*node)[part] = parsed.is_discarded() ? json(value) : parsed;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

RunConfig resolve_config(const std::string& config_path,
                         const std::string& preset,
                         const std::vector<std::string>& overrides) {
  json j = preset.empty() ? default_config() : preset_config(preset);
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw IoError("cannot open config " + config_path);
    json file = json::parse(in, nullptr, false);
    if (file.is_discarded())
      throw ValidationError("config " + config_path + " is not valid JSON");
    j.merge_patch(file);
  }
  for (const auto& o : overrides) apply_dotted_override(j, o);
  return RunConfig{std::move(j)};
}

std::string default_out_root() {
  if (const char* env = std::getenv("SMCGLMM_OUT_ROOT")) return env;
  return "runs";
}

std::string RunConfig::data_path() const {
  return raw.at("model").value("data", "");
}

std::string RunConfig::sampler() const { return raw.value("sampler", "smc"); }

std::string RunConfig::out_dir() const { return raw.value("out_dir", ""); }

std::uint64_t RunConfig::seed_for(const std::string& section) const {
  if (raw.contains(section) && raw.at(section).contains("seed"))
    return raw.at(section).at("seed").get<std::uint64_t>();
  return raw.value("seed", std::uint64_t{1});
}

Family RunConfig::family() const {
  const std::string f = raw.at("model").value("family", "poisson");
  if (f == "poisson") return Family::poisson;
  if (f == "bernoulli_logit" || f == "logit" || f == "binomial")
    return Family::bernoulli_logit;
  throw ValidationError("unknown family '" + f + "'");
}

DesignConfig RunConfig::design() const {
  const json& m = raw.at("model");
  DesignConfig d;
  d.intercept = m.value("intercept", true);
  for (const auto& t : m.value("fixed", json::array())) {
    FixedTermSpec spec;
    spec.name = t.at("name").get<std::string>();
    const std::string ty = t.value("type", "continuous");
    if (ty == "binary")
      spec.type = PredictorType::binary;
    else if (ty == "continuous")
      spec.type = PredictorType::continuous;
    else
      throw ValidationError("unknown predictor type '" + ty + "'");
    d.fixed.push_back(std::move(spec));
  }
  for (const auto& g : m.value("random_intercepts", json::array()))
    d.random_intercepts.push_back(g.get<std::string>());
  for (const auto& s : m.value("splines", json::array()))
    d.splines.push_back({s.at("predictor").get<std::string>(),
                         s.value("knots", 10)});
  return d;
}

double RunConfig::sigma_beta_sq() const {
  return raw.at("model").value("sigma_beta_sq", 1e8);
}

std::vector<double> RunConfig::a_u(std::size_t n_blocks) const {
  const json& a = raw.at("model").at("a_u");
  std::vector<double> out;
  if (a.is_number()) {
    out.assign(n_blocks, a.get<double>());
  } else if (a.is_array()) {
    for (const auto& v : a) out.push_back(v.get<double>());
    if (out.size() != n_blocks)
      throw ValidationError("model.a_u array length must match block count");
  } else {
    throw ValidationError("model.a_u must be a number or array");
  }
  return out;
}

PqlOptions RunConfig::pql_options(Eigen::Index p, Eigen::Index n_blocks) const {
  PqlOptions opts;
  const json& q = raw.at("pql");
  opts.max_outer = q.value("max_outer", 50);
  opts.tol = q.value("tol", 1e-6);
  opts.inflate = q.value("inflate", 1.0);
  if (raw.contains("init")) {
    const json& init = raw.at("init");
    if (init.contains("nu")) {
      Eigen::VectorXd nu(p);
      const auto& arr = init.at("nu");
      if (static_cast<Eigen::Index>(arr.size()) != p)
        throw ValidationError("init.nu length must equal the coefficient count");
      for (Eigen::Index i = 0; i < p; ++i) nu[i] = arr[static_cast<std::size_t>(i)];
      opts.init_nu = nu;
    }
    if (init.contains("sigma_sq")) {
      const auto& arr = init.at("sigma_sq");
      if (static_cast<Eigen::Index>(arr.size()) != n_blocks)
        throw ValidationError("init.sigma_sq length must equal the block count");
      Eigen::VectorXd s(n_blocks);
      for (Eigen::Index i = 0; i < n_blocks; ++i)
        s[i] = arr[static_cast<std::size_t>(i)];
      opts.init_sigma_sq = s;
    }
  }
  return opts;
}

namespace {

enum class ColumnClass { fixed, random_intercept, spline };

ColumnClass classify_block(const BuiltDesign& built, std::size_t block) {
  return built.block_names[block].rfind("spline:", 0) == 0
             ? ColumnClass::spline
             : ColumnClass::random_intercept;
}

}  // namespace

MoveConfig RunConfig::move_config(const BuiltDesign& built) const {
  const Eigen::Index p = built.C.cols();
  const json& s = raw.at("smc");
  MoveConfig mc;

  const json& part = s.at("partition");
  if (part.is_string() && part.get<std::string>() == "singleton") {
    mc = singleton_move_config(p);
  } else if (part.is_string() && part.get<std::string>() == "single") {
    mc = single_block_move_config(p);
  } else if (part.is_array()) {
    for (const auto& blk : part) {
      std::vector<Eigen::Index> ids;
      for (const auto& v : blk) ids.push_back(v.get<Eigen::Index>());
      mc.partition.push_back(std::move(ids));
      mc.tau.push_back(default_tau(mc.partition.back().size()));
    }
  } else {
    throw ValidationError("smc.partition must be 'singleton', 'single', or a list");
  }

  const json& tau = s.at("tau");
  if (tau.is_string() && tau.get<std::string>() == "default") {
    // keep 2.4/sqrt(|I|)
  } else if (tau.is_number()) {
    for (double& t : mc.tau) t = tau.get<double>();
  } else if (tau.is_array()) {
    if (tau.size() != mc.tau.size())
      throw ValidationError("smc.tau array length must match the block count");
    for (std::size_t b = 0; b < mc.tau.size(); ++b) mc.tau[b] = tau[b];
  } else if (tau.is_object()) {
    // per column-class multipliers, e.g. {"fixed":3,"random":6,"spline":5}
    const double t_fixed = tau.value("fixed", default_tau(1));
    const double t_random = tau.value("random", default_tau(1));
    const double t_spline = tau.value("spline", default_tau(1));
    for (std::size_t b = 0; b < mc.partition.size(); ++b) {
      const Eigen::Index lead = mc.partition[b].front();
      if (lead < built.q_beta) {
        mc.tau[b] = t_fixed;
        continue;
      }
      for (std::size_t l = 0; l < built.blocks.size(); ++l) {
        const RandomBlock& rb = built.blocks[l];
        if (lead >= rb.offset && lead < rb.offset + rb.size) {
          mc.tau[b] = classify_block(built, l) == ColumnClass::spline
                          ? t_spline
                          : t_random;
          break;
        }
      }
    }
  } else {
    throw ValidationError("smc.tau must be a number, list, class map, or 'default'");
  }
  validate_move_config(mc, p);
  return mc;
}

SmcConfig RunConfig::smc_config(const BuiltDesign& built) const {
  const json& s = raw.at("smc");
  SmcConfig cfg;
  cfg.n_particles = s.value("n_particles", 1000);
  cfg.n_stages = s.value("n_stages", 105);
  cfg.resample_threshold = s.value("resample_threshold", 0.5);
  cfg.seed = seed_for("smc");
  cfg.threads = s.value("threads", 0);
  cfg.move = move_config(built);
  return cfg;
}

int RunConfig::mcmc_iters() const { return raw.at("mcmc").value("iters", 20000); }
int RunConfig::mcmc_burnin() const { return raw.at("mcmc").value("burnin", 10000); }
int RunConfig::slice_iters() const { return raw.at("slice").value("iters", 20000); }
int RunConfig::slice_burnin() const { return raw.at("slice").value("burnin", 10000); }
double RunConfig::slice_width() const { return raw.at("slice").value("width", 1.0); }
Eigen::Index RunConfig::is_draws() const { return raw.at("is").value("n", 5000); }
int RunConfig::threads() const { return raw.at("smc").value("threads", 0); }

}  // namespace smcglmm::cli
