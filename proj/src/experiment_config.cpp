#include "sgldlab/experiment_config.hpp"

#include <set>

#include <fmt/format.h>
#include <json.hpp>

#include "sgldlab/csv.hpp"
#include "sgldlab/error.hpp"

namespace sgldlab {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

// Reads one JSON object, remembering which keys were consumed so that the
// rest can be rejected as unknown.
class Block {
 public:
  Block(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(fmt::format("'{}' must be an object", path_));
  }

  ~Block() noexcept(false) {
    if (std::uncaught_exceptions()) return;
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key()))
        throw ConfigError(fmt::format("unknown key '{}.{}'", path_, it.key()));
  }

  bool has(const std::string& k) {
    used_.insert(k);
    return j_.contains(k) && !j_.at(k).is_null();
  }

  const json& at(const std::string& k) { return j_.at(k); }
  std::string key(const std::string& k) const { return path_ + "." + k; }

  void num(const std::string& k, double& out) {
    if (!has(k)) return;
    if (!at(k).is_number()) throw ConfigError(fmt::format("'{}' must be a number", key(k)));
    out = at(k).get<double>();
  }
  void num(const std::string& k, std::optional<double>& out) {
    if (!has(k)) return;
    double v = 0.0;
    num(k, v);
    out = v;
  }
  void count(const std::string& k, std::size_t& out) {
    if (!has(k)) return;
    if (!at(k).is_number_integer() || at(k).get<long long>() < 0)
      throw ConfigError(fmt::format("'{}' must be a nonnegative integer", key(k)));
    out = at(k).get<std::size_t>();
  }
  void flag(const std::string& k, bool& out) {
    if (!has(k)) return;
    if (!at(k).is_boolean()) throw ConfigError(fmt::format("'{}' must be true or false", key(k)));
    out = at(k).get<bool>();
  }
  void text(const std::string& k, std::string& out) {
    if (!has(k)) return;
    if (!at(k).is_string()) throw ConfigError(fmt::format("'{}' must be a string", key(k)));
    out = at(k).get<std::string>();
  }
  template <class T>
  void list(const std::string& k, std::vector<T>& out) {
    if (!has(k)) return;
    if (!at(k).is_array()) throw ConfigError(fmt::format("'{}' must be an array", key(k)));
    try {
      out = at(k).get<std::vector<T>>();
    } catch (const json::exception&) {
      throw ConfigError(fmt::format("'{}' has elements of the wrong type", key(k)));
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("invalid config: " + what);
}

void check(const ExperimentConfig& c) {
  static const std::set<std::string> families = {"quadratic", "logistic_ridge", "nonconvex_ridge"};
  static const std::set<std::string> bounds = {"xu_raginsky",   "pensia",     "time_independent",
                                               "strongly_convex", "farghly_shape", "subexp_gen",
                                               "excess_risk"};
  require(families.count(c.loss.family), "loss.family must be quadratic, logistic_ridge or nonconvex_ridge");
  require(c.loss.d >= 1, "loss.d must be at least 1");
  require(c.loss.data_radius > 0, "loss.data_radius must be positive");
  require(c.sgld.eta >= 0, "sgld.eta must be nonnegative");
  require(c.sgld.beta > 0, "sgld.beta must be positive");
  require(c.sgld.s_sq > 0, "sgld.s_sq must be positive");
  require(c.sgld.k >= 1 && c.sgld.k <= c.data.n, "sgld.k must satisfy 1 <= k <= data.n");
  require(c.sgld.lsi_mode == "auto" || c.sgld.lsi_mode == "general_dissipative" ||
              c.sgld.lsi_mode == "strongly_convex",
          "sgld.lsi_mode must be auto, general_dissipative or strongly_convex");
  require(c.sgld.n_chains >= 1 && c.sgld.n_datasets >= 1, "sgld.n_chains and sgld.n_datasets must be positive");
  require(c.data.n >= 2, "data.n must be at least 2");
  require(c.data.test_pool_factor >= 1, "data.test_pool_factor must be positive");
  require(!c.data.radius || (*c.data.radius > 0 && *c.data.radius <= c.loss.data_radius),
          "data.radius must be in (0, loss.data_radius]");
  for (const auto& b : c.bounds.enabled) require(bounds.count(b), "unknown bound '" + b + "'");
  require(!c.bounds.sigma_g_sq || *c.bounds.sigma_g_sq > 0, "bounds.sigma_g_sq must be positive");
  require(c.estimators.eval_loss == "surrogate" || c.estimators.eval_loss == "same_as_f",
          "estimators.eval_loss must be surrogate or same_as_f");
  require(c.estimators.n_trials != 1, "estimators.n_trials must be 0 or at least 2");
  require(c.estimators.lambda_grid_size >= 2, "estimators.lambda_grid_size must be at least 2");
  for (const int p : c.estimators.p_list)
    require(p >= 2 && p <= 12 && p % 2 == 0, "estimators.p_list entries must be even and in [2, 12]");
  require(c.certify.n_samples >= 1, "certify.n_samples must be positive");
  require(c.fp.n_cells >= 64, "fp.n_cells must be at least 64");
  require(c.fp.T_end > 0, "fp.T_end must be positive");
  require(c.fp.dt >= 0, "fp.dt must be nonnegative");
  require(c.fp.record_every >= 1, "fp.record_every must be positive");
  require(c.fp.n >= 1, "fp.n must be positive");
  require(c.verify.oracle_pairs >= 2, "verify.oracle_pairs must be at least 2");
  for (const auto& f : c.output.formats) require(f == "csv" || f == "json", "output.formats entries must be csv or json");
}

}  // namespace

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

ExperimentConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  ExperimentConfig c;
  {
    Block top(root, "config");
    if (top.has("seed")) {
      if (!top.at("seed").is_number_unsigned())
        throw ConfigError("'config.seed' must be a nonnegative integer");
      c.seed = top.at("seed").get<std::uint64_t>();
    }
    if (top.has("loss")) {
      Block b(top.at("loss"), "loss");
      b.text("family", c.loss.family);
      b.count("d", c.loss.d);
      b.num("data_radius", c.loss.data_radius);
      b.num("R", c.loss.R);
      b.num("lambda", c.loss.lambda);
      b.num("a", c.loss.a);
      b.num("teacher_scale", c.loss.teacher_scale);
      if (b.has("claimed")) {
        Block cl(b.at("claimed"), "loss.claimed");
        cl.num("M", c.loss.claimed_M);
        cl.num("m", c.loss.claimed_m);
        cl.num("b", c.loss.claimed_b);
        cl.num("A", c.loss.claimed_A);
        cl.num("R", c.loss.claimed_R);
      }
    }
    if (top.has("sgld")) {
      Block b(top.at("sgld"), "sgld");
      b.num("eta", c.sgld.eta);
      b.num("beta", c.sgld.beta);
      b.count("k", c.sgld.k);
      b.count("T", c.sgld.T);
      b.num("s_sq", c.sgld.s_sq);
      b.flag("strict_mode", c.sgld.strict_mode);
      b.text("lsi_mode", c.sgld.lsi_mode);
      b.num("lsi_universal_C", c.sgld.lsi_universal_C);
      b.count("n_chains", c.sgld.n_chains);
      b.count("n_datasets", c.sgld.n_datasets);
    }
    if (top.has("data")) {
      Block b(top.at("data"), "data");
      b.num("radius", c.data.radius);
      b.count("n", c.data.n);
      b.count("test_pool_factor", c.data.test_pool_factor);
    }
    if (top.has("bounds")) {
      Block b(top.at("bounds"), "bounds");
      b.list("enabled", c.bounds.enabled);
      b.num("sigma_g_sq", c.bounds.sigma_g_sq);
      b.num("farghly_C1", c.bounds.farghly_C1);
      b.num("farghly_C2", c.bounds.farghly_C2);
      b.flag("empirical_D1", c.bounds.empirical_D1);
      std::vector<long long> grid;
      b.list("T_grid", grid);
      for (const auto T : grid) {
        require(T >= 0, "bounds.T_grid entries must be nonnegative");
        c.bounds.T_grid.push_back(static_cast<std::size_t>(T));
      }
      if (b.has("heuristics")) {
        Block h(b.at("heuristics"), "bounds.heuristics");
        auto& hc = c.bounds.heuristics;
        h.num("lsi_universal_C", hc.lsi_universal_C);
        h.num("moment_universal_C", hc.moment_universal_C);
        h.num("C1_prime", hc.C1_prime);
        h.num("C2_prime", hc.C2_prime);
        h.num("C0_tilde", hc.C0_tilde);
        h.num("C1_tilde", hc.C1_tilde);
      }
    }
    if (top.has("estimators")) {
      Block b(top.at("estimators"), "estimators");
      b.count("n_trials", c.estimators.n_trials);
      b.text("eval_loss", c.estimators.eval_loss);
      b.count("variance_resamples", c.estimators.variance_resamples);
      b.count("stability_pairs", c.estimators.stability_pairs);
      b.count("mgf_samples", c.estimators.mgf_samples);
      b.count("lambda_grid_size", c.estimators.lambda_grid_size);
      b.count("bootstrap", c.estimators.bootstrap);
      b.list("p_list", c.estimators.p_list);
    }
    if (top.has("certify")) {
      Block b(top.at("certify"), "certify");
      b.count("n_samples", c.certify.n_samples);
      b.count("gradient_points", c.certify.gradient_points);
    }
    if (top.has("fp")) {
      Block b(top.at("fp"), "fp");
      b.count("n_cells", c.fp.n_cells);
      b.num("T_end", c.fp.T_end);
      b.num("dt", c.fp.dt);
      b.count("record_every", c.fp.record_every);
      b.flag("refine", c.fp.refine);
      b.count("n", c.fp.n);
    }
    if (top.has("verify")) {
      Block b(top.at("verify"), "verify");
      b.flag("oracle", c.verify.oracle);
      b.flag("fp", c.verify.fp);
      b.count("oracle_T", c.verify.oracle_T);
      b.count("oracle_pairs", c.verify.oracle_pairs);
      b.flag("falsification_control", c.verify.falsification_control);
    }
    if (top.has("output")) {
      Block b(top.at("output"), "output");
      b.text("dir", c.output.dir);
      b.list("formats", c.output.formats);
      b.count("max_states", c.output.max_states);
      b.flag("chain_traces", c.output.chain_traces);
    }
  }
  check(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) { return parse_config(read_text_file(path)); }

std::unique_ptr<LossModel> ExperimentConfig::make_model() const {
  std::unique_ptr<LossModel> m;
  try {
    if (loss.family == "quadratic")
      m = make_quadratic(loss.R, loss.data_radius, loss.d);
    else if (loss.family == "logistic_ridge")
      m = make_logistic_ridge(loss.lambda, loss.data_radius, loss.d, loss.teacher_scale);
    else
      m = make_nonconvex_ridge(loss.lambda, loss.a, loss.data_radius, loss.d);
    LossConstants c = m->constants();
    if (loss.claimed_M) c.M = *loss.claimed_M;
    if (loss.claimed_m) c.m = *loss.claimed_m;
    if (loss.claimed_b) c.b = *loss.claimed_b;
    if (loss.claimed_A) c.A = *loss.claimed_A;
    if (loss.claimed_R) c.R = *loss.claimed_R;
    c.validate();
    m->set_constants(c);
  } catch (const InvalidParameter& e) {
    throw ConfigError(std::string("invalid loss block: ") + e.what());
  }
  return m;
}

std::unique_ptr<LossModel> ExperimentConfig::make_model_1d() const {
  ExperimentConfig one = *this;
  one.loss.d = 1;
  return one.make_model();
}

LsiMode ExperimentConfig::lsi_mode(const LossConstants& lc) const {
  if (sgld.lsi_mode == "auto") return lc.R ? LsiMode::strongly_convex : LsiMode::general_dissipative;
  return lsi_mode_from_string(sgld.lsi_mode);
}

SGLDConfig ExperimentConfig::sgld_config(const LossModel& model) const {
  SGLDConfig s;
  s.eta = sgld.eta;
  s.beta = sgld.beta;
  s.k = sgld.k;
  s.n = data.n;
  s.T = sgld.T;
  s.d = model.dim();
  s.s_sq = sgld.s_sq;
  s.seed = seed;
  s.strict_mode = sgld.strict_mode;
  s.lsi_mode = lsi_mode(model.constants());
  s.lsi_universal_C = sgld.lsi_universal_C;
  return s;
}

double ExperimentConfig::data_radius() const { return data.radius.value_or(loss.data_radius); }

EvalLoss ExperimentConfig::eval_loss() const { return eval_loss_from_string(estimators.eval_loss); }

std::optional<double> ExperimentConfig::sigma_g_sq() const {
  if (bounds.sigma_g_sq) return bounds.sigma_g_sq;
  return eval_loss_sigma_sq(eval_loss());
}

std::string ExperimentConfig::canonical_json() const {
  auto opt = [](const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); };
  ojson j;
  j["seed"] = seed;
  j["loss"] = {{"family", loss.family},
               {"d", loss.d},
               {"data_radius", loss.data_radius},
               {"R", loss.R},
               {"lambda", loss.lambda},
               {"a", loss.a},
               {"teacher_scale", loss.teacher_scale},
               {"claimed",
                {{"M", opt(loss.claimed_M)},
                 {"m", opt(loss.claimed_m)},
                 {"b", opt(loss.claimed_b)},
                 {"A", opt(loss.claimed_A)},
                 {"R", opt(loss.claimed_R)}}}};
  j["sgld"] = {{"eta", sgld.eta},
               {"beta", sgld.beta},
               {"k", sgld.k},
               {"T", sgld.T},
               {"s_sq", sgld.s_sq},
               {"strict_mode", sgld.strict_mode},
               {"lsi_mode", sgld.lsi_mode},
               {"lsi_universal_C", sgld.lsi_universal_C},
               {"n_chains", sgld.n_chains},
               {"n_datasets", sgld.n_datasets}};
  j["data"] = {{"radius", opt(data.radius)}, {"n", data.n}, {"test_pool_factor", data.test_pool_factor}};
  const auto& h = bounds.heuristics;
  j["bounds"] = {{"enabled", bounds.enabled},
                 {"sigma_g_sq", opt(bounds.sigma_g_sq)},
                 {"farghly_C1", bounds.farghly_C1},
                 {"farghly_C2", bounds.farghly_C2},
                 {"empirical_D1", bounds.empirical_D1},
                 {"T_grid", bounds.T_grid},
                 {"heuristics",
                  {{"lsi_universal_C", h.lsi_universal_C},
                   {"moment_universal_C", h.moment_universal_C},
                   {"C1_prime", h.C1_prime},
                   {"C2_prime", h.C2_prime},
                   {"C0_tilde", h.C0_tilde},
                   {"C1_tilde", h.C1_tilde}}}};
  j["estimators"] = {{"n_trials", estimators.n_trials},
                     {"eval_loss", estimators.eval_loss},
                     {"variance_resamples", estimators.variance_resamples},
                     {"stability_pairs", estimators.stability_pairs},
                     {"mgf_samples", estimators.mgf_samples},
                     {"lambda_grid_size", estimators.lambda_grid_size},
                     {"bootstrap", estimators.bootstrap},
                     {"p_list", estimators.p_list}};
  j["certify"] = {{"n_samples", certify.n_samples}, {"gradient_points", certify.gradient_points}};
  j["fp"] = {{"n_cells", fp.n_cells}, {"T_end", fp.T_end},   {"dt", fp.dt},
             {"record_every", fp.record_every}, {"refine", fp.refine}, {"n", fp.n}};
  j["verify"] = {{"oracle", verify.oracle},
                 {"fp", verify.fp},
                 {"oracle_T", verify.oracle_T},
                 {"oracle_pairs", verify.oracle_pairs},
                 {"falsification_control", verify.falsification_control}};
  j["output"] = {{"dir", output.dir},
                 {"formats", output.formats},
                 {"max_states", output.max_states},
                 {"chain_traces", output.chain_traces}};
  return j.dump(2);
}

std::string ExperimentConfig::hash() const {
  // The output directory does not change results, so it is left out.
  ExperimentConfig c = *this;
  c.output.dir.clear();
  return fmt::format("{:016x}", fnv1a64(c.canonical_json()));
}

}  // namespace sgldlab
