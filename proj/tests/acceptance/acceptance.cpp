// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "oracles/oracles.hpp"
#include "sgldlab/bounds.hpp"
#include "sgldlab/certify.hpp"
#include "sgldlab/constants.hpp"
#include "sgldlab/data.hpp"
#include "sgldlab/estimators.hpp"
#include "sgldlab/experiment_config.hpp"
#include "sgldlab/fokker_planck.hpp"
#include "sgldlab/gaussian_oracle.hpp"
#include "sgldlab/loss_models.hpp"
#include "sgldlab/rng.hpp"
#include "sgldlab/sgld.hpp"

namespace fs = std::filesystem;
using namespace sgldlab;

namespace {

// Pinned tolerances and limits.
constexpr std::size_t kCertifySamples = 100000;
constexpr double kCertifyTol = 1e-9;
constexpr double kCertifySeconds = 10.0;
constexpr std::size_t kGradPoints = 100;
constexpr double kGradRelErr = 1e-5;
constexpr double kOracleSigmas = 3.0;
constexpr double kOracleSeconds = 60.0;
constexpr double kSaturationRel = 1e-12;
constexpr double kPensiaGrowth = 100.0;
constexpr double kValiditySeconds = 300.0;
constexpr double kScalingRel = 1e-9;
constexpr double kMassTol = 1e-12;
constexpr double kGibbsCellTol = 1e-8;
constexpr double kHTheoremTol = 1e-9;
constexpr double kKlRateMaxViolations = 0.01;
constexpr double kFpSeconds = 120.0;
constexpr double kMomentGrowth = 2.0;
constexpr double kUlps = 4.0;

constexpr std::uint64_t kSeed = 20261018;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::unique_ptr<LossModel> default_model(const std::string& family) {
  return parse_config(fmt::format(R"({{"loss": {{"family": "{}"}}}})", family)).make_model();
}

const std::vector<std::string> kFamilies = {"quadratic", "logistic_ridge", "nonconvex_ridge"};

SGLDConfig quadratic_config(double eta, std::size_t k, std::size_t n, std::size_t T) {
  SGLDConfig c;
  c.eta = eta;
  c.beta = 4.0;
  c.k = k;
  c.n = n;
  c.T = T;
  c.d = 2;
  c.s_sq = 1.0;
  c.seed = kSeed;
  c.lsi_mode = LsiMode::strongly_convex;
  return c;
}

DerivedConstants derive_for(const LossModel& m, const SGLDConfig& c) {
  DeriveInputs in;
  in.eta = c.eta;
  in.beta = c.beta;
  in.d = c.d;
  in.s_sq = c.s_sq;
  in.n = c.n;
  in.k = c.k;
  in.lsi_mode = c.lsi_mode;
  return derive_constants(m.constants(), in);
}

// 1
Outcome loss_certification() {
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t violations = 0;
  std::string per;
  for (const auto& fam : kFamilies) {
    const auto m = default_model(fam);
    const auto rep = certify(*m, kCertifySamples, kSeed, kCertifyTol);
    violations += rep.total_violations();
    per += fmt::format(" {}={}", fam, rep.total_violations());
  }
  const double s = seconds_since(t0);
  return {violations == 0 && s < kCertifySeconds,
          fmt::format("{} samples/family, violations:{}, {:.2f}s (limit {}s)", kCertifySamples, per,
                      s, kCertifySeconds)};
}

// 2
Outcome gradient_correctness() {
  double worst_lib = 0.0, worst_fd = 0.0;
  for (const auto& fam : kFamilies) {
    const auto m = default_model(fam);
    worst_lib = std::max(worst_lib, max_gradient_relative_error(*m, kGradPoints, kSeed));
    // Independent central differences at points uniform in the certification box.
    const DataSampler sampler(*m);
    Rng rng(kSeed, StreamTag::test_pool, 77);
    const double half = certification_box_halfwidth(m->constants());
    Vector w(m->dim()), z(sampler.data_dim()), g(m->dim());
    for (std::size_t i = 0; i < kGradPoints; ++i) {
      for (auto& x : w) x = (2 * rng.uniform() - 1) * half;
      sampler.sample_point(rng, z);
      m->grad(w, z, g);
      const auto fd = oracle::fd_grad(*m, w, z);
      double num = 0, den = 0;
      for (std::size_t j = 0; j < g.size(); ++j) {
        num += (fd[j] - g[j]) * (fd[j] - g[j]);
        den += g[j] * g[j];
      }
      worst_fd = std::max(worst_fd, std::sqrt(num) / std::max(std::sqrt(den), 1e-8));
    }
  }
  return {worst_lib < kGradRelErr && worst_fd < kGradRelErr,
          fmt::format("max relative error {:.2e} (library check), {:.2e} (independent), limit {:.0e}",
                      worst_lib, worst_fd, kGradRelErr)};
}

// 3
Outcome oracle_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  const double R = 1.0;
  const auto m = make_quadratic(R, 1.0, 2);
  const DataSampler sampler(*m, 1.0);
  const SGLDConfig cfg = [] {
    auto c = quadratic_config(0.01, 100, 100, 5000);
    c.eta = 0.01;
    return c;
  }();
  const std::size_t chains = 500;
  const auto ens = run_ensemble(cfg, *m, sampler, chains, 1, {cfg.T + 1, false, false});
  const Vector zbar = ens.datasets[0].mean();
  std::size_t checks = 0, fails = 0;
  double worst = 0.0;
  std::string outside;
  for (std::size_t t : {10, 100, 1000, 5000}) {
    for (std::size_t j = 0; j < 2; ++j) {
      const auto exact = oracle::iterate_ou(0.0, cfg.s_sq, t, cfg.eta, cfg.beta, R, zbar[j]);
      double s = 0, ss = 0;
      for (const auto& tr : ens.traces) {
        const double x = tr.states.at(t)[j];
        s += x;
        ss += x * x;
      }
      const double N = double(chains);
      const double mean = s / N;
      const double var = (ss - N * mean * mean) / (N - 1);
      const double z_mean = std::abs(mean - exact.mean) / std::sqrt(exact.var / N);
      const double z_var = std::abs(var - exact.var) / (exact.var * std::sqrt(2.0 / (N - 1)));
      worst = std::max({worst, z_mean, z_var});
      checks += 2;
      fails += (z_mean > kOracleSigmas) + (z_var > kOracleSigmas);
      if (z_mean > kOracleSigmas) outside += fmt::format(" mean[t={},j={}]={:.4f}", t, j, z_mean);
      if (z_var > kOracleSigmas) outside += fmt::format(" var[t={},j={}]={:.4f}", t, j, z_var);
    }
  }
  const double s = seconds_since(t0);
  return {fails == 0 && s < kOracleSeconds,
          fmt::format("{} chains, {}/{} moments outside {} stderr{}, worst {:.4f} stderr, {:.2f}s",
                      chains, fails, checks, kOracleSigmas, outside, worst, s)};
}

// 4
Outcome kl_evolution() {
  const double R = 1.0;
  const auto m = make_quadratic(R, 1.0, 2);
  const DataSampler sampler(*m, 1.0);
  const auto cfg = quadratic_config(0.01, 100, 100, 10000);
  std::size_t violations = 0, control = 0, steps = 0;
  const std::size_t pairs = 10;
  for (std::size_t p = 0; p < pairs; ++p) {
    Rng ra(kSeed, StreamTag::pair, 2 * p), rb(kSeed, StreamTag::pair, 2 * p + 1);
    const Dataset S = sampler.sample(ra, cfg.n, 2 * p), Sp = sampler.sample(rb, cfg.n, 2 * p + 1);
    const Vector za = S.mean(), zb = Sp.mean();
    const auto kl = oracle_kl_trace(za, zb, cfg, R);
    const double stab = R * R * dist_sq(za, zb);
    const auto rec = strongly_convex_recursion(cfg.eta, cfg.beta, R, stab);
    violations += verify_kl_recursion(kl, rec.contraction, rec.per_step_add).n_violations;
    control += verify_kl_recursion(kl, 1.0, 0.0).n_violations;
    steps += kl.size() - 1;
  }
  return {violations == 0 && control > 0,
          fmt::format("{} pairs x T=10^4: {} violations of {} steps; control (1, 0): {} violations",
                      pairs, violations, steps, control)};
}

// 5
Outcome time_independence() {
  const auto m = make_quadratic(1.0, 1.0, 2);
  const DataSampler sampler(*m, 1.0);
  const auto cfg = quadratic_config(0.05, 10, 100, 1000);
  const auto ens = run_ensemble(cfg, *m, sampler, 8, 1, {0, true, true});
  double v = 0;
  std::size_t cnt = 0;
  for (const auto& tr : ens.traces)
    for (double x : tr.grad_var_sample) v += x, ++cnt;
  v /= double(cnt);
  const auto dc = derive_for(*m, cfg);
  const double sigma = 0.25;
  const auto a = time_independent_value(m->constants(), dc, cfg.eta, cfg.beta, 1000, cfg.n, sigma);
  const auto b = time_independent_value(m->constants(), dc, cfg.eta, cfg.beta, 1000000, cfg.n, sigma);
  const double rel = std::abs(a.value - b.value) / b.value;
  const std::vector<double> short_v(1000, v), long_v(1000000, v);
  const double pa = pensia_information(short_v, cfg.eta, cfg.beta, cfg.d);
  const double pb = pensia_information(long_v, cfg.eta, cfg.beta, cfg.d);
  const double growth = pb / pa;
  return {a.saturated && b.saturated && rel <= kSaturationRel && growth >= kPensiaGrowth,
          fmt::format("time-independent {:.6e} vs {:.6e} (rel diff {:.1e}, saturated {}); "
                      "information 10^6/10^3 = {:.1f} at variance {:.4e}",
                      a.value, b.value, rel, a.saturated && b.saturated, growth, v)};
}

// 6
Outcome validity() {
  const auto t0 = std::chrono::steady_clock::now();
  const double R = 1.0;
  const auto m = make_quadratic(R, 1.0, 2);
  const DataSampler sampler(*m, 1.0);
  const auto cfg = quadratic_config(0.05, 10, 100, 200);
  const double sigma = *eval_loss_sigma_sq(EvalLoss::surrogate);
  const auto gap = empirical_gen_gap(*m, sampler, cfg, 200, EvalLoss::surrogate);
  const auto dc = derive_for(*m, cfg);
  const double ti = time_independent_value(m->constants(), dc, cfg.eta, cfg.beta, cfg.T, cfg.n, sigma).value;
  StabilityOptions so;
  so.trace = {cfg.T + 1, false, false};
  const auto st = grad_stability_trace(*m, sampler, cfg, 50, so);
  std::vector<double> times, vals;
  for (const auto& r : st) {
    times.push_back(cfg.eta * double(r.step));
    vals.push_back(r.estimate.mean);
  }
  const auto sc = bound_strongly_convex(times, vals, R, cfg.beta, cfg.n, sigma, cfg.eta * double(cfg.T));
  const double scv = sc.value.value_or(std::numeric_limits<double>::quiet_NaN());
  const int violations = (gap.mean > ti) + !(gap.mean <= scv);
  const double s = seconds_since(t0);
  return {violations == 0 && s < kValiditySeconds,
          fmt::format("gap {:.3e} +- {:.1e} (200 trials); time-independent {:.3e} ({:.0f}x), "
                      "strongly-convex {:.3e} ({:.0f}x); {} violations, {:.2f}s",
                      gap.mean, gap.stderr_, ti, ti / std::abs(gap.mean), scv,
                      scv / std::abs(gap.mean), violations, s)};
}

// 7
Outcome scaling() {
  const auto m = make_quadratic(1.0, 1.0, 2);
  const DataSampler sampler(*m, 1.0);
  const std::vector<std::size_t> ns = {50, 100, 200, 400};
  const std::size_t trials = 20000;
  std::vector<double> scaled, gaps;
  std::string table;
  for (std::size_t n : ns) {
    const auto cfg = quadratic_config(0.05, 10, n, 200);
    const auto dc = derive_for(*m, cfg);
    const double ti = time_independent_value(m->constants(), dc, cfg.eta, cfg.beta, cfg.T, n, 0.25).value;
    scaled.push_back(ti * std::sqrt(double(n)));
    const auto gap = empirical_gen_gap(*m, sampler, cfg, trials, EvalLoss::surrogate);
    gaps.push_back(gap.mean);
    table += fmt::format(" n={}:{:.3e}+-{:.1e}", n, gap.mean, gap.stderr_);
  }
  double spread = 0;
  for (double x : scaled) spread = std::max(spread, std::abs(x - scaled[0]) / scaled[0]);
  bool decreasing = true;
  for (std::size_t i = 1; i < gaps.size(); ++i) decreasing = decreasing && gaps[i] < gaps[i - 1];
  return {spread <= kScalingRel && decreasing,
          fmt::format("bound*sqrt(n) spread {:.1e}; gap means ({} trials){}; decreasing {}", spread,
                      trials, table, decreasing)};
}

// 8
Outcome fokker_planck_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto m = make_quadratic(1.0, 1.0, 1);
  const DataSampler sampler(*m, 1.0);
  const double beta = 4.0, T_end = 2.0;
  Rng ra(kSeed, StreamTag::pair, 1000), rb(kSeed, StreamTag::pair, 1001);
  const Dataset S = sampler.sample(ra, 20, 0), Sp = sampler.sample(rb, 20, 1);

  bool ok = true;
  std::string detail;
  std::vector<double> rates;
  for (std::size_t cells : {512, 1024}) {
    const Grid1D grid = default_grid(m->constants(), beta, cells);
    const Potential FS = dataset_potential(grid, *m, S), FSp = dataset_potential(grid, *m, Sp);
    const double dt = 0.9 * std::min(max_stable_dt(grid, FS.value, beta), max_stable_dt(grid, FSp.value, beta));
    const auto steps = static_cast<std::size_t>(std::ceil(T_end / dt));

    const auto pi = gibbs_density(grid, FS.value, beta);
    auto rho = pi;
    double drift = 0.0;
    for (std::size_t s = 0; s < steps; ++s) rho = fp_step(grid, rho, FS.value, beta, dt);
    for (std::size_t i = 0; i < cells; ++i) drift = std::max(drift, std::abs(rho.values[i] - pi.values[i]));

    const auto rho0 = gaussian_density(grid, 0.0, 1.0);
    const auto h = run_h_theorem(grid, FS, beta, rho0, dt, steps, kHTheoremTol);
    const auto run = run_paired({grid, beta, dt, T_end, 1}, FS, FSp, rho0, rho0);
    const auto ineq = verify_kl_rate_inequality(run, beta);
    const double mass = std::max(h.max_mass_error, run.max_mass_error);
    rates.push_back(ineq.violation_rate);
    ok = ok && mass <= kMassTol && drift <= kGibbsCellTol && h.n_increases == 0 &&
         ineq.violation_rate <= kKlRateMaxViolations;
    detail += fmt::format(" [{} cells: mass {:.1e}, Gibbs drift {:.1e}, KL increases {}, "
                          "ineq rate {:.4f} ({} steps, worst scaled slack {:.2e})]",
                          cells, mass, drift, h.n_increases, ineq.violation_rate, ineq.n_checked,
                          ineq.worst_scaled_slack);
    if (cells == 512) {
      const double s = seconds_since(t0);
      ok = ok && s < kFpSeconds;
      detail += fmt::format(" {:.2f}s at 512;", s);
    }
  }
  const bool refines = rates[1] <= rates[0];
  return {ok && refines, fmt::format("{} refinement non-increasing {}", detail, refines)};
}

// 9
Outcome subexponentiality() {
  const auto m = make_logistic_ridge(1.0, 1.0, 5);
  const DataSampler sampler(*m, 1.0);
  SGLDConfig cfg;
  cfg.eta = 0.01;
  cfg.beta = 4.0;
  cfg.k = 10;
  cfg.n = 100;
  cfg.T = 2000;
  cfg.d = 5;
  cfg.s_sq = 1.0;
  cfg.seed = kSeed;
  const std::size_t samples = 2000;
  const auto sp = subexp_params(m->constants(), cfg.beta, cfg.d, cfg.s_sq);
  const auto losses = loss_samples_at_output(*m, sampler, cfg, samples);
  const auto grid = default_lambda_grid(sp.nu, 21);
  const auto mgf = logmgf_check(losses, sp.sigma_e_sq, sp.nu, grid, 200, kSeed);
  double worst_band_ratio = 0.0;
  for (const auto& r : mgf.rows)
    if (r.envelope > 0) worst_band_ratio = std::max(worst_band_ratio, r.band_hi / r.envelope);

  const auto ens = run_ensemble(cfg, *m, sampler, 1, samples, {0, true, false});
  std::vector<Vector> finals;
  for (const auto& tr : ens.traces) finals.push_back(tr.final_state());
  const std::vector<int> ps = {2, 4, 6, 8, 10, 12};
  const auto mom = pth_moment_check(finals, ps, m->constants(), cfg.beta, cfg.d, cfg.s_sq);
  return {mgf.n_violations == 0 && mom.max_ratio_to_p2 <= kMomentGrowth,
          fmt::format("log-MGF violations {}/{} on |lambda| <= 1/(2nu) = {:.3e}, max band_hi/envelope "
                      "{:.2e}; moment constant max ratio to p=2: {:.3f}",
                      mgf.n_violations, mgf.rows.size(), 0.5 / sp.nu, worst_band_ratio,
                      mom.max_ratio_to_p2)};
}

// 10
Outcome psi_inverse() {
  const double eps = std::numeric_limits<double>::epsilon();
  std::size_t pairs = 0, identity_fail = 0, knee_fail = 0;
  double worst_identity = 0.0, worst_knee = 0.0;
  for (const auto& fam : kFamilies) {
    const auto m = default_model(fam);
    for (double beta : {0.5, 1.0, 2.0, 4.0, 16.0})
      for (std::size_t d : {1, 2, 5, 20})
        for (double s_sq : {0.1, 1.0}) {
          const auto sp = subexp_params(m->constants(), beta, d, s_sq);
          ++pairs;
          const double id = std::abs(sp.sigma_e_sq * sp.nu * sp.nu - 1.0);
          worst_identity = std::max(worst_identity, id);
          identity_fail += id > kUlps * eps;
          const double knee = sp.sigma_e_sq / (2 * sp.nu * sp.nu);
          const auto below = psi_star_inverse(knee, sp.sigma_e_sq, sp.nu);
          const auto above = psi_star_inverse(std::nextafter(knee, 2 * knee), sp.sigma_e_sq, sp.nu);
          const double linear_at_knee = sp.nu * knee + sp.sigma_e_sq / (2 * sp.nu);
          const double gap = std::max(std::abs(below.value - linear_at_knee),
                                      std::abs(above.value - linear_at_knee)) / linear_at_knee;
          worst_knee = std::max(worst_knee, gap);
          knee_fail += below.linear_branch || !above.linear_branch || gap > kUlps * eps;
        }
  }
  return {identity_fail == 0 && knee_fail == 0,
          fmt::format("{} parameter pairs: |sigma^2 nu^2 - 1| max {:.1e}, knee mismatch max {:.1e} "
                      "(limit {} ulp)", pairs, worst_identity, worst_knee, kUlps)};
}

// 11
int cli(const std::string& args) {
  const std::string cmd = std::string("\"") + SGLDLAB_CLI + "\" " + args + " > /dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome reproducibility() {
  const fs::path root = fs::temp_directory_path() / fmt::format("sgldlab_accept_{}", kSeed);
  fs::remove_all(root);
  std::size_t files = 0, mismatches = 0;
  std::string bad;
  for (const char* name : {"quadratic", "logistic", "nonconvex"}) {
    const fs::path cfg = fs::path(SGLDLAB_SOURCE_DIR) / "configs" / (std::string(name) + ".json");
    for (const char* rep : {"a", "b"}) {
      const auto out = (root / name / rep).string();
      const std::string base = "--config \"" + cfg.string() + "\" --out \"" + out + "\" ";
      for (const char* sub : {"run", "bounds", "verify"}) {
        const int rc = cli(base + sub);
        if (rc != 0 && rc != 2) {
          bad += fmt::format(" {} {} exit {};", name, sub, rc);
          ++mismatches;
        }
      }
    }
    for (const auto& e : fs::directory_iterator(root / name / "a")) {
      if (e.path().extension() != ".csv") continue;
      ++files;
      const auto other = root / name / "b" / e.path().filename();
      if (!fs::exists(other) || slurp(e.path()) != slurp(other)) {
        ++mismatches;
        bad += " " + e.path().filename().string();
      }
    }
  }
  fs::remove_all(root);
  return {mismatches == 0 && files >= 15,
          fmt::format("{} CSV files compared across repeated run/bounds/verify, {} mismatches{}",
                      files, mismatches, bad)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"loss certification", loss_certification},
      {"gradient correctness", gradient_correctness},
      {"oracle equivalence", oracle_equivalence},
      {"KL-evolution inequality", kl_evolution},
      {"time-independence vs growth", time_independence},
      {"validity", validity},
      {"1/sqrt(n) scaling", scaling},
      {"Fokker-Planck suite", fokker_planck_suite},
      {"sub-exponentiality", subexponentiality},
      {"inverse rate function", psi_inverse},
      {"reproducibility", reproducibility},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    fmt::print("{} {:>2} {}: {} ({:.1f}s)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
               o.detail, seconds_since(t0));
    std::fflush(stdout);
  }
  fmt::print("{}/{} criteria passed\n", criteria.size() - failed, criteria.size());
  return failed ? 1 : 0;
}
