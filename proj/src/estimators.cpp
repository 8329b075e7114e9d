#include "sgldlab/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <exception>

#include <fmt/format.h>

#include "sgldlab/error.hpp"
#include "sgldlab/rng.hpp"

namespace sgldlab {

EstimateWithError summarize(std::span<const double> x, std::string name) {
  EstimateWithError e;
  e.estimator_name = std::move(name);
  e.n_samples = x.size();
  if (x.empty()) return e;
  double s = 0.0;
  for (const double v : x) s += v;
  e.mean = s / static_cast<double>(x.size());
  if (x.size() < 2) return e;
  double ss = 0.0;
  for (const double v : x) ss += (v - e.mean) * (v - e.mean);
  const double var = ss / static_cast<double>(x.size() - 1);
  e.stderr_ = std::sqrt(var / static_cast<double>(x.size()));
  return e;
}

std::string to_string(EvalLoss e) { return e == EvalLoss::surrogate ? "surrogate" : "same_as_f"; }

EvalLoss eval_loss_from_string(const std::string& s) {
  if (s == "surrogate") return EvalLoss::surrogate;
  if (s == "same_as_f") return EvalLoss::same_as_f;
  throw InvalidParameter("unknown evaluation loss '" + s + "'");
}

double eval_loss(const LossModel& model, EvalLoss kind, std::span<const double> w,
                 std::span<const double> z) {
  if (kind == EvalLoss::same_as_f) return model.eval(w, z);
  if (model.data_dim() == model.dim() + 1) {
    const double margin = z[model.dim()] * dot(w, z.first(model.dim()));
    return margin <= 0.0 ? 1.0 : 0.0;
  }
  return -std::expm1(-0.5 * dist_sq(w, z));
}

std::optional<double> eval_loss_sigma_sq(EvalLoss kind) {
  if (kind == EvalLoss::surrogate) return 0.25;
  return std::nullopt;
}

namespace {

double one_gap_trial(const LossModel& model, const DataSampler& sampler, const SGLDConfig& config,
                     std::size_t i, EvalLoss eval, const GapOptions& opts) {
  Rng data_rng(config.seed, StreamTag::data, i);
  const Dataset S = sampler.sample(data_rng, config.n, i);
  SGLDConfig cc = config;
  cc.seed = config.seed + i;
  const ChainTrace tr = run_chain(cc, model, S, opts.trace);
  const Vector& w = tr.final_state();

  double train = 0.0;
  for (std::size_t j = 0; j < S.size(); ++j) train += eval_loss(model, eval, w, S.row(j));
  train /= static_cast<double>(S.size());

  Rng pool_rng(config.seed, StreamTag::test_pool, i);
  const std::size_t pool = opts.test_pool_factor * config.n;
  Vector z(sampler.data_dim());
  double test = 0.0;
  for (std::size_t j = 0; j < pool; ++j) {
    sampler.sample_point(pool_rng, z);
    test += eval_loss(model, eval, w, z);
  }
  test /= static_cast<double>(pool);
  return test - train;
}

void check_gap_args(std::size_t n_trials, const GapOptions& opts) {
  if (n_trials < 2) throw InvalidParameter("empirical_gen_gap needs at least 2 trials");
  if (opts.test_pool_factor < 1) throw InvalidParameter("test_pool_factor must be at least 1");
}

}  // namespace

std::vector<double> gen_gap_samples(const LossModel& model, const DataSampler& sampler,
                                    const SGLDConfig& config, std::size_t n_trials, EvalLoss eval,
                                    const GapOptions& opts) {
  config.validate();
  std::vector<double> gaps(n_trials);
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < static_cast<long>(n_trials); ++i) {
    try {
      gaps[i] = one_gap_trial(model, sampler, config, static_cast<std::size_t>(i), eval, opts);
    } catch (...) {
#pragma omp critical(sgld_gap_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return gaps;
}

EstimateWithError empirical_gen_gap(const LossModel& model, const DataSampler& sampler,
                                    const SGLDConfig& config, std::size_t n_trials, EvalLoss eval,
                                    const GapOptions& opts) {
  check_gap_args(n_trials, opts);
  const auto gaps = gen_gap_samples(model, sampler, config, n_trials, eval, opts);
  return summarize(gaps, "gen_gap:" + to_string(eval));
}

EstimateWithError empirical_gen_gap_serial(const LossModel& model, const DataSampler& sampler,
                                           const SGLDConfig& config, std::size_t n_trials,
                                           EvalLoss eval, const GapOptions& opts) {
  check_gap_args(n_trials, opts);
  config.validate();
  std::vector<double> gaps(n_trials);
  for (std::size_t i = 0; i < n_trials; ++i)
    gaps[i] = one_gap_trial(model, sampler, config, i, eval, opts);
  return summarize(gaps, "gen_gap:" + to_string(eval));
}

std::vector<TimedEstimate> grad_variance_trace(const LossModel& model, const Dataset& data,
                                               const ChainTrace& trace, std::size_t k,
                                               std::size_t n_resamples, std::uint64_t seed) {
  const std::size_t n = data.size();
  if (k < 1 || k > n) throw InvalidParameter("batch size must satisfy 1 <= k <= n");
  std::vector<TimedEstimate> out(trace.states.size());
  if (k == n) {
    for (std::size_t s = 0; s < out.size(); ++s) {
      out[s].step = trace.state_steps[s];
      out[s].estimate.estimator_name = "grad_variance";
    }
    return out;
  }
  if (n_resamples < 2) throw InvalidParameter("grad_variance_trace needs at least 2 resamples");
  const std::size_t d = model.dim();
#pragma omp parallel for schedule(dynamic)
  for (long s = 0; s < static_cast<long>(out.size()); ++s) {
    Rng rng(seed, StreamTag::resample, static_cast<std::uint64_t>(s));
    const Vector& w = trace.states[s];
    Vector full(d), g(d);
    model.full_grad(w, data, full);
    std::vector<std::size_t> perm, batch(k);
    std::vector<double> vals(n_resamples);
    for (std::size_t r = 0; r < n_resamples; ++r) {
      sample_minibatch_into(n, k, rng, perm, batch);
      model.batch_grad(w, data, batch, g);
      vals[r] = dist_sq(g, full);
    }
    out[s].step = trace.state_steps[s];
    out[s].estimate = summarize(vals, "grad_variance");
  }
  return out;
}

std::vector<double> grad_stability_pair(const LossModel& model, const Dataset& S,
                                        const Dataset& S_prime, const ChainTrace& trace) {
  const std::size_t d = model.dim();
  std::vector<double> out(trace.states.size());
  Vector g(d), gp(d);
  for (std::size_t s = 0; s < out.size(); ++s) {
    model.full_grad(trace.states[s], S, g);
    model.full_grad(trace.states[s], S_prime, gp);
    out[s] = dist_sq(g, gp);
  }
  return out;
}

std::vector<TimedEstimate> grad_stability_trace(const LossModel& model, const DataSampler& sampler,
                                                const SGLDConfig& config, std::size_t n_pairs,
                                                const StabilityOptions& opts) {
  if (n_pairs < 1) throw InvalidParameter("n_pairs must be positive");
  config.validate();
  std::vector<std::vector<double>> per_pair(n_pairs);
  std::vector<std::size_t> steps;
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
  for (long p = 0; p < static_cast<long>(n_pairs); ++p) {
    try {
      Rng ra(config.seed, StreamTag::pair, 2 * static_cast<std::uint64_t>(p));
      Rng rb(config.seed, StreamTag::pair, 2 * static_cast<std::uint64_t>(p) + 1);
      const Dataset S = sampler.sample(ra, config.n, 2 * p);
      const Dataset Sp = sampler.sample(rb, config.n, 2 * p + 1);
      SGLDConfig cc = config;
      cc.seed = config.seed + static_cast<std::uint64_t>(p);
      const ChainTrace tr = run_chain(cc, model, S, opts.trace);
      per_pair[p] = grad_stability_pair(model, S, Sp, tr);
      if (p == 0) steps = tr.state_steps;
    } catch (...) {
#pragma omp critical(sgld_stab_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  std::vector<TimedEstimate> out(steps.size());
  std::vector<double> col(n_pairs);
  for (std::size_t s = 0; s < steps.size(); ++s) {
    for (std::size_t p = 0; p < n_pairs; ++p) col[p] = per_pair[p][s];
    out[s].step = steps[s];
    out[s].estimate = summarize(col, "grad_stability");
  }
  return out;
}

MomentReport pth_moment_check(std::span<const Vector> final_states, std::span<const int> p_list,
                              const LossConstants& lc, double beta, std::size_t d, double s_sq) {
  if (!(beta > 0.0) || !(s_sq > 0.0)) throw InvalidParameter("beta and s_sq must be positive");
  std::vector<double> norms(final_states.size());
  for (std::size_t i = 0; i < norms.size(); ++i) norms[i] = norm(final_states[i]);
  const double dd = static_cast<double>(d);
  MomentReport rep;
  double c2 = 0.0;
  for (const int p : p_list) {
    if (p < 2 || p > 12 || p % 2 != 0)
      throw InvalidParameter(fmt::format("moment order p={} must be even and in [2, 12]", p));
    if (final_states.size() < static_cast<std::size_t>(10 * p))
      throw InvalidParameter(fmt::format("p={} needs at least {} samples, got {}", p, 10 * p,
                                         final_states.size()));
    std::vector<double> powers(norms.size());
    for (std::size_t i = 0; i < norms.size(); ++i) powers[i] = std::pow(norms[i], p);
    const auto e = summarize(powers, "moment");
    MomentRow row;
    row.p = p;
    const double pp = static_cast<double>(p);
    row.empirical = std::pow(e.mean, 1.0 / pp);
    row.stderr_ = e.mean > 0.0 ? e.stderr_ * row.empirical / (pp * e.mean) : 0.0;
    // E‖X‖^p for X ~ N(0, s²I_d): (2s²)^{p/2} Γ((d+p)/2) / Γ(d/2).
    const double log_m0 = 0.5 * pp * std::log(2.0 * s_sq) + std::lgamma(0.5 * (dd + pp)) -
                          std::lgamma(0.5 * dd);
    row.initial_moment = std::exp(log_m0 / pp);
    row.drift_term = std::sqrt((pp + beta * lc.b + dd) / (beta * lc.m));
    row.fitted_C = row.empirical / (row.initial_moment + row.drift_term);
    if (p == 2) c2 = row.fitted_C;
    rep.rows.push_back(row);
  }
  if (c2 > 0.0) {
    for (const auto& r : rep.rows) rep.max_ratio_to_p2 = std::max(rep.max_ratio_to_p2, r.fitted_C / c2);
    rep.grows_with_p = rep.max_ratio_to_p2 > 2.0;
  }
  return rep;
}

namespace {

// log((1/N) Σ exp(λ x_i)) with x already centered.
double log_mean_exp(std::span<const double> x, double lambda) {
  if (lambda == 0.0) return 0.0;
  double mx = -HUGE_VAL;
  for (const double v : x) mx = std::max(mx, lambda * v);
  double s = 0.0;
  for (const double v : x) s += std::exp(lambda * v - mx);
  return mx + std::log(s / static_cast<double>(x.size()));
}

std::vector<double> centered(std::span<const double> x) {
  double m = 0.0;
  for (const double v : x) m += v;
  m /= static_cast<double>(x.size());
  std::vector<double> c(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) c[i] = x[i] - m;
  return c;
}

}  // namespace

MgfReport logmgf_check(std::span<const double> loss_samples, double sigma_e_sq, double nu,
                       std::span<const double> lambda_grid, std::size_t n_bootstrap,
                       std::uint64_t seed) {
  if (loss_samples.size() < 2) throw InvalidParameter("logmgf_check needs at least 2 samples");
  if (!(sigma_e_sq > 0.0 && nu > 0.0)) throw InvalidParameter("sigma_e_sq and nu must be positive");
  const double lim = 1.0 / (2.0 * nu);
  for (const double l : lambda_grid)
    if (!(std::abs(l) <= lim * (1.0 + 1e-12)))
      throw InvalidParameter(fmt::format("lambda={} outside |lambda| <= 1/(2 nu) = {}", l, lim));

  MgfReport rep;
  rep.n_samples = loss_samples.size();
  const auto c = centered(loss_samples);
  const auto ce = summarize(c, "centered");
  rep.centered_mean = ce.mean;
  rep.centered_stderr = ce.stderr_;

  const std::size_t L = lambda_grid.size(), N = c.size();
  std::vector<std::vector<double>> boot(L, std::vector<double>(n_bootstrap));
  std::vector<double> raw(N);
  for (std::size_t b = 0; b < n_bootstrap; ++b) {
    Rng rng(seed, StreamTag::bootstrap, b);
    for (auto& v : raw) v = loss_samples[rng.below(N)];
    const auto cb = centered(raw);
    for (std::size_t l = 0; l < L; ++l) boot[l][b] = log_mean_exp(cb, lambda_grid[l]);
  }
  for (std::size_t l = 0; l < L; ++l) {
    MgfRow row;
    row.lambda = lambda_grid[l];
    row.log_mgf = log_mean_exp(c, row.lambda);
    row.envelope = 0.5 * sigma_e_sq * row.lambda * row.lambda;
    if (n_bootstrap > 0) {
      auto& v = boot[l];
      std::sort(v.begin(), v.end());
      const auto at = [&v](double q) {
        return v[static_cast<std::size_t>(std::floor(q * static_cast<double>(v.size() - 1)))];
      };
      row.band_lo = at(0.025);
      row.band_hi = at(0.975);
    } else {
      row.band_lo = row.band_hi = row.log_mgf;
    }
    row.violated = row.log_mgf > row.envelope;
    if (row.violated) ++rep.n_violations;
    rep.rows.push_back(row);
  }
  return rep;
}

std::vector<double> default_lambda_grid(double nu, std::size_t count) {
  if (count < 2) throw InvalidParameter("lambda grid needs at least 2 points");
  const double lim = 1.0 / (2.0 * nu);
  std::vector<double> g(count);
  for (std::size_t i = 0; i < count; ++i)
    g[i] = -lim + 2.0 * lim * static_cast<double>(i) / static_cast<double>(count - 1);
  if (count % 2 == 1) g[count / 2] = 0.0;
  return g;
}

std::vector<double> loss_samples_at_output(const LossModel& model, const DataSampler& sampler,
                                           const SGLDConfig& config, std::size_t n_samples) {
  config.validate();
  std::vector<double> out(n_samples);
  std::exception_ptr error;
  const TraceOptions topts{0, true, false};
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < static_cast<long>(n_samples); ++i) {
    try {
      Rng data_rng(config.seed, StreamTag::data, i);
      const Dataset S = sampler.sample(data_rng, config.n, i);
      SGLDConfig cc = config;
      cc.seed = config.seed + static_cast<std::uint64_t>(i);
      const ChainTrace tr = run_chain(cc, model, S, topts);
      Rng zr(config.seed, StreamTag::test_pool, i);
      Vector z(sampler.data_dim());
      sampler.sample_point(zr, z);
      out[i] = model.eval(tr.final_state(), z);
    } catch (...) {
#pragma omp critical(sgld_loss_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

}  // namespace sgldlab
