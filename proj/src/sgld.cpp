#include "sgldlab/sgld.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "sgldlab/error.hpp"

namespace sgldlab {

void SGLDConfig::validate() const {
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw InvalidParameter("eta must be nonnegative");
  if (!(beta > 0.0) || !std::isfinite(beta)) throw InvalidParameter("beta must be positive");
  if (!(s_sq > 0.0) || !std::isfinite(s_sq)) throw InvalidParameter("s_sq must be positive");
  if (n == 0) throw InvalidParameter("n must be positive");
  if (k < 1 || k > n) throw InvalidParameter(fmt::format("batch size k={} outside [1, n={}]", k, n));
  if (d == 0) throw InvalidParameter("d must be positive");
  if (!(lsi_universal_C > 0.0)) throw InvalidParameter("lsi_universal_C must be positive");
}

std::vector<std::string> precondition_failures(const SGLDConfig& config, const LossConstants& lc) {
  double c = std::numeric_limits<double>::quiet_NaN();
  try {
    const auto br = lsi_constant_breakdown(lc, config.beta, config.d, config.lsi_mode,
                                           config.lsi_universal_C);
    if (br.finite) c = br.value;
  } catch (const PreconditionError&) {
  }
  return theorem_precondition_failures(lc, config.eta, config.beta, c);
}

Vector sample_initial(std::size_t d, double s_sq, Rng& rng) {
  if (!(s_sq > 0.0)) throw InvalidParameter("s_sq must be positive");
  Vector w(d);
  const double s = std::sqrt(s_sq);
  for (auto& v : w) v = s * rng.normal();
  return w;
}

void sample_minibatch_into(std::size_t n, std::size_t k, Rng& rng, std::vector<std::size_t>& perm,
                           std::span<std::size_t> out) {
  if (k < 1 || k > n) throw InvalidParameter(fmt::format("batch size k={} outside [1, n={}]", k, n));
  if (k == n) {
    std::iota(out.begin(), out.begin() + k, std::size_t{0});
    return;
  }
  if (perm.size() != n) {
    perm.resize(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
  }
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.below(n - i);
    std::swap(perm[i], perm[j]);
    out[i] = perm[i];
  }
}

std::vector<std::size_t> sample_minibatch(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> perm, out(k);
  sample_minibatch_into(n, k, rng, perm, out);
  return out;
}

Vector sgld_step(std::span<const double> w, const LossModel& model, const Dataset& data,
                 std::span<const std::size_t> batch, double eta, double beta, Rng& rng) {
  if (w.size() != model.dim())
    throw InvalidParameter(fmt::format("parameter has dimension {}, model expects {}", w.size(), model.dim()));
  if (data.dim() != model.data_dim()) throw InvalidParameter("dataset dimension does not match model");
  if (batch.empty()) throw InvalidParameter("minibatch must be nonempty");
  Vector g(w.size()), out(w.begin(), w.end());
  model.batch_grad(w, data, batch, g);
  const double scale = std::sqrt(2.0 * eta / beta);
  for (std::size_t j = 0; j < out.size(); ++j) out[j] += -eta * g[j] + scale * rng.normal();
  return out;
}

std::size_t state_stride(std::size_t T, std::size_t max_states) {
  if (max_states == 0 || T <= max_states) return 1;
  return (T + max_states - 1) / max_states;
}

ChainTrace run_chain(const SGLDConfig& config, const LossModel& model, const Dataset& data,
                     const TraceOptions& opts) {
  config.validate();
  if (config.d != model.dim())
    throw InvalidParameter(fmt::format("config d={} but model dimension {}", config.d, model.dim()));
  if (data.size() != config.n)
    throw InvalidParameter(fmt::format("config n={} but dataset has {} points", config.n, data.size()));
  if (data.dim() != model.data_dim()) throw InvalidParameter("dataset dimension does not match model");
  if (config.strict_mode) {
    const auto failed = precondition_failures(config, model.constants());
    if (!failed.empty()) {
      std::string msg = "strict mode refused run; failed:";
      for (const auto& f : failed) msg += " [" + f + "]";
      throw PreconditionError(msg);
    }
  }

  const std::size_t d = config.d, T = config.T;
  Rng init(config.seed, StreamTag::init);
  Rng noise(config.seed, StreamTag::noise);
  Rng batch_rng(config.seed, StreamTag::batch);

  ChainTrace tr;
  tr.seed = config.seed;
  tr.dataset_id = data.id();
  tr.w_norm_sq.reserve(T + 1);
  if (opts.record_gradients) {
    tr.grad_var_sample.reserve(T);
    tr.grad_full_norm.reserve(T);
  }
  tr.grad_batch_norm.reserve(T);

  Vector w = sample_initial(d, config.s_sq, init);
  const std::size_t stride = opts.final_only ? 0 : state_stride(T, opts.max_states);
  auto store = [&](std::size_t t) {
    tr.states.push_back(w);
    tr.state_steps.push_back(t);
  };
  store(0);
  tr.w_norm_sq.push_back(norm_sq(w));

  std::vector<std::size_t> perm, batch(config.k);
  Vector g(d), gfull(d);
  const double scale = std::sqrt(2.0 * config.eta / config.beta);
  for (std::size_t t = 0; t < T; ++t) {
    sample_minibatch_into(config.n, config.k, batch_rng, perm, batch);
    model.batch_grad(w, data, batch, g);
    tr.grad_batch_norm.push_back(norm(g));
    if (opts.record_gradients) {
      if (config.k == config.n) {
        gfull = g;
      } else {
        model.full_grad(w, data, gfull);
      }
      tr.grad_full_norm.push_back(norm(gfull));
      tr.grad_var_sample.push_back(dist_sq(g, gfull));
    }
    for (std::size_t j = 0; j < d; ++j) w[j] += -config.eta * g[j] + scale * noise.normal();
    tr.w_norm_sq.push_back(norm_sq(w));
    const std::size_t step = t + 1;
    if (step == T || (stride != 0 && step % stride == 0)) store(step);
  }
  tr.noise_variates = noise.normals_drawn();
  return tr;
}

Dataset ensemble_dataset(const SGLDConfig& config, const DataSampler& sampler, std::size_t j) {
  Rng rng(config.seed, StreamTag::data, j);
  return sampler.sample(rng, config.n, j);
}

namespace {

EnsembleResult prepare(const SGLDConfig& config, const DataSampler& sampler, std::size_t n_chains,
                       std::size_t n_datasets) {
  if (n_chains == 0 || n_datasets == 0) throw InvalidParameter("ensemble counts must be positive");
  config.validate();
  EnsembleResult r;
  r.n_chains = n_chains;
  r.datasets.reserve(n_datasets);
  for (std::size_t j = 0; j < n_datasets; ++j) r.datasets.push_back(ensemble_dataset(config, sampler, j));
  r.traces.resize(n_chains * n_datasets);
  return r;
}

}  // namespace

EnsembleResult run_ensemble(const SGLDConfig& config, const LossModel& model,
                            const DataSampler& sampler, std::size_t n_chains,
                            std::size_t n_datasets, const TraceOptions& opts) {
  EnsembleResult r = prepare(config, sampler, n_chains, n_datasets);
  if (config.strict_mode) {
    const auto failed = precondition_failures(config, model.constants());
    if (!failed.empty()) run_chain(config, model, r.datasets[0], opts);  // throws with diagnostic
  }
  const long total = static_cast<long>(r.traces.size());
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
  for (long c = 0; c < total; ++c) {
    try {
      SGLDConfig cc = config;
      cc.seed = config.seed + static_cast<std::uint64_t>(c);
      r.traces[c] = run_chain(cc, model, r.datasets[c / static_cast<long>(n_chains)], opts);
    } catch (...) {
#pragma omp critical(sgld_ensemble_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return r;
}

EnsembleResult run_ensemble_serial(const SGLDConfig& config, const LossModel& model,
                                   const DataSampler& sampler, std::size_t n_chains,
                                   std::size_t n_datasets, const TraceOptions& opts) {
  EnsembleResult r = prepare(config, sampler, n_chains, n_datasets);
  for (std::size_t c = 0; c < r.traces.size(); ++c) {
    SGLDConfig cc = config;
    cc.seed = config.seed + c;
    r.traces[c] = run_chain(cc, model, r.datasets[c / n_chains], opts);
  }
  return r;
}

}  // namespace sgldlab
