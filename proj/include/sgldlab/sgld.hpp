#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sgldlab/constants.hpp"
#include "sgldlab/data.hpp"
#include "sgldlab/loss_models.hpp"
#include "sgldlab/rng.hpp"

namespace sgldlab {

struct SGLDConfig {
  double eta = 0.01;
  double beta = 1.0;
  std::size_t k = 1;
  std::size_t n = 1;
  std::size_t T = 0;
  std::size_t d = 1;
  double s_sq = 1.0;
  std::uint64_t seed = 0;
  bool strict_mode = true;
  LsiMode lsi_mode = LsiMode::general_dissipative;
  double lsi_universal_C = 1.0;

  /// Domain checks independent of any model (η ≥ 0, β > 0, s² > 0, 1 ≤ k ≤ n, d ≥ 1).
  void validate() const;
};

/// Theorem ranges failing for this config and model; c_LS follows config.lsi_mode.
std::vector<std::string> precondition_failures(const SGLDConfig& config, const LossConstants& lc);

struct TraceOptions {
  std::size_t max_states = 10000;  // full storage up to this T, strided beyond
  bool final_only = false;         // keep only W_0 and W_T
  bool record_gradients = true;    // full-batch gradient per step (O(n·d) each)
};

struct ChainTrace {
  std::vector<Vector> states;          // stored W_t
  std::vector<std::size_t> state_steps;
  std::vector<double> w_norm_sq;       // ‖W_t‖², t = 0..T
  std::vector<double> grad_var_sample; // ‖∇F(W_t,B_t) − ∇F_S(W_t)‖², t = 0..T−1
  std::vector<double> grad_full_norm;  // ‖∇F_S(W_t)‖
  std::vector<double> grad_batch_norm; // ‖∇F(W_t,B_t)‖
  std::uint64_t seed = 0;
  std::uint64_t dataset_id = 0;
  std::uint64_t noise_variates = 0;

  std::size_t T() const { return w_norm_sq.empty() ? 0 : w_norm_sq.size() - 1; }
  const Vector& final_state() const { return states.back(); }
};

/// W_0 ~ N(0, s²I).
Vector sample_initial(std::size_t d, double s_sq, Rng& rng);

/// Uniform size-k subset of {0..n−1} (partial Fisher–Yates), in draw order.
std::vector<std::size_t> sample_minibatch(std::size_t n, std::size_t k, Rng& rng);

/// As above, reusing `perm` (resized to n) as workspace; writes the subset to out[0..k).
void sample_minibatch_into(std::size_t n, std::size_t k, Rng& rng, std::vector<std::size_t>& perm,
                           std::span<std::size_t> out);

/// W − η∇F(W,B) + √(2η/β)ξ with ξ drawn from rng (d variates).
Vector sgld_step(std::span<const double> w, const LossModel& model, const Dataset& data,
                 std::span<const std::size_t> batch, double eta, double beta, Rng& rng);

/// Stride used for state storage at horizon T.
std::size_t state_stride(std::size_t T, std::size_t max_states);

/// One chain on `data`. Throws PreconditionError in strict mode when the theorem ranges fail.
ChainTrace run_chain(const SGLDConfig& config, const LossModel& model, const Dataset& data,
                     const TraceOptions& opts = {});

struct EnsembleResult {
  std::vector<Dataset> datasets;
  std::vector<ChainTrace> traces;  // traces[j*n_chains + i] ran on datasets[j]
  std::size_t n_chains = 0;
};

/// Dataset j is drawn from stream (config.seed, data, j); chain c = j*n_chains + i
/// runs with seed config.seed + c.
EnsembleResult run_ensemble(const SGLDConfig& config, const LossModel& model,
                            const DataSampler& sampler, std::size_t n_chains,
                            std::size_t n_datasets, const TraceOptions& opts = {});
EnsembleResult run_ensemble_serial(const SGLDConfig& config, const LossModel& model,
                                   const DataSampler& sampler, std::size_t n_chains,
                                   std::size_t n_datasets, const TraceOptions& opts = {});

/// Dataset j of an ensemble, regenerated on its own.
Dataset ensemble_dataset(const SGLDConfig& config, const DataSampler& sampler, std::size_t j);

}  // namespace sgldlab
