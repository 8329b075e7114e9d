#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sgldlab/data.hpp"
#include "sgldlab/loss_models.hpp"
#include "sgldlab/sgld.hpp"

namespace sgldlab {

struct EstimateWithError {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t n_samples = 0;
  std::string estimator_name;
};

/// Mean and sample-sd/√n of `x` (n−1 denominator). Needs n ≥ 2 for a stderr;
/// n = 1 gives stderr 0.
EstimateWithError summarize(std::span<const double> x, std::string name);

enum class EvalLoss { same_as_f, surrogate };

std::string to_string(EvalLoss e);
EvalLoss eval_loss_from_string(const std::string& s);

/// Loss used to measure the gap. same_as_f: f itself. surrogate: a [0,1]-valued
/// loss (zero-one for labeled families, 1 − exp(−‖w−z‖²/2) otherwise).
double eval_loss(const LossModel& model, EvalLoss kind, std::span<const double> w,
                 std::span<const double> z);

/// Sub-Gaussian proxy of the evaluation loss when it is known: 1/4 for the
/// bounded surrogate, none for f itself.
std::optional<double> eval_loss_sigma_sq(EvalLoss kind);

struct GapOptions {
  std::size_t test_pool_factor = 10;
  TraceOptions trace{0, true, false};
};

/// Per trial i: S from stream (seed, data, i), a chain with seed config.seed + i,
/// and a fresh pool of test_pool_factor·n points from (seed, test_pool, i).
/// Returns the mean over trials of L_pool(W_T) − L_S(W_T).
EstimateWithError empirical_gen_gap(const LossModel& model, const DataSampler& sampler,
                                    const SGLDConfig& config, std::size_t n_trials,
                                    EvalLoss eval = EvalLoss::same_as_f,
                                    const GapOptions& opts = {});
EstimateWithError empirical_gen_gap_serial(const LossModel& model, const DataSampler& sampler,
                                           const SGLDConfig& config, std::size_t n_trials,
                                           EvalLoss eval = EvalLoss::same_as_f,
                                           const GapOptions& opts = {});

/// Per-trial gaps, same streams as empirical_gen_gap.
std::vector<double> gen_gap_samples(const LossModel& model, const DataSampler& sampler,
                                    const SGLDConfig& config, std::size_t n_trials, EvalLoss eval,
                                    const GapOptions& opts = {});

struct TimedEstimate {
  std::size_t step = 0;
  EstimateWithError estimate;
};

/// At each stored state W_t, the conditional variance E_B‖∇F(W_t,B) − ∇F_S(W_t)‖²
/// from n_resamples fresh minibatches. Exact zeros when k = n.
std::vector<TimedEstimate> grad_variance_trace(const LossModel& model, const Dataset& data,
                                               const ChainTrace& trace, std::size_t k,
                                               std::size_t n_resamples, std::uint64_t seed);

/// ‖∇F_S(W_t) − ∇F_{S'}(W_t)‖² at every stored state of a chain run on S.
std::vector<double> grad_stability_pair(const LossModel& model, const Dataset& S,
                                        const Dataset& S_prime, const ChainTrace& trace);

struct StabilityOptions {
  TraceOptions trace{10000, false, false};
};

/// Pair p: S and S' from streams (seed, pair, 2p) and (seed, pair, 2p+1), a chain
/// on S with seed config.seed + p. Estimates at the stored steps.
std::vector<TimedEstimate> grad_stability_trace(const LossModel& model, const DataSampler& sampler,
                                                const SGLDConfig& config, std::size_t n_pairs,
                                                const StabilityOptions& opts = {});

struct MomentRow {
  int p = 0;
  double empirical = 0.0;  // (E‖W‖^p)^{1/p}
  double stderr_ = 0.0;    // delta-method standard error of `empirical`
  double initial_moment = 0.0;  // (E‖W_0‖^p)^{1/p}, exact for N(0, s²I)
  double drift_term = 0.0;      // √((p + βb + d)/(βm))
  double fitted_C = 0.0;        // empirical / (initial_moment + drift_term)
};

struct MomentReport {
  std::vector<MomentRow> rows;
  double max_ratio_to_p2 = 0.0;
  bool grows_with_p = false;  // some fitted C exceeds 2× the p=2 value
};

/// Fitted constants of (E‖W_T‖^p)^{1/p} ≤ C(E‖W_0‖^p)^{1/p} + C√((p+βb+d)/(βm)).
/// p must be even, 2 ≤ p ≤ 12, and the sample must hold at least 10·p states.
MomentReport pth_moment_check(std::span<const Vector> final_states, std::span<const int> p_list,
                              const LossConstants& lc, double beta, std::size_t d, double s_sq);

struct MgfRow {
  double lambda = 0.0;
  double log_mgf = 0.0;
  double band_lo = 0.0;
  double band_hi = 0.0;
  double envelope = 0.0;  // σ_e²λ²/2
  bool violated = false;
};

struct MgfReport {
  std::vector<MgfRow> rows;
  std::size_t n_violations = 0;
  std::size_t n_samples = 0;
  double centered_mean = 0.0;
  double centered_stderr = 0.0;
};

/// Empirical log E exp(λ(f − f̄)) per λ with a 95% percentile bootstrap band.
/// Every |λ| must be ≤ 1/(2ν).
MgfReport logmgf_check(std::span<const double> loss_samples, double sigma_e_sq, double nu,
                       std::span<const double> lambda_grid, std::size_t n_bootstrap = 200,
                       std::uint64_t seed = 0);

/// Symmetric grid of `count` points on [−1/(2ν), 1/(2ν)], including 0 when count is odd.
std::vector<double> default_lambda_grid(double nu, std::size_t count);

/// f(W_T^{(i)}, Z_i): chain i on its own dataset, Z_i fresh from stream (seed, test_pool, i).
std::vector<double> loss_samples_at_output(const LossModel& model, const DataSampler& sampler,
                                           const SGLDConfig& config, std::size_t n_samples);

}  // namespace sgldlab
