#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sgldlab/data.hpp"
#include "sgldlab/estimators.hpp"
#include "sgldlab/sgld.hpp"
#include "sgldlab/vec.hpp"

namespace sgldlab {

/// Exact law N(mean, var·I) of full-batch SGLD on the quadratic loss at step t.
struct GaussianState {
  Vector mean;
  double var = 0.0;
  std::size_t t = 0;
};

/// Law of W_0: N(0, s²I).
GaussianState initial_state(std::size_t d, double s_sq);

/// mean' = (1−ηR)mean + ηR z̄, var' = (1−ηR)² var + 2η/β. For ηR ≥ 2 the map is
/// expanding; the state is still computed and `diverging` is set when given.
GaussianState ou_step(const GaussianState& s, double eta, double beta, double R,
                      std::span<const double> zbar, bool* diverging = nullptr);

/// Closed form of t steps of ou_step from `s0`.
GaussianState ou_state_at(const GaussianState& s0, std::size_t t, double eta, double beta, double R,
                          std::span<const double> zbar);

/// 1/(βR(1 − ηR/2)).
double stationary_variance(double eta, double beta, double R);

/// KL(N(μp, vp I) | N(μq, vq I)).
double gaussian_kl(const GaussianState& p, const GaussianState& q);

/// KL between general Gaussians, via Cholesky. Covariances are row-major d×d.
double gaussian_kl_full(std::span<const double> mean_p, std::span<const double> cov_p,
                        std::span<const double> mean_q, std::span<const double> cov_q);

/// E‖X‖^p for X ~ N(mean, var·I), p even (noncentral chi-square moments).
double gaussian_norm_moment(std::span<const double> mean, double var, int p);

/// KL(P_{W_t|S} | P_{W_t|S'}) for t = 0..T under full-batch SGLD from N(0, s²I).
std::vector<double> oracle_kl_trace(std::span<const double> zbar_S,
                                    std::span<const double> zbar_S_prime, const SGLDConfig& config,
                                    double R);

/// Monte Carlo over dataset pairs of the exact KL at step config.T; pair p
/// draws S, S' from streams (seed, pair, 2p) and (seed, pair, 2p+1).
EstimateWithError oracle_mi_upper(const DataSampler& sampler, const SGLDConfig& config, double R,
                                  std::size_t n_dataset_pairs, bool same_dataset_control = false);

struct RecursionReport {
  std::size_t n_steps = 0;
  std::size_t n_violations = 0;
  double worst_slack = 0.0;  // min over t of contraction·KL_{t−1} + add − KL_t
  std::size_t worst_step = 0;
  std::vector<double> slack;
};

/// Checks KL_t ≤ contraction·KL_{t−1} + per_step_add for t ≥ 1. A step
/// violates when its slack is below −tol·max(1, KL_t).
RecursionReport verify_kl_recursion(std::span<const double> kl_trace, double contraction,
                                    double per_step_add, double tol = 1e-12);

struct StronglyConvexRecursion {
  double contraction = 1.0;   // e^{−ηR/4}
  double per_step_add = 0.0;  // η(β/2)·sup_stability
};

StronglyConvexRecursion strongly_convex_recursion(double eta, double beta, double R,
                                                  double sup_stability);

}  // namespace sgldlab
