#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sgldlab/constants.hpp"
#include "sgldlab/estimators.hpp"
#include "sgldlab/loss_models.hpp"
#include "sgldlab/sgld.hpp"

namespace sgldlab {

struct LossBlock {
  std::string family = "quadratic";  // quadratic | logistic_ridge | nonconvex_ridge
  std::size_t d = 2;
  double data_radius = 1.0;
  double R = 1.0;
  double lambda = 1.0;
  double a = 0.5;
  double teacher_scale = 4.0;
  // Claimed constants replacing the derived ones (certification experiments).
  std::optional<double> claimed_M, claimed_m, claimed_b, claimed_A, claimed_R;
};

struct SgldBlock {
  double eta = 0.05;
  double beta = 4.0;
  std::size_t k = 10;
  std::size_t T = 1000;
  double s_sq = 1.0;
  bool strict_mode = true;
  std::string lsi_mode = "auto";  // auto | general_dissipative | strongly_convex
  double lsi_universal_C = 1.0;
  std::size_t n_chains = 8;
  std::size_t n_datasets = 1;
};

struct DataBlock {
  std::optional<double> radius;  // defaults to the loss data radius
  std::size_t n = 100;
  std::size_t test_pool_factor = 10;
};

struct BoundsBlock {
  std::vector<std::string> enabled = {"xu_raginsky",    "pensia",        "time_independent",
                                      "strongly_convex", "farghly_shape", "subexp_gen",
                                      "excess_risk"};
  std::optional<double> sigma_g_sq;  // defaults from the evaluation loss
  double farghly_C1 = 1.0;
  double farghly_C2 = 1.0;
  HeuristicConstants heuristics;
  bool empirical_D1 = false;
  std::vector<std::size_t> T_grid;  // empty → {sgld.T}
};

struct EstimatorsBlock {
  std::size_t n_trials = 200;  // generalization gap trials, 0 disables
  std::string eval_loss = "surrogate";
  std::size_t variance_resamples = 50;
  std::size_t stability_pairs = 50;
  std::size_t mgf_samples = 0;  // 0 disables the log-MGF / moment checks
  std::size_t lambda_grid_size = 9;
  std::size_t bootstrap = 200;
  std::vector<int> p_list = {2, 4, 6, 8, 10, 12};
};

struct CertifyBlock {
  std::size_t n_samples = 100000;
  std::size_t gradient_points = 100;
};

struct FpBlock {
  std::size_t n_cells = 512;
  double T_end = 2.0;
  double dt = 0.0;  // 0 → 0.9 × stability limit
  std::size_t record_every = 1;
  bool refine = true;  // also run at half the cell width
  std::size_t n = 20;  // dataset size for the potentials
};

struct VerifyBlock {
  bool oracle = true;
  bool fp = true;
  std::size_t oracle_T = 10000;
  std::size_t oracle_pairs = 200;
  bool falsification_control = false;
};

struct OutputBlock {
  std::string dir = "out";
  std::vector<std::string> formats = {"csv", "json"};
  std::size_t max_states = 10000;
  bool chain_traces = true;
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  LossBlock loss;
  SgldBlock sgld;
  DataBlock data;
  BoundsBlock bounds;
  EstimatorsBlock estimators;
  CertifyBlock certify;
  FpBlock fp;
  VerifyBlock verify;
  OutputBlock output;

  /// Model with claimed constants applied.
  std::unique_ptr<LossModel> make_model() const;
  /// Same family and parameters in one dimension (grid lab).
  std::unique_ptr<LossModel> make_model_1d() const;
  LsiMode lsi_mode(const LossConstants& lc) const;
  SGLDConfig sgld_config(const LossModel& model) const;
  double data_radius() const;
  EvalLoss eval_loss() const;
  std::optional<double> sigma_g_sq() const;

  /// Canonical JSON echo of every field (defaults filled in).
  std::string canonical_json() const;
  /// FNV-1a 64 of canonical_json(), as 16 hex digits.
  std::string hash() const;
};

/// Parses and schema-checks a JSON config. Unknown keys, wrong types and
/// out-of-domain values raise ConfigError naming the offending key.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

std::uint64_t fnv1a64(const std::string& s);

}  // namespace sgldlab
