#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "sgldlab/loss_models.hpp"

namespace sgldlab {

enum class LsiMode { general_dissipative, strongly_convex };

std::string to_string(LsiMode mode);
LsiMode lsi_mode_from_string(const std::string& s);

/// Constants that the analysis leaves non-explicit. Every value is a user
/// choice; results that use them are flagged "heuristic-constant".
struct HeuristicConstants {
  double lsi_universal_C = 1.0;     // C in the ρ0⁻¹ bound
  double moment_universal_C = 1.0;  // C of the p-th moment lemma
  double C1_prime = 1.0;            // inside D2
  double C2_prime = 1.0;            // inside D2
  double C0_tilde = 1.0;            // inside D5
  double C1_tilde = 0.0;            // inside D5
};

struct LsiBreakdown {
  double value = 0.0;
  LsiMode mode = LsiMode::general_dissipative;
  // general mode only
  double D1 = 0.0;
  double D2 = 0.0;
  double rho0_inv = 0.0;
  double B = 0.0;
  double exponent = 0.0;
  bool finite = true;
};

/// Log-Sobolev constant of the Gibbs measure ∝ e^{−βF}.
/// general_dissipative: λ_ℓ = 2D1 + 2ρ0⁻¹(D2 + 2); needs β ≥ 2/m.
/// strongly_convex: 1/(2βR); needs R.
LsiBreakdown lsi_constant_breakdown(const LossConstants& lc, double beta, std::size_t d,
                                    LsiMode mode, double universal_C = 1.0);
double lsi_constant(const LossConstants& lc, double beta, std::size_t d, LsiMode mode,
                    double universal_C = 1.0);

/// s² + 2(1∨1/m)(b + 10ηM²b/m + d/β). Throws unless 0 < η < min(1, m/(5M²)).
double moment_bound_C0(const LossConstants& lc, double eta, double beta, std::size_t d,
                       double s_sq);

/// The η-free form s² + 2(1∨1/m)(b + 10M²b/m + d/β), valid for every η ≤ 1.
double moment_bound_C0_uniform(const LossConstants& lc, double beta, std::size_t d, double s_sq);

/// δ = (n−k)/(k(n−1)).
double minibatch_delta(std::size_t n, std::size_t k);

/// 8δM²(‖w‖² + k/m). Needs n ≥ 2, 1 ≤ k ≤ n.
double sg_variance_bound(const LossConstants& lc, std::size_t n, std::size_t k, double w_norm_sq);

struct SubexpParams {
  double sigma_e_sq = 0.0;
  double nu = 0.0;
  double C5 = 0.0;
  double C0_f = 0.0;
  double C1_f = 0.0;
};

/// σ_e² = 4e²C5², ν = 1/(2eC5), C5 = C0_f + C1_f with
/// C0_f = Mb/(2m) + A + (b/2)log 3 and C1_f = M·K²(2 + d + βb), K = C(s + 1/√(βm)).
SubexpParams subexp_params(const LossConstants& lc, double beta, std::size_t d, double s_sq,
                           double moment_universal_C = 1.0);

struct DerivedConstants {
  double c_LS = 0.0;
  LsiBreakdown lsi;
  double C0 = 0.0;            // η-dependent second-moment bound
  double C0_uniform = 0.0;    // η-free form used inside D2..D5
  double grad_sq_bound = 0.0; // M²C0 + M²b/m
  double delta = 0.0;
  double D1 = 0.0, D2 = 0.0, D3 = 0.0, D4 = 0.0, D5 = 0.0;
  double B1 = 0.0, B2 = 0.0;
  double D1_analytic = 0.0;   // 2(D4 + D5), kept when D1 is replaced by a measurement
  bool D1_empirical = false;
  SubexpParams subexp;
  HeuristicConstants heuristics;
  std::vector<std::string> precondition_failures;
  std::vector<std::string> flags;

  bool preconditions_ok() const { return precondition_failures.empty(); }
};

struct DeriveInputs {
  double eta = 0.0;
  double beta = 0.0;
  std::size_t d = 1;
  double s_sq = 1.0;
  std::size_t n = 2;
  std::size_t k = 1;
  LsiMode lsi_mode = LsiMode::general_dissipative;
  HeuristicConstants heuristics;
  std::optional<double> empirical_D1;
};

/// Evaluates the whole constant chain. Range violations do not throw; they are
/// listed in precondition_failures and the affected values are NaN.
DerivedConstants derive_constants(const LossConstants& lc, const DeriveInputs& in);

/// Which of {β ≥ 2/m, η < 1, η < m/(5M²), η < 4βc_LS} fail (empty when all hold).
std::vector<std::string> theorem_precondition_failures(const LossConstants& lc, double eta,
                                                       double beta, double c_LS);

struct KlRecursion {
  double contraction = 1.0;   // e^{−η/(4βc_LS)}
  double per_step_add = 0.0;  // η(D2/(4βc_LS) + D3/(2β) + βD1/2)
  double V = 0.0;             // βD1/2
  double c3 = 0.0;            // D2/(4βc_LS) + D3/(2β)
  double rate = 0.0;          // η/(4βc_LS)
};

/// Throws PreconditionError when η ≥ 4βc_LS.
KlRecursion kl_recursion_constants(const DerivedConstants& dc, double eta, double beta);

/// Σ_{t<T} contraction^t · per_step_add in closed form.
double kl_recursion_unrolled(const KlRecursion& kr, std::size_t T);

}  // namespace sgldlab
