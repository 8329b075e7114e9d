#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sgldlab/constants.hpp"
#include "sgldlab/loss_models.hpp"

namespace sgldlab {

struct BoundEntry {
  std::string name;
  std::optional<double> value;
  std::map<std::string, double> inputs;
  std::map<std::string, double> constants_used;
  bool preconditions_ok = true;
  std::vector<std::string> flags;
  std::vector<std::string> notes;
  double T = 0.0;
  double n = 0.0;
  double eta = 0.0;
  double beta = 0.0;

  bool has_flag(const std::string& f) const;
};

class BoundReport {
 public:
  void add(BoundEntry e) { entries_.push_back(std::move(e)); }
  const std::vector<BoundEntry>& entries() const { return entries_; }
  /// First entry with this name, or nullptr.
  const BoundEntry* find(const std::string& name) const;

  std::string to_json() const;
  /// Header "name,value,T,n,eta,beta,flags"; missing values are empty cells.
  std::string to_csv(bool header = true) const;

 private:
  std::vector<BoundEntry> entries_;
};

/// √(2σ²·I/n).
double xu_raginsky_value(double sigma_g_sq, std::size_t n, double mi_upper);
BoundEntry bound_xu_raginsky(std::optional<double> sigma_g_sq, std::size_t n, double mi_upper);

/// Σ (d/2)·log(1 + βη·v/d) over the entries (one entry per update).
double pensia_information(std::span<const double> variances, double eta, double beta,
                          std::size_t d);
BoundEntry bound_pensia(std::span<const double> variances, double eta, double beta,
                        std::size_t d, std::size_t n, std::optional<double> sigma_g_sq);

struct TimeIndependentValue {
  double kl = 0.0;         // bound on E KL(P_{W_T|S} | P_{W_T|S'})
  double value = 0.0;      // √(2σ²·kl/n)
  bool saturated = false;  // ηT ≥ 4βc_LS
};

/// KL_T = 4βc·min(1, ηT/(4βc))·(V + c3)/(1 − η/(4βc)); throws PreconditionError
/// outside the theorem's ranges.
TimeIndependentValue time_independent_value(const LossConstants& lc, const DerivedConstants& dc,
                                            double eta, double beta, std::size_t T, std::size_t n,
                                            double sigma_g_sq);
BoundEntry bound_time_independent(const LossConstants& lc, const DerivedConstants& dc,
                                  double eta, double beta, std::size_t T, std::size_t n,
                                  std::optional<double> sigma_g_sq);

/// ∫₀ᵀ e^{−(T−t)R/4} v(t) dt with v piecewise linear between samples and the
/// weight integrated exactly on each interval. times must start at 0, be
/// increasing and end at T.
double strongly_convex_integral(std::span<const double> times, std::span<const double> values,
                                double R, double T);
BoundEntry bound_strongly_convex(std::span<const double> times, std::span<const double> values,
                                 double R, double beta, std::size_t n,
                                 std::optional<double> sigma_g_sq, double T);

/// C1·min(ηT, n(C2+1)/(n−k))·(k/(n√η) + √η). Throws when n ≤ k.
double farghly_shape_value(double C1, double C2, double eta, double T, std::size_t n,
                           std::size_t k);
BoundEntry bound_farghly_shape(double C1, double C2, double eta, double T, std::size_t n,
                               std::size_t k, std::optional<double> m);

struct PsiInverse {
  double value = 0.0;
  bool linear_branch = false;
};

/// Ψ*⁻¹(y) = √(2σ²y) for y ≤ σ²/(2ν²), else νy + σ²/(2ν). Continuous at the knee.
PsiInverse psi_star_inverse(double y, double sigma_e_sq, double nu);
BoundEntry bound_subexp_gen(double y, double sigma_e_sq, double nu);

struct ExcessRisk {
  double total = 0.0;
  double gen_term = 0.0;
  double convergence_term = 0.0;
  double minimization_term = 0.0;
};

/// c_err = (d/(2β))·log((eM/m)(bβ/d + 1)).
double minimization_error(const LossConstants& lc, double beta, std::size_t d);

/// Order-level convergence term (M√C0 + M√(b/m))·√(c_LS(e^{−2Tη/(βc_LS)} + η)).
double convergence_error(const LossConstants& lc, const DerivedConstants& dc, double eta,
                         double beta, std::size_t T);

ExcessRisk excess_risk_value(const LossConstants& lc, const DerivedConstants& dc, double eta,
                             double beta, std::size_t T, std::size_t d, double gen_bound);
BoundEntry bound_excess_risk(const LossConstants& lc, const DerivedConstants& dc, double eta,
                             double beta, std::size_t T, std::size_t d, std::size_t n,
                             std::optional<double> gen_bound);

}  // namespace sgldlab
