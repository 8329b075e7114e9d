#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sgldlab/data.hpp"
#include "sgldlab/loss_models.hpp"

namespace sgldlab {

struct Grid1D {
  double w_min = -1.0;
  double w_max = 1.0;
  std::size_t n_cells = 64;

  Grid1D() = default;
  Grid1D(double lo, double hi, std::size_t cells);

  double h() const { return (w_max - w_min) / static_cast<double>(n_cells); }
  double center(std::size_t i) const { return w_min + (static_cast<double>(i) + 0.5) * h(); }
  std::vector<double> centers() const;
};

struct DensityField {
  std::vector<double> values;
  double t = 0.0;

  double mass(const Grid1D& g) const;
};

/// Potential sampled at cell centers, with its derivative.
struct Potential {
  std::vector<double> value;
  std::vector<double> deriv;
};

Potential make_potential(const Grid1D& g, const std::function<double(double)>& F,
                         const std::function<double(double)>& dF);

/// F_S(w) = (1/n)Σ f(w, z_i) and F_S'(w) for a one-dimensional model.
Potential dataset_potential(const Grid1D& g, const LossModel& model, const Dataset& data);

/// Normalized e^{−βF} on the grid (max-subtracted before exponentiation).
DensityField gibbs_density(const Grid1D& g, std::span<const double> potential, double beta);

/// Normalized cell-center Gaussian.
DensityField gaussian_density(const Grid1D& g, double mean, double var);

/// Largest dt keeping the explicit update positive: βh² / max_i (B(w_{i+½}) + B(−w_{i−½})),
/// where w_{i+½} = β(F_{i+1} − F_i) and B(x) = x/(eˣ − 1).
double max_stable_dt(const Grid1D& g, std::span<const double> potential, double beta);

struct StepStats {
  double clamp_mass = 0.0;  // mass removed by clamping negative cells
};

/// One explicit finite-volume step of ∂ρ/∂t = ∂_w(β⁻¹∂_wρ + ρF') with
/// Scharfetter–Gummel face fluxes and zero-flux walls. The discrete Gibbs
/// density is an exact fixed point. Throws PreconditionError when dt exceeds
/// max_stable_dt, naming the admissible value.
DensityField fp_step(const Grid1D& g, const DensityField& rho, std::span<const double> potential,
                     double beta, double dt, StepStats* stats = nullptr);
DensityField fp_step_reference(const Grid1D& g, const DensityField& rho,
                               std::span<const double> potential, double beta, double dt,
                               StepStats* stats = nullptr);

inline constexpr double kDensityFloor = 1e-300;
inline constexpr double kRelativeFloor = 1e-12;

/// Σ h ρ log(ρ/γ) over the shared support mask. Throws on an empty mask.
double kl_on_grid(const Grid1D& g, const DensityField& rho, const DensityField& gamma);
/// Σ h ρ (∂ log ρ − ∂ log γ)² with central differences (one-sided at mask edges).
double fisher_on_grid(const Grid1D& g, const DensityField& rho, const DensityField& gamma);
/// Σ h ρ (F'_S − F'_S')².
double stability_on_grid(const Grid1D& g, const DensityField& rho, std::span<const double> dF_S,
                         std::span<const double> dF_S_prime);

struct PairedRunConfig {
  Grid1D grid;
  double beta = 1.0;
  double dt = 0.0;  // 0 → 0.9 × the tighter stability limit
  double T_end = 1.0;
  std::size_t record_every = 1;
};

struct PairedRecord {
  double t = 0.0;
  double kl = 0.0;
  double fisher = 0.0;
  double stability = 0.0;
  double dkl_dt = 0.0;  // centered difference; 0 at the ends
  double slack = 0.0;   // −Fisher/(2β) + (β/2)·stability − dKL/dt
  bool interior = false;
};

struct PairedRun {
  std::vector<PairedRecord> records;
  double dt = 0.0;
  double h = 0.0;
  double max_mass_error = 0.0;  // max over steps of |mass_after − mass_before|
  double clamp_mass = 0.0;
};

/// Evolves ρ under F_S and γ under F_S' on the same grid and time step.
PairedRun run_paired(const PairedRunConfig& cfg, const Potential& F_S, const Potential& F_S_prime,
                     DensityField rho0, DensityField gamma0);

struct KlRateReport {
  std::size_t n_checked = 0;
  std::size_t n_violations = 0;
  double violation_rate = 0.0;
  double worst_scaled_slack = 0.0;  // min slack / scale over checked steps
  double tolerance = 0.0;           // 10(h² + dt)
};

/// A checked step violates when slack < −tol·scale, scale = Fisher/(2β) + (β/2)·stability.
KlRateReport verify_kl_rate_inequality(const PairedRun& run, double beta);

struct HTheoremRun {
  std::vector<double> t;
  std::vector<double> kl;  // KL(ρ_t | π)
  std::size_t n_increases = 0;
  double max_increase = 0.0;
  double max_mass_error = 0.0;
};

/// Evolves ρ0 under a fixed potential and records KL(ρ_t|π). An increase counts
/// when KL_{t+1} > KL_t + tol.
HTheoremRun run_h_theorem(const Grid1D& g, const Potential& F, double beta, DensityField rho0,
                          double dt, std::size_t n_steps, double tol = 1e-9);

/// Half-width r + 8/√(βm) domain centered at 0.
Grid1D default_grid(const LossConstants& lc, double beta, std::size_t n_cells);

}  // namespace sgldlab
