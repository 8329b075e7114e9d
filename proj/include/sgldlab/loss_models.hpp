#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>

#include "sgldlab/data.hpp"
#include "sgldlab/vec.hpp"

namespace sgldlab {

class Rng;

/// Assumption constants claimed for a loss family.
///
/// M: gradient Lipschitz modulus. (m, b): dissipativity, ∇f(w,z)·w ≥ m‖w‖² − b.
/// A: bound on |f(0,z)|. R: strong convexity modulus when the family has one.
/// sigma_g_sq: sub-Gaussian proxy of an evaluation loss, when known.
struct LossConstants {
  double M = 0.0;
  double m = 0.0;
  double b = 0.0;
  double A = 0.0;
  std::optional<double> R;
  std::optional<double> sigma_g_sq;
  double data_radius = 0.0;

  /// Throws InvalidParameter unless M > 0, m > 0, b ≥ 0, A ≥ 0, 0 < R ≤ M.
  void validate() const;

  /// Bound on ‖∇f(0,z)‖ implied by smoothness and dissipativity: M√(b/m).
  double origin_gradient_bound() const;
};

/// A loss family f(w, z) on parameters w ∈ R^d and data points z.
///
/// Implementations are stateless after construction; eval/grad may be called
/// concurrently from any number of threads.
class LossModel {
 public:
  virtual ~LossModel() = default;

  std::size_t dim() const { return dim_; }
  const LossConstants& constants() const { return constants_; }

  /// Replace the claimed constants (used to certify deliberately wrong claims).
  void set_constants(const LossConstants& c) { constants_ = c; }

  virtual std::string family() const = 0;
  virtual std::size_t data_dim() const = 0;
  virtual double eval(std::span<const double> w, std::span<const double> z) const = 0;
  virtual void grad(std::span<const double> w, std::span<const double> z,
                    std::span<double> out) const = 0;

  /// Mean gradient (1/|B|) Σ_{i∈B} ∇f(w, z_i). Families with linear structure override.
  virtual void batch_grad(std::span<const double> w, const Dataset& data,
                          std::span<const std::size_t> batch, std::span<double> out) const;

  /// Full-batch gradient ∇F_S(w).
  void full_grad(std::span<const double> w, const Dataset& data, std::span<double> out) const;

  /// Empirical risk F_S(w).
  double empirical_risk(std::span<const double> w, const Dataset& data) const;

  /// Draw a data point uniformly from the support, shrunk to `radius`.
  virtual void sample_support(Rng& rng, double radius, std::span<double> z) const = 0;

  virtual std::unique_ptr<LossModel> clone() const = 0;

 protected:
  LossModel(std::size_t dim, LossConstants c);

 private:
  std::size_t dim_;
  LossConstants constants_;
};

/// f(w,z) = (R/2)‖w − z‖², z in the ball of `data_radius`.
std::unique_ptr<LossModel> make_quadratic(double R, double data_radius, std::size_t d);

/// f(w,(x,y)) = log(1 + exp(−y w·x)) + (λ/2)‖w‖², ‖x‖ ≤ data_radius, y ∈ {−1,+1}.
/// Data points are stored as (x_1..x_d, y). Labels follow a fixed logistic
/// teacher P(y=+1|x) = σ(teacher_scale · x_1).
std::unique_ptr<LossModel> make_logistic_ridge(double lambda, double data_radius, std::size_t d,
                                               double teacher_scale = 4.0);

/// f(w,z) = (λ/2)‖w‖² + a·cos(w·z), z in the ball of `data_radius`.
std::unique_ptr<LossModel> make_nonconvex_ridge(double lambda, double a, double data_radius,
                                                std::size_t d);

/// Largest relative error between the analytic gradient and a central finite
/// difference over `n_points` random (w, z); w from the certification box.
double max_gradient_relative_error(const LossModel& model, std::size_t n_points,
                                   std::uint64_t seed);

/// Half-width of the cube w is sampled from during certification: 10·max(1, √(b/m)).
double certification_box_halfwidth(const LossConstants& c);

}  // namespace sgldlab
