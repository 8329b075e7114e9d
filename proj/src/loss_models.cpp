#include "sgldlab/loss_models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sgldlab/error.hpp"
#include "sgldlab/rng.hpp"

namespace sgldlab {

void LossConstants::validate() const {
  if (!(M > 0.0)) throw InvalidParameter("LossConstants: M must be positive");
  if (!(m > 0.0)) throw InvalidParameter("LossConstants: m must be positive");
  if (!(b >= 0.0)) throw InvalidParameter("LossConstants: b must be nonnegative");
  if (!(A >= 0.0)) throw InvalidParameter("LossConstants: A must be nonnegative");
  if (!(data_radius > 0.0)) throw InvalidParameter("LossConstants: data_radius must be positive");
  if (R && !(*R > 0.0 && *R <= M))
    throw InvalidParameter("LossConstants: strong convexity R must satisfy 0 < R <= M");
  if (sigma_g_sq && !(*sigma_g_sq > 0.0))
    throw InvalidParameter("LossConstants: sigma_g_sq must be positive");
}

double LossConstants::origin_gradient_bound() const { return M * std::sqrt(b / m); }

LossModel::LossModel(std::size_t dim, LossConstants c) : dim_(dim), constants_(c) {
  if (dim == 0) throw InvalidParameter("LossModel: dimension must be positive");
  constants_.validate();
}

void LossModel::batch_grad(std::span<const double> w, const Dataset& data,
                           std::span<const std::size_t> batch, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  Vector g(dim_);
  for (const auto i : batch) {
    grad(w, data.row(i), g);
    for (std::size_t j = 0; j < dim_; ++j) out[j] += g[j];
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (auto& v : out) v *= inv;
}

void LossModel::full_grad(std::span<const double> w, const Dataset& data,
                          std::span<double> out) const {
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  batch_grad(w, data, all, out);
}

double LossModel::empirical_risk(std::span<const double> w, const Dataset& data) const {
  double s = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) s += eval(w, data.row(i));
  return s / static_cast<double>(data.size());
}

namespace {

class QuadraticLoss final : public LossModel {
 public:
  QuadraticLoss(double R, double radius, std::size_t d)
      : LossModel(d, make_constants(R, radius)), R_(R) {}

  std::string family() const override { return "quadratic"; }
  std::size_t data_dim() const override { return dim(); }

  double eval(std::span<const double> w, std::span<const double> z) const override {
    return 0.5 * R_ * dist_sq(w, z);
  }

  void grad(std::span<const double> w, std::span<const double> z,
            std::span<double> out) const override {
    for (std::size_t j = 0; j < dim(); ++j) out[j] = R_ * (w[j] - z[j]);
  }

  // ∇F(w,B) = R(w − z̄_B): one pass over the batch, no per-point gradient.
  void batch_grad(std::span<const double> w, const Dataset& data,
                  std::span<const std::size_t> batch, std::span<double> out) const override {
    const std::size_t d = dim();
    std::fill(out.begin(), out.end(), 0.0);
    for (const auto i : batch) {
      const auto z = data.row(i);
      for (std::size_t j = 0; j < d; ++j) out[j] += z[j];
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (std::size_t j = 0; j < d; ++j) out[j] = R_ * (w[j] - out[j] * inv);
  }

  void sample_support(Rng& rng, double radius, std::span<double> z) const override {
    sample_uniform_ball(rng, radius, z);
  }

  std::unique_ptr<LossModel> clone() const override {
    return std::make_unique<QuadraticLoss>(*this);
  }

 private:
  static LossConstants make_constants(double R, double radius) {
    if (!(R > 0.0)) throw InvalidParameter("make_quadratic: R must be positive");
    if (!(radius > 0.0)) throw InvalidParameter("make_quadratic: data_radius must be positive");
    LossConstants c;
    c.M = R;
    c.R = R;
    c.m = 0.5 * R;
    c.b = 0.5 * R * radius * radius;
    c.A = 0.5 * R * radius * radius;
    c.data_radius = radius;
    return c;
  }

  double R_;
};

// log(1 + e^u) without overflow.
double softplus(double u) { return u > 0.0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u)); }

double sigmoid(double u) {
  if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

class LogisticRidgeLoss final : public LossModel {
 public:
  LogisticRidgeLoss(double lambda, double radius, std::size_t d, double teacher)
      : LossModel(d, make_constants(lambda, radius)), lambda_(lambda), teacher_(teacher) {}

  std::string family() const override { return "logistic_ridge"; }
  std::size_t data_dim() const override { return dim() + 1; }

  double eval(std::span<const double> w, std::span<const double> z) const override {
    const auto x = z.first(dim());
    const double y = z[dim()];
    return softplus(-y * dot(w, x)) + 0.5 * lambda_ * norm_sq(w);
  }

  void grad(std::span<const double> w, std::span<const double> z,
            std::span<double> out) const override {
    const auto x = z.first(dim());
    const double y = z[dim()];
    const double s = sigmoid(-y * dot(w, x));
    for (std::size_t j = 0; j < dim(); ++j) out[j] = -y * x[j] * s + lambda_ * w[j];
  }

  void sample_support(Rng& rng, double radius, std::span<double> z) const override {
    auto x = z.first(dim());
    sample_uniform_ball(rng, radius, x);
    z[dim()] = rng.uniform() < sigmoid(teacher_ * x[0]) ? 1.0 : -1.0;
  }

  std::unique_ptr<LossModel> clone() const override {
    return std::make_unique<LogisticRidgeLoss>(*this);
  }

 private:
  static LossConstants make_constants(double lambda, double radius) {
    if (!(lambda > 0.0)) throw InvalidParameter("make_logistic_ridge: lambda must be positive");
    if (!(radius > 0.0))
      throw InvalidParameter("make_logistic_ridge: data_radius must be positive");
    LossConstants c;
    c.M = 0.25 * radius * radius + lambda;
    c.m = 0.5 * lambda;
    c.b = radius * radius / (2.0 * lambda);
    c.A = std::log(2.0);
    c.R = lambda;
    c.data_radius = radius;
    return c;
  }

  double lambda_;
  double teacher_;
};

class NonconvexRidgeLoss final : public LossModel {
 public:
  NonconvexRidgeLoss(double lambda, double a, double radius, std::size_t d)
      : LossModel(d, make_constants(lambda, a, radius)), lambda_(lambda), a_(a) {}

  std::string family() const override { return "nonconvex_ridge"; }
  std::size_t data_dim() const override { return dim(); }

  double eval(std::span<const double> w, std::span<const double> z) const override {
    return 0.5 * lambda_ * norm_sq(w) + a_ * std::cos(dot(w, z));
  }

  void grad(std::span<const double> w, std::span<const double> z,
            std::span<double> out) const override {
    const double s = a_ * std::sin(dot(w, z));
    for (std::size_t j = 0; j < dim(); ++j) out[j] = lambda_ * w[j] - s * z[j];
  }

  void sample_support(Rng& rng, double radius, std::span<double> z) const override {
    sample_uniform_ball(rng, radius, z);
  }

  std::unique_ptr<LossModel> clone() const override {
    return std::make_unique<NonconvexRidgeLoss>(*this);
  }

 private:
  static LossConstants make_constants(double lambda, double a, double radius) {
    if (!(lambda > 0.0)) throw InvalidParameter("make_nonconvex_ridge: lambda must be positive");
    if (!(a >= 0.0)) throw InvalidParameter("make_nonconvex_ridge: amplitude must be nonnegative");
    if (!(radius > 0.0))
      throw InvalidParameter("make_nonconvex_ridge: data_radius must be positive");
    LossConstants c;
    c.M = lambda + a * radius * radius;
    c.m = 0.5 * lambda;
    c.b = a * a * radius * radius / (2.0 * lambda);
    c.A = a;
    c.data_radius = radius;
    return c;
  }

  double lambda_;
  double a_;
};

}  // namespace

std::unique_ptr<LossModel> make_quadratic(double R, double data_radius, std::size_t d) {
  return std::make_unique<QuadraticLoss>(R, data_radius, d);
}

std::unique_ptr<LossModel> make_logistic_ridge(double lambda, double data_radius, std::size_t d,
                                               double teacher_scale) {
  return std::make_unique<LogisticRidgeLoss>(lambda, data_radius, d, teacher_scale);
}

std::unique_ptr<LossModel> make_nonconvex_ridge(double lambda, double a, double data_radius,
                                                std::size_t d) {
  return std::make_unique<NonconvexRidgeLoss>(lambda, a, data_radius, d);
}

double certification_box_halfwidth(const LossConstants& c) {
  return 10.0 * std::max(1.0, std::sqrt(c.b / c.m));
}

double max_gradient_relative_error(const LossModel& model, std::size_t n_points,
                                   std::uint64_t seed) {
  Rng rng(seed, StreamTag::certify, 0);
  const std::size_t d = model.dim();
  const double half = certification_box_halfwidth(model.constants());
  Vector w(d), z(model.data_dim()), g(d), fd(d), wp(d);
  double worst = 0.0;
  for (std::size_t p = 0; p < n_points; ++p) {
    for (auto& v : w) v = rng.uniform(-half, half);
    model.sample_support(rng, model.constants().data_radius, z);
    model.grad(w, z, g);
    for (std::size_t j = 0; j < d; ++j) {
      const double h = 1e-5 * std::max(1.0, std::abs(w[j]));
      wp = w;
      wp[j] = w[j] + h;
      const double fp = model.eval(wp, z);
      wp[j] = w[j] - h;
      const double fm = model.eval(wp, z);
      fd[j] = (fp - fm) / (2.0 * h);
    }
    const double gn = norm(g);
    if (gn < 1e-6) continue;  // degenerate: relative error undefined
    double diff = 0.0;
    for (std::size_t j = 0; j < d; ++j) diff += (fd[j] - g[j]) * (fd[j] - g[j]);
    worst = std::max(worst, std::sqrt(diff) / gn);
  }
  return worst;
}

}  // namespace sgldlab
