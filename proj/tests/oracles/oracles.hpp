#pragma once

// Reference computations used only by tests. Each one is written from the
// defining formula, without calling the library routine it checks.

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

#include "sgldlab/loss_models.hpp"

namespace oracle {

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max(std::abs(b), 1e-300);
}

// Central-difference gradient with a fixed step.
inline std::vector<double> fd_grad(const sgldlab::LossModel& model, std::vector<double> w,
                                   std::span<const double> z, double h = 1e-6) {
  std::vector<double> g(w.size());
  for (std::size_t j = 0; j < w.size(); ++j) {
    const double w0 = w[j];
    w[j] = w0 + h;
    const double fp = model.eval(w, z);
    w[j] = w0 - h;
    const double fm = model.eval(w, z);
    w[j] = w0;
    g[j] = (fp - fm) / (2 * h);
  }
  return g;
}

// Composite Simpson rule with an even number of panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, std::size_t N) {
  if (N % 2) ++N;
  const double h = (b - a) / double(N);
  double s = f(a) + f(b);
  for (std::size_t i = 1; i < N; ++i) s += f(a + h * double(i)) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

// Σ_{t<T} q^t · a by explicit summation.
inline double geometric_sum(double q, double a, std::size_t T) {
  double s = 0.0, p = 1.0;
  for (std::size_t t = 0; t < T; ++t) {
    s += p * a;
    p *= q;
  }
  return s;
}

// Scalar OU recursion iterated step by step: returns (mean, var) of one coordinate.
struct Moments1 {
  double mean;
  double var;
};
inline Moments1 iterate_ou(double mean, double var, std::size_t t, double eta, double beta,
                           double R, double zbar) {
  for (std::size_t i = 0; i < t; ++i) {
    mean = (1 - eta * R) * mean + eta * R * zbar;
    var = (1 - eta * R) * (1 - eta * R) * var + 2 * eta / beta;
  }
  return {mean, var};
}

// KL(N(mp, vp) | N(mq, vq)) in one dimension.
inline double kl_1d(double mp, double vp, double mq, double vq) {
  return 0.5 * (vp / vq + (mp - mq) * (mp - mq) / vq - 1.0 + std::log(vq / vp));
}

// E|X|^p for X ~ N(mu, v) by quadrature.
inline double abs_moment_1d(double mu, double v, double p) {
  const double s = std::sqrt(v);
  const auto f = [&](double x) {
    return std::pow(std::abs(x), p) * std::exp(-(x - mu) * (x - mu) / (2 * v)) /
           std::sqrt(2 * M_PI * v);
  };
  return simpson(f, mu - 14 * s, mu + 14 * s, 20000);
}

// E‖X‖^p for X ~ N((mu, 0), v I_2) by product quadrature.
inline double norm_moment_2d(double mu, double v, double p) {
  const double s = std::sqrt(v);
  const auto fx = [&](double x) {
    const auto fy = [&](double y) {
      return std::pow(x * x + y * y, p / 2) * std::exp(-y * y / (2 * v));
    };
    return simpson(fy, -12 * s, 12 * s, 800) * std::exp(-(x - mu) * (x - mu) / (2 * v));
  };
  return simpson(fx, mu - 12 * s, mu + 12 * s, 800) / (2 * M_PI * v);
}

// Exact minibatch-gradient variance by enumerating all size-k subsets of n
// scalar gradients g_i: E_B (mean_B g − mean g)².
inline double enumerate_batch_variance(const std::vector<double>& g, std::size_t k) {
  const std::size_t n = g.size();
  const double full = std::accumulate(g.begin(), g.end(), 0.0) / double(n);
  double total = 0.0;
  std::size_t count = 0;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    if (std::size_t(__builtin_popcount(mask)) != k) continue;
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (1u << i)) s += g[i];
    const double d = s / double(k) - full;
    total += d * d;
    ++count;
  }
  return total / double(count);
}

}  // namespace oracle
