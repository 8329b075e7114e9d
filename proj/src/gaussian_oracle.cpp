#include "sgldlab/gaussian_oracle.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "sgldlab/error.hpp"
#include "sgldlab/rng.hpp"

namespace sgldlab {

GaussianState initial_state(std::size_t d, double s_sq) {
  if (!(s_sq > 0.0)) throw InvalidParameter("s_sq must be positive");
  return {Vector(d, 0.0), s_sq, 0};
}

GaussianState ou_step(const GaussianState& s, double eta, double beta, double R,
                      std::span<const double> zbar, bool* diverging) {
  if (zbar.size() != s.mean.size()) throw InvalidParameter("zbar dimension mismatch");
  const double a = 1.0 - eta * R;
  if (diverging) *diverging = eta * R >= 2.0;
  GaussianState out;
  out.mean.resize(s.mean.size());
  for (std::size_t j = 0; j < s.mean.size(); ++j) out.mean[j] = a * s.mean[j] + eta * R * zbar[j];
  out.var = a * a * s.var + 2.0 * eta / beta;
  out.t = s.t + 1;
  return out;
}

GaussianState ou_state_at(const GaussianState& s0, std::size_t t, double eta, double beta, double R,
                          std::span<const double> zbar) {
  if (zbar.size() != s0.mean.size()) throw InvalidParameter("zbar dimension mismatch");
  const double a = 1.0 - eta * R;
  const double tt = static_cast<double>(t);
  const double at = std::pow(a, tt);
  const double a2t = at * at;
  GaussianState out;
  out.mean.resize(s0.mean.size());
  for (std::size_t j = 0; j < s0.mean.size(); ++j) out.mean[j] = zbar[j] + at * (s0.mean[j] - zbar[j]);
  // Σ_{i<t} a^{2i} = (1 − a^{2t})/(1 − a²)
  const double a2 = a * a;
  const double geom = a2 == 1.0 ? tt : (1.0 - a2t) / (1.0 - a2);
  out.var = a2t * s0.var + 2.0 * eta / beta * geom;
  out.t = s0.t + t;
  return out;
}

double stationary_variance(double eta, double beta, double R) {
  if (!(eta * R > 0.0 && eta * R < 2.0)) throw InvalidParameter("stationary variance needs 0 < eta R < 2");
  return 1.0 / (beta * R * (1.0 - 0.5 * eta * R));
}

double gaussian_kl(const GaussianState& p, const GaussianState& q) {
  if (!(p.var > 0.0) || !(q.var > 0.0)) throw InvalidParameter("Gaussian variances must be positive");
  if (p.mean.size() != q.mean.size()) throw InvalidParameter("Gaussian dimension mismatch");
  const double d = static_cast<double>(p.mean.size());
  const double r = p.var / q.var;
  // r − 1 − log r computed stably near r = 1.
  const double shape = (r - 1.0) - std::log1p(r - 1.0);
  return 0.5 * d * shape + dist_sq(p.mean, q.mean) / (2.0 * q.var);
}

double gaussian_kl_full(std::span<const double> mean_p, std::span<const double> cov_p,
                        std::span<const double> mean_q, std::span<const double> cov_q) {
  const auto d = static_cast<Eigen::Index>(mean_p.size());
  if (mean_q.size() != mean_p.size() || cov_p.size() != mean_p.size() * mean_p.size() ||
      cov_q.size() != cov_p.size())
    throw InvalidParameter("Gaussian dimension mismatch");
  using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Eigen::Map<const Mat> Sp(cov_p.data(), d, d), Sq(cov_q.data(), d, d);
  const Eigen::Map<const Eigen::VectorXd> mp(mean_p.data(), d), mq(mean_q.data(), d);
  const Eigen::LLT<Mat> Lp(Sp), Lq(Sq);
  if (Lp.info() != Eigen::Success || Lq.info() != Eigen::Success)
    throw InvalidParameter("covariance is not positive definite");
  const Mat Mq = Lq.matrixL();
  const Mat Mp = Lp.matrixL();
  double logdet_p = 0.0, logdet_q = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) {
    logdet_p += 2.0 * std::log(Mp(i, i));
    logdet_q += 2.0 * std::log(Mq(i, i));
  }
  const double trace = Lq.solve(Sp).trace();
  const Eigen::VectorXd diff = mq - mp;
  const double quad = diff.dot(Lq.solve(diff));
  return 0.5 * (trace + quad - static_cast<double>(d) + logdet_q - logdet_p);
}

double gaussian_norm_moment(std::span<const double> mean, double var, int p) {
  if (p < 0 || p % 2 != 0) throw InvalidParameter("moment order must be even and nonnegative");
  if (!(var > 0.0)) throw InvalidParameter("variance must be positive");
  const int K = p / 2;
  const double d = static_cast<double>(mean.size());
  const double lam = norm_sq(mean) / var;
  // Raw moments of Y = ‖X‖²/var ~ χ'²(d, λ) from its cumulants κ_j = 2^{j−1}(j−1)!(d + jλ).
  std::vector<double> kappa(K + 1, 0.0), mom(K + 1, 0.0);
  double fact = 1.0;
  for (int j = 1; j <= K; ++j) {
    if (j > 1) fact *= static_cast<double>(j - 1);
    kappa[j] = std::ldexp(fact, j - 1) * (d + j * lam);
  }
  mom[0] = 1.0;
  for (int k = 1; k <= K; ++k) {
    double s = 0.0, binom = 1.0;  // C(k−1, j−1)
    for (int j = 1; j <= k; ++j) {
      s += binom * kappa[j] * mom[k - j];
      binom = binom * static_cast<double>(k - j) / static_cast<double>(j);
    }
    mom[k] = s;
  }
  return std::pow(var, K) * mom[K];
}

std::vector<double> oracle_kl_trace(std::span<const double> zbar_S,
                                    std::span<const double> zbar_S_prime, const SGLDConfig& config,
                                    double R) {
  if (zbar_S.size() != config.d || zbar_S_prime.size() != config.d)
    throw InvalidParameter("dataset mean dimension mismatch");
  GaussianState p = initial_state(config.d, config.s_sq), q = p;
  std::vector<double> kl(config.T + 1);
  kl[0] = gaussian_kl(p, q);
  for (std::size_t t = 1; t <= config.T; ++t) {
    p = ou_step(p, config.eta, config.beta, R, zbar_S);
    q = ou_step(q, config.eta, config.beta, R, zbar_S_prime);
    kl[t] = gaussian_kl(p, q);
  }
  return kl;
}

EstimateWithError oracle_mi_upper(const DataSampler& sampler, const SGLDConfig& config, double R,
                                  std::size_t n_dataset_pairs, bool same_dataset_control) {
  if (n_dataset_pairs < 1) throw InvalidParameter("n_dataset_pairs must be positive");
  if (sampler.data_dim() != config.d) throw InvalidParameter("oracle needs unlabeled data of dimension d");
  const GaussianState s0 = initial_state(config.d, config.s_sq);
  std::vector<double> vals(n_dataset_pairs);
#pragma omp parallel for schedule(static)
  for (long p = 0; p < static_cast<long>(n_dataset_pairs); ++p) {
    Rng ra(config.seed, StreamTag::pair, 2 * static_cast<std::uint64_t>(p));
    const Dataset S = sampler.sample(ra, config.n);
    Dataset Sp = S;
    if (!same_dataset_control) {
      Rng rb(config.seed, StreamTag::pair, 2 * static_cast<std::uint64_t>(p) + 1);
      Sp = sampler.sample(rb, config.n);
    }
    const auto a = ou_state_at(s0, config.T, config.eta, config.beta, R, S.mean());
    const auto b = ou_state_at(s0, config.T, config.eta, config.beta, R, Sp.mean());
    vals[p] = gaussian_kl(a, b);
  }
  return summarize(vals, "oracle_mi_upper");
}

RecursionReport verify_kl_recursion(std::span<const double> kl_trace, double contraction,
                                    double per_step_add, double tol) {
  RecursionReport r;
  r.worst_slack = HUGE_VAL;
  for (std::size_t t = 1; t < kl_trace.size(); ++t) {
    const double slack = contraction * kl_trace[t - 1] + per_step_add - kl_trace[t];
    r.slack.push_back(slack);
    ++r.n_steps;
    if (slack < -tol * std::max(1.0, std::abs(kl_trace[t]))) ++r.n_violations;
    if (slack < r.worst_slack) {
      r.worst_slack = slack;
      r.worst_step = t;
    }
  }
  if (r.n_steps == 0) r.worst_slack = 0.0;
  return r;
}

StronglyConvexRecursion strongly_convex_recursion(double eta, double beta, double R,
                                                  double sup_stability) {
  if (!(R > 0.0) || !(beta > 0.0) || !(eta >= 0.0) || !(sup_stability >= 0.0))
    throw InvalidParameter("strongly convex recursion needs R, beta > 0 and eta, stability >= 0");
  return {std::exp(-eta * R / 4.0), eta * beta / 2.0 * sup_stability};
}

}  // namespace sgldlab
