#include "sgldlab/constants.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <fmt/format.h>

#include "sgldlab/error.hpp"

namespace sgldlab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double one_vee_inv_m(const LossConstants& lc) { return std::max(1.0, 1.0 / lc.m); }

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw InvalidParameter(fmt::format("{} must be positive", what));
}

}  // namespace

std::string to_string(LsiMode mode) {
  return mode == LsiMode::strongly_convex ? "strongly_convex" : "general_dissipative";
}

LsiMode lsi_mode_from_string(const std::string& s) {
  if (s == "strongly_convex") return LsiMode::strongly_convex;
  if (s == "general_dissipative") return LsiMode::general_dissipative;
  throw InvalidParameter("unknown LSI mode '" + s + "'");
}

LsiBreakdown lsi_constant_breakdown(const LossConstants& lc, double beta, std::size_t d,
                                    LsiMode mode, double universal_C) {
  require_positive(beta, "beta");
  if (d == 0) throw InvalidParameter("dimension must be positive");
  LsiBreakdown out;
  out.mode = mode;
  if (mode == LsiMode::strongly_convex) {
    if (!lc.R) throw PreconditionError("strongly convex LSI constant needs a strong convexity modulus R");
    out.value = 1.0 / (2.0 * beta * *lc.R);
    return out;
  }
  if (beta < 2.0 / lc.m)
    throw PreconditionError(fmt::format("general LSI constant needs beta >= 2/m = {}", 2.0 / lc.m));
  require_positive(universal_C, "universal constant C");
  const double M = lc.M, m = lc.m, b = lc.b, A = lc.A;
  const double dd = static_cast<double>(d);
  out.B = lc.origin_gradient_bound();
  out.D1 = (2.0 * m * m + 8.0 * M * M) / (beta * m * m * M);
  out.D2 = 6.0 * M * (dd + beta) / m;
  out.exponent = (2.0 / m) * (M + out.B) * (b * beta + dd) + beta * (A + out.B);
  out.rho0_inv = (2.0 * universal_C * (dd + b * beta) / (m * beta)) * std::exp(out.exponent) +
                 1.0 / (m * beta * (dd + b * beta));
  out.value = 2.0 * out.D1 + 2.0 * out.rho0_inv * (out.D2 + 2.0);
  out.finite = std::isfinite(out.value);
  return out;
}

double lsi_constant(const LossConstants& lc, double beta, std::size_t d, LsiMode mode,
                    double universal_C) {
  const auto br = lsi_constant_breakdown(lc, beta, d, mode, universal_C);
  if (!br.finite) throw PreconditionError("LSI constant overflows double precision");
  return br.value;
}

double moment_bound_C0(const LossConstants& lc, double eta, double beta, std::size_t d,
                       double s_sq) {
  const double limit = std::min(1.0, lc.m / (5.0 * lc.M * lc.M));
  if (!(eta > 0.0 && eta < limit))
    throw PreconditionError(fmt::format("moment bound needs 0 < eta < {}", limit));
  require_positive(beta, "beta");
  require_positive(s_sq, "s_sq");
  return s_sq + 2.0 * one_vee_inv_m(lc) *
                    (lc.b + 10.0 * eta * lc.M * lc.M * lc.b / lc.m + static_cast<double>(d) / beta);
}

double moment_bound_C0_uniform(const LossConstants& lc, double beta, std::size_t d, double s_sq) {
  require_positive(beta, "beta");
  require_positive(s_sq, "s_sq");
  return s_sq + 2.0 * one_vee_inv_m(lc) *
                    (lc.b + 10.0 * lc.M * lc.M * lc.b / lc.m + static_cast<double>(d) / beta);
}

double minibatch_delta(std::size_t n, std::size_t k) {
  if (n < 2) throw InvalidParameter("minibatch variance needs n >= 2");
  if (k < 1 || k > n) throw InvalidParameter("minibatch size must satisfy 1 <= k <= n");
  return static_cast<double>(n - k) / (static_cast<double>(k) * static_cast<double>(n - 1));
}

double sg_variance_bound(const LossConstants& lc, std::size_t n, std::size_t k, double w_norm_sq) {
  if (w_norm_sq < 0.0) throw InvalidParameter("squared norm must be nonnegative");
  const double delta = minibatch_delta(n, k);
  return 8.0 * delta * lc.M * lc.M * (w_norm_sq + static_cast<double>(k) / lc.m);
}

SubexpParams subexp_params(const LossConstants& lc, double beta, std::size_t d, double s_sq,
                           double moment_universal_C) {
  require_positive(beta, "beta");
  require_positive(s_sq, "s_sq");
  require_positive(moment_universal_C, "moment universal constant");
  SubexpParams p;
  const double K = moment_universal_C * (std::sqrt(s_sq) + 1.0 / std::sqrt(beta * lc.m));
  p.C0_f = lc.M * lc.b / (2.0 * lc.m) + lc.A + 0.5 * lc.b * std::log(3.0);
  p.C1_f = lc.M * K * K * (2.0 + static_cast<double>(d) + beta * lc.b);
  p.C5 = p.C0_f + p.C1_f;
  const double two_e_C5 = 2.0 * std::numbers::e * p.C5;
  p.sigma_e_sq = two_e_C5 * two_e_C5;
  p.nu = 1.0 / two_e_C5;
  return p;
}

std::vector<std::string> theorem_precondition_failures(const LossConstants& lc, double eta,
                                                       double beta, double c_LS) {
  std::vector<std::string> out;
  if (!(beta >= 2.0 / lc.m)) out.push_back(fmt::format("beta >= 2/m (2/m = {:.6g})", 2.0 / lc.m));
  if (!(eta > 0.0)) out.push_back("eta > 0");
  if (!(eta < 1.0)) out.push_back("eta < 1");
  const double mm = lc.m / (5.0 * lc.M * lc.M);
  if (!(eta < mm)) out.push_back(fmt::format("eta < m/(5M^2) (= {:.6g})", mm));
  if (!std::isfinite(c_LS))
    out.push_back("eta < 4 beta c_LS (c_LS unavailable)");
  else if (!(eta < 4.0 * beta * c_LS))
    out.push_back(fmt::format("eta < 4 beta c_LS (= {:.6g})", 4.0 * beta * c_LS));
  return out;
}

DerivedConstants derive_constants(const LossConstants& lc, const DeriveInputs& in) {
  lc.validate();
  require_positive(in.beta, "beta");
  require_positive(in.s_sq, "s_sq");
  if (in.d == 0) throw InvalidParameter("dimension must be positive");

  DerivedConstants dc;
  dc.heuristics = in.heuristics;
  const double M = lc.M, m = lc.m, b = lc.b;
  const double beta = in.beta, eta = in.eta, s_sq = in.s_sq;
  const double dd = static_cast<double>(in.d);
  const auto& h = in.heuristics;

  try {
    dc.lsi = lsi_constant_breakdown(lc, beta, in.d, in.lsi_mode, h.lsi_universal_C);
    dc.c_LS = dc.lsi.finite ? dc.lsi.value : kNaN;
    if (!dc.lsi.finite) dc.precondition_failures.push_back("LSI constant overflows double precision");
  } catch (const PreconditionError& e) {
    dc.c_LS = kNaN;
    dc.precondition_failures.push_back(e.what());
  }
  if (in.lsi_mode == LsiMode::general_dissipative) {
    dc.flags.push_back("heuristic-constant:lsi_C");
    dc.flags.push_back("B-from-origin-gradient-lemma");
  }

  for (auto& f : theorem_precondition_failures(lc, eta, beta, dc.c_LS))
    if (std::find(dc.precondition_failures.begin(), dc.precondition_failures.end(), f) ==
        dc.precondition_failures.end())
      dc.precondition_failures.push_back(std::move(f));

  dc.C0 = s_sq + 2.0 * one_vee_inv_m(lc) * (b + 10.0 * eta * M * M * b / m + dd / beta);
  dc.C0_uniform = moment_bound_C0_uniform(lc, beta, in.d, s_sq);
  dc.grad_sq_bound = M * M * dc.C0 + M * M * b / m;
  dc.delta = in.n >= 2 ? minibatch_delta(in.n, in.k) : 0.0;

  const double Cu = dc.C0_uniform;
  dc.D2 = beta * beta * M * M * (Cu + b / m) +
          dd * h.C1_prime / std::sqrt(2.0 * std::numbers::pi * s_sq) + dd * h.C2_prime;
  dc.B1 = 0.5 * dd * std::log(2.0 * std::numbers::pi * s_sq) +
          (s_sq + 4.0 * one_vee_inv_m(lc) * (b + 10.0 * M * M * b / m + dd / beta)) / (2.0 * s_sq);
  dc.B2 = beta * M * Cu + beta * b / (2.0 * m) + lc.A;
  dc.D3 = dc.B1 + dc.B2;
  dc.D4 = M * M * Cu + M * M * b / m;
  dc.D5 = 2.0 * M * M * h.C0_tilde * (h.C1_tilde * eta * eta + Cu) + 2.0 * M * M * b / m;
  dc.D1_analytic = 2.0 * (dc.D4 + dc.D5);
  if (in.empirical_D1) {
    if (!(*in.empirical_D1 >= 0.0)) throw InvalidParameter("empirical D1 must be nonnegative");
    dc.D1 = *in.empirical_D1;
    dc.D1_empirical = true;
    dc.flags.push_back("empirical-D1");
  } else {
    dc.D1 = dc.D1_analytic;
  }
  dc.flags.push_back("heuristic-constant:parametrix");

  dc.subexp = subexp_params(lc, beta, in.d, s_sq, h.moment_universal_C);
  dc.flags.push_back("heuristic-constant:moment_C");
  return dc;
}

KlRecursion kl_recursion_constants(const DerivedConstants& dc, double eta, double beta) {
  require_positive(beta, "beta");
  if (!(eta >= 0.0)) throw InvalidParameter("eta must be nonnegative");
  if (!std::isfinite(dc.c_LS)) throw PreconditionError("c_LS unavailable");
  const double four_beta_c = 4.0 * beta * dc.c_LS;
  if (!(eta < four_beta_c))
    throw PreconditionError(fmt::format("KL recursion needs eta < 4 beta c_LS = {}", four_beta_c));
  KlRecursion kr;
  kr.rate = eta / four_beta_c;
  kr.contraction = std::exp(-kr.rate);
  kr.V = beta * dc.D1 / 2.0;
  kr.c3 = dc.D2 / four_beta_c + dc.D3 / (2.0 * beta);
  kr.per_step_add = eta * (kr.c3 + kr.V);
  return kr;
}

double kl_recursion_unrolled(const KlRecursion& kr, std::size_t T) {
  if (T == 0 || kr.per_step_add == 0.0) return 0.0;
  if (kr.rate == 0.0) return kr.per_step_add * static_cast<double>(T);
  // (1 − c^T)/(1 − c) with c = e^{−rate}, via expm1 for small rates.
  return kr.per_step_add * std::expm1(-kr.rate * static_cast<double>(T)) / std::expm1(-kr.rate);
}

}  // namespace sgldlab
