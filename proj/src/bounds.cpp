#include "sgldlab/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>
#include <json.hpp>

#include "sgldlab/csv.hpp"
#include "sgldlab/error.hpp"

namespace sgldlab {

namespace {

void check_sigma(double sigma_g_sq) {
  if (!(sigma_g_sq > 0.0)) throw InvalidParameter("sigma_g_sq must be positive");
}

BoundEntry entry(std::string name, double T, std::size_t n, double eta, double beta) {
  BoundEntry e;
  e.name = std::move(name);
  e.T = T;
  e.n = static_cast<double>(n);
  e.eta = eta;
  e.beta = beta;
  return e;
}

void mark_unavailable_sigma(BoundEntry& e) {
  e.preconditions_ok = false;
  e.notes.push_back("unavailable: sigma_g_sq not supplied");
}

// (1 − e^{−x})/x and (1 − e^{−x}(1+x))/x², accurate near 0.
double phi1(double x) { return x < 1e-8 ? 1.0 - 0.5 * x : -std::expm1(-x) / x; }
double phi2(double x) {
  if (x < 1e-3) return 0.5 - x / 3.0 + x * x / 8.0 - x * x * x / 30.0;
  return (-std::expm1(-x) - x * std::exp(-x)) / (x * x);
}

}  // namespace

bool BoundEntry::has_flag(const std::string& f) const {
  return std::find(flags.begin(), flags.end(), f) != flags.end();
}

const BoundEntry* BoundReport::find(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return &e;
  return nullptr;
}

std::string BoundReport::to_json() const {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& e : entries_) {
    nlohmann::ordered_json j;
    j["name"] = e.name;
    j["value"] = e.value ? nlohmann::ordered_json(*e.value) : nlohmann::ordered_json(nullptr);
    j["preconditions_ok"] = e.preconditions_ok;
    j["T"] = e.T;
    j["n"] = e.n;
    j["eta"] = e.eta;
    j["beta"] = e.beta;
    j["inputs"] = e.inputs;
    j["constants_used"] = e.constants_used;
    j["flags"] = e.flags;
    j["notes"] = e.notes;
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

std::string BoundReport::to_csv(bool header) const {
  std::string out;
  if (header) out += "name,value,T,n,eta,beta,flags\n";
  for (const auto& e : entries_) {
    std::string flags;
    for (const auto& f : e.flags) flags += (flags.empty() ? "" : ";") + f;
    if (!e.preconditions_ok) flags += std::string(flags.empty() ? "" : ";") + "preconditions-failed";
    out += fmt::format("{},{},{},{},{},{},{}\n", e.name, e.value ? format_double(*e.value) : "",
                       format_double(e.T), format_double(e.n), format_double(e.eta),
                       format_double(e.beta), flags);
  }
  return out;
}

double xu_raginsky_value(double sigma_g_sq, std::size_t n, double mi_upper) {
  check_sigma(sigma_g_sq);
  if (n == 0) throw InvalidParameter("n must be positive");
  if (!(mi_upper >= 0.0)) throw InvalidParameter("mutual information bound must be nonnegative");
  return std::sqrt(2.0 * sigma_g_sq * mi_upper / static_cast<double>(n));
}

BoundEntry bound_xu_raginsky(std::optional<double> sigma_g_sq, std::size_t n, double mi_upper) {
  auto e = entry("xu_raginsky", 0.0, n, 0.0, 0.0);
  e.inputs["mi_upper"] = mi_upper;
  if (!sigma_g_sq) {
    mark_unavailable_sigma(e);
    return e;
  }
  e.inputs["sigma_g_sq"] = *sigma_g_sq;
  e.value = xu_raginsky_value(*sigma_g_sq, n, mi_upper);
  return e;
}

double pensia_information(std::span<const double> variances, double eta, double beta,
                          std::size_t d) {
  if (d == 0) throw InvalidParameter("dimension must be positive");
  const double dd = static_cast<double>(d);
  double I = 0.0;
  for (const double v : variances) {
    if (!(v >= 0.0)) throw InvalidParameter("variance entries must be nonnegative");
    I += 0.5 * dd * std::log1p(beta * eta * v / dd);
  }
  return I;
}

BoundEntry bound_pensia(std::span<const double> variances, double eta, double beta,
                        std::size_t d, std::size_t n, std::optional<double> sigma_g_sq) {
  auto e = entry("pensia", static_cast<double>(variances.size()), n, eta, beta);
  const double I = pensia_information(variances, eta, beta, d);
  e.constants_used["I_bound"] = I;
  e.inputs["d"] = static_cast<double>(d);
  if (!sigma_g_sq) {
    mark_unavailable_sigma(e);
    return e;
  }
  e.inputs["sigma_g_sq"] = *sigma_g_sq;
  e.value = xu_raginsky_value(*sigma_g_sq, n, I);
  return e;
}

TimeIndependentValue time_independent_value(const LossConstants& lc, const DerivedConstants& dc,
                                            double eta, double beta, std::size_t T, std::size_t n,
                                            double sigma_g_sq) {
  check_sigma(sigma_g_sq);
  const auto failures = theorem_precondition_failures(lc, eta, beta, dc.c_LS);
  if (!failures.empty()) throw PreconditionError("time-independent bound: " + failures.front());
  const auto kr = kl_recursion_constants(dc, eta, beta);
  const double four_beta_c = 4.0 * beta * dc.c_LS;
  const double horizon = eta * static_cast<double>(T) / four_beta_c;
  TimeIndependentValue out;
  out.saturated = horizon >= 1.0;
  out.kl = four_beta_c * std::min(1.0, horizon) / (1.0 - kr.rate) * (kr.V + kr.c3);
  out.value = std::sqrt(2.0 * sigma_g_sq * out.kl / static_cast<double>(n));
  return out;
}

BoundEntry bound_time_independent(const LossConstants& lc, const DerivedConstants& dc,
                                  double eta, double beta, std::size_t T, std::size_t n,
                                  std::optional<double> sigma_g_sq) {
  auto e = entry("time_independent", static_cast<double>(T), n, eta, beta);
  e.flags = dc.flags;
  e.constants_used = {{"c_LS", dc.c_LS}, {"D1", dc.D1}, {"D2", dc.D2}, {"D3", dc.D3},
                      {"D4", dc.D4},     {"D5", dc.D5}, {"C0", dc.C0}};
  const auto failures = theorem_precondition_failures(lc, eta, beta, dc.c_LS);
  if (!failures.empty()) {
    e.preconditions_ok = false;
    for (const auto& f : failures) e.notes.push_back("failed: " + f);
    return e;
  }
  if (!sigma_g_sq) {
    mark_unavailable_sigma(e);
    return e;
  }
  e.inputs["sigma_g_sq"] = *sigma_g_sq;
  const auto v = time_independent_value(lc, dc, eta, beta, T, n, *sigma_g_sq);
  const auto kr = kl_recursion_constants(dc, eta, beta);
  e.constants_used["KL_T"] = v.kl;
  e.constants_used["V"] = kr.V;
  e.constants_used["c3"] = kr.c3;
  e.constants_used["contraction"] = kr.contraction;
  e.value = v.value;
  if (v.saturated) e.flags.push_back("saturated");
  return e;
}

double strongly_convex_integral(std::span<const double> times, std::span<const double> values,
                                double R, double T) {
  if (times.empty() || times.size() != values.size())
    throw InvalidParameter("strongly convex bound needs a nonempty trace with matching times");
  if (!(R > 0.0)) throw InvalidParameter("R must be positive");
  const double span_tol = 1e-9 * std::max(1.0, std::abs(T));
  if (std::abs(times.front()) > span_tol || std::abs(times.back() - T) > span_tol)
    throw InvalidParameter("trace must cover [0, T]");
  const double a = R / 4.0;
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < times.size(); ++i) {
    const double h = times[i + 1] - times[i];
    if (!(h > 0.0)) throw InvalidParameter("trace times must be strictly increasing");
    if (values[i] < 0.0) throw InvalidParameter("integrand must be nonnegative");
    const double x = a * h;
    const double p1 = phi1(x), p2 = phi2(x);
    const double w_end = std::exp(-a * (T - times[i + 1]));
    total += w_end * h * (p2 * values[i] + (p1 - p2) * values[i + 1]);
  }
  if (values.back() < 0.0) throw InvalidParameter("integrand must be nonnegative");
  return total;
}

BoundEntry bound_strongly_convex(std::span<const double> times, std::span<const double> values,
                                 double R, double beta, std::size_t n,
                                 std::optional<double> sigma_g_sq, double T) {
  auto e = entry("strongly_convex", T, n, 0.0, beta);
  e.inputs["R"] = R;
  const double integral = strongly_convex_integral(times, values, R, T);
  e.constants_used["integral"] = integral;
  e.notes.push_back("time axis is continuous time eta*step");
  if (!sigma_g_sq) {
    mark_unavailable_sigma(e);
    return e;
  }
  check_sigma(*sigma_g_sq);
  e.inputs["sigma_g_sq"] = *sigma_g_sq;
  e.value = std::sqrt(2.0 * beta * *sigma_g_sq * integral / static_cast<double>(n));
  return e;
}

double farghly_shape_value(double C1, double C2, double eta, double T, std::size_t n,
                           std::size_t k) {
  if (n <= k) throw InvalidParameter("Farghly bound needs n > k");
  if (!(C1 > 0.0 && C2 > 0.0)) throw InvalidParameter("C1 and C2 must be positive");
  if (!(eta > 0.0)) throw InvalidParameter("eta must be positive");
  const double nn = static_cast<double>(n), kk = static_cast<double>(k);
  const double horizon = std::min(eta * T, nn * (C2 + 1.0) / (nn - kk));
  return C1 * horizon * (kk / (nn * std::sqrt(eta)) + std::sqrt(eta));
}

BoundEntry bound_farghly_shape(double C1, double C2, double eta, double T, std::size_t n,
                               std::size_t k, std::optional<double> m) {
  auto e = entry("farghly_shape", T, n, eta, 0.0);
  e.inputs = {{"C1", C1}, {"C2", C2}, {"k", static_cast<double>(k)}};
  e.flags.push_back("comparison-only");
  const double v = farghly_shape_value(C1, C2, eta, T, n, k);
  if (m && eta > 1.0 / (2.0 * *m)) {
    e.preconditions_ok = false;
    e.notes.push_back("failed: eta <= 1/(2m)");
    return e;
  }
  e.value = v;
  return e;
}

PsiInverse psi_star_inverse(double y, double sigma_e_sq, double nu) {
  if (!(y >= 0.0)) throw InvalidParameter("y must be nonnegative");
  if (!(sigma_e_sq > 0.0 && nu > 0.0)) throw InvalidParameter("sigma_e_sq and nu must be positive");
  const double knee = sigma_e_sq / (2.0 * nu * nu);
  if (y <= knee) return {std::sqrt(2.0 * sigma_e_sq * y), false};
  return {nu * y + sigma_e_sq / (2.0 * nu), true};
}

BoundEntry bound_subexp_gen(double y, double sigma_e_sq, double nu) {
  auto e = entry("subexp_gen", 0.0, 0, 0.0, 0.0);
  e.inputs = {{"y", y}, {"sigma_e_sq", sigma_e_sq}, {"nu", nu}};
  const auto p = psi_star_inverse(y, sigma_e_sq, nu);
  e.value = p.value;
  e.flags.push_back(p.linear_branch ? "branch:linear" : "branch:sqrt");
  return e;
}

double minimization_error(const LossConstants& lc, double beta, std::size_t d) {
  if (!(beta > 0.0)) throw InvalidParameter("beta must be positive");
  const double dd = static_cast<double>(d);
  return dd / (2.0 * beta) * std::log(std::numbers::e * lc.M / lc.m * (lc.b * beta / dd + 1.0));
}

double convergence_error(const LossConstants& lc, const DerivedConstants& dc, double eta,
                         double beta, std::size_t T) {
  if (!std::isfinite(dc.c_LS)) throw PreconditionError("c_LS unavailable");
  const double lead = lc.M * std::sqrt(dc.C0) + lc.M * std::sqrt(lc.b / lc.m);
  const double kl = std::exp(-2.0 * static_cast<double>(T) * eta / (beta * dc.c_LS)) + eta;
  return lead * std::sqrt(dc.c_LS * kl);
}

ExcessRisk excess_risk_value(const LossConstants& lc, const DerivedConstants& dc, double eta,
                             double beta, std::size_t T, std::size_t d, double gen_bound) {
  if (!(gen_bound >= 0.0)) throw InvalidParameter("generalization bound must be nonnegative");
  ExcessRisk r;
  r.gen_term = gen_bound;
  r.convergence_term = convergence_error(lc, dc, eta, beta, T);
  r.minimization_term = minimization_error(lc, beta, d);
  r.total = r.gen_term + r.convergence_term + r.minimization_term;
  return r;
}

BoundEntry bound_excess_risk(const LossConstants& lc, const DerivedConstants& dc, double eta,
                             double beta, std::size_t T, std::size_t d, std::size_t n,
                             std::optional<double> gen_bound) {
  auto e = entry("excess_risk", static_cast<double>(T), n, eta, beta);
  e.flags = dc.flags;
  e.flags.push_back("order-level");
  if (!dc.preconditions_ok() || !gen_bound) {
    e.preconditions_ok = false;
    for (const auto& f : dc.precondition_failures) e.notes.push_back("failed: " + f);
    if (!gen_bound) e.notes.push_back("unavailable: generalization term");
    return e;
  }
  const auto r = excess_risk_value(lc, dc, eta, beta, T, d, *gen_bound);
  e.constants_used = {{"gen_term", r.gen_term},
                      {"convergence_term", r.convergence_term},
                      {"minimization_term", r.minimization_term}};
  e.value = r.total;
  return e;
}

}  // namespace sgldlab
