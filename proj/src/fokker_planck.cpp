#include "sgldlab/fokker_planck.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "sgldlab/error.hpp"

namespace sgldlab {

namespace {

// Bernoulli function x/(eˣ − 1).
double bernoulli(double x) {
  if (std::abs(x) < 1e-6) return 1.0 - 0.5 * x + x * x / 12.0;
  return x / std::expm1(x);
}

void check_field(const Grid1D& g, const DensityField& f) {
  if (f.values.size() != g.n_cells) throw InvalidParameter("density size does not match grid");
}

void check_potential(const Grid1D& g, std::span<const double> F) {
  if (F.size() != g.n_cells) throw InvalidParameter("potential size does not match grid");
  for (const double v : F)
    if (!std::isfinite(v)) throw InvalidParameter("potential must be finite on the grid");
}

double face_w(std::span<const double> F, double beta, std::size_t i) {
  return beta * (F[i + 1] - F[i]);
}

// Flux through face i+½, positive to the right.
double face_flux(std::span<const double> F, const std::vector<double>& rho, double beta, double h,
                 std::size_t i) {
  const double w = face_w(F, beta, i);
  return -(bernoulli(-w) * rho[i + 1] - bernoulli(w) * rho[i]) / (beta * h);
}

void check_dt(const Grid1D& g, std::span<const double> F, double beta, double dt) {
  if (!(dt > 0.0)) throw InvalidParameter("dt must be positive");
  const double lim = max_stable_dt(g, F, beta);
  if (dt > lim)
    throw PreconditionError(fmt::format("dt={} exceeds the stability limit; use dt <= {}", dt, lim));
}

DensityField finish(const DensityField& rho, std::vector<double>&& next, double dt,
                    StepStats* stats) {
  double clamp = 0.0;
  for (auto& v : next)
    if (v < 0.0) {
      clamp -= v;
      v = 0.0;
    }
  if (stats) stats->clamp_mass = clamp;
  return {std::move(next), rho.t + dt};
}

struct Mask {
  std::vector<char> in;
  std::size_t count = 0;
};

Mask support_mask(const DensityField& rho, const DensityField& gamma) {
  const double mr = *std::max_element(rho.values.begin(), rho.values.end());
  const double mg = *std::max_element(gamma.values.begin(), gamma.values.end());
  Mask m;
  m.in.resize(rho.values.size());
  for (std::size_t i = 0; i < rho.values.size(); ++i) {
    const double r = rho.values[i], q = gamma.values[i];
    const bool ok = r > kDensityFloor && q > kDensityFloor && r > kRelativeFloor * mr &&
                    q > kRelativeFloor * mg;
    m.in[i] = ok;
    m.count += ok;
  }
  if (m.count == 0) throw InvalidParameter("densities share no support above the floor");
  return m;
}

}  // namespace

Grid1D::Grid1D(double lo, double hi, std::size_t cells) : w_min(lo), w_max(hi), n_cells(cells) {
  if (!(hi > lo)) throw InvalidParameter("grid needs w_max > w_min");
  if (cells < 64) throw InvalidParameter("grid needs at least 64 cells");
}

std::vector<double> Grid1D::centers() const {
  std::vector<double> c(n_cells);
  for (std::size_t i = 0; i < n_cells; ++i) c[i] = center(i);
  return c;
}

double DensityField::mass(const Grid1D& g) const {
  double s = 0.0;
  for (const double v : values) s += v;
  return s * g.h();
}

Potential make_potential(const Grid1D& g, const std::function<double(double)>& F,
                         const std::function<double(double)>& dF) {
  Potential p;
  p.value.resize(g.n_cells);
  p.deriv.resize(g.n_cells);
  for (std::size_t i = 0; i < g.n_cells; ++i) {
    p.value[i] = F(g.center(i));
    p.deriv[i] = dF(g.center(i));
  }
  return p;
}

Potential dataset_potential(const Grid1D& g, const LossModel& model, const Dataset& data) {
  if (model.dim() != 1) throw InvalidParameter("the grid lab needs a one-dimensional model");
  Potential p;
  p.value.resize(g.n_cells);
  p.deriv.resize(g.n_cells);
  double w[1], gr[1];
  for (std::size_t i = 0; i < g.n_cells; ++i) {
    w[0] = g.center(i);
    p.value[i] = model.empirical_risk(w, data);
    model.full_grad(w, data, gr);
    p.deriv[i] = gr[0];
  }
  return p;
}

DensityField gibbs_density(const Grid1D& g, std::span<const double> potential, double beta) {
  check_potential(g, potential);
  if (!(beta > 0.0)) throw InvalidParameter("beta must be positive");
  const double fmin = *std::min_element(potential.begin(), potential.end());
  DensityField out;
  out.values.resize(g.n_cells);
  double s = 0.0;
  for (std::size_t i = 0; i < g.n_cells; ++i) {
    out.values[i] = std::exp(-beta * (potential[i] - fmin));
    s += out.values[i];
  }
  const double norm = 1.0 / (s * g.h());
  for (auto& v : out.values) v *= norm;
  return out;
}

DensityField gaussian_density(const Grid1D& g, double mean, double var) {
  if (!(var > 0.0)) throw InvalidParameter("variance must be positive");
  DensityField out;
  out.values.resize(g.n_cells);
  double s = 0.0;
  for (std::size_t i = 0; i < g.n_cells; ++i) {
    const double x = g.center(i) - mean;
    out.values[i] = std::exp(-0.5 * x * x / var);
    s += out.values[i];
  }
  const double norm = 1.0 / (s * g.h());
  for (auto& v : out.values) v *= norm;
  return out;
}

double max_stable_dt(const Grid1D& g, std::span<const double> potential, double beta) {
  check_potential(g, potential);
  const double h = g.h();
  double worst = 0.0;
  for (std::size_t i = 0; i < g.n_cells; ++i) {
    const double right = i + 1 < g.n_cells ? bernoulli(face_w(potential, beta, i)) : 0.0;
    const double left = i > 0 ? bernoulli(-face_w(potential, beta, i - 1)) : 0.0;
    worst = std::max(worst, right + left);
  }
  return beta * h * h / worst;
}

DensityField fp_step(const Grid1D& g, const DensityField& rho, std::span<const double> potential,
                     double beta, double dt, StepStats* stats) {
  check_field(g, rho);
  check_dt(g, potential, beta, dt);
  const std::size_t n = g.n_cells;
  const double h = g.h();
  std::vector<double> flux(n + 1, 0.0), next(n);
#pragma omp parallel for schedule(static)
  for (long i = 0; i < static_cast<long>(n) - 1; ++i)
    flux[i + 1] = face_flux(potential, rho.values, beta, h, static_cast<std::size_t>(i));
#pragma omp parallel for schedule(static)
  for (long i = 0; i < static_cast<long>(n); ++i)
    next[i] = rho.values[i] - dt / h * (flux[i + 1] - flux[i]);
  return finish(rho, std::move(next), dt, stats);
}

DensityField fp_step_reference(const Grid1D& g, const DensityField& rho,
                               std::span<const double> potential, double beta, double dt,
                               StepStats* stats) {
  check_field(g, rho);
  check_dt(g, potential, beta, dt);
  const std::size_t n = g.n_cells;
  const double h = g.h();
  std::vector<double> next(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double right = i + 1 < n ? face_flux(potential, rho.values, beta, h, i) : 0.0;
    const double left = i > 0 ? face_flux(potential, rho.values, beta, h, i - 1) : 0.0;
    next[i] = rho.values[i] - dt / h * (right - left);
  }
  return finish(rho, std::move(next), dt, stats);
}

double kl_on_grid(const Grid1D& g, const DensityField& rho, const DensityField& gamma) {
  check_field(g, rho);
  check_field(g, gamma);
  const Mask m = support_mask(rho, gamma);
  double s = 0.0;
  for (std::size_t i = 0; i < g.n_cells; ++i)
    if (m.in[i] && rho.values[i] != gamma.values[i])
      s += rho.values[i] * std::log(rho.values[i] / gamma.values[i]);
  return s * g.h();
}

double fisher_on_grid(const Grid1D& g, const DensityField& rho, const DensityField& gamma) {
  check_field(g, rho);
  check_field(g, gamma);
  const Mask m = support_mask(rho, gamma);
  const std::size_t n = g.n_cells;
  const double h = g.h();
  std::vector<double> u(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    if (m.in[i]) u[i] = std::log(rho.values[i]) - std::log(gamma.values[i]);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!m.in[i]) continue;
    const bool l = i > 0 && m.in[i - 1];
    const bool r = i + 1 < n && m.in[i + 1];
    double du = 0.0;
    if (l && r)
      du = (u[i + 1] - u[i - 1]) / (2.0 * h);
    else if (r)
      du = (u[i + 1] - u[i]) / h;
    else if (l)
      du = (u[i] - u[i - 1]) / h;
    s += rho.values[i] * du * du;
  }
  return s * h;
}

double stability_on_grid(const Grid1D& g, const DensityField& rho, std::span<const double> dF_S,
                         std::span<const double> dF_S_prime) {
  check_field(g, rho);
  if (dF_S.size() != g.n_cells || dF_S_prime.size() != g.n_cells)
    throw InvalidParameter("gradient size does not match grid");
  double s = 0.0;
  for (std::size_t i = 0; i < g.n_cells; ++i) {
    const double d = dF_S[i] - dF_S_prime[i];
    s += rho.values[i] * d * d;
  }
  return s * g.h();
}

PairedRun run_paired(const PairedRunConfig& cfg, const Potential& F_S, const Potential& F_S_prime,
                     DensityField rho0, DensityField gamma0) {
  const Grid1D& g = cfg.grid;
  if (cfg.record_every < 1) throw InvalidParameter("record_every must be positive");
  if (!(cfg.T_end > 0.0)) throw InvalidParameter("T_end must be positive");
  const double limit =
      std::min(max_stable_dt(g, F_S.value, cfg.beta), max_stable_dt(g, F_S_prime.value, cfg.beta));
  const double dt = cfg.dt > 0.0 ? cfg.dt : 0.9 * limit;
  const auto n_steps = static_cast<std::size_t>(std::ceil(cfg.T_end / dt - 1e-9));

  PairedRun run;
  run.dt = dt;
  run.h = g.h();
  DensityField rho = std::move(rho0), gamma = std::move(gamma0);
  auto snapshot = [&](double t) {
    PairedRecord r;
    r.t = t;
    r.kl = kl_on_grid(g, rho, gamma);
    r.fisher = fisher_on_grid(g, rho, gamma);
    r.stability = stability_on_grid(g, rho, F_S.deriv, F_S_prime.deriv);
    run.records.push_back(r);
  };
  snapshot(0.0);
  for (std::size_t s = 1; s <= n_steps; ++s) {
    const double m0 = rho.mass(g), q0 = gamma.mass(g);
    StepStats a, b;
    rho = fp_step(g, rho, F_S.value, cfg.beta, dt, &a);
    gamma = fp_step(g, gamma, F_S_prime.value, cfg.beta, dt, &b);
    run.clamp_mass += a.clamp_mass + b.clamp_mass;
    run.max_mass_error = std::max({run.max_mass_error, std::abs(rho.mass(g) - m0),
                                   std::abs(gamma.mass(g) - q0)});
    if (s % cfg.record_every == 0) snapshot(static_cast<double>(s) * dt);
  }
  auto& rec = run.records;
  const double span = 2.0 * dt * static_cast<double>(cfg.record_every);
  for (std::size_t r = 0; r < rec.size(); ++r) {
    if (r > 0 && r + 1 < rec.size()) {
      rec[r].dkl_dt = (rec[r + 1].kl - rec[r - 1].kl) / span;
      rec[r].interior = true;
    }
    rec[r].slack = -rec[r].fisher / (2.0 * cfg.beta) + 0.5 * cfg.beta * rec[r].stability -
                   rec[r].dkl_dt;
  }
  return run;
}

KlRateReport verify_kl_rate_inequality(const PairedRun& run, double beta) {
  KlRateReport rep;
  rep.tolerance = 10.0 * (run.h * run.h + run.dt);
  rep.worst_scaled_slack = HUGE_VAL;
  for (const auto& r : run.records) {
    if (!r.interior) continue;
    ++rep.n_checked;
    const double scale = r.fisher / (2.0 * beta) + 0.5 * beta * r.stability;
    if (r.slack < -rep.tolerance * scale) ++rep.n_violations;
    if (scale > 0.0) rep.worst_scaled_slack = std::min(rep.worst_scaled_slack, r.slack / scale);
  }
  if (rep.worst_scaled_slack == HUGE_VAL) rep.worst_scaled_slack = 0.0;
  rep.violation_rate =
      rep.n_checked ? static_cast<double>(rep.n_violations) / static_cast<double>(rep.n_checked) : 0.0;
  return rep;
}

HTheoremRun run_h_theorem(const Grid1D& g, const Potential& F, double beta, DensityField rho0,
                          double dt, std::size_t n_steps, double tol) {
  const DensityField pi = gibbs_density(g, F.value, beta);
  HTheoremRun out;
  DensityField rho = std::move(rho0);
  out.t.push_back(rho.t);
  out.kl.push_back(kl_on_grid(g, rho, pi));
  for (std::size_t s = 0; s < n_steps; ++s) {
    const double m0 = rho.mass(g);
    rho = fp_step(g, rho, F.value, beta, dt);
    out.max_mass_error = std::max(out.max_mass_error, std::abs(rho.mass(g) - m0));
    const double kl = kl_on_grid(g, rho, pi);
    const double inc = kl - out.kl.back();
    out.max_increase = std::max(out.max_increase, inc);
    if (inc > tol) ++out.n_increases;
    out.t.push_back(rho.t);
    out.kl.push_back(kl);
  }
  return out;
}

Grid1D default_grid(const LossConstants& lc, double beta, std::size_t n_cells) {
  const double half = lc.data_radius + 8.0 / std::sqrt(beta * lc.m);
  return Grid1D(-half, half, n_cells);
}

}  // namespace sgldlab
