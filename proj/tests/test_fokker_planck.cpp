#include <doctest.h>

#include <cmath>

#include "oracles/oracles.hpp"
#include "sgldlab/error.hpp"
#include "sgldlab/fokker_planck.hpp"

using namespace sgldlab;

namespace {

double grid_variance(const Grid1D& g, const DensityField& r) {
  double m = 0, m2 = 0;
  for (std::size_t i = 0; i < g.n_cells; ++i) {
    m += g.h() * r.values[i] * g.center(i);
    m2 += g.h() * r.values[i] * g.center(i) * g.center(i);
  }
  return m2 - m * m;
}

Potential quadratic(const Grid1D& g, double R, double c = 0.0) {
  return make_potential(g, [=](double w) { return 0.5 * R * (w - c) * (w - c); },
                        [=](double w) { return R * (w - c); });
}

}  // namespace

TEST_CASE("grid basics") {
  const Grid1D g(-2, 2, 100);
  CHECK(g.h() == doctest::Approx(0.04));
  CHECK(g.center(0) == doctest::Approx(-1.98));
  CHECK_THROWS(Grid1D(-1, 1, 10));
  CHECK_THROWS(Grid1D(1, -1, 100));
  const auto u = gibbs_density(g, std::vector<double>(100, 0.0), 3.0);
  for (double v : u.values) CHECK(v == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(u.mass(g) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("Gibbs density on a quadratic potential") {
  const Grid1D g(-10, 10, 4000);
  const auto F = quadratic(g, 1.0);
  const auto pi = gibbs_density(g, F.value, 2.0);
  CHECK(oracle::rel_err(grid_variance(g, pi), 0.5) < 1e-4);
  const auto pi2 = gibbs_density(g, F.value, 4.0);
  CHECK(oracle::rel_err(grid_variance(g, pi2), 0.25) < 1e-4);
}

TEST_CASE("explicit step: stationarity, mass, positivity limit") {
  const Grid1D g(-6, 6, 512);
  const auto F = quadratic(g, 1.0, 0.3);
  const double beta = 4.0;
  const auto pi = gibbs_density(g, F.value, beta);
  const double lim = max_stable_dt(g, F.value, beta);
  const auto next = fp_step(g, pi, F.value, beta, 0.9 * lim);
  double worst = 0;
  for (std::size_t i = 0; i < g.n_cells; ++i) worst = std::max(worst, std::abs(next.values[i] - pi.values[i]));
  CHECK(worst <= 1e-8);
  auto rho = gaussian_density(g, -1.0, 0.5);
  for (int s = 0; s < 200; ++s) {
    const double m0 = rho.mass(g);
    StepStats st;
    rho = fp_step(g, rho, F.value, beta, 0.9 * lim, &st);
    CHECK(std::abs(rho.mass(g) - m0) <= 1e-12);
    CHECK(st.clamp_mass == 0.0);
  }
  CHECK_THROWS_AS(fp_step(g, rho, F.value, beta, 1.5 * lim), PreconditionError);
}

TEST_CASE("parallel and reference steps agree bit for bit") {
  const Grid1D g(-6, 6, 1000);
  const auto F = quadratic(g, 2.0, -0.2);
  const double dt = 0.5 * max_stable_dt(g, F.value, 3.0);
  auto a = gaussian_density(g, 1.0, 0.3), b = a;
  for (int s = 0; s < 50; ++s) {
    a = fp_step(g, a, F.value, 3.0, dt);
    b = fp_step_reference(g, b, F.value, 3.0, dt);
  }
  CHECK(a.values == b.values);
}

TEST_CASE("free diffusion spreads at rate 2/beta") {
  const Grid1D g(-15, 15, 1500);
  const std::vector<double> zero(g.n_cells, 0.0);
  const double beta = 2.0, s0 = 0.5;
  auto rho = gaussian_density(g, 0.0, s0);
  const double dt = 0.5 * max_stable_dt(g, zero, beta);
  const int steps = int(std::round(0.5 / dt));
  for (int s = 0; s < steps; ++s) rho = fp_step(g, rho, zero, beta, dt);
  const double t = steps * dt;
  CHECK(oracle::rel_err(grid_variance(g, rho), s0 + 2 * t / beta) < 1e-3);
}

TEST_CASE("grid KL and Fisher") {
  const Grid1D g(-12, 12, 2400);
  const auto a = gaussian_density(g, 0.0, 1.0);
  CHECK(kl_on_grid(g, a, a) == 0.0);
  CHECK(fisher_on_grid(g, a, a) == 0.0);
  const auto b = gaussian_density(g, 0.5, 1.0);
  CHECK(oracle::rel_err(kl_on_grid(g, a, b), 0.125) < 1e-3);
  // Fisher of equal-variance shift: δ²/σ⁴.
  CHECK(oracle::rel_err(fisher_on_grid(g, a, b), 0.25) < 1e-3);
  for (double m : {-1.0, 0.3, 2.0})
    for (double v : {0.3, 1.0, 3.0}) CHECK(kl_on_grid(g, gaussian_density(g, m, v), b) >= -1e-9);
}

TEST_CASE("grid divergences converge at second order") {
  // Cell-centered Gaussians make the KL sum spectrally accurate, so only an
  // O(h²) ceiling is checked there. Fisher on a quartic potential goes through
  // central differences of log ρ and shows the genuine h² rate.
  for (std::size_t cells : {100u, 200u, 400u}) {
    const Grid1D g(-8, 8, cells);
    const auto a = gaussian_density(g, 0.0, 0.5), b = gaussian_density(g, 0.4, 0.8);
    CHECK(std::abs(kl_on_grid(g, a, b) - oracle::kl_1d(0, 0.5, 0.4, 0.8)) <= g.h() * g.h());
  }
  const double beta = 2.0;
  const auto F1 = [](double w) { return 0.25 * w * w * w * w; };
  const auto F2 = [](double w) { return 0.5 * (w - 0.5) * (w - 0.5); };
  const auto Z = oracle::simpson([&](double w) { return std::exp(-beta * F1(w)); }, -5, 5, 200000);
  const double exact = oracle::simpson(
      [&](double w) {
        const double diff = beta * ((w - 0.5) - w * w * w);
        return std::exp(-beta * F1(w)) / Z * diff * diff;
      },
      -5, 5, 200000);
  std::vector<double> err;
  for (std::size_t cells : {200u, 400u, 800u}) {
    const Grid1D g(-5, 5, cells);
    std::vector<double> v1(cells), v2(cells);
    for (std::size_t i = 0; i < cells; ++i) {
      v1[i] = F1(g.center(i));
      v2[i] = F2(g.center(i));
    }
    err.push_back(std::abs(fisher_on_grid(g, gibbs_density(g, v1, beta), gibbs_density(g, v2, beta)) - exact));
  }
  CHECK(err[0] / err[1] == doctest::Approx(4.0).epsilon(0.15));
  CHECK(err[1] / err[2] == doctest::Approx(4.0).epsilon(0.15));
}

TEST_CASE("discrete H-theorem") {
  const Grid1D g(-6, 6, 512);
  const auto F = quadratic(g, 1.0, 0.2);
  const double dt = 0.9 * max_stable_dt(g, F.value, 4.0);
  const auto h = run_h_theorem(g, F, 4.0, gaussian_density(g, -2.0, 0.2), dt, 3000);
  CHECK(h.n_increases == 0);
  CHECK(h.max_mass_error <= 1e-12);
  CHECK(h.kl.back() < 0.01 * h.kl.front());
}

TEST_CASE("paired runs") {
  const Grid1D g(-6, 6, 512);
  const double beta = 4.0;
  const auto F = quadratic(g, 1.0, 0.2), Fp = quadratic(g, 1.0, -0.1);
  PairedRunConfig pc{g, beta, 0.0, 1.0, 1};
  SUBCASE("same potential: KL decays at the Fisher rate") {
    const auto run = run_paired(pc, F, F, gaussian_density(g, -1.0, 0.3), gaussian_density(g, 0.5, 0.4));
    const auto rep = verify_kl_rate_inequality(run, beta);
    CHECK(rep.n_violations == 0);
    for (std::size_t i = 1; i < run.records.size(); ++i) CHECK(run.records[i].kl <= run.records[i - 1].kl);
  }
  SUBCASE("same start, different potentials") {
    const auto rho0 = gaussian_density(g, 0.0, 0.5);
    const auto run = run_paired(pc, F, Fp, rho0, rho0);
    CHECK(run.records.front().kl == 0.0);
    const double rate0 = run.records[1].kl / (run.records[1].t - run.records[0].t);
    CHECK(rate0 <= beta / 2 * run.records.front().stability * (1 + 1e-6));
    CHECK(verify_kl_rate_inequality(run, beta).violation_rate <= 0.01);
  }
  SUBCASE("identical everything: zero trace") {
    const auto rho0 = gaussian_density(g, 0.0, 0.5);
    const auto run = run_paired(pc, F, F, rho0, rho0);
    for (const auto& r : run.records) CHECK(r.kl == 0.0);
    CHECK(verify_kl_rate_inequality(run, beta).n_violations == 0);
  }
}

TEST_CASE("dataset potential for a 1-D model") {
  const auto q = make_quadratic(1.0, 1.0, 1);
  Dataset d(3, 1);
  d.row(0)[0] = 0.5;
  d.row(1)[0] = -0.2;
  d.row(2)[0] = 0.3;
  const Grid1D g = default_grid(q->constants(), 4.0, 256);
  CHECK(g.w_max == doctest::Approx(1.0 + 8.0 / std::sqrt(2.0)));
  const auto P = dataset_potential(g, *q, d);
  for (std::size_t i = 0; i < g.n_cells; i += 17) {
    const double w = g.center(i);
    double f = 0;
    for (double z : {0.5, -0.2, 0.3}) f += 0.5 * (w - z) * (w - z) / 3;
    CHECK(P.value[i] == doctest::Approx(f).epsilon(1e-13));
    CHECK(P.deriv[i] == doctest::Approx(w - 0.2).epsilon(1e-12).scale(1));
  }
}
