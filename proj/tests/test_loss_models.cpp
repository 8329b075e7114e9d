#include <doctest.h>

#include <cmath>

#include "oracles/oracles.hpp"
#include "sgldlab/certify.hpp"
#include "sgldlab/data.hpp"
#include "sgldlab/error.hpp"
#include "sgldlab/loss_models.hpp"
#include "sgldlab/rng.hpp"

using namespace sgldlab;

namespace {

std::vector<std::unique_ptr<LossModel>> families(std::size_t d) {
  std::vector<std::unique_ptr<LossModel>> v;
  v.push_back(make_quadratic(1.0, 1.0, d));
  v.push_back(make_logistic_ridge(1.0, 1.0, d));
  v.push_back(make_nonconvex_ridge(1.0, 0.5, 1.0, d));
  return v;
}

}  // namespace

TEST_CASE("quadratic constants") {
  const auto q = make_quadratic(1.0, 1.0, 3);
  const auto& c = q->constants();
  CHECK(c.M == 1.0);
  CHECK(c.m == 0.5);
  CHECK(c.b == 0.5);
  CHECK(c.A == 0.5);
  REQUIRE(c.R);
  CHECK(*c.R == 1.0);
  const auto q2 = make_quadratic(2.0, 3.0, 1);
  CHECK(q2->constants().b == doctest::Approx(9.0));
  CHECK_THROWS_AS(make_quadratic(0.0, 1.0, 2), InvalidParameter);
  CHECK_THROWS_AS(make_quadratic(1.0, -1.0, 2), InvalidParameter);
}

TEST_CASE("quadratic values and exact gradient identity") {
  const auto q = make_quadratic(1.5, 1.0, 2);
  std::vector<double> zero{0, 0}, g(2);
  CHECK(q->eval(zero, zero) == 0.0);
  q->grad(zero, zero, g);
  CHECK(g[0] == 0.0);
  CHECK(g[1] == 0.0);
  std::vector<double> w{0.3, -0.2}, wb{-1.1, 2.0}, z{0.3, -0.2}, g2(2);
  CHECK(q->eval(w, z) == 0.0);
  q->grad(w, z, g);
  q->grad(wb, z, g2);
  const double lhs = std::sqrt(dist_sq(g, g2));
  CHECK(lhs == doctest::Approx(1.5 * std::sqrt(dist_sq(w, wb))).epsilon(1e-14));
}

TEST_CASE("logistic ridge constants and value at the origin") {
  const auto l = make_logistic_ridge(1.0, 1.0, 4);
  const auto& c = l->constants();
  CHECK(c.M == doctest::Approx(1.25));
  CHECK(c.m == 0.5);
  CHECK(c.b == 0.5);
  CHECK(c.A == doctest::Approx(std::log(2.0)));
  CHECK(*c.R == 1.0);
  const DataSampler s(*l);
  Rng r(2);
  std::vector<double> w(4, 0.0), z(5);
  for (int i = 0; i < 100; ++i) {
    s.sample_point(r, z);
    CHECK(l->eval(w, z) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  }
  CHECK_THROWS_AS(make_logistic_ridge(0.0, 1.0, 2), InvalidParameter);
}

TEST_CASE("logistic loss is stable for large margins") {
  const auto l = make_logistic_ridge(1.0, 1.0, 1);
  std::vector<double> w{800.0}, z{1.0, -1.0}, g(1);
  const double f = l->eval(w, z);
  CHECK(std::isfinite(f));
  CHECK(f == doctest::Approx(800.0 + 0.5 * 800.0 * 800.0));
  l->grad(w, z, g);
  CHECK(std::isfinite(g[0]));
}

TEST_CASE("nonconvex ridge constants") {
  const auto nc = make_nonconvex_ridge(1.0, 0.5, 1.0, 3);
  const auto& c = nc->constants();
  CHECK(c.M == 1.5);
  CHECK(c.m == 0.5);
  CHECK(c.b == doctest::Approx(0.125));
  CHECK(c.A == 0.5);
  CHECK_FALSE(c.R.has_value());
  const auto r = make_nonconvex_ridge(2.0, 0.0, 1.0, 3);
  CHECK(r->constants().m == 1.0);
  CHECK(r->constants().b == 0.0);
  std::vector<double> w(3, 0.0), z{0.1, 0.5, -0.3};
  CHECK(nc->eval(w, z) == 0.5);
  CHECK_THROWS_AS(make_nonconvex_ridge(1.0, -0.1, 1.0, 2), InvalidParameter);
}

TEST_CASE("analytic gradients agree with an independent finite difference") {
  for (const auto& model : families(4)) {
    CAPTURE(model->family());
    const DataSampler s(*model);
    Rng r(17);
    std::vector<double> w(4), z(model->data_dim()), g(4);
    for (int i = 0; i < 100; ++i) {
      for (auto& x : w) x = r.uniform(-3, 3);
      s.sample_point(r, z);
      model->grad(w, z, g);
      const auto fd = oracle::fd_grad(*model, w, z);
      CHECK(std::sqrt(dist_sq(g, fd)) <= 1e-6 * std::max(1.0, norm(g)));
    }
    CHECK(max_gradient_relative_error(*model, 100, 3) < 1e-5);
  }
}

TEST_CASE("batch gradient equals the average of point gradients") {
  for (const auto& model : families(3)) {
    CAPTURE(model->family());
    const DataSampler s(*model);
    Rng r(5);
    const Dataset data = s.sample(r, 12);
    std::vector<double> w{0.4, -1.0, 2.0}, fast(3), slow(3, 0.0), g(3);
    const std::vector<std::size_t> batch{1, 4, 7, 11};
    model->batch_grad(w, data, batch, fast);
    for (auto i : batch) {
      model->grad(w, data.row(i), g);
      for (int j = 0; j < 3; ++j) slow[j] += g[j] / 4;
    }
    for (int j = 0; j < 3; ++j) CHECK(fast[j] == doctest::Approx(slow[j]).epsilon(1e-13));
    double risk = 0;
    for (std::size_t i = 0; i < data.size(); ++i) risk += model->eval(w, data.row(i)) / 12;
    CHECK(model->empirical_risk(w, data) == doctest::Approx(risk).epsilon(1e-13));
  }
}

TEST_CASE("default families certify with zero violations") {
  for (const auto& model : families(3)) {
    CAPTURE(model->family());
    const auto rep = certify(*model, 10000, 42);
    CHECK(rep.certified());
    CHECK(rep.total_violations() == 0);
    for (const char* name : {"smoothness", "dissipativity", "origin_gradient", "envelope_lower",
                             "envelope_upper"}) {
      const auto* c = rep.find(name);
      REQUIRE(c != nullptr);
      CHECK(c->n_samples == 10000);
      CHECK(c->worst_margin >= -kCertifyTolerance);
    }
  }
}

TEST_CASE("understated smoothness is caught with a witness") {
  auto q = make_quadratic(1.0, 1.0, 2);
  auto c = q->constants();
  c.M = 0.5;
  c.R = 0.5;
  q->set_constants(c);
  const auto rep = certify(*q, 10000, 1);
  CHECK_FALSE(rep.certified());
  const auto* s = rep.find("smoothness");
  REQUIRE(s != nullptr);
  CHECK(s->n_violations > 0);
  REQUIRE(s->witness_w.size() == 2);
  REQUIRE(s->witness_w2.size() == 2);
  // The witness really violates the claim.
  std::vector<double> g1(2), g2(2);
  q->grad(s->witness_w, s->witness_z, g1);
  q->grad(s->witness_w2, s->witness_z, g2);
  CHECK(std::sqrt(dist_sq(g1, g2)) > 0.5 * std::sqrt(dist_sq(s->witness_w, s->witness_w2)));
}

TEST_CASE("the envelope lower bound holds at the origin") {
  for (const auto& model : families(2)) {
    const auto& c = model->constants();
    const DataSampler s(*model);
    Rng r(8);
    std::vector<double> w(2, 0.0), z(model->data_dim());
    for (int i = 0; i < 1000; ++i) {
      s.sample_point(r, z);
      CHECK(model->eval(w, z) >= -0.5 * c.b * std::log(3.0) - 1e-12);
    }
  }
}

TEST_CASE("parallel and serial certification agree exactly") {
  const auto model = make_nonconvex_ridge(1.0, 0.5, 1.0, 3);
  const auto a = certify(*model, 5000, 9);
  const auto b = certify_serial(*model, 5000, 9);
  CHECK(a.to_json() == b.to_json());
}

TEST_CASE("certification box half-width") {
  LossConstants c;
  c.M = 1;
  c.m = 0.5;
  c.b = 0.5;
  CHECK(certification_box_halfwidth(c) == 10.0);
  c.b = 8.0;
  CHECK(certification_box_halfwidth(c) == doctest::Approx(40.0));
}
