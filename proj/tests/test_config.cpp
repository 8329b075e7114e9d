#include <doctest.h>

#include <json.hpp>

#include "sgldlab/error.hpp"
#include "sgldlab/experiment_config.hpp"

using namespace sgldlab;

TEST_CASE("empty object gives the defaults") {
  const auto c = parse_config("{}");
  CHECK(c.seed == 1);
  CHECK(c.loss.family == "quadratic");
  CHECK(c.sgld.eta == 0.05);
  CHECK(c.data.n == 100);
  CHECK(c.bounds.enabled.size() == 7);
  CHECK(c.estimators.p_list == std::vector<int>{2, 4, 6, 8, 10, 12});
  const auto m = c.make_model();
  CHECK(m->family() == "quadratic");
  CHECK(c.lsi_mode(m->constants()) == LsiMode::strongly_convex);
  CHECK(*c.sigma_g_sq() == 0.25);
}

TEST_CASE("fields are read into their blocks") {
  const auto c = parse_config(R"({
    "seed": 99,
    "loss": {"family": "nonconvex_ridge", "d": 3, "lambda": 2.0, "a": 0.25},
    "sgld": {"eta": 0.01, "beta": 8, "k": 5, "T": 20, "lsi_mode": "general_dissipative"},
    "data": {"n": 40, "radius": 0.5},
    "bounds": {"enabled": ["pensia"], "T_grid": [0, 5], "heuristics": {"C1_prime": 3}},
    "estimators": {"eval_loss": "same_as_f", "p_list": [2, 4]},
    "output": {"dir": "x", "formats": ["csv"]}
  })");
  CHECK(c.seed == 99);
  CHECK(c.loss.d == 3);
  CHECK(c.sgld.k == 5);
  CHECK(*c.data.radius == 0.5);
  CHECK(c.data_radius() == 0.5);
  CHECK(c.bounds.T_grid == std::vector<std::size_t>{0, 5});
  CHECK(c.bounds.heuristics.C1_prime == 3);
  CHECK_FALSE(c.sigma_g_sq());
  const auto m = c.make_model();
  CHECK(m->constants().M == doctest::Approx(2.25));
  const auto s = c.sgld_config(*m);
  CHECK(s.n == 40);
  CHECK(s.d == 3);
  CHECK(s.seed == 99);
  CHECK(s.lsi_mode == LsiMode::general_dissipative);
  CHECK(c.make_model_1d()->dim() == 1);
}

TEST_CASE("claimed constants override the derived ones") {
  const auto c = parse_config(R"({"loss": {"claimed": {"M": 0.5, "R": 0.5}}})");
  const auto m = c.make_model();
  CHECK(m->constants().M == 0.5);
  CHECK(*m->constants().R == 0.5);
  const auto bad = parse_config(R"({"loss": {"claimed": {"M": 0.5}}})");
  CHECK_THROWS_AS(bad.make_model(), ConfigError);  // R > M
}

TEST_CASE("schema violations are config errors") {
  for (const char* text : {
           "{",
           "[]",
           R"({"unknown": 1})",
           R"({"loss": {"family": "quadratic", "shape": 2}})",
           R"({"loss": {"family": "cubic"}})",
           R"({"loss": {"d": -1}})",
           R"({"loss": {"d": 1.5}})",
           R"({"sgld": {"eta": "fast"}})",
           R"({"sgld": {"k": 500}})",
           R"({"sgld": {"lsi_mode": "magic"}})",
           R"({"data": {"radius": 2.0}})",
           R"({"bounds": {"enabled": ["vc_dimension"]}})",
           R"({"bounds": {"T_grid": [-1]}})",
           R"({"estimators": {"p_list": [3]}})",
           R"({"estimators": {"n_trials": 1}})",
           R"({"fp": {"n_cells": 10}})",
           R"({"output": {"formats": ["xml"]}})",
           R"({"seed": -4})",
       }) {
    CAPTURE(text);
    CHECK_THROWS_AS(parse_config(text), ConfigError);
  }
}

TEST_CASE("hash is stable, ignores the output directory, tracks everything else") {
  const auto a = parse_config(R"({"output": {"dir": "a"}})");
  const auto b = parse_config(R"({"output": {"dir": "b"}})");
  const auto c = parse_config(R"({"sgld": {"T": 1001}})");
  const auto d = parse_config(R"({"seed": 2})");
  CHECK(a.hash() == b.hash());
  CHECK(a.hash() != c.hash());
  CHECK(a.hash() != d.hash());
  CHECK(a.hash().size() == 16);
  CHECK(a.hash() == parse_config(a.canonical_json()).hash());
  // Known FNV-1a test vectors.
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("canonical JSON echoes every block") {
  const auto j = nlohmann::json::parse(parse_config("{}").canonical_json());
  for (const char* k : {"seed", "loss", "sgld", "data", "bounds", "estimators", "certify", "fp", "verify", "output"})
    CHECK(j.contains(k));
}
