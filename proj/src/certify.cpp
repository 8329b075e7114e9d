#include "sgldlab/certify.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "sgldlab/rng.hpp"

namespace sgldlab {

namespace {

constexpr std::size_t kBatch = 1024;

enum Check : std::size_t {
  kSmooth,
  kDissip,
  kOrigin,
  kZeroLoss,
  kEnvLower,
  kEnvUpper,
  kStrong,
  kNumChecks
};

const char* const kNames[kNumChecks] = {"smoothness",     "dissipativity",  "origin_gradient",
                                        "zero_loss_bound", "envelope_lower", "envelope_upper",
                                        "strong_convexity"};

struct Partial {
  std::size_t violations[kNumChecks] = {};
  double worst[kNumChecks];
  Vector w[kNumChecks], w2[kNumChecks], z[kNumChecks];

  Partial() { std::fill(std::begin(worst), std::end(worst), HUGE_VAL); }
};

void record(Partial& p, Check c, double margin, double tol, const Vector& w, const Vector& w2,
            const Vector& z) {
  if (margin < -tol) ++p.violations[c];
  if (margin < p.worst[c]) {
    p.worst[c] = margin;
    p.w[c] = w;
    p.w2[c] = w2;
    p.z[c] = z;
  }
}

Partial run_batch(const LossModel& model, std::uint64_t seed, std::size_t batch_index,
                  std::size_t count, double tol) {
  const auto& c = model.constants();
  const std::size_t d = model.dim();
  const double half = certification_box_halfwidth(c);
  const double B = c.origin_gradient_bound();
  const double log3 = std::log(3.0);
  Rng rng(seed, StreamTag::certify, batch_index + 1);
  Partial p;
  Vector w(d), w2(d), z(model.data_dim()), g(d), g2(d), g0(d), zero(d, 0.0);
  for (std::size_t s = 0; s < count; ++s) {
    for (auto& v : w) v = rng.uniform(-half, half);
    for (auto& v : w2) v = rng.uniform(-half, half);
    model.sample_support(rng, c.data_radius, z);
    model.grad(w, z, g);
    model.grad(w2, z, g2);
    model.grad(zero, z, g0);

    const double dw = std::sqrt(dist_sq(w, w2));
    const double dg = std::sqrt(dist_sq(g, g2));
    record(p, kSmooth, c.M * dw - dg, tol, w, w2, z);

    const double wn2 = norm_sq(w);
    record(p, kDissip, dot(g, w) - (c.m * wn2 - c.b), tol, w, w2, z);

    record(p, kOrigin, B - norm(g0), tol, zero, w2, z);

    const double f0 = model.eval(zero, z);
    record(p, kZeroLoss, c.A - std::abs(f0), tol, zero, w2, z);

    const double f = model.eval(w, z);
    record(p, kEnvLower, f - (c.m / 3.0 * wn2 - 0.5 * c.b * log3), tol, w, w2, z);
    record(p, kEnvUpper, 0.5 * c.M * wn2 + B * std::sqrt(wn2) + c.A - f, tol, w, w2, z);

    if (c.R) {
      double inner = 0.0;
      for (std::size_t j = 0; j < d; ++j) inner += (g[j] - g2[j]) * (w[j] - w2[j]);
      record(p, kStrong, inner - *c.R * dw * dw, tol, w, w2, z);
    }
  }
  return p;
}

CertificationReport assemble(const LossModel& model, std::size_t n_samples, std::uint64_t seed,
                             double tol, const std::vector<Partial>& parts) {
  CertificationReport r;
  r.family = model.family();
  r.n_samples = n_samples;
  r.seed = seed;
  r.tolerance = tol;
  const std::size_t n_checks = model.constants().R ? kNumChecks : kStrong;
  for (std::size_t c = 0; c < n_checks; ++c) {
    InequalityCheck chk;
    chk.inequality_name = kNames[c];
    chk.n_samples = n_samples;
    chk.worst_margin = HUGE_VAL;
    // First batch wins ties so the witness does not depend on scheduling.
    for (const auto& p : parts) {
      chk.n_violations += p.violations[c];
      if (p.worst[c] < chk.worst_margin) {
        chk.worst_margin = p.worst[c];
        chk.witness_w = p.w[c];
        chk.witness_w2 = p.w2[c];
        chk.witness_z = p.z[c];
      }
    }
    r.checks.push_back(std::move(chk));
  }
  return r;
}

}  // namespace

bool CertificationReport::certified() const { return total_violations() == 0; }

std::size_t CertificationReport::total_violations() const {
  std::size_t s = 0;
  for (const auto& c : checks) s += c.n_violations;
  return s;
}

const InequalityCheck* CertificationReport::find(const std::string& name) const {
  for (const auto& c : checks)
    if (c.inequality_name == name) return &c;
  return nullptr;
}

std::string CertificationReport::to_json() const {
  nlohmann::ordered_json j;
  j["family"] = family;
  j["n_samples"] = n_samples;
  j["seed"] = seed;
  j["tolerance"] = tolerance;
  j["certified"] = certified();
  auto arr = nlohmann::ordered_json::array();
  for (const auto& c : checks) {
    nlohmann::ordered_json e;
    e["inequality_name"] = c.inequality_name;
    e["n_samples"] = c.n_samples;
    e["n_violations"] = c.n_violations;
    e["worst_margin"] = c.worst_margin;
    if (c.n_violations > 0) {
      e["witness"] = {{"w", c.witness_w}, {"w_bar", c.witness_w2}, {"z", c.witness_z}};
    } else {
      e["witness"] = nullptr;
    }
    arr.push_back(std::move(e));
  }
  j["checks"] = std::move(arr);
  return j.dump(2) + "\n";
}

CertificationReport certify(const LossModel& model, std::size_t n_samples, std::uint64_t seed,
                            double tolerance) {
  const std::size_t n_batches = (n_samples + kBatch - 1) / kBatch;
  std::vector<Partial> parts(n_batches);
#pragma omp parallel for schedule(dynamic)
  for (long b = 0; b < static_cast<long>(n_batches); ++b) {
    const std::size_t start = static_cast<std::size_t>(b) * kBatch;
    parts[b] = run_batch(model, seed, b, std::min(kBatch, n_samples - start), tolerance);
  }
  return assemble(model, n_samples, seed, tolerance, parts);
}

CertificationReport certify_serial(const LossModel& model, std::size_t n_samples,
                                   std::uint64_t seed, double tolerance) {
  std::vector<Partial> parts;
  for (std::size_t b = 0, start = 0; start < n_samples; ++b, start += kBatch)
    parts.push_back(run_batch(model, seed, b, std::min(kBatch, n_samples - start), tolerance));
  return assemble(model, n_samples, seed, tolerance, parts);
}

}  // namespace sgldlab
