#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "sgldlab/loss_models.hpp"

namespace sgldlab {

/// Outcome of one claimed inequality over the sample. margin = rhs − lhs,
/// so a negative margin below −tolerance is a violation.
struct InequalityCheck {
  std::string inequality_name;
  std::size_t n_samples = 0;
  std::size_t n_violations = 0;
  double worst_margin = 0.0;
  // Point attaining the worst margin.
  Vector witness_w;
  Vector witness_w2;  // second parameter for two-point inequalities
  Vector witness_z;
};

struct CertificationReport {
  std::string family;
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
  double tolerance = 1e-9;
  std::vector<InequalityCheck> checks;

  bool certified() const;
  std::size_t total_violations() const;
  const InequalityCheck* find(const std::string& name) const;
  std::string to_json() const;
};

inline constexpr double kCertifyTolerance = 1e-9;

/// Samples (w, w̄) from the cube of half-width 10·max(1, √(b/m)) and z from the
/// data ball, and checks smoothness, dissipativity, the origin-gradient bound,
/// |f(0,z)| ≤ A, both sides of the quadratic envelope and, when R is claimed,
/// strong convexity. Batches run in parallel on substreams of `seed`.
CertificationReport certify(const LossModel& model, std::size_t n_samples, std::uint64_t seed,
                            double tolerance = kCertifyTolerance);

/// Same result computed on one thread.
CertificationReport certify_serial(const LossModel& model, std::size_t n_samples,
                                   std::uint64_t seed, double tolerance = kCertifyTolerance);

}  // namespace sgldlab
