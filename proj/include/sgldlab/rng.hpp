#pragma once

#include <cstdint>
#include <random>

namespace sgldlab {

/// Purpose tags for deriving independent substreams from one master seed.
enum class StreamTag : std::uint32_t {
  init = 1,
  noise = 2,
  batch = 3,
  data = 4,
  test_pool = 5,
  certify = 6,
  resample = 7,
  bootstrap = 8,
  pair = 9,
};

/// Seed of substream (tag, index) under `master`. Uses std::seed_seq so the
/// mapping is fixed by the standard, not by the library vendor.
std::uint64_t derive_seed(std::uint64_t master, StreamTag tag, std::uint64_t index);

/// Random source used everywhere in the lab.
///
/// The engine is std::mt19937_64. Uniform doubles take the top 53 bits,
/// bounded integers use rejection, and normals use the Marsaglia polar method
/// with one cached spare. None of these go through the <random> distributions,
/// whose algorithms are implementation-defined, so streams are bit-identical
/// across standard libraries.
class Rng {
 public:
  static constexpr const char* kAlgorithm = "mt19937_64/uniform53/marsaglia-polar";

  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t master, StreamTag tag, std::uint64_t index = 0)
      : engine_(derive_seed(master, tag, index)) {}

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer on [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  double normal();

  /// Number of standard normal variates returned so far.
  std::uint64_t normals_drawn() const { return normals_drawn_; }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
  std::uint64_t normals_drawn_ = 0;
};

}  // namespace sgldlab
