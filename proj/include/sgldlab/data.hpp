#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sgldlab/vec.hpp"

namespace sgldlab {

class Rng;
class LossModel;

/// n data points of fixed dimension, stored row-major.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::size_t n, std::size_t dim, std::uint64_t id = 0)
      : n_(n), dim_(dim), id_(id), values_(n * dim, 0.0) {}

  std::size_t size() const { return n_; }
  std::size_t dim() const { return dim_; }
  std::uint64_t id() const { return id_; }

  std::span<const double> row(std::size_t i) const { return {values_.data() + i * dim_, dim_}; }
  std::span<double> row(std::size_t i) { return {values_.data() + i * dim_, dim_}; }

  /// Coordinate-wise mean of the rows.
  Vector mean() const;

  bool operator==(const Dataset&) const = default;

 private:
  std::size_t n_ = 0;
  std::size_t dim_ = 0;
  std::uint64_t id_ = 0;
  std::vector<double> values_;
};

/// The data distribution μ of an experiment: uniform on the model's data
/// support, restricted to a ball of `radius` (at most the certified radius).
class DataSampler {
 public:
  DataSampler(const LossModel& model, double radius);
  explicit DataSampler(const LossModel& model);

  Dataset sample(Rng& rng, std::size_t n, std::uint64_t id = 0) const;
  void sample_point(Rng& rng, std::span<double> z) const;

  double radius() const { return radius_; }
  std::size_t data_dim() const;

 private:
  const LossModel* model_;
  double radius_;
};

/// Uniform draw from the closed Euclidean ball of `radius` in out.size() dimensions.
void sample_uniform_ball(Rng& rng, double radius, std::span<double> out);

}  // namespace sgldlab
