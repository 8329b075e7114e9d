#include "sgldlab/data.hpp"

#include <cmath>

#include "sgldlab/error.hpp"
#include "sgldlab/loss_models.hpp"
#include "sgldlab/rng.hpp"

namespace sgldlab {

Vector Dataset::mean() const {
  Vector out(dim_, 0.0);
  for (std::size_t i = 0; i < n_; ++i) {
    const auto z = row(i);
    for (std::size_t j = 0; j < dim_; ++j) out[j] += z[j];
  }
  for (auto& v : out) v /= static_cast<double>(n_);
  return out;
}

void sample_uniform_ball(Rng& rng, double radius, std::span<double> out) {
  double s = 0.0;
  for (auto& v : out) {
    v = rng.normal();
    s += v * v;
  }
  const double dim = static_cast<double>(out.size());
  const double r = radius * std::pow(rng.uniform(), 1.0 / dim) / std::sqrt(s);
  for (auto& v : out) v *= r;
}

DataSampler::DataSampler(const LossModel& model, double radius) : model_(&model), radius_(radius) {
  if (!(radius > 0.0)) throw InvalidParameter("DataSampler: radius must be positive");
  if (radius > model.constants().data_radius * (1.0 + 1e-12))
    throw InvalidParameter("DataSampler: radius exceeds the certified data radius");
}

DataSampler::DataSampler(const LossModel& model)
    : DataSampler(model, model.constants().data_radius) {}

std::size_t DataSampler::data_dim() const { return model_->data_dim(); }

void DataSampler::sample_point(Rng& rng, std::span<double> z) const {
  model_->sample_support(rng, radius_, z);
}

Dataset DataSampler::sample(Rng& rng, std::size_t n, std::uint64_t id) const {
  Dataset data(n, model_->data_dim(), id);
  for (std::size_t i = 0; i < n; ++i) sample_point(rng, data.row(i));
  return data;
}

}  // namespace sgldlab
