#include "zdsc/gauss.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "zdsc/errors.hpp"

namespace zdsc {

void SourceChannelModel::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw InvalidParameter(std::string(name) + " must be positive and finite");
    }
  };
  positive(sigma_x2, "sigma_x2");
  positive(sigma_z2, "sigma_z2");
  positive(sigma_n2, "sigma_n2");
  positive(power_limit, "power_limit");
  if (!(std::abs(rho) <= 1.0)) throw InvalidParameter("|rho| must not exceed 1");
}

double SourceChannelModel::sigma_x() const { return std::sqrt(sigma_x2); }
double SourceChannelModel::sigma_z() const { return std::sqrt(sigma_z2); }
double SourceChannelModel::sigma_n() const { return std::sqrt(sigma_n2); }

Grid1D::Grid1D(double lo, double hi, std::size_t n) : lo_(lo), hi_(hi) {
  if (n < 2) throw InvalidParameter("grid needs at least 2 points");
  if (!(lo < hi)) throw InvalidParameter("grid requires lo < hi");
  spacing_ = (hi - lo) / static_cast<double>(n - 1);
  values_.resize(n);
  for (std::size_t i = 0; i < n; ++i) values_[i] = lo + spacing_ * static_cast<double>(i);
  values_.back() = hi;
}

std::vector<double> Grid1D::trapezoid_weights() const {
  std::vector<double> w(n(), spacing_);
  w.front() *= 0.5;
  w.back() *= 0.5;
  return w;
}

double gaussian_pdf(double x, double mean, double variance) {
  if (!(variance > 0.0)) throw InvalidParameter("variance must be positive");
  const double d = x - mean;
  return std::exp(-d * d / (2.0 * variance)) / std::sqrt(2.0 * std::numbers::pi * variance);
}

double side_info_conditional_mean(double x, const SourceChannelModel& model) {
  return model.rho * std::sqrt(model.sigma_z2 / model.sigma_x2) * x;
}

double side_info_conditional_pdf(double z, double x, const SourceChannelModel& model) {
  if (std::abs(model.rho) >= 1.0) {
    throw DegenerateConditional("Z|X is a point mass when |rho| = 1");
  }
  const double var = model.sigma_z2 * (1.0 - model.rho * model.rho);
  return gaussian_pdf(z, side_info_conditional_mean(x, model), var);
}

double trapezoid(std::span<const double> values, const Grid1D& grid) {
  if (values.size() != grid.n()) {
    throw DimensionError("trapezoid: " + std::to_string(values.size()) + " values for a " +
                         std::to_string(grid.n()) + "-point grid");
  }
  double interior = 0.0;
  for (std::size_t i = 1; i + 1 < values.size(); ++i) interior += values[i];
  return grid.spacing() * (interior + 0.5 * (values.front() + values.back()));
}

Grid1D channel_output_grid(const SourceChannelModel& model, double encoder_amplitude,
                           std::size_t n) {
  const double half = std::abs(encoder_amplitude) + kTailSigmas * model.sigma_n();
  return Grid1D(-half, half, n);
}

GridSet default_grids(const SourceChannelModel& model, double encoder_amplitude,
                      const GridCounts& counts) {
  model.validate();
  const double sx = kTailSigmas * model.sigma_x();
  const double sz = kTailSigmas * model.sigma_z();
  const double sn = kTailSigmas * model.sigma_n();
  return GridSet{Grid1D(-sx, sx, counts.nx), Grid1D(-sz, sz, counts.nz),
                 channel_output_grid(model, encoder_amplitude, counts.ny),
                 Grid1D(-sn, sn, counts.nn)};
}

}  // namespace zdsc
