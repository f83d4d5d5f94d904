#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace zdsc {

// Joint Gaussian statistics of source X, side information Z and channel
// noise N. X and Z are zero-mean; N is independent of both.
struct SourceChannelModel {
  double sigma_x2 = 1.0;
  double sigma_z2 = 1.0;
  double rho = 0.0;
  double sigma_n2 = 1.0;
  double power_limit = 1.0;

  // Throws InvalidParameter on any violated invariant.
  void validate() const;

  double sigma_x() const;
  double sigma_z() const;
  double sigma_n() const;

  bool operator==(const SourceChannelModel&) const = default;
};

// Uniformly spaced sample points on [lo, hi].
class Grid1D {
 public:
  Grid1D(double lo, double hi, std::size_t n);

  double lo() const { return lo_; }
  double hi() const { return hi_; }
  std::size_t n() const { return values_.size(); }
  double spacing() const { return spacing_; }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const { return values_; }

  // Trapezoid weights: spacing in the interior, half spacing at the ends.
  std::vector<double> trapezoid_weights() const;

  bool operator==(const Grid1D&) const = default;

 private:
  double lo_;
  double hi_;
  double spacing_;
  std::vector<double> values_;
};

struct GridSet {
  Grid1D x_grid;
  Grid1D z_grid;
  Grid1D y_grid;
  Grid1D n_grid;
};

struct GridCounts {
  std::size_t nx = 201;
  std::size_t nz = 65;
  std::size_t ny = 97;
  std::size_t nn = 49;

  bool operator==(const GridCounts&) const = default;
};

// Tail truncation used by every default grid, in standard deviations.
inline constexpr double kTailSigmas = 5.0;

double gaussian_pdf(double x, double mean, double variance);

// Density of Z given X = x.
double side_info_conditional_pdf(double z, double x, const SourceChannelModel& model);

// Mean of Z given X = x.
double side_info_conditional_mean(double x, const SourceChannelModel& model);

double trapezoid(std::span<const double> values, const Grid1D& grid);

GridSet default_grids(const SourceChannelModel& model, double encoder_amplitude,
                      const GridCounts& counts = {});

// Channel-output grid covering [-amplitude - 5 sigma_N, amplitude + 5 sigma_N].
Grid1D channel_output_grid(const SourceChannelModel& model, double encoder_amplitude,
                           std::size_t n);

}  // namespace zdsc
