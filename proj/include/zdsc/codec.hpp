#pragma once

#include <cstddef>
#include <vector>

#include "zdsc/gauss.hpp"
#include "zdsc/matrix.hpp"

namespace zdsc {

// Deterministic encoder g(x) sampled on the source grid.
struct TabulatedEncoder {
  Grid1D x_grid;
  std::vector<double> g_values;

  TabulatedEncoder(Grid1D grid, std::vector<double> values);
};

// Local model g_k(x) = a x + b.
struct AffineModel {
  double a = 0.0;
  double b = 0.0;

  double operator()(double x) const { return a * x + b; }
  bool operator==(const AffineModel&) const = default;
};

// K affine local models with randomized associations: assoc(k, i) is the
// probability that grid point x_i is encoded by model k. Each column sums to 1.
struct StructuredEncoder {
  std::vector<AffineModel> models;
  Matrix assoc;
  Grid1D x_grid;

  StructuredEncoder(std::vector<AffineModel> models, Matrix assoc, Grid1D grid);

  // Every point associated uniformly with all models.
  static StructuredEncoder uniform(std::vector<AffineModel> models, Grid1D grid);

  std::size_t size() const { return models.size(); }
};

// Estimate xhat = w(y, z) tabulated on a (y, z) grid; xhat(j, m) = w(y_j, z_m).
struct DecoderTable {
  Grid1D y_grid;
  Grid1D z_grid;
  Matrix xhat;

  DecoderTable(Grid1D y, Grid1D z, Matrix table);
};

// Linear interpolation; throws OutOfDomain outside the grid.
double encoder_eval(const TabulatedEncoder& enc, double x);

// Zero-based model index; throws IndexError when out of range.
double model_eval(const StructuredEncoder& enc, std::size_t k, double x);

// g(x_i) = sum_k assoc(k, i) g_k(x_i).
TabulatedEncoder averaged_encoder(const StructuredEncoder& enc);

// Per point, the model with the smallest cost; ties go to the lowest index.
std::vector<std::size_t> hard_assignment(const Matrix& per_point_costs);

TabulatedEncoder harden(const StructuredEncoder& enc, const Matrix& per_point_costs);

// Bilinear interpolation, clamped to the table boundary.
double decoder_eval(const DecoderTable& dec, double y, double z);

// Largest |g_k(x_i)| over pairs with non-negligible association, restricted to
// the source region where the density is at least `density_floor` times its peak.
double effective_amplitude(const StructuredEncoder& enc, double sigma_x,
                           double density_floor = 1e-4, double assoc_floor = 1e-3);
double effective_amplitude(const TabulatedEncoder& enc, double sigma_x,
                           double density_floor = 1e-4);

}  // namespace zdsc
