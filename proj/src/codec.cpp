#include "zdsc/codec.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "zdsc/errors.hpp"

namespace zdsc {

namespace {

// Cell index and fractional position of v in grid, clamped to the boundary.
struct Cell {
  std::size_t j;
  double t;
};

Cell locate_clamped(const Grid1D& grid, double v) {
  if (v <= grid.lo()) return {0, 0.0};
  if (v >= grid.hi()) return {grid.n() - 2, 1.0};
  const double u = (v - grid.lo()) / grid.spacing();
  auto j = static_cast<std::size_t>(u);
  if (j > grid.n() - 2) j = grid.n() - 2;
  if (v == grid[j]) return {j, 0.0};
  if (v == grid[j + 1]) return {j, 1.0};
  return {j, u - static_cast<double>(j)};
}

}  // namespace

TabulatedEncoder::TabulatedEncoder(Grid1D grid, std::vector<double> values)
    : x_grid(std::move(grid)), g_values(std::move(values)) {
  if (g_values.size() != x_grid.n()) {
    throw DimensionError("encoder table has " + std::to_string(g_values.size()) +
                         " values for " + std::to_string(x_grid.n()) + " grid points");
  }
  for (double g : g_values) {
    if (!std::isfinite(g)) throw InvalidParameter("encoder values must be finite");
  }
}

StructuredEncoder::StructuredEncoder(std::vector<AffineModel> m, Matrix p, Grid1D grid)
    : models(std::move(m)), assoc(std::move(p)), x_grid(std::move(grid)) {
  if (models.empty()) throw InvalidParameter("structured encoder needs at least one model");
  if (assoc.rows() != models.size() || assoc.cols() != x_grid.n()) {
    throw DimensionError("association matrix must be K x n");
  }
  for (std::size_t i = 0; i < x_grid.n(); ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < models.size(); ++k) {
      const double p_ki = assoc(k, i);
      if (!(p_ki >= 0.0 && p_ki <= 1.0)) {
        throw InvalidParameter("association probabilities must lie in [0, 1]");
      }
      s += p_ki;
    }
    if (std::abs(s - 1.0) > 1e-10) {
      throw InvalidParameter("association column " + std::to_string(i) + " sums to " +
                             std::to_string(s));
    }
  }
}

StructuredEncoder StructuredEncoder::uniform(std::vector<AffineModel> models, Grid1D grid) {
  const std::size_t k = models.size();
  if (k == 0) throw InvalidParameter("structured encoder needs at least one model");
  Matrix p(k, grid.n(), 1.0 / static_cast<double>(k));
  return StructuredEncoder(std::move(models), std::move(p), std::move(grid));
}

DecoderTable::DecoderTable(Grid1D y, Grid1D z, Matrix table)
    : y_grid(std::move(y)), z_grid(std::move(z)), xhat(std::move(table)) {
  if (xhat.rows() != y_grid.n() || xhat.cols() != z_grid.n()) {
    throw DimensionError("decoder table must be n_y x n_z");
  }
}

double encoder_eval(const TabulatedEncoder& enc, double x) {
  const Grid1D& g = enc.x_grid;
  if (!(x >= g.lo() && x <= g.hi())) throw OutOfDomain("x outside the encoder grid");
  const Cell c = locate_clamped(g, x);
  return (1.0 - c.t) * enc.g_values[c.j] + c.t * enc.g_values[c.j + 1];
}

double model_eval(const StructuredEncoder& enc, std::size_t k, double x) {
  if (k >= enc.models.size()) {
    throw IndexError("model index " + std::to_string(k) + " out of range");
  }
  return enc.models[k](x);
}

TabulatedEncoder averaged_encoder(const StructuredEncoder& enc) {
  std::vector<double> g(enc.x_grid.n(), 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double x = enc.x_grid[i];
    for (std::size_t k = 0; k < enc.size(); ++k) g[i] += enc.assoc(k, i) * enc.models[k](x);
  }
  return TabulatedEncoder(enc.x_grid, std::move(g));
}

std::vector<std::size_t> hard_assignment(const Matrix& costs) {
  std::vector<std::size_t> best(costs.cols(), 0);
  for (std::size_t i = 0; i < costs.cols(); ++i) {
    for (std::size_t k = 1; k < costs.rows(); ++k) {
      if (costs(k, i) < costs(best[i], i)) best[i] = k;
    }
  }
  return best;
}

TabulatedEncoder harden(const StructuredEncoder& enc, const Matrix& costs) {
  if (costs.rows() != enc.size() || costs.cols() != enc.x_grid.n()) {
    throw DimensionError("per-point cost matrix must be K x n");
  }
  const auto best = hard_assignment(costs);
  std::vector<double> g(enc.x_grid.n());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = enc.models[best[i]](enc.x_grid[i]);
  return TabulatedEncoder(enc.x_grid, std::move(g));
}

double decoder_eval(const DecoderTable& dec, double y, double z) {
  const Cell cy = locate_clamped(dec.y_grid, y);
  const Cell cz = locate_clamped(dec.z_grid, z);
  const Matrix& w = dec.xhat;
  const double lo = (1.0 - cz.t) * w(cy.j, cz.j) + cz.t * w(cy.j, cz.j + 1);
  const double hi = (1.0 - cz.t) * w(cy.j + 1, cz.j) + cz.t * w(cy.j + 1, cz.j + 1);
  return (1.0 - cy.t) * lo + cy.t * hi;
}

double effective_amplitude(const StructuredEncoder& enc, double sigma_x, double density_floor,
                           double assoc_floor) {
  const double x_max = sigma_x * std::sqrt(-2.0 * std::log(density_floor));
  double amp = 0.0;
  for (std::size_t i = 0; i < enc.x_grid.n(); ++i) {
    const double x = enc.x_grid[i];
    if (std::abs(x) > x_max) continue;
    for (std::size_t k = 0; k < enc.size(); ++k) {
      if (enc.assoc(k, i) >= assoc_floor) amp = std::max(amp, std::abs(enc.models[k](x)));
    }
  }
  return amp;
}

double effective_amplitude(const TabulatedEncoder& enc, double sigma_x, double density_floor) {
  const double x_max = sigma_x * std::sqrt(-2.0 * std::log(density_floor));
  double amp = 0.0;
  for (std::size_t i = 0; i < enc.x_grid.n(); ++i) {
    if (std::abs(enc.x_grid[i]) <= x_max) amp = std::max(amp, std::abs(enc.g_values[i]));
  }
  return amp;
}

}  // namespace zdsc
