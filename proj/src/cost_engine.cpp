#include "zdsc/cost_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "zdsc/errors.hpp"

namespace zdsc {

namespace {

// Side-information weights below this fraction of the row peak are dropped.
constexpr double kZCutoff = 1e-16;
// Evidence below this makes a decoder cell fall back to E[X | z].
constexpr double kEvidenceFloor = 1e-300;
// Points whose weight omega_i p_k(x_i) is below this are skipped in gradients.
constexpr double kWeightFloor = 1e-16;

}  // namespace

CostReport CostReport::make(double distortion, double power, double entropy, double lambda,
                            double temperature) {
  CostReport r;
  r.distortion = distortion;
  r.power = power;
  r.entropy = entropy;
  r.lambda = lambda;
  r.temperature = temperature;
  r.lagrangian = distortion + lambda * power;
  r.free_energy = r.lagrangian - temperature * entropy;
  return r;
}

CostEngine::CostEngine(const SourceChannelModel& model, GridSet grids)
    : model_(model), grids_(std::move(grids)) {
  model_.validate();
  if (std::abs(model_.rho) >= 1.0) {
    throw DegenerateConditional("quadrature requires |rho| < 1");
  }
  const Grid1D& xg = grids_.x_grid;
  const Grid1D& zg = grids_.z_grid;
  const Grid1D& ng = grids_.n_grid;
  const std::size_t nx = xg.n();
  const std::size_t nz = zg.n();

  const auto wx = xg.trapezoid_weights();
  f_x_.resize(nx);
  omega_x_.resize(nx);
  double total = 0.0;
  for (std::size_t i = 0; i < nx; ++i) {
    f_x_[i] = gaussian_pdf(xg[i], 0.0, model_.sigma_x2);
    omega_x_[i] = wx[i] * f_x_[i];
    total += omega_x_[i];
  }
  x_norm_ = total;
  for (double& w : omega_x_) w /= total;

  const auto wn = ng.trapezoid_weights();
  q_n_.resize(ng.n());
  double n_total = 0.0;
  for (std::size_t l = 0; l < ng.n(); ++l) {
    q_n_[l] = wn[l] * gaussian_pdf(ng[l], 0.0, model_.sigma_n2);
    n_total += q_n_[l];
  }
  for (double& q : q_n_) q /= n_total;

  const auto wz = zg.trapezoid_weights();
  z_begin_.assign(nx, 0);
  z_end_.assign(nx, 0);
  q_z_ = Matrix(nx, nz);
  f_xz_ = Matrix(nx, nz);
  std::vector<double> row(nz);
  for (std::size_t i = 0; i < nx; ++i) {
    double peak = 0.0;
    for (std::size_t m = 0; m < nz; ++m) {
      row[m] = wz[m] * side_info_conditional_pdf(zg[m], xg[i], model_);
      peak = std::max(peak, row[m]);
    }
    if (peak == 0.0) {
      // The conditional mass lies entirely off the z grid; use the nearest node.
      const double mean = side_info_conditional_mean(xg[i], model_);
      const auto m = static_cast<std::size_t>(std::clamp(
          std::round((mean - zg.lo()) / zg.spacing()), 0.0, static_cast<double>(nz - 1)));
      std::fill(row.begin(), row.end(), 0.0);
      row[m] = 1.0;
      peak = 1.0;
    }
    std::size_t b = 0;
    while (row[b] < kZCutoff * peak) ++b;
    std::size_t e = nz;
    while (row[e - 1] < kZCutoff * peak) --e;
    z_begin_[i] = b;
    z_end_[i] = e;
    double s = 0.0;
    for (std::size_t m = b; m < e; ++m) s += row[m];
    for (std::size_t m = b; m < e; ++m) {
      q_z_(i, m) = row[m] / s;
      f_xz_(i, m) = omega_x_[i] * row[m];
    }
  }
}

CostEngine CostEngine::with_y_grid(const Grid1D& y_grid) const {
  CostEngine copy = *this;
  copy.grids_.y_grid = y_grid;
  return copy;
}

double CostEngine::gradient_scale(std::size_t i) const {
  return 2.0 * omega_x_[i] / f_x_[i];
}

void CostEngine::check_decoder(const DecoderTable& dec) const {
  if (!(dec.z_grid == grids_.z_grid)) {
    throw DimensionError("decoder z grid differs from the quadrature z grid");
  }
}

std::shared_ptr<const CostEngine::DecoderMoments> CostEngine::MomentCache::find(
    const DecoderTable& dec) const {
  const std::lock_guard lock(mutex_);
  if (entry_ && entry_->y_grid == dec.y_grid && entry_->xhat == dec.xhat) return entry_;
  return nullptr;
}

void CostEngine::MomentCache::store(std::shared_ptr<const DecoderMoments> entry) const {
  const std::lock_guard lock(mutex_);
  entry_ = std::move(entry);
}

std::shared_ptr<const CostEngine::DecoderMoments> CostEngine::moments(
    const DecoderTable& dec) const {
  if (auto hit = cache_.find(dec)) return hit;
  const std::size_t nx = grids_.x_grid.n();
  const std::size_t ny = dec.y_grid.n();
  auto mom = std::make_shared<DecoderMoments>(DecoderMoments{
      dec.y_grid, dec.xhat, Matrix(nx, ny), Matrix(nx, ny), Matrix(nx, ny - 1)});
  const Matrix& w = dec.xhat;
  for (std::size_t i = 0; i < nx; ++i) {
    const std::size_t zb = z_begin_[i];
    const std::size_t ze = z_end_[i];
    const double* qz = q_z_.row(i).data();
    double* mean = mom->mean.row(i).data();
    double* var = mom->var.row(i).data();
    double* cov = mom->cov.row(i).data();
    for (std::size_t j = 0; j < ny; ++j) {
      const double* row = w.row(j).data();
      double mu = 0.0;
      for (std::size_t m = zb; m < ze; ++m) mu += qz[m] * row[m];
      double v = 0.0;
      for (std::size_t m = zb; m < ze; ++m) v += qz[m] * (row[m] - mu) * (row[m] - mu);
      mean[j] = mu;
      var[j] = v;
    }
    for (std::size_t j = 0; j + 1 < ny; ++j) {
      const double* r0 = w.row(j).data();
      const double* r1 = w.row(j + 1).data();
      double c = 0.0;
      for (std::size_t m = zb; m < ze; ++m) c += qz[m] * (r0[m] - mean[j]) * (r1[m] - mean[j + 1]);
      cov[j] = c;
    }
  }
  cache_.store(mom);
  return mom;
}

template <bool WithGrad>
CostEngine::PointTerms CostEngine::point_terms(std::size_t i, double g,
                                               const DecoderMoments& mom) const {
  const double x = grids_.x_grid[i];
  const Grid1D& yg = mom.y_grid;
  const Grid1D& ng = grids_.n_grid;
  const double inv_h = 1.0 / yg.spacing();
  const double* mean = mom.mean.row(i).data();
  const double* var = mom.var.row(i).data();
  const double* cov = mom.cov.row(i).data();

  PointTerms out;
  for (std::size_t l = 0; l < ng.n(); ++l) {
    const double y = g + ng[l];
    std::size_t j;
    double t;
    bool inside = true;
    if (y <= yg.lo()) {
      j = 0;
      t = 0.0;
      inside = false;
    } else if (y >= yg.hi()) {
      j = yg.n() - 2;
      t = 1.0;
      inside = false;
    } else {
      const double u = (y - yg.lo()) * inv_h;
      j = std::min(static_cast<std::size_t>(u), yg.n() - 2);
      t = u - static_cast<double>(j);
    }
    // The interpolated estimate is s w(y_j, z) + t w(y_j+1, z); its error
    // splits into the error of the z-mean plus the z-spread around it.
    const double s = 1.0 - t;
    const double m0 = mean[j];
    const double m1 = mean[j + 1];
    const double v0 = var[j];
    const double v1 = var[j + 1];
    const double c = cov[j];
    const double e = x - (s * m0 + t * m1);
    out.d += q_n_[l] * (e * e + s * s * v0 + 2.0 * s * t * c + t * t * v1);
    if constexpr (WithGrad) {
      if (inside) {
        // Slope of the interpolant over the enclosing cell: the central
        // difference of the table centred on the cell midpoint.
        const double dm = m1 - m0;
        const double err_slope = (e * dm - (s * (c - v0) + t * (v1 - c))) * inv_h;
        const double slope_sq = (dm * dm + v0 + v1 - 2.0 * c) * inv_h * inv_h;
        out.d_g -= 2.0 * q_n_[l] * err_slope;
        out.gn += 2.0 * q_n_[l] * slope_sq;
      }
    }
  }
  return out;
}

DecoderTable CostEngine::decode_from_likelihood(const Matrix& p_y_given_x) const {
  const Grid1D& xg = grids_.x_grid;
  const Grid1D& yg = grids_.y_grid;
  const Grid1D& zg = grids_.z_grid;
  const std::size_t nx = xg.n();
  const std::size_t nz = zg.n();

  // Prior conditional mean E[X | z_m], used where the channel output carries
  // no evidence.
  std::vector<double> prior_num(nz, 0.0);
  std::vector<double> prior_den(nz, 0.0);
  for (std::size_t i = 0; i < nx; ++i) {
    for (std::size_t m = z_begin_[i]; m < z_end_[i]; ++m) {
      prior_num[m] += xg[i] * f_xz_(i, m);
      prior_den[m] += f_xz_(i, m);
    }
  }
  std::vector<double> fallback(nz);
  const double slope = model_.rho * std::sqrt(model_.sigma_x2 / model_.sigma_z2);
  for (std::size_t m = 0; m < nz; ++m) {
    fallback[m] = prior_den[m] > kEvidenceFloor ? prior_num[m] / prior_den[m] : slope * zg[m];
  }

  Matrix table(yg.n(), nz);
  std::vector<double> num(nz);
  std::vector<double> den(nz);
  for (std::size_t j = 0; j < yg.n(); ++j) {
    std::fill(num.begin(), num.end(), 0.0);
    std::fill(den.begin(), den.end(), 0.0);
    for (std::size_t i = 0; i < nx; ++i) {
      const double lik = p_y_given_x(j, i);
      if (lik == 0.0) continue;
      const double x = xg[i];
      const double* f = f_xz_.row(i).data();
      for (std::size_t m = z_begin_[i]; m < z_end_[i]; ++m) {
        const double c = f[m] * lik;
        den[m] += c;
        num[m] += c * x;
      }
    }
    for (std::size_t m = 0; m < nz; ++m) {
      table(j, m) = den[m] > kEvidenceFloor ? num[m] / den[m] : fallback[m];
    }
  }
  return DecoderTable(yg, zg, std::move(table));
}

DecoderTable CostEngine::bayes_decoder(const TabulatedEncoder& enc) const {
  if (!(enc.x_grid == grids_.x_grid)) throw DimensionError("encoder x grid mismatch");
  const Grid1D& yg = grids_.y_grid;
  const std::size_t nx = grids_.x_grid.n();
  const double inv2v = 1.0 / (2.0 * model_.sigma_n2);
  const double c = 1.0 / std::sqrt(2.0 * std::numbers::pi * model_.sigma_n2);
  Matrix lik(yg.n(), nx);
  for (std::size_t j = 0; j < yg.n(); ++j) {
    for (std::size_t i = 0; i < nx; ++i) {
      const double d = yg[j] - enc.g_values[i];
      lik(j, i) = c * std::exp(-d * d * inv2v);
    }
  }
  return decode_from_likelihood(lik);
}

DecoderTable CostEngine::bayes_decoder(const StructuredEncoder& enc) const {
  if (!(enc.x_grid == grids_.x_grid)) throw DimensionError("encoder x grid mismatch");
  const Grid1D& xg = grids_.x_grid;
  const Grid1D& yg = grids_.y_grid;
  const std::size_t nx = xg.n();
  const double inv2v = 1.0 / (2.0 * model_.sigma_n2);
  const double c = 1.0 / std::sqrt(2.0 * std::numbers::pi * model_.sigma_n2);
  Matrix lik(yg.n(), nx);
  for (std::size_t k = 0; k < enc.size(); ++k) {
    const AffineModel& mk = enc.models[k];
    for (std::size_t i = 0; i < nx; ++i) {
      const double p = enc.assoc(k, i);
      if (p == 0.0) continue;
      const double g = mk(xg[i]);
      for (std::size_t j = 0; j < yg.n(); ++j) {
        const double d = yg[j] - g;
        lik(j, i) += p * c * std::exp(-d * d * inv2v);
      }
    }
  }
  return decode_from_likelihood(lik);
}

std::vector<double> CostEngine::model_costs(const AffineModel& m, const DecoderTable& dec,
                                            double lambda) const {
  check_decoder(dec);
  const auto mom = moments(dec);
  const Grid1D& xg = grids_.x_grid;
  std::vector<double> out(xg.n());
  for (std::size_t i = 0; i < xg.n(); ++i) {
    const double g = m(xg[i]);
    out[i] = point_terms<false>(i, g, *mom).d + lambda * g * g;
  }
  return out;
}

Matrix CostEngine::per_model_costs(const StructuredEncoder& enc, const DecoderTable& dec,
                                   double lambda) const {
  Matrix costs(enc.size(), grids_.x_grid.n());
  for (std::size_t k = 0; k < enc.size(); ++k) {
    const auto row = model_costs(enc.models[k], dec, lambda);
    std::copy(row.begin(), row.end(), costs.row(k).begin());
  }
  return costs;
}

std::vector<double> CostEngine::point_costs(const TabulatedEncoder& enc, const DecoderTable& dec,
                                            double lambda) const {
  check_decoder(dec);
  const auto mom = moments(dec);
  std::vector<double> out(enc.g_values.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double g = enc.g_values[i];
    out[i] = point_terms<false>(i, g, *mom).d + lambda * g * g;
  }
  return out;
}

double CostEngine::entropy(const Matrix& assoc) const {
  double h = 0.0;
  for (std::size_t i = 0; i < assoc.cols(); ++i) {
    double hi = 0.0;
    for (std::size_t k = 0; k < assoc.rows(); ++k) {
      const double p = assoc(k, i);
      if (p > 0.0) hi -= p * std::log(p);
    }
    h += omega_x_[i] * hi;
  }
  return std::max(h, 0.0);
}

CostReport CostEngine::report_from_costs(const StructuredEncoder& enc, const Matrix& costs,
                                         double lambda, double temperature) const {
  const Grid1D& xg = grids_.x_grid;
  double j_total = 0.0;
  double power = 0.0;
  for (std::size_t i = 0; i < xg.n(); ++i) {
    double ji = 0.0;
    double pi = 0.0;
    for (std::size_t k = 0; k < enc.size(); ++k) {
      const double p = enc.assoc(k, i);
      const double g = enc.models[k](xg[i]);
      ji += p * costs(k, i);
      pi += p * g * g;
    }
    j_total += omega_x_[i] * ji;
    power += omega_x_[i] * pi;
  }
  const double distortion = std::max(j_total - lambda * power, 0.0);
  return CostReport::make(distortion, power, entropy(enc.assoc), lambda, temperature);
}

CostReport CostEngine::evaluate_costs(const StructuredEncoder& enc, const DecoderTable& dec,
                                      double lambda, double temperature) const {
  check_decoder(dec);
  const auto mom = moments(dec);
  const Grid1D& xg = grids_.x_grid;
  double distortion = 0.0;
  double power = 0.0;
  for (std::size_t i = 0; i < xg.n(); ++i) {
    double di = 0.0;
    double pi = 0.0;
    for (std::size_t k = 0; k < enc.size(); ++k) {
      const double p = enc.assoc(k, i);
      if (p == 0.0) continue;
      const double g = enc.models[k](xg[i]);
      di += p * point_terms<false>(i, g, *mom).d;
      pi += p * g * g;
    }
    distortion += omega_x_[i] * di;
    power += omega_x_[i] * pi;
  }
  return CostReport::make(distortion, power, entropy(enc.assoc), lambda, temperature);
}

CostReport CostEngine::evaluate_costs(const TabulatedEncoder& enc, const DecoderTable& dec,
                                      double lambda) const {
  check_decoder(dec);
  const auto mom = moments(dec);
  double distortion = 0.0;
  double power = 0.0;
  for (std::size_t i = 0; i < enc.g_values.size(); ++i) {
    const double g = enc.g_values[i];
    distortion += omega_x_[i] * point_terms<false>(i, g, *mom).d;
    power += omega_x_[i] * g * g;
  }
  return CostReport::make(distortion, power, 0.0, lambda, 0.0);
}

std::vector<double> CostEngine::functional_gradient(const TabulatedEncoder& enc,
                                                    const DecoderTable& dec,
                                                    double lambda) const {
  check_decoder(dec);
  const auto mom = moments(dec);
  std::vector<double> grad(enc.g_values.size());
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const double g = enc.g_values[i];
    const auto terms = point_terms<true>(i, g, *mom);
    grad[i] = f_x_[i] * (lambda * g + 0.5 * terms.d_g);
  }
  return grad;
}

std::vector<double> CostEngine::model_weights(const StructuredEncoder& enc,
                                              std::size_t k) const {
  if (k >= enc.size()) throw IndexError("model index out of range");
  std::vector<double> w(omega_x_.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = omega_x_[i] * enc.assoc(k, i);
  return w;
}

ModelDerivatives CostEngine::model_derivatives(const AffineModel& m,
                                               std::span<const double> weights,
                                               const DecoderTable& dec, double lambda) const {
  check_decoder(dec);
  const auto mom = moments(dec);
  const Grid1D& xg = grids_.x_grid;
  ModelDerivatives out;
  for (std::size_t i = 0; i < xg.n(); ++i) {
    const double weight = weights[i];
    if (weight < kWeightFloor) continue;
    const double x = xg[i];
    const double g = m(x);
    const auto terms = point_terms<true>(i, g, *mom);
    const double dj = terms.d_g + 2.0 * lambda * g;
    const double curv = terms.gn + 2.0 * lambda;
    out.grad.d_a += weight * dj * x;
    out.grad.d_b += weight * dj;
    out.h_aa += weight * curv * x * x;
    out.h_ab += weight * curv * x;
    out.h_bb += weight * curv;
  }
  return out;
}

ModelDerivatives CostEngine::model_derivatives(const StructuredEncoder& enc, std::size_t k,
                                               const DecoderTable& dec, double lambda) const {
  const auto w = model_weights(enc, k);
  return model_derivatives(enc.models[k], w, dec, lambda);
}

double CostEngine::weighted_model_cost(const AffineModel& m, std::span<const double> weights,
                                       const DecoderTable& dec, double lambda) const {
  check_decoder(dec);
  const auto mom = moments(dec);
  const Grid1D& xg = grids_.x_grid;
  double total = 0.0;
  for (std::size_t i = 0; i < xg.n(); ++i) {
    const double weight = weights[i];
    if (weight < kWeightFloor) continue;
    const double g = m(xg[i]);
    total += weight * (point_terms<false>(i, g, *mom).d + lambda * g * g);
  }
  return total;
}

std::vector<ParamGradient> CostEngine::affine_param_gradient(const StructuredEncoder& enc,
                                                             const DecoderTable& dec,
                                                             double lambda) const {
  std::vector<ParamGradient> out(enc.size());
  for (std::size_t k = 0; k < enc.size(); ++k) {
    out[k] = model_derivatives(enc, k, dec, lambda).grad;
  }
  return out;
}

Matrix gibbs_probs(const Matrix& costs, double temperature) {
  if (!(temperature >= 0.0)) throw InvalidParameter("temperature must be non-negative");
  const std::size_t kk = costs.rows();
  const std::size_t n = costs.cols();
  Matrix p(kk, n, 0.0);
  if (kk == 0) return p;
  if (temperature == 0.0) {
    const auto best = hard_assignment(costs);
    for (std::size_t i = 0; i < n; ++i) p(best[i], i) = 1.0;
    return p;
  }
  for (std::size_t i = 0; i < n; ++i) {
    double lo = costs(0, i);
    for (std::size_t k = 1; k < kk; ++k) lo = std::min(lo, costs(k, i));
    double s = 0.0;
    for (std::size_t k = 0; k < kk; ++k) {
      p(k, i) = std::exp(-(costs(k, i) - lo) / temperature);
      s += p(k, i);
    }
    for (std::size_t k = 0; k < kk; ++k) p(k, i) /= s;
  }
  return p;
}

DecoderTable bayes_decoder(const TabulatedEncoder& enc, const SourceChannelModel& model,
                           const GridSet& grids) {
  return CostEngine(model, grids).bayes_decoder(enc);
}

DecoderTable bayes_decoder(const StructuredEncoder& enc, const SourceChannelModel& model,
                           const GridSet& grids) {
  return CostEngine(model, grids).bayes_decoder(enc);
}

CostReport evaluate_costs(const StructuredEncoder& enc, const DecoderTable& dec,
                          const SourceChannelModel& model, const GridSet& grids, double lambda,
                          double temperature) {
  return CostEngine(model, grids).evaluate_costs(enc, dec, lambda, temperature);
}

Matrix per_model_costs(const StructuredEncoder& enc, const DecoderTable& dec,
                       const SourceChannelModel& model, const GridSet& grids, double lambda) {
  return CostEngine(model, grids).per_model_costs(enc, dec, lambda);
}

std::vector<double> functional_gradient(const TabulatedEncoder& enc, const DecoderTable& dec,
                                        const SourceChannelModel& model, const GridSet& grids,
                                        double lambda) {
  return CostEngine(model, grids).functional_gradient(enc, dec, lambda);
}

std::vector<ParamGradient> affine_param_gradient(const StructuredEncoder& enc,
                                                 const DecoderTable& dec,
                                                 const SourceChannelModel& model,
                                                 const GridSet& grids, double lambda) {
  return CostEngine(model, grids).affine_param_gradient(enc, dec, lambda);
}

}  // namespace zdsc
