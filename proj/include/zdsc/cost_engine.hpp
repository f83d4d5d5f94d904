#pragma once

#include <cstddef>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "zdsc/codec.hpp"
#include "zdsc/gauss.hpp"
#include "zdsc/matrix.hpp"

namespace zdsc {

// D, P, J = D + lambda P, H = H(K|X) in nats, F = J - T H.
struct CostReport {
  double distortion = 0.0;
  double power = 0.0;
  double lagrangian = 0.0;
  double entropy = 0.0;
  double free_energy = 0.0;
  double lambda = 0.0;
  double temperature = 0.0;

  static CostReport make(double distortion, double power, double entropy, double lambda,
                         double temperature);
};

struct ParamGradient {
  double d_a = 0.0;
  double d_b = 0.0;
};

// Gradient plus Gauss-Newton curvature of one model's weighted cost
// sum_i omega_i p_k(x_i) J_k(x_i) in (a, b).
struct ModelDerivatives {
  ParamGradient grad;
  double h_aa = 0.0;
  double h_ab = 0.0;
  double h_bb = 0.0;
};

// Quadrature tables for one (model, grids) pair. Every expectation over X, Z
// and N is a weighted sum on the shared grids:
//   * source weights omega_i = trapezoid weight * f_X(x_i), normalized to 1;
//   * per-point side-information weights over z (normalized to 1 per x_i,
//     stored only where non-negligible);
//   * noise weights over the n grid, normalized to 1.
class CostEngine {
 public:
  CostEngine(const SourceChannelModel& model, GridSet grids);

  const SourceChannelModel& model() const { return model_; }
  const GridSet& grids() const { return grids_; }
  const std::vector<double>& source_weights() const { return omega_x_; }
  const std::vector<double>& source_density() const { return f_x_; }

  // Same quadrature with a different channel-output grid.
  CostEngine with_y_grid(const Grid1D& y_grid) const;

  DecoderTable bayes_decoder(const TabulatedEncoder& enc) const;
  DecoderTable bayes_decoder(const StructuredEncoder& enc) const;

  // J_k(x_i) = D_k(x_i) + lambda g_k(x_i)^2 for every model and grid point.
  Matrix per_model_costs(const StructuredEncoder& enc, const DecoderTable& dec,
                         double lambda) const;
  // Single row of per_model_costs for an arbitrary affine model.
  std::vector<double> model_costs(const AffineModel& m, const DecoderTable& dec,
                                  double lambda) const;
  // D(x_i) + lambda g(x_i)^2 for a tabulated encoder.
  std::vector<double> point_costs(const TabulatedEncoder& enc, const DecoderTable& dec,
                                  double lambda) const;

  CostReport evaluate_costs(const StructuredEncoder& enc, const DecoderTable& dec,
                            double lambda, double temperature) const;
  CostReport evaluate_costs(const TabulatedEncoder& enc, const DecoderTable& dec,
                            double lambda) const;
  // Report from precomputed per-model costs and the association matrix.
  CostReport report_from_costs(const StructuredEncoder& enc, const Matrix& costs,
                               double lambda, double temperature) const;

  // lambda f_X(x) g(x) - integral of w'(g + n, z) [x - w(g + n, z)] f_N(n) f_XZ(x, z).
  std::vector<double> functional_gradient(const TabulatedEncoder& enc, const DecoderTable& dec,
                                          double lambda) const;

  // dF/da_k and dF/db_k with associations and decoder held fixed.
  std::vector<ParamGradient> affine_param_gradient(const StructuredEncoder& enc,
                                                   const DecoderTable& dec,
                                                   double lambda) const;
  ModelDerivatives model_derivatives(const StructuredEncoder& enc, std::size_t k,
                                     const DecoderTable& dec, double lambda) const;
  // Same, for point weights weights[i] = omega_i p_k(x_i).
  ModelDerivatives model_derivatives(const AffineModel& m, std::span<const double> weights,
                                     const DecoderTable& dec, double lambda) const;
  // sum_i weights[i] J(x_i) for one affine model; negligible weights are skipped.
  double weighted_model_cost(const AffineModel& m, std::span<const double> weights,
                             const DecoderTable& dec, double lambda) const;
  // omega_i p_k(x_i) for model k.
  std::vector<double> model_weights(const StructuredEncoder& enc, std::size_t k) const;

  // H(K|X) for an association matrix on this engine's x grid.
  double entropy(const Matrix& assoc) const;

  // Partial derivative of J with respect to g(x_i) equals
  // gradient_scale(i) times the functional gradient at x_i.
  double gradient_scale(std::size_t i) const;

 private:
  struct PointTerms {
    double d = 0.0;       // D(x_i) at channel input g
    double d_g = 0.0;     // dD/dg
    double gn = 0.0;      // Gauss-Newton curvature 2 E[w'^2]
  };

  // Per source node x_i and output node y_j: mean and variance over z of the
  // decoder row w(y_j, .), and the covariance of rows j and j+1. With these,
  // every expectation over z in D and its derivatives is closed form.
  struct DecoderMoments {
    Grid1D y_grid;
    Matrix xhat;
    Matrix mean;
    Matrix var;
    Matrix cov;
  };

  // Holds the moments of the most recently used decoder. Copies start empty.
  class MomentCache {
   public:
    MomentCache() = default;
    MomentCache(const MomentCache&) {}
    MomentCache& operator=(const MomentCache&) {
      const std::lock_guard lock(mutex_);
      entry_.reset();
      return *this;
    }
    std::shared_ptr<const DecoderMoments> find(const DecoderTable& dec) const;
    void store(std::shared_ptr<const DecoderMoments> entry) const;

   private:
    mutable std::mutex mutex_;
    mutable std::shared_ptr<const DecoderMoments> entry_;
  };

  std::shared_ptr<const DecoderMoments> moments(const DecoderTable& dec) const;

  template <bool WithGrad>
  PointTerms point_terms(std::size_t i, double g, const DecoderMoments& mom) const;

  DecoderTable decode_from_likelihood(const Matrix& p_y_given_x) const;
  void check_decoder(const DecoderTable& dec) const;

  SourceChannelModel model_;
  GridSet grids_;
  std::vector<double> omega_x_;
  std::vector<double> f_x_;
  double x_norm_ = 1.0;
  std::vector<double> q_n_;
  // Side-information weights of x_i occupy z indices [z_begin_[i], z_end_[i]).
  std::vector<std::size_t> z_begin_;
  std::vector<std::size_t> z_end_;
  Matrix q_z_;       // normalized conditional weights, per x_i
  Matrix f_xz_;      // trapezoid-weighted joint density f_X(x_i) p(z_m | x_i) dx dz
  MomentCache cache_;
};

// Softmax of -J_k(x_i)/T per column; T = 0 gives the hard argmin.
Matrix gibbs_probs(const Matrix& costs, double temperature);

// Free-function forms: build the quadrature and forward to CostEngine.
DecoderTable bayes_decoder(const TabulatedEncoder& enc, const SourceChannelModel& model,
                           const GridSet& grids);
DecoderTable bayes_decoder(const StructuredEncoder& enc, const SourceChannelModel& model,
                           const GridSet& grids);
CostReport evaluate_costs(const StructuredEncoder& enc, const DecoderTable& dec,
                          const SourceChannelModel& model, const GridSet& grids,
                          double lambda, double temperature);
Matrix per_model_costs(const StructuredEncoder& enc, const DecoderTable& dec,
                       const SourceChannelModel& model, const GridSet& grids, double lambda);
std::vector<double> functional_gradient(const TabulatedEncoder& enc, const DecoderTable& dec,
                                        const SourceChannelModel& model, const GridSet& grids,
                                        double lambda);
std::vector<ParamGradient> affine_param_gradient(const StructuredEncoder& enc,
                                                 const DecoderTable& dec,
                                                 const SourceChannelModel& model,
                                                 const GridSet& grids, double lambda);

}  // namespace zdsc
