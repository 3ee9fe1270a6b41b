#pragma once
// Gaussian-process regression with a squared-exponential correlation and an
// optional white-noise nugget, fitted by maximum likelihood.
//
// Conventions:
//   correlation(a, b) = exp(-sum_j tau_j (a_j - b_j)^2)
//   R = K + (sigma_noise + jitter) I        (K_ii = 1)
//   mu_hat     = 1'R^-1 e / 1'R^-1 1
//   sigma2_hat = (e - 1 mu_hat)' R^-1 (e - 1 mu_hat) / k
//   mean(x)    = mu_hat + r' R^-1 (e - 1 mu_hat)
//   mse(x)     = sigma2_hat (1 - r'R^-1 r + (1 - 1'R^-1 r)^2 / 1'R^-1 1)
// sigma_noise is a relative nugget: the implied observation noise variance is
// sigma2_hat * sigma_noise.
//
// Internally inputs are mapped to the unit cube and outputs standardized; the
// hyperparameters reported by GpModel::hyper() are in original units, so the
// formulas above hold verbatim for them.

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "nso/design.hpp"

namespace nso {

struct Profile;

enum class KernelKind { SquaredExponential, SquaredExponentialPlusWhiteNoise };

struct KernelSpec {
  KernelKind kind = KernelKind::SquaredExponentialPlusWhiteNoise;
  std::pair<double, double> length_scale_bounds{1e-3, 1e3};  // tau_j, unit-cube scale
  std::pair<double, double> nugget_bounds{1e-8, 1.0};        // sigma_noise
  int restarts = 10;               // random starts; 0 is allowed with a warm start
  int sweeps = 2;                  // coordinate sweeps per restart
  double search_radius = 2.0;      // golden-section bracket, in log units
  double search_tolerance = 0.05;  // golden-section stopping width, log units

  bool has_nugget() const { return kind == KernelKind::SquaredExponentialPlusWhiteNoise; }
  /// Throws std::invalid_argument on non-positive or inverted bounds.
  void validate() const;
};

struct GpHyperparams {
  Vector tau;
  double sigma_noise = 0.0;
  double mu_hat = 0.0;
  double sigma2_hat = 0.0;
};

struct Prediction {
  double mean = 0.0;
  double mse = 0.0;
};

/// Squared-exponential correlation. Throws on dimension mismatch.
double correlation(std::span<const double> a, std::span<const double> b,
                   std::span<const double> tau);

/// Concentrated Gaussian log marginal likelihood with mu and sigma^2 profiled
/// out. Uses the inputs as given (no rescaling). Throws std::runtime_error when
/// R stays indefinite after jitter escalation.
double log_marginal_likelihood(const std::vector<Vector>& train_x, std::span<const double> train_y,
                               std::span<const double> tau, double sigma_noise);

struct FitOptions {
  /// Box used to scale inputs to the unit cube; defaults to the data's bounding box.
  std::optional<SearchDomain> input_box;
  /// Starting point (from GpModel::log_params()) added to the random restarts.
  std::optional<Vector> warm_start;
};

class GpModel {
 public:
  /// Maximum-likelihood fit. Throws std::invalid_argument for k < 2 or ragged
  /// inputs and std::runtime_error when R cannot be factorized.
  static GpModel fit(const std::vector<Vector>& train_x, std::span<const double> train_y,
                     const KernelSpec& spec, std::uint64_t rng_seed,
                     const FitOptions& options = {});

  /// Refactorizes on new data while keeping the unit-cube hyperparameters of
  /// `previous` (which must share the same input box).
  static GpModel condition(const std::vector<Vector>& train_x, std::span<const double> train_y,
                           const GpModel& previous);

  Prediction predict(std::span<const double> theta) const;
  void predict_batch(const std::vector<Vector>& thetas, std::span<double> mean,
                     std::span<double> mse) const;
  /// Exact means plus a cheap upper bound on the mse: r'R^-1 r is bounded
  /// below by the same form restricted to the few most correlated points.
  void predict_bound_batch(const std::vector<Vector>& thetas, std::span<double> mean,
                           std::span<double> mse_upper) const;

  /// Hyperparameters in original units.
  const GpHyperparams& hyper() const { return hyper_; }
  /// log(tau) in unit-cube scale, followed by log(sigma_noise) when a nugget is fitted.
  Vector log_params() const;
  double log_likelihood() const { return log_likelihood_; }

  double jitter() const { return jitter_; }
  /// Total diagonal addition sigma_noise + jitter.
  double diagonal_addition() const { return hyper_.sigma_noise + jitter_; }
  /// Estimated observation noise standard deviation, sqrt(sigma2_hat * sigma_noise).
  double noise_std() const;

  std::size_t size() const { return train_x_.size(); }
  std::size_t dim() const { return lower_.size(); }
  const std::vector<Vector>& train_x() const { return train_x_; }
  const Vector& train_y() const { return train_y_; }
  const KernelSpec& spec() const { return spec_; }
  /// Lower Cholesky factor of R (identical in scaled and original units).
  const Eigen::MatrixXd& chol() const { return chol_; }
  /// R = K + sigma_noise I rebuilt from the stored training set; excludes jitter.
  Eigen::MatrixXd correlation_matrix() const;

  nlohmann::json to_json() const;

 private:
  GpModel() = default;
  void factorize(std::span<const double> log_params);
  /// Appends rows to previous's Cholesky factor when this model's inputs
  /// extend previous's; false when that is not possible.
  bool extend(const GpModel& previous);
  void adopt(Profile&& p, double nugget);
  void refine_alpha(double nugget);

  KernelSpec spec_;
  std::vector<Vector> train_x_;
  Vector train_y_;
  Vector lower_;  // scaling box
  Vector width_;

  // Unit-cube / standardized working state.
  Vector cols_;  // d x k, column-major over points
  Vector tau_scaled_;
  double y_mean_ = 0.0;
  double y_scale_ = 1.0;
  Eigen::MatrixXd chol_;
  Vector chol_rows_;  // chol_ as packed rows for simd::lower_solve_sqnorm
  Eigen::VectorXd alpha_;  // R^-1 (y_s - mu_s)
  Eigen::VectorXd beta_;   // R^-1 1
  double one_r_one_ = 1.0;
  double mu_s_ = 0.0;
  double sigma2_s_ = 1.0;
  double jitter_ = 0.0;
  double log_likelihood_ = 0.0;

  GpHyperparams hyper_;
};

}  // namespace nso
