#include "nso/gp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <numbers>
#include <random>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <fmt/core.h>

#include "nso/simd/kernels.hpp"

namespace nso {
namespace {

constexpr double kJitterStart = 1e-10;
constexpr double kJitterMax = 1e-4;
constexpr double kSigma2Floor = 1e-12;
// Smallest eigenvalue of R accepted while fitting a noise-free kernel.
constexpr double kMinEigenvalue = 1e-8;
constexpr std::size_t kPredictChunk = 128;
constexpr std::size_t kBoundNeighbors = 8;

}  // namespace

struct Profile {
  Eigen::MatrixXd chol;
  Eigen::VectorXd alpha;
  Eigen::VectorXd beta;
  double one_r_one = 1.0;
  double mu = 0.0;
  double sigma2 = kSigma2Floor;
  double jitter = kJitterStart;
  double lml = -std::numeric_limits<double>::infinity();
};

namespace {

// Lower triangle (and mirrored upper) of the SE correlation matrix over a
// column-major point set.
Eigen::MatrixXd kernel_matrix(const Vector& cols, std::size_t k, std::size_t d,
                              std::span<const double> tau) {
  const auto& kern = simd::active();
  Eigen::MatrixXd K(k, k);
  Vector point(d);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < d; ++j) point[j] = cols[j * k + i];
    // Column i below the diagonal: points i..k-1.
    std::span<double> out(K.col(static_cast<Eigen::Index>(i)).data() + i, k - i);
    kern.weighted_sq_dist(point, cols.data() + i, k, tau, out);
    kern.exp_neg(out);
  }
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      K(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          K(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
    }
  }
  return K;
}

// Fills the profile from a lower Cholesky factor of R; false when the
// profiled quantities are not usable.
bool finish_profile(Eigen::MatrixXd L, const Eigen::VectorXd& y, Profile& p) {
  const auto k = L.rows();
  if (!(L.diagonal().array() > 0.0).all() || !L.diagonal().allFinite()) return false;
  const auto solve = [&](const Eigen::VectorXd& b) {
    Eigen::VectorXd x = L.triangularView<Eigen::Lower>().solve(b);
    L.triangularView<Eigen::Lower>().transpose().solveInPlace(x);
    return x;
  };
  p.beta = solve(Eigen::VectorXd::Ones(k));
  p.one_r_one = p.beta.sum();
  if (!(p.one_r_one > 0.0) || !std::isfinite(p.one_r_one)) return false;
  p.mu = p.beta.dot(y) / p.one_r_one;
  const Eigen::VectorXd resid = y.array() - p.mu;
  p.alpha = solve(resid);
  // Constant outputs give sigma^2 = 0 (a saturated model); the floor only
  // keeps the likelihood finite.
  p.sigma2 = std::max(resid.dot(p.alpha) / static_cast<double>(k), 0.0);
  const double logdet = 2.0 * L.diagonal().array().log().sum();
  const double kd = static_cast<double>(k);
  p.lml = -0.5 * kd * std::log(std::max(p.sigma2, kSigma2Floor)) - 0.5 * logdet -
          0.5 * kd * (std::log(2.0 * std::numbers::pi) + 1.0);
  if (!std::isfinite(p.lml)) return false;
  p.chol = std::move(L);
  return true;
}

// Estimate of the smallest eigenvalue of L L^T by inverse power iteration.
double smallest_eigenvalue(const Eigen::MatrixXd& L) {
  Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(L.rows(), 1.0, 2.0);
  double norm = v.norm();
  for (int it = 0; it < 8; ++it) {
    v /= norm;
    L.triangularView<Eigen::Lower>().solveInPlace(v);
    L.triangularView<Eigen::Lower>().transpose().solveInPlace(v);
    norm = v.norm();
  }
  return 1.0 / norm;
}

// Factorizes K + (nugget + jitter) I with jitter escalation and profiles mu
// and sigma^2 out of the likelihood. Returns nullopt if R never factorizes.
std::optional<Profile> profile(const Eigen::MatrixXd& K, const Eigen::VectorXd& y,
                               double nugget) {
  for (double jitter = kJitterStart; jitter <= kJitterMax * 1.0000001; jitter *= 10.0) {
    Eigen::MatrixXd R = K;
    R.diagonal().array() += nugget + jitter;
    Eigen::LLT<Eigen::MatrixXd, Eigen::Lower> llt(std::move(R));
    if (llt.info() != Eigen::Success) continue;
    Profile p;
    p.jitter = jitter;
    Eigen::MatrixXd L = llt.matrixLLT();
    L.triangularView<Eigen::StrictlyUpper>().setZero();
    if (finish_profile(std::move(L), y, p)) return p;
  }
  return std::nullopt;
}

Vector to_columns(const std::vector<Vector>& x, std::size_t d, const Vector& lower,
                  const Vector& width) {
  const std::size_t k = x.size();
  Vector cols(d * k);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < d; ++j) cols[j * k + i] = (x[i][j] - lower[j]) / width[j];
  }
  return cols;
}

void check_training_set(const std::vector<Vector>& x, std::span<const double> y,
                        const char* who) {
  if (x.size() < 2) throw std::invalid_argument(fmt::format("{}: need at least 2 points", who));
  if (x.size() != y.size()) {
    throw std::invalid_argument(
        fmt::format("{}: {} inputs but {} outputs", who, x.size(), y.size()));
  }
  const std::size_t d = x.front().size();
  if (d == 0) throw std::invalid_argument(fmt::format("{}: zero-dimensional inputs", who));
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i].size() != d) {
      throw std::invalid_argument(fmt::format("{}: point {} has dimension {}, expected {}", who,
                                              i, x[i].size(), d));
    }
    if (!std::isfinite(y[i])) throw std::invalid_argument(fmt::format("{}: non-finite y", who));
  }
}

// Golden-section minimization of f on [a, b]; returns the best (t, f(t)) seen.
template <class F>
std::pair<double, double> golden_section(F&& f, double a, double b, double tol) {
  constexpr double kInvPhi = 0.6180339887498949;
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > tol) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = f(d);
    }
  }
  return fc <= fd ? std::pair{c, fc} : std::pair{d, fd};
}

}  // namespace

void KernelSpec::validate() const {
  auto check = [](std::pair<double, double> b, const char* what) {
    if (!(b.first > 0.0) || !(b.second > b.first) || !std::isfinite(b.second)) {
      throw std::invalid_argument(
          fmt::format("KernelSpec: {} bounds must satisfy 0 < lower < upper", what));
    }
  };
  check(length_scale_bounds, "length-scale");
  check(nugget_bounds, "nugget");
  if (restarts < 0) throw std::invalid_argument("KernelSpec: restarts must be >= 0");
  if (sweeps < 1) throw std::invalid_argument("KernelSpec: sweeps must be >= 1");
  if (!(search_radius > 0.0) || !(search_tolerance > 0.0)) {
    throw std::invalid_argument("KernelSpec: search radius and tolerance must be positive");
  }
}

double correlation(std::span<const double> a, std::span<const double> b,
                   std::span<const double> tau) {
  if (a.size() != b.size() || a.size() != tau.size()) {
    throw std::invalid_argument(fmt::format("correlation: dimension mismatch ({}, {}, {})",
                                            a.size(), b.size(), tau.size()));
  }
  double acc = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) acc += tau[j] * (a[j] - b[j]) * (a[j] - b[j]);
  return std::exp(-acc);
}

double log_marginal_likelihood(const std::vector<Vector>& train_x, std::span<const double> train_y,
                               std::span<const double> tau, double sigma_noise) {
  check_training_set(train_x, train_y, "log_marginal_likelihood");
  const std::size_t d = train_x.front().size();
  if (tau.size() != d) throw std::invalid_argument("log_marginal_likelihood: tau dimension");
  const Vector zero(d, 0.0);
  const Vector one(d, 1.0);
  const Vector cols = to_columns(train_x, d, zero, one);
  const Eigen::MatrixXd K = kernel_matrix(cols, train_x.size(), d, tau);
  const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(
      train_y.data(), static_cast<Eigen::Index>(train_y.size()));
  const auto p = profile(K, y, sigma_noise);
  if (!p) throw std::runtime_error("log_marginal_likelihood: correlation matrix not positive definite");
  return p->lml;
}

GpModel GpModel::fit(const std::vector<Vector>& train_x, std::span<const double> train_y,
                     const KernelSpec& spec, std::uint64_t rng_seed, const FitOptions& options) {
  spec.validate();
  check_training_set(train_x, train_y, "GpModel::fit");
  const std::size_t k = train_x.size();
  const std::size_t d = train_x.front().size();

  GpModel m;
  m.spec_ = spec;
  m.train_x_ = train_x;
  m.train_y_.assign(train_y.begin(), train_y.end());
  m.lower_.resize(d);
  m.width_.resize(d);
  if (options.input_box) {
    if (options.input_box->dim() != d) throw std::invalid_argument("GpModel::fit: box dimension");
    m.lower_ = options.input_box->lower();
    for (std::size_t j = 0; j < d; ++j) m.width_[j] = options.input_box->width(j);
  } else {
    for (std::size_t j = 0; j < d; ++j) {
      double lo = train_x[0][j];
      double hi = lo;
      for (const auto& p : train_x) {
        lo = std::min(lo, p[j]);
        hi = std::max(hi, p[j]);
      }
      m.width_[j] = hi > lo ? hi - lo : 1.0;
      m.lower_[j] = hi > lo ? lo : lo - 0.5;
    }
  }
  m.cols_ = to_columns(train_x, d, m.lower_, m.width_);

  double mean = 0.0;
  for (double v : m.train_y_) mean += v;
  mean /= static_cast<double>(k);
  double var = 0.0;
  for (double v : m.train_y_) var += (v - mean) * (v - mean);
  var /= static_cast<double>(k);
  m.y_mean_ = mean;
  m.y_scale_ = var > 0.0 ? std::sqrt(var) : 1.0;
  Eigen::VectorXd ys(static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < k; ++i) {
    ys[static_cast<Eigen::Index>(i)] = (m.train_y_[i] - m.y_mean_) / m.y_scale_;
  }

  const bool nugget = spec.has_nugget();
  const std::size_t np = d + (nugget ? 1 : 0);
  Vector lb(np);
  Vector ub(np);
  for (std::size_t j = 0; j < d; ++j) {
    lb[j] = std::log(spec.length_scale_bounds.first);
    ub[j] = std::log(spec.length_scale_bounds.second);
  }
  if (nugget) {
    lb[d] = std::log(spec.nugget_bounds.first);
    ub[d] = std::log(spec.nugget_bounds.second);
  }
  auto clamp_params = [&](Vector p) {
    for (std::size_t j = 0; j < np; ++j) p[j] = std::clamp(p[j], lb[j], ub[j]);
    return p;
  };

  Vector best;
  if (options.warm_start && options.warm_start->size() != np) {
    throw std::invalid_argument("GpModel::fit: warm start has the wrong parameter count");
  }
  if (var == 0.0) {
    // Constant outputs: the likelihood is flat in the length scales.
    if (options.warm_start) {
      best = clamp_params(*options.warm_start);
    } else {
      best.resize(np);
      for (std::size_t j = 0; j < d; ++j) best[j] = 0.5 * (lb[j] + ub[j]);
      if (nugget) best[d] = lb[d];
    }
  } else {
    // Without a nugget, long length scales drive K towards singularity and the
    // jitter, not the data, ends up deciding the fit. Those settings are
    // skipped unless nothing else factorizes (duplicate inputs, say).
    bool guarded = !nugget;
    auto neg_lml = [&](const Vector& p) {
      Vector tau(d);
      for (std::size_t j = 0; j < d; ++j) tau[j] = std::exp(p[j]);
      const Eigen::MatrixXd K = kernel_matrix(m.cols_, k, d, tau);
      const auto prof = profile(K, ys, nugget ? std::exp(p[d]) : 0.0);
      if (!prof) return std::numeric_limits<double>::infinity();
      if (guarded && smallest_eigenvalue(prof->chol) < kMinEigenvalue) {
        return std::numeric_limits<double>::infinity();
      }
      return -prof->lml;
    };

    std::mt19937_64 rng(rng_seed);
    std::vector<Vector> starts;
    if (options.warm_start) starts.push_back(clamp_params(*options.warm_start));
    if (spec.restarts == 0 && starts.empty()) {
      throw std::invalid_argument("GpModel::fit: zero restarts needs a warm start");
    }
    for (int r = 0; r < spec.restarts; ++r) {
      Vector p(np);
      for (std::size_t j = 0; j < np; ++j) {
        p[j] = std::uniform_real_distribution<double>(lb[j], ub[j])(rng);
      }
      starts.push_back(std::move(p));
    }

    // Coordinate sweeps of golden-section searches from every start.
    auto search = [&](std::vector<Vector> xs) {
      double best_val = std::numeric_limits<double>::infinity();
      for (auto& x : xs) {
        double fx = neg_lml(x);
        for (int sweep = 0; sweep < spec.sweeps; ++sweep) {
          for (std::size_t c = 0; c < np; ++c) {
            const double a = std::max(lb[c], x[c] - spec.search_radius);
            const double b = std::min(ub[c], x[c] + spec.search_radius);
            Vector trial = x;
            auto along = [&](double t) {
              trial[c] = t;
              return neg_lml(trial);
            };
            const auto [t, ft] = golden_section(along, a, b, spec.search_tolerance);
            if (ft < fx) {
              x[c] = t;
              fx = ft;
            }
          }
        }
        if (fx < best_val) {
          best_val = fx;
          best = x;
        }
      }
      return best_val;
    };
    double best_val = search(starts);
    if (!std::isfinite(best_val) && guarded) {
      guarded = false;
      best_val = search(starts);
    }
    if (!std::isfinite(best_val)) {
      throw std::runtime_error("GpModel::fit: correlation matrix not positive definite");
    }
  }

  m.factorize(best);
  return m;
}

GpModel GpModel::condition(const std::vector<Vector>& train_x, std::span<const double> train_y,
                           const GpModel& previous) {
  check_training_set(train_x, train_y, "GpModel::condition");
  if (train_x.front().size() != previous.dim()) {
    throw std::invalid_argument("GpModel::condition: dimension differs from previous model");
  }
  GpModel m;
  m.spec_ = previous.spec_;
  m.train_x_ = train_x;
  m.train_y_.assign(train_y.begin(), train_y.end());
  m.lower_ = previous.lower_;
  m.width_ = previous.width_;
  m.cols_ = to_columns(train_x, m.lower_.size(), m.lower_, m.width_);
  const auto k = static_cast<double>(train_x.size());
  double mean = 0.0;
  for (double v : m.train_y_) mean += v;
  mean /= k;
  double var = 0.0;
  for (double v : m.train_y_) var += (v - mean) * (v - mean);
  var /= k;
  m.y_mean_ = mean;
  m.y_scale_ = var > 0.0 ? std::sqrt(var) : 1.0;
  if (!m.extend(previous)) m.factorize(previous.log_params());
  return m;
}

bool GpModel::extend(const GpModel& previous) {
  const std::size_t k0 = previous.size();
  const std::size_t k = size();
  const std::size_t d = dim();
  if (k0 >= k || previous.chol_.rows() != static_cast<Eigen::Index>(k0)) return false;
  for (std::size_t i = 0; i < k0; ++i) {
    if (train_x_[i] != previous.train_x_[i]) return false;
  }
  // Same R for the old points, so only the new rows of L are needed.
  tau_scaled_ = previous.tau_scaled_;
  const double diag = 1.0 + previous.diagonal_addition();
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  L.topLeftCorner(static_cast<Eigen::Index>(k0), static_cast<Eigen::Index>(k0)) = previous.chol_;
  const auto& kern = simd::active();
  Vector point(d);
  Vector r(k);
  for (std::size_t i = k0; i < k; ++i) {
    for (std::size_t j = 0; j < d; ++j) point[j] = cols_[j * k + i];
    std::span<double> out(r.data(), i);
    kern.weighted_sq_dist(point, cols_.data(), k, tau_scaled_, out);
    kern.exp_neg(out);
    const auto n = static_cast<Eigen::Index>(i);
    const Eigen::VectorXd l = L.topLeftCorner(n, n).triangularView<Eigen::Lower>().solve(
        Eigen::Map<const Eigen::VectorXd>(r.data(), n));
    const double d2 = diag - l.squaredNorm();
    if (!(d2 > 0.0) || !std::isfinite(d2)) return false;
    L.row(n).head(n) = l.transpose();
    L(n, n) = std::sqrt(d2);
  }

  Eigen::VectorXd ys(static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < k; ++i) {
    ys[static_cast<Eigen::Index>(i)] = (train_y_[i] - y_mean_) / y_scale_;
  }
  Profile p;
  if (!finish_profile(std::move(L), ys, p)) return false;
  jitter_ = previous.jitter_;
  p.jitter = jitter_;
  adopt(std::move(p), previous.hyper_.sigma_noise);
  return true;
}

void GpModel::factorize(std::span<const double> log_params) {
  const std::size_t k = train_x_.size();
  const std::size_t d = lower_.size();
  tau_scaled_.resize(d);
  for (std::size_t j = 0; j < d; ++j) tau_scaled_[j] = std::exp(log_params[j]);
  const double nugget = spec_.has_nugget() ? std::exp(log_params[d]) : 0.0;

  Eigen::VectorXd ys(static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < k; ++i) {
    ys[static_cast<Eigen::Index>(i)] = (train_y_[i] - y_mean_) / y_scale_;
  }
  const Eigen::MatrixXd K = kernel_matrix(cols_, k, d, tau_scaled_);
  auto p = profile(K, ys, nugget);
  if (!p) throw std::runtime_error("GpModel: correlation matrix not positive definite");
  adopt(std::move(*p), nugget);
}

void GpModel::adopt(Profile&& p, double nugget) {
  const std::size_t k = train_x_.size();
  const std::size_t d = lower_.size();
  chol_ = std::move(p.chol);
  chol_rows_.resize(k * (k + 1) / 2);
  for (std::size_t i = 0, pos = 0; i < k; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      chol_rows_[pos++] = chol_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
  }
  alpha_ = std::move(p.alpha);
  beta_ = std::move(p.beta);
  one_r_one_ = p.one_r_one;
  mu_s_ = p.mu;
  sigma2_s_ = p.sigma2;
  jitter_ = p.jitter;
  refine_alpha(nugget);
  log_likelihood_ = p.lml - static_cast<double>(k) * std::log(y_scale_);

  hyper_.tau.resize(d);
  for (std::size_t j = 0; j < d; ++j) hyper_.tau[j] = tau_scaled_[j] / (width_[j] * width_[j]);
  hyper_.sigma_noise = nugget;
  hyper_.mu_hat = y_mean_ + y_scale_ * mu_s_;
  hyper_.sigma2_hat = y_scale_ * y_scale_ * sigma2_s_;
}

// The factor includes jitter, which leaves a residual of jitter * alpha at the
// training points. Two refinement steps against K + nugget I remove most of it,
// so noise-free models interpolate to roundoff rather than to the jitter level.
void GpModel::refine_alpha(double nugget) {
  const std::size_t k = train_x_.size();
  const auto kk = static_cast<Eigen::Index>(k);
  Eigen::MatrixXd K = kernel_matrix(cols_, k, lower_.size(), tau_scaled_);
  K.diagonal().array() += nugget;
  Eigen::VectorXd target(kk);
  for (std::size_t i = 0; i < k; ++i) {
    target[static_cast<Eigen::Index>(i)] = (train_y_[i] - y_mean_) / y_scale_ - mu_s_;
  }
  for (int step = 0; step < 2; ++step) {
    Eigen::VectorXd r = target - K.selfadjointView<Eigen::Lower>() * alpha_;
    chol_.triangularView<Eigen::Lower>().solveInPlace(r);
    chol_.triangularView<Eigen::Lower>().transpose().solveInPlace(r);
    alpha_ += r;
  }
}

Vector GpModel::log_params() const {
  Vector p(tau_scaled_.size());
  for (std::size_t j = 0; j < p.size(); ++j) p[j] = std::log(tau_scaled_[j]);
  if (spec_.has_nugget()) p.push_back(std::log(hyper_.sigma_noise));
  return p;
}

double GpModel::noise_std() const { return std::sqrt(hyper_.sigma2_hat * hyper_.sigma_noise); }

Prediction GpModel::predict(std::span<const double> theta) const {
  std::vector<Vector> one{Vector(theta.begin(), theta.end())};
  double mean = 0.0;
  double mse = 0.0;
  predict_batch(one, std::span(&mean, 1), std::span(&mse, 1));
  return {mean, mse};
}

void GpModel::predict_batch(const std::vector<Vector>& thetas, std::span<double> mean,
                            std::span<double> mse) const {
  const std::size_t k = train_x_.size();
  const std::size_t d = lower_.size();
  if (mean.size() != thetas.size() || mse.size() != thetas.size()) {
    throw std::invalid_argument("GpModel::predict_batch: output size mismatch");
  }
  const auto& kern = simd::active();
  // Below this relative level the noise-free model's variance is roundoff.
  const double zero_tol = std::max(1e-8, 10.0 * jitter_);
  Vector u(d);
  Vector r_r(kPredictChunk);

  for (std::size_t start = 0; start < thetas.size(); start += kPredictChunk) {
    const std::size_t n = std::min(kPredictChunk, thetas.size() - start);
    Eigen::MatrixXd rc(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n));
    for (std::size_t c = 0; c < n; ++c) {
      const Vector& theta = thetas[start + c];
      if (theta.size() != d) {
        throw std::invalid_argument(fmt::format(
            "GpModel::predict: point has dimension {}, model {}", theta.size(), d));
      }
      for (std::size_t j = 0; j < d; ++j) u[j] = (theta[j] - lower_[j]) / width_[j];
      std::span<double> col(rc.col(static_cast<Eigen::Index>(c)).data(), k);
      kern.weighted_sq_dist(u, cols_.data(), k, tau_scaled_, col);
      kern.exp_neg(col);
    }
    const Eigen::VectorXd mean_s = (rc.transpose() * alpha_).array() + mu_s_;
    const Eigen::VectorXd one_r = rc.transpose() * beta_;
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows = rc;
    kern.lower_solve_sqnorm(chol_rows_.data(), k, rows.data(), n, std::span(r_r.data(), n));
    for (std::size_t c = 0; c < n; ++c) {
      const auto ci = static_cast<Eigen::Index>(c);
      const double lift = 1.0 - one_r[ci];
      double rel = 1.0 - r_r[c] + lift * lift / one_r_one_;
      if (!(rel > 0.0)) rel = 0.0;
      if (!spec_.has_nugget() && rel < zero_tol) rel = 0.0;
      mean[start + c] = y_mean_ + y_scale_ * mean_s[ci];
      mse[start + c] = y_scale_ * y_scale_ * sigma2_s_ * rel;
    }
  }
}

void GpModel::predict_bound_batch(const std::vector<Vector>& thetas, std::span<double> mean,
                                  std::span<double> mse_upper) const {
  const std::size_t k = train_x_.size();
  const std::size_t d = lower_.size();
  if (mean.size() != thetas.size() || mse_upper.size() != thetas.size()) {
    throw std::invalid_argument("GpModel::predict_bound_batch: output size mismatch");
  }
  const auto& kern = simd::active();
  const double r_diag = 1.0 + diagonal_addition();
  const std::span<const double> alpha(alpha_.data(), k);
  const std::span<const double> beta(beta_.data(), k);
  const std::size_t m = std::min(k, kBoundNeighbors);
  const auto mi = static_cast<Eigen::Index>(m);
  Vector u(d);
  Vector r(k);
  std::vector<std::size_t> order(k);
  using Small = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kBoundNeighbors,
                              kBoundNeighbors>;
  using SmallVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kBoundNeighbors, 1>;
  Small sub(mi, mi);
  SmallVec rs(mi);
  Eigen::LLT<Small, Eigen::Lower> llt(mi);
  for (std::size_t c = 0; c < thetas.size(); ++c) {
    const Vector& theta = thetas[c];
    if (theta.size() != d) throw std::invalid_argument("GpModel::predict_bound_batch: dimension");
    for (std::size_t j = 0; j < d; ++j) u[j] = (theta[j] - lower_[j]) / width_[j];
    kern.weighted_sq_dist(u, cols_.data(), k, tau_scaled_, r);
    kern.exp_neg(r);
    mean[c] = y_mean_ + y_scale_ * (mu_s_ + kern.dot(r, alpha));
    if (sigma2_s_ == 0.0) {
      mse_upper[c] = 0.0;
      continue;
    }

    // A principal submatrix gives r_S' R_SS^-1 r_S <= r' R^-1 r.
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m - 1),
                     order.end(), [&](std::size_t a, std::size_t b) { return r[a] > r[b]; });
    for (std::size_t p = 0; p < m; ++p) {
      const std::size_t i = order[p];
      rs[static_cast<Eigen::Index>(p)] = r[i];
      sub(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p)) = r_diag;
      for (std::size_t q = 0; q < p; ++q) {
        const std::size_t l = order[q];
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          const double t = cols_[j * k + i] - cols_[j * k + l];
          s += tau_scaled_[j] * t * t;
        }
        sub(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(q)) = std::exp(-s);
      }
    }
    double explained = 0.0;
    llt.compute(sub);
    if (llt.info() == Eigen::Success) {
      explained = llt.matrixL().solve(rs).squaredNorm();
    } else {
      explained = rs.cwiseAbs2().maxCoeff() / r_diag;
    }
    const double lift = 1.0 - kern.dot(r, beta);
    // Small slack keeps the bound above the rounded exact value.
    const double rel = std::max(0.0, 1.0 - explained + lift * lift / one_r_one_) + 1e-10;
    mse_upper[c] = y_scale_ * y_scale_ * sigma2_s_ * rel;
  }
}

Eigen::MatrixXd GpModel::correlation_matrix() const {
  Eigen::MatrixXd R = kernel_matrix(cols_, train_x_.size(), lower_.size(), tau_scaled_);
  R.diagonal().array() += hyper_.sigma_noise;
  return R;
}

nlohmann::json GpModel::to_json() const {
  nlohmann::json j;
  j["kernel"] = spec_.has_nugget() ? "se+wn" : "se";
  j["tau"] = hyper_.tau;
  j["sigma_noise"] = hyper_.sigma_noise;
  j["mu_hat"] = hyper_.mu_hat;
  j["sigma2_hat"] = hyper_.sigma2_hat;
  j["jitter"] = jitter_;
  j["log_likelihood"] = log_likelihood_;
  j["train_x"] = train_x_;
  j["train_y"] = train_y_;
  return j;
}

}  // namespace nso
