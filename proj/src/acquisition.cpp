#include "nso/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>

#include "nso/simd/kernels.hpp"

namespace nso {
namespace {

constexpr std::size_t kExactBlock = 64;

struct Scored {
  double ei;
  std::size_t index;
};

// Higher EI first, then lower index.
bool better(const Scored& a, const Scored& b) {
  return a.ei > b.ei || (a.ei == b.ei && a.index < b.index);
}

Vector batch_ei(const GpModel& model, const std::vector<Vector>& points, double e_best) {
  Vector mean(points.size());
  Vector mse(points.size());
  model.predict_batch(points, mean, mse);
  Vector ei(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) ei[i] = expected_improvement(mean[i], mse[i], e_best);
  return ei;
}

}  // namespace

double expected_improvement(double mean, double mse, double e_best) {
  if (!(mse > 0.0)) return 0.0;
  const double eps = std::sqrt(mse);
  const double g = (e_best - mean) / eps;
  const double cdf = 0.5 * std::erfc(-g / std::numbers::sqrt2);
  const double pdf = std::exp(-0.5 * g * g) / std::sqrt(2.0 * std::numbers::pi);
  const double ei = eps * (g * cdf + pdf);
  return ei > 0.0 ? ei : 0.0;
}

double expected_improvement(const GpModel& model, std::span<const double> theta, double e_best) {
  if (theta.size() != model.dim()) {
    throw std::invalid_argument("expected_improvement: dimension mismatch");
  }
  const Prediction p = model.predict(theta);
  return expected_improvement(p.mean, p.mse, e_best);
}

Vector farthest_candidate(const std::vector<Vector>& candidates,
                          const std::vector<Vector>& existing, const SearchDomain& domain) {
  if (candidates.empty()) throw std::invalid_argument("farthest_candidate: no candidates");
  const std::size_t d = domain.dim();
  const std::size_t n = candidates.size();
  Vector cols(d * n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vector u = domain.to_unit(candidates[i]);
    for (std::size_t j = 0; j < d; ++j) cols[j * n + i] = u[j];
  }
  Vector min_dist(n, std::numeric_limits<double>::infinity());
  const auto& kern = simd::active();
  for (const auto& p : existing) kern.min_dist_update(domain.to_unit(p), cols.data(), n, min_dist);
  std::size_t best = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (min_dist[i] > min_dist[best]) best = i;
  }
  return candidates[best];
}

AcquisitionResult maximize_ei(const GpModel& model, const SearchDomain& domain, double e_best,
                              std::uint64_t rng_seed, const AcquisitionOptions& options) {
  const std::size_t d = domain.dim();
  if (model.dim() != d) throw std::invalid_argument("maximize_ei: model/domain dimension mismatch");

  const std::size_t n_lhs = static_cast<std::size_t>(std::max(1, options.candidates_per_dim)) * d;
  std::vector<Vector> cands = latin_hypercube(domain, n_lhs, mix_seed(rng_seed, 1));
  {
    const auto& ys = model.train_y();
    const auto inc = static_cast<std::size_t>(std::min_element(ys.begin(), ys.end()) - ys.begin());
    const Vector& incumbent = model.train_x()[inc];
    std::mt19937_64 rng(mix_seed(rng_seed, 2));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int p = 0; p < options.incumbent_perturbations; ++p) {
      Vector x = incumbent;
      for (std::size_t j = 0; j < d; ++j) {
        x[j] += normal(rng) * options.perturbation_scale * domain.width(j);
      }
      cands.push_back(clip_to_domain(x, domain));
    }
  }
  const std::size_t n = cands.size();

  // Cheap bounds first, exact EI only where it can still enter the top set.
  Vector mean(n);
  Vector mse_ub(n);
  model.predict_bound_batch(cands, mean, mse_ub);
  std::vector<Scored> bound(n);
  for (std::size_t i = 0; i < n; ++i) bound[i] = {expected_improvement(mean[i], mse_ub[i], e_best), i};
  std::sort(bound.begin(), bound.end(), better);

  const std::size_t keep = static_cast<std::size_t>(std::max(1, options.polish_starts));
  std::vector<Scored> top;  // best exact scores, sorted with `better`
  for (std::size_t pos = 0; pos < n; pos += kExactBlock) {
    if (!(bound[pos].ei > 0.0)) break;
    if (top.size() >= keep && bound[pos].ei < top.back().ei) break;
    const std::size_t end = std::min(n, pos + kExactBlock);
    std::vector<Vector> block;
    block.reserve(end - pos);
    for (std::size_t q = pos; q < end; ++q) block.push_back(cands[bound[q].index]);
    const Vector ei = batch_ei(model, block, e_best);
    for (std::size_t q = pos; q < end; ++q) {
      const Scored s{ei[q - pos], bound[q].index};
      if (top.size() < keep || better(s, top.back())) {
        top.insert(std::upper_bound(top.begin(), top.end(), s, better), s);
        if (top.size() > keep) top.pop_back();
      }
    }
  }

  AcquisitionResult result;
  result.n_candidates = static_cast<int>(n);
  if (top.empty() || !(top.front().ei > 0.0)) {
    std::vector<Vector> lhs(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(n_lhs));
    result.theta_new = farthest_candidate(lhs, model.train_x(), domain);
    result.ei_value = 0.0;
    result.saturated = true;
    return result;
  }

  result.theta_new = cands[top.front().index];
  result.ei_value = top.front().ei;
  // Coordinate ascent from each top candidate; all starts share one batched
  // prediction per iteration.
  struct Climber {
    Vector x;
    double ei;
    Vector step;
  };
  std::vector<Climber> climbers;
  for (const Scored& start : top) {
    Vector step(d);
    for (std::size_t j = 0; j < d; ++j) step[j] = options.polish_initial_step * domain.width(j);
    climbers.push_back({cands[start.index], start.ei, std::move(step)});
  }
  for (int it = 0; it < options.polish_iterations; ++it) {
    std::vector<Vector> nbrs;
    std::vector<std::size_t> owner;
    for (std::size_t c = 0; c < climbers.size(); ++c) {
      const Climber& cl = climbers[c];
      for (std::size_t j = 0; j < d; ++j) {
        for (double sgn : {1.0, -1.0}) {
          Vector y = cl.x;
          y[j] = std::clamp(cl.x[j] + sgn * cl.step[j], domain.lower()[j], domain.upper()[j]);
          if (y[j] != cl.x[j]) {
            nbrs.push_back(std::move(y));
            owner.push_back(c);
          }
        }
      }
    }
    if (nbrs.empty()) break;
    const Vector ei = batch_ei(model, nbrs, e_best);
    result.n_candidates += static_cast<int>(nbrs.size());
    for (std::size_t c = 0, q = 0; c < climbers.size(); ++c) {
      Climber& cl = climbers[c];
      std::optional<std::size_t> best;
      for (; q < nbrs.size() && owner[q] == c; ++q) {
        if (!best || ei[q] > ei[*best]) best = q;
      }
      if (best && ei[*best] > cl.ei) {
        cl.x = nbrs[*best];
        cl.ei = ei[*best];
      } else {
        for (double& s : cl.step) s *= 0.5;
      }
    }
  }
  for (const Climber& cl : climbers) {
    if (cl.ei > result.ei_value) {
      result.ei_value = cl.ei;
      result.theta_new = cl.x;
    }
  }
  return result;
}

}  // namespace nso
