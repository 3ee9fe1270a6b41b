#pragma once
// Expected improvement and its best-effort maximization over a box.

#include <cstdint>
#include <span>

#include "nso/design.hpp"
#include "nso/gp.hpp"

namespace nso {

/// eps * (g Phi(g) + phi(g)) with eps = sqrt(mse) and g = (e_best - mean) / eps.
/// Exactly zero when mse == 0; never negative.
double expected_improvement(double mean, double mse, double e_best);

/// Throws std::invalid_argument on dimension mismatch.
double expected_improvement(const GpModel& model, std::span<const double> theta, double e_best);

struct AcquisitionOptions {
  int candidates_per_dim = 1000;  // Latin hypercube candidates per dimension
  int incumbent_perturbations = 50;
  double perturbation_scale = 0.05;  // fraction of box width
  int polish_starts = 5;
  int polish_iterations = 20;
  double polish_initial_step = 0.05;  // fraction of box width
};

struct AcquisitionResult {
  Vector theta_new;
  double ei_value = 0.0;
  int n_candidates = 0;
  /// True when every candidate had zero EI and the farthest candidate was taken.
  bool saturated = false;
};

/// Evaluates EI on Latin hypercube candidates plus Gaussian perturbations of
/// the incumbent, then polishes the best few with a clipped coordinate ascent.
/// Candidates whose EI upper bound cannot reach the current top set are
/// skipped, which leaves the selected set unchanged. Ties go to the lowest
/// candidate index. Deterministic for a fixed seed.
AcquisitionResult maximize_ei(const GpModel& model, const SearchDomain& domain, double e_best,
                              std::uint64_t rng_seed, const AcquisitionOptions& options = {});

/// The candidate with the largest minimum distance (unit-cube metric) to the
/// model's training inputs; used as the exploration fallback.
Vector farthest_candidate(const std::vector<Vector>& candidates,
                          const std::vector<Vector>& existing, const SearchDomain& domain);

}  // namespace nso
