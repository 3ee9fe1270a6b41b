#include "nso/imfil.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>

#include <fmt/core.h>

namespace nso {

void ImfilConfig::validate() const {
  if (max_evals < 1) throw std::invalid_argument("imfil: max_evals must be positive");
  if (scales.empty()) throw std::invalid_argument("imfil: scales must not be empty");
  for (std::size_t i = 0; i < scales.size(); ++i) {
    if (!(scales[i] > 0.0 && scales[i] <= 1.0)) {
      throw std::invalid_argument(fmt::format("imfil: scale {} outside (0, 1]", scales[i]));
    }
    if (i > 0 && !(scales[i] < scales[i - 1])) {
      throw std::invalid_argument("imfil: scales must be strictly decreasing");
    }
  }
  if (!(armijo_c > 0.0 && armijo_c < 1.0)) {
    throw std::invalid_argument("imfil: armijo_c must lie in (0, 1)");
  }
  if (max_line_steps < 1) throw std::invalid_argument("imfil: max_line_steps must be positive");
}

std::string_view termination_name(Termination t) {
  return t == Termination::ScalesExhausted ? "ScalesExhausted" : "BudgetExhausted";
}

namespace {

// Works in unit-cube coordinates of the box; converts only when calling out.
class Search {
 public:
  Search(const LocalObjective& f, const SearchDomain& box, int budget, LocalResult& out)
      : f_(f), box_(box), budget_(budget), out_(out) {}

  // nullopt once the budget is spent.
  std::optional<double> eval(const Vector& u) {
    if (out_.n_evals >= budget_) return std::nullopt;
    Vector theta = box_.from_unit(u);
    const double v = f_(theta);
    ++out_.n_evals;
    out_.samples.push_back({theta, v, out_.n_evals, Phase::LocalSearch, std::nullopt});
    if (out_.samples.size() == 1 || v < out_.best_value) {
      out_.best_value = v;
      out_.best_theta = std::move(theta);
    }
    return v;
  }

 private:
  const LocalObjective& f_;
  const SearchDomain& box_;
  int budget_;
  LocalResult& out_;
};

struct StencilPoint {
  Vector u;
  double value;
};

}  // namespace

LocalResult imfil_minimize(const LocalObjective& objective, const SearchDomain& box,
                           std::span<const double> start, const ImfilConfig& config) {
  config.validate();
  if (!box.contains(start)) throw std::invalid_argument("imfil: start outside the search box");
  const std::size_t d = box.dim();

  LocalResult res;
  res.moves_per_scale.assign(config.scales.size(), 0);
  Search search(objective, box, config.max_evals, res);

  Vector x = box.to_unit(start);
  for (double& v : x) v = std::clamp(v, 0.0, 1.0);
  auto fx_opt = search.eval(x);
  double fx = *fx_opt;  // max_evals >= 1

  const auto budget_out = [&res] {
    res.termination = Termination::BudgetExhausted;
    return res;
  };

  for (std::size_t s = 0; s < config.scales.size(); ++s) {
    const double h = config.scales[s];
    while (true) {
      // Central stencil, clipped; points that collapse onto the center are skipped.
      Vector grad(d, 0.0);
      std::optional<StencilPoint> best_stencil;
      for (std::size_t j = 0; j < d; ++j) {
        std::optional<double> f_plus, f_minus;
        double u_plus = std::min(1.0, x[j] + h);
        double u_minus = std::max(0.0, x[j] - h);
        for (int side = 0; side < 2; ++side) {
          const double uj = side == 0 ? u_plus : u_minus;
          if (uj == x[j]) continue;
          Vector p = x;
          p[j] = uj;
          const auto v = search.eval(p);
          if (!v) return budget_out();
          (side == 0 ? f_plus : f_minus) = *v;
          if (!best_stencil || *v < best_stencil->value) best_stencil = StencilPoint{p, *v};
        }
        if (f_plus && f_minus) {
          grad[j] = (*f_plus - *f_minus) / (u_plus - u_minus);
        } else if (f_plus) {
          grad[j] = (*f_plus - fx) / (u_plus - x[j]);
        } else if (f_minus) {
          grad[j] = (fx - *f_minus) / (x[j] - u_minus);
        }
      }

      if (!best_stencil || fx <= best_stencil->value) break;  // stencil failure

      // Projected backtracking along -grad with Armijo sufficient decrease.
      std::optional<StencilPoint> line;
      double lambda = 1.0;
      for (int step = 0; step < config.max_line_steps; ++step, lambda *= 0.5) {
        Vector trial(d);
        double decrease = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          trial[j] = std::clamp(x[j] - lambda * grad[j], 0.0, 1.0);
          decrease += grad[j] * (x[j] - trial[j]);
        }
        if (trial == x) break;
        const auto v = search.eval(trial);
        if (!v) return budget_out();
        if (*v < fx - config.armijo_c * decrease) {
          line = StencilPoint{std::move(trial), *v};
          break;
        }
      }

      const StencilPoint& next =
          (line && line->value <= best_stencil->value) ? *line : *best_stencil;
      x = next.u;
      fx = next.value;
      ++res.moves_per_scale[s];
    }
  }
  res.termination = Termination::ScalesExhausted;
  return res;
}

}  // namespace nso
