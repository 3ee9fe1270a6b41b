// Acceptance run: one PASS/FAIL line per criterion, each checked against its
// wall-clock limit. `--only N` runs a single criterion (ctest runs them apart).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/core.h>

#include "nso/acquisition.hpp"
#include "nso/bench/config.hpp"
#include "nso/bench/experiment.hpp"
#include "nso/gp.hpp"
#include "nso/imfil.hpp"
#include "nso/objectives/hubbard.hpp"
#include "nso/objectives/registry.hpp"
#include "support/gp_oracle.hpp"

namespace {

using namespace nso;
namespace fs = std::filesystem;

// Committed seed set for the statistical criteria; trial i uses base + i.
constexpr std::uint64_t kSeedBase = 1;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double limit_seconds;
  std::function<Outcome()> run;
};

double sin3(double x) { return std::sin(3.0 * x); }

// ---- 1: GP against the dense-inverse oracle ---------------------------------

Outcome gp_oracle() {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> gauss(0.0, 1.0);
  double worst_mean = 0.0, worst_mse = 0.0;
  for (int set = 0; set < 25; ++set) {
    const std::size_t d = 1 + set % 2;
    const std::size_t k = 4 + rng() % 17;  // 4..20
    auto dom = SearchDomain::cube(d, -2.0, 2.0);
    auto x = latin_hypercube(dom, k, rng());
    Vector y;
    for (const auto& p : x) {
      const double clean = d == 1 ? sin3(p[0]) : std::sin(2.0 * p[0]) + (p[1] - 0.3) * (p[1] - 0.3);
      y.push_back(clean + (set % 3 == 0 ? 0.02 * gauss(rng) : 0.0));
    }
    KernelSpec spec;
    if (set % 2 == 0) spec.kind = KernelKind::SquaredExponential;
    auto m = GpModel::fit(x, y, spec, static_cast<std::uint64_t>(set));
    const auto g = oracle::dense_gp(m.train_x(), m.train_y(), m.hyper().tau,
                                    m.diagonal_addition(), m.hyper().sigma_noise);
    const double s2 = static_cast<double>(g.sigma2);
    auto probes = latin_hypercube(dom, 40, static_cast<std::uint64_t>(set) + 99);
    probes.insert(probes.end(), x.begin(), x.end());
    std::vector<double> mean(probes.size()), mse(probes.size());
    m.predict_batch(probes, mean, mse);
    for (std::size_t i = 0; i < probes.size(); ++i) {
      double om = 0.0, os = 0.0;
      oracle::dense_predict(g, probes[i], om, os);
      const double scale = std::abs(om) + std::sqrt(s2);
      if (scale > 0.0) worst_mean = std::max(worst_mean, std::abs(mean[i] - om) / scale);
      if (s2 > 0.0) worst_mse = std::max(worst_mse, std::abs(mse[i] - os) / s2);
    }
  }
  const bool ok = worst_mean <= 1e-8 && worst_mse <= 1e-8;
  return {ok, fmt::format("25 sets, max rel err mean {:.2e} mse {:.2e} (tol 1e-8)", worst_mean,
                          worst_mse)};
}

// ---- 2: interpolation and noise recovery ------------------------------------

Outcome interpolation_and_nugget() {
  auto dom = SearchDomain::cube(1, 0.0, 3.0);
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto x = latin_hypercube(dom, 20, seed);
    Vector y;
    for (const auto& p : x) y.push_back(sin3(p[0]));
    KernelSpec spec;
    spec.kind = KernelKind::SquaredExponential;
    auto m = GpModel::fit(x, y, spec, seed);
    for (std::size_t i = 0; i < x.size(); ++i) {
      worst = std::max(worst, std::abs(m.predict(x[i]).mean - y[i]) / (1.0 + std::abs(y[i])));
    }
  }
  int hits = 0;
  std::string stds;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto x = latin_hypercube(dom, 40, seed);
    std::mt19937_64 rng(seed + 1000);
    std::normal_distribution<double> n(0.0, 0.05);
    Vector y;
    for (const auto& p : x) y.push_back(sin3(p[0]) + n(rng));
    auto m = GpModel::fit(x, y, KernelSpec{}, seed);
    const double s = m.noise_std();
    if (s >= 0.025 && s <= 0.1) ++hits;
    stds += fmt::format("{}{:.3f}", stds.empty() ? "" : " ", s);
  }
  return {worst <= 1e-6 && hits >= 4,
          fmt::format("interp max rel residual {:.1e}; noise std [{}] in band {}/5", worst, stds,
                      hits)};
}

// ---- 3: expected improvement ------------------------------------------------

Outcome ei_properties() {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int negative = 0;
  for (int i = 0; i < 10000; ++i) {
    const double mean = 10.0 * u(rng);
    const double mse = std::pow(10.0, 4.0 * u(rng) - 2.0) * (i % 10 == 0 ? 0.0 : 1.0);
    if (!(expected_improvement(mean, mse, 10.0 * u(rng)) >= 0.0)) ++negative;
  }
  const double g0 = expected_improvement(0.3, 1.0, 0.3);
  const bool g0_ok = std::abs(g0 - 1.0 / std::sqrt(2.0 * std::numbers::pi)) <= 1e-6;

  auto dom1 = SearchDomain::cube(1, -1.0, 1.0);
  std::vector<Vector> x1{{-1.0}, {-0.6}, {-0.1}, {0.3}, {0.8}};
  Vector y1;
  for (const auto& p : x1) y1.push_back(sin3(p[0]));
  KernelSpec nf;
  nf.kind = KernelKind::SquaredExponential;
  auto m1 = GpModel::fit(x1, y1, nf, 1, FitOptions{dom1, {}});
  const double eb1 = *std::min_element(y1.begin(), y1.end());
  double at_train = 0.0;
  for (const auto& p : x1) at_train = std::max(at_train, expected_improvement(m1, p, eb1));

  // Dense grids at 1e-3 spacing in unit coordinates.
  double worst_ratio = std::numeric_limits<double>::infinity();
  {
    std::vector<Vector> grid;
    for (int i = 0; i <= 1000; ++i) grid.push_back(dom1.from_unit(Vector{i * 1e-3}));
    std::vector<double> mean(grid.size()), mse(grid.size());
    m1.predict_batch(grid, mean, mse);
    double gmax = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      gmax = std::max(gmax, expected_improvement(mean[i], mse[i], eb1));
    }
    const auto r = maximize_ei(m1, dom1, eb1, 3);
    worst_ratio = std::min(worst_ratio, r.ei_value / gmax);
  }
  auto dom2 = SearchDomain({-1.0, 0.0}, {1.0, 2.0});
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto x = latin_hypercube(dom2, 8, seed);
    Vector y;
    for (const auto& p : x) y.push_back(std::sin(3 * p[0]) + std::cos(2 * p[1]));
    auto m = GpModel::fit(x, y, KernelSpec{}, seed, FitOptions{dom2, {}});
    const double eb = *std::min_element(y.begin(), y.end());
    double gmax = 0.0;
    std::vector<Vector> row(1001);
    std::vector<double> mean(1001), mse(1001);
    for (int i = 0; i <= 1000; ++i) {
      for (int j = 0; j <= 1000; ++j) row[j] = dom2.from_unit(Vector{i * 1e-3, j * 1e-3});
      m.predict_batch(row, mean, mse);
      for (int j = 0; j <= 1000; ++j) gmax = std::max(gmax, expected_improvement(mean[j], mse[j], eb));
    }
    const auto r = maximize_ei(m, dom2, eb, seed);
    worst_ratio = std::min(worst_ratio, r.ei_value / gmax);
  }
  const bool ok = negative == 0 && g0_ok && at_train == 0.0 && worst_ratio >= 0.95;
  return {ok, fmt::format("negatives {}, EI(g=0) {:.7f}, max EI at training points {:.1e}, "
                          "worst maximize/grid ratio {:.4f}",
                          negative, g0, at_train, worst_ratio)};
}

// ---- 4: ImFil sanity --------------------------------------------------------

Outcome imfil_sanity() {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  int over_budget = 0;
  for (std::size_t d : {2u, 5u, 10u}) {
    for (int rep = 0; rep < 5; ++rep) {
      auto box = SearchDomain::cube(d, 0.0, 1.0);
      Vector c(d), start(d), w(d);
      for (std::size_t j = 0; j < d; ++j) {
        c[j] = 0.2 + 0.6 * u(rng);
        start[j] = 0.1 + 0.8 * u(rng);
        w[j] = 0.5 + 1.5 * u(rng);
      }
      ImfilConfig cfg;
      cfg.max_evals = static_cast<int>(60 * d);
      auto r = imfil_minimize(
          [&](std::span<const double> x) {
            double s = 0.0;
            for (std::size_t j = 0; j < d; ++j) s += w[j] * (x[j] - c[j]) * (x[j] - c[j]);
            return s;
          },
          box, start, cfg);
      if (r.n_evals > cfg.max_evals) ++over_budget;
      double dist = 0.0;
      for (std::size_t j = 0; j < d; ++j) dist += (r.best_theta[j] - c[j]) * (r.best_theta[j] - c[j]);
      worst = std::max(worst, std::sqrt(dist));
    }
  }
  int constant_ok = 0;
  for (std::size_t d : {1u, 4u, 9u}) {
    auto r = imfil_minimize([](auto) { return 1.5; }, SearchDomain::cube(d, -1.0, 1.0),
                            Vector(d, 0.25));
    if (r.termination == Termination::ScalesExhausted) ++constant_ok;
  }
  return {worst <= 1e-2 && over_budget == 0 && constant_ok == 3,
          fmt::format("15 quadratics d in {{2,5,10}}: worst distance {:.2e}; constant objectives "
                      "ScalesExhausted {}/3",
                      worst, constant_ok)};
}

// ---- 5: Hubbard exact diagonalization and HVA grid --------------------------

Outcome hubbard_oracle() {
  const double e1 = ground_energy(HubbardSpec{2, 1, 1, 0, 1.0, 2.0, 1});
  // "Exactly" in floating point: within a few ulps of -1.
  const bool e1_ok = std::abs(e1 + 1.0) <= 4.0 * std::numeric_limits<double>::epsilon();
  const HubbardSpec dimer{2, 1, 1, 1, 1.0, 2.0, 1};
  const double exact = 1.0 - std::sqrt(5.0);
  const double e2 = ground_energy(dimer);
  HvaEnergy hva(dimer);
  double best = std::numeric_limits<double>::infinity();
  const int n = 400;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double a = -std::numbers::pi + 2.0 * std::numbers::pi * i / (n - 1);
      const double b = -std::numbers::pi + 2.0 * std::numbers::pi * j / (n - 1);
      best = std::min(best, hva(Vector{a, b}));
    }
  }
  const bool ok = e1_ok && std::abs(e2 - exact) <= 1e-10 && std::abs(best - exact) <= 2e-3;
  return {ok, fmt::format("H1 {:.17g}; H2 {:.12f} vs 1-sqrt5 {:.12f}; HVA grid min {:.6f}", e1,
                          e2, exact, best)};
}

// ---- 6..10: end-to-end runs ------------------------------------------------

bench::ExperimentConfig config_for(const std::string& problem, int trials, int cap) {
  bench::Overrides ov;
  ov.problem = problem;
  ov.trials = trials;
  ov.cap = cap;
  ov.seed = kSeedBase;
  return bench::resolve_config("", ov);
}

Outcome small_problems() {
  bool ok = true;
  std::string detail;
  for (const char* id : {"H1-d", "H2-d"}) {
    auto cfg = config_for(id, 3, 1000);
    const double ref = *make_problem(id).reference_min;
    const auto res = bench::compare(cfg, false);
    if (res.error) return {false, fmt::format("{} aborted: {}", id, *res.error)};
    for (const auto& pm : res.per_mode) {
      double gap = 0.0;
      for (const auto& r : pm.records) gap = std::max(gap, r.best_value - ref);
      ok = ok && gap <= 1e-3;
      detail += fmt::format("{}{} {} gap {:.1e}", detail.empty() ? "" : "; ", id,
                            mode_name(pm.summary.mode), gap);
    }
  }
  return {ok, detail};
}

Outcome noisy_ordering() {
  bool ok = true;
  std::string detail;
  for (const char* id : {"twowells-9-n", "H3-n"}) {
    auto cfg = config_for(id, 5, 1000);
    cfg.modes = {Mode::GpImfil, Mode::ImfilOnly};
    const auto res = bench::compare(cfg, false);
    if (res.error) return {false, fmt::format("{} aborted: {}", id, *res.error)};
    const auto& gi = res.per_mode[0];
    const auto& io = res.per_mode[1];
    int faster = 0;
    for (std::size_t t = 0; t < gi.records.size(); ++t) {
      if (gi.records[t].incumbent_at(300) <= io.records[t].incumbent_at(300)) ++faster;
    }
    const bool mean_ok = gi.summary.mean_best <= io.summary.mean_best;
    ok = ok && mean_ok && faster >= 4;
    detail += fmt::format("{}{}: mean best GpImfil {:.5f} ImfilOnly {:.5f}, ahead at 300 in {}/5",
                          detail.empty() ? "" : "; ", id, gi.summary.mean_best,
                          io.summary.mean_best, faster);
  }
  return {ok, detail};
}

Outcome restart_frequency() {
  std::vector<std::size_t> restarts[2];
  const char* ids[2] = {"H3-d", "H3-n"};
  for (int v = 0; v < 2; ++v) {
    auto cfg = config_for(ids[v], 5, 1000);
    cfg.mode = Mode::ImfilOnly;
    const auto res = bench::run_experiment(cfg, false);
    if (res.error) return {false, fmt::format("{} aborted: {}", ids[v], *res.error)};
    for (const auto& r : res.records) restarts[v].push_back(r.local_searches.size());
  }
  int more = 0;
  std::string det, noisy;
  for (std::size_t i = 0; i < restarts[0].size(); ++i) {
    if (restarts[1][i] > restarts[0][i]) ++more;
    det += fmt::format("{}{}", det.empty() ? "" : ",", restarts[0][i]);
    noisy += fmt::format("{}{}", noisy.empty() ? "" : ",", restarts[1][i]);
  }
  return {more >= 4, fmt::format("H3 ImfilOnly restarts deterministic [{}] noisy [{}]; noisy "
                                 "strictly more in {}/5",
                                 det, noisy, more)};
}

Outcome seeding() {
  auto cfg = config_for("twowells-9", 1, 1000);
  cfg.seeding.repetitions = 10;
  cfg.seeding.b_start = 5;
  cfg.seeding.local_half_width = 0.2;
  const auto rep = bench::seeding_study(cfg, false);
  double min_pair = std::numeric_limits<double>::infinity();
  for (const auto& r : rep.multistart) {
    for (std::size_t i = 0; i < r.seeds.size(); ++i) {
      for (std::size_t j = i + 1; j < r.seeds.size(); ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < r.seeds[i].size(); ++c) {
          s += (r.seeds[i][c] - r.seeds[j][c]) * (r.seeds[i][c] - r.seeds[j][c]);
        }
        min_pair = std::min(min_pair, std::sqrt(s));
      }
    }
  }
  const double ms = rep.multistart_summary.success_rate;
  const double bl = rep.baseline_summary.success_rate;
  return {ms >= bl && min_pair > 0.0,
          fmt::format("success GpImfil {:.0f}% vs center start {:.0f}%; min seed distance {:.3f}",
                      100 * ms, 100 * bl, min_pair)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  struct Case {
    const char* problem;
    Mode mode;
    int cap;
  };
  const Case cases[] = {{"H2-n", Mode::GpImfil, 200},
                        {"twowells-9-n", Mode::ImfilOnly, 300},
                        {"sphere-5", Mode::GpOnly, 60}};
  const fs::path root = fs::temp_directory_path() / "nso_acceptance_determinism";
  int files = 0, identical = 0;
  for (const auto& c : cases) {
    fs::path dirs[2] = {root / "a", root / "b"};
    for (const auto& dir : dirs) {
      fs::remove_all(dir);
      auto cfg = config_for(c.problem, 2, c.cap);
      cfg.mode = c.mode;
      cfg.output_dir = dir;
      bench::run_experiment(cfg, true);
    }
    for (int t = 0; t < 2; ++t) {
      const std::string name =
          fmt::format("{}_{}_trial{}.csv", c.problem, mode_name(c.mode), t);
      const std::string a = slurp(dirs[0] / name);
      ++files;
      if (!a.empty() && a == slurp(dirs[1] / name)) ++identical;
    }
  }
  fs::remove_all(root);
  return {identical == files,
          fmt::format("{}/{} trace CSVs byte-identical across reruns", identical, files)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  int only = 0;
  app.add_option("--only", only, "run a single criterion (1-10)")->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria = {
      {1, "GP matches dense oracle", 10, gp_oracle},
      {2, "interpolation and nugget", 30, interpolation_and_nugget},
      {3, "EI properties", 60, ei_properties},
      {4, "ImFil sanity", 30, imfil_sanity},
      {5, "Hubbard oracle", 60, hubbard_oracle},
      {6, "noise-free small problems", 300, small_problems},
      {7, "noisy ordering", 1200, noisy_ordering},
      {8, "restart frequency", 600, restart_frequency},
      {9, "seeding study", 900, seeding},
      {10, "determinism", 600, determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    if (only != 0 && c.id != only) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, fmt::format("exception: {}", e.what())};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.limit_seconds;
    const bool pass = o.pass && in_time;
    if (!pass) ++failed;
    fmt::print("AC{} {} {}: {} ({:.1f} s, limit {:.0f} s{})\n", c.id, pass ? "PASS" : "FAIL",
               c.name, o.detail, secs, c.limit_seconds, in_time ? "" : ", over time");
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
