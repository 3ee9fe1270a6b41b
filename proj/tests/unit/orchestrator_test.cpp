#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "nso/objectives/registry.hpp"
#include "nso/objectives/synthetic.hpp"
#include "nso/orchestrator.hpp"

namespace nso {
namespace {

Objective wrap(std::function<double(std::span<const double>)> f) {
  return [f = std::move(f)](std::span<const double> x, std::uint64_t) { return f(x); };
}

// Invariants shared by every mode.
void check_record(const RunRecord& r, const SearchDomain& dom, const BudgetPlan& b) {
  ASSERT_FALSE(r.samples.empty());
  EXPECT_LE(r.samples.size(), static_cast<std::size_t>(b.total_cap));
  double best = r.samples.front().value;
  for (std::size_t i = 0; i < r.samples.size(); ++i) {
    const auto& s = r.samples[i];
    EXPECT_EQ(s.eval_index, static_cast<std::int64_t>(i + 1));
    EXPECT_TRUE(dom.contains(s.theta)) << "sample " << i;
    best = std::min(best, s.value);
  }
  EXPECT_EQ(r.best_value, best);
  EXPECT_EQ(r.best_theta, r.samples[r.best_position()].theta);
  const Vector bsf = r.best_so_far();
  for (std::size_t i = 1; i < bsf.size(); ++i) EXPECT_LE(bsf[i], bsf[i - 1]);
  for (std::size_t i = 0; i < std::min<std::size_t>(b.n0, r.samples.size()); ++i) {
    EXPECT_EQ(r.samples[i].phase, Phase::InitDesign);
  }
}

void check_local_boxes(const RunRecord& r) {
  bool seen_local = false;
  for (const auto& s : r.samples) {
    if (s.phase == Phase::LocalSearch) {
      seen_local = true;
      ASSERT_TRUE(s.seed_index.has_value());
      const auto& info = r.local_searches.at(static_cast<std::size_t>(*s.seed_index));
      ASSERT_EQ(info.seed_index, *s.seed_index);
      EXPECT_TRUE(SearchDomain(info.box_lower, info.box_upper).contains(s.theta));
    } else {
      EXPECT_FALSE(seen_local) << "GP-phase sample after a local-search sample";
    }
  }
}

TEST(BudgetPlanTest, PaperProtocol) {
  auto b = BudgetPlan::paper_protocol(2);
  EXPECT_EQ(b.n0, 6);
  EXPECT_EQ(b.b_gp, 30);
  EXPECT_EQ(b.b_loc, 970);
  EXPECT_EQ(b.total_cap, 1000);
  EXPECT_NO_THROW(b.validate());
  auto b9 = BudgetPlan::paper_protocol(9);
  EXPECT_EQ(b9.n0, 20);
  EXPECT_EQ(b9.b_gp, 100);
}

TEST(BudgetPlanTest, Validation) {
  BudgetPlan b;
  b.b_gp = 3;  // below n0
  EXPECT_THROW(b.validate(), std::invalid_argument);
  b = BudgetPlan{};
  b.b_loc = 971;
  EXPECT_THROW(b.validate(), std::invalid_argument);
  b = BudgetPlan{};
  b.b_start = 0;
  EXPECT_THROW(b.validate(), std::invalid_argument);
  b = BudgetPlan{};
  b.local_half_width = 0.0;
  EXPECT_THROW(b.validate(), std::invalid_argument);
}

TEST(ModeTest, NamesRoundTrip) {
  for (Mode m : {Mode::GpImfil, Mode::ImfilOnly, Mode::GpOnly}) {
    EXPECT_EQ(parse_mode(mode_name(m)), m);
  }
  EXPECT_THROW(parse_mode("SPSA"), std::invalid_argument);
}

TEST(GpImfilTest, PhaseTransitionsOnH2) {
  const Problem p = make_problem("H2-d");
  auto b = BudgetPlan::paper_protocol(2, 1000, p.local_half_width);
  auto r = run_gp_imfil(p.objective(0), p.domain, b, WeightPattern::cycling(b.b_start), 3);
  check_record(r, p.domain, b);
  check_local_boxes(r);
  ASSERT_GT(r.samples.size(), 31u);
  EXPECT_EQ(r.samples[5].phase, Phase::InitDesign);
  EXPECT_EQ(r.samples[6].phase, Phase::GpIteration);
  EXPECT_EQ(r.samples[29].phase, Phase::GpIteration);
  EXPECT_EQ(r.samples[30].phase, Phase::LocalSearch);
  EXPECT_LE(r.seeds_used.size(), static_cast<std::size_t>(b.b_start));
  EXPECT_NEAR(r.best_value, 1.0 - std::sqrt(5.0), 1e-3);
  EXPECT_FALSE(r.aborted);
}

TEST(GpImfilTest, SingleStartFromGpBest) {
  auto fn = synthetic_suite(SyntheticKind::Sphere, 2);
  BudgetPlan b{6, 20, 50, 1, 0.05, 100};
  auto r = run_gp_imfil(wrap(fn.f), fn.domain, b, WeightPattern{}, 5);
  check_record(r, fn.domain, b);
  ASSERT_EQ(r.seeds_used.size(), 1u);
  double gp_best = r.incumbent_at(20);
  std::size_t gp_pos = 0;
  for (std::size_t i = 0; i < 20; ++i) {
    if (r.samples[i].value == gp_best) {
      gp_pos = i;
      break;
    }
  }
  EXPECT_EQ(r.seeds_used[0], r.samples[gp_pos].theta);
}

TEST(GpImfilTest, NoLocalBudgetMatchesGpOnly) {
  auto fn = synthetic_suite(SyntheticKind::ShiftedAckley, 2);
  BudgetPlan b{6, 25, 0, 4, 0.5, 25};
  auto a = run_gp_imfil(wrap(fn.f), fn.domain, b, WeightPattern::cycling(4), 9);
  auto g = run_gp_only(wrap(fn.f), fn.domain, b, 9);
  ASSERT_EQ(a.samples.size(), 25u);
  ASSERT_EQ(g.samples.size(), 25u);
  for (std::size_t i = 0; i < 25; ++i) {
    EXPECT_EQ(a.samples[i].theta, g.samples[i].theta);
    EXPECT_EQ(a.samples[i].value, g.samples[i].value);
  }
  EXPECT_TRUE(a.seeds_used.empty());
}

TEST(GpImfilTest, SharesGpPrefixWithGpOnly) {
  auto fn = synthetic_suite(SyntheticKind::Sphere, 3);
  BudgetPlan b{8, 30, 40, 3, 0.05, 80};
  auto a = run_gp_imfil(wrap(fn.f), fn.domain, b, WeightPattern::cycling(3), 4);
  auto g = run_gp_only(wrap(fn.f), fn.domain, b, 4);
  for (std::size_t i = 0; i < 30; ++i) EXPECT_EQ(a.samples[i].theta, g.samples[i].theta);
  EXPECT_EQ(g.samples.size(), 80u);
}

TEST(GpImfilTest, SphereFiveDimensions) {
  auto fn = synthetic_suite(SyntheticKind::Sphere, 5);
  auto b = BudgetPlan::paper_protocol(5, 600, 0.05);
  auto r = run_gp_imfil(wrap(fn.f), fn.domain, b, WeightPattern::cycling(b.b_start), 1);
  check_record(r, fn.domain, b);
  check_local_boxes(r);
  EXPECT_LE(r.best_value, 1e-3);
}

TEST(GpImfilTest, DeterministicRecord) {
  const Problem p = make_problem("H2-n");
  auto b = BudgetPlan::paper_protocol(2, 200, p.local_half_width);
  auto pat = WeightPattern::cycling(b.b_start);
  auto r1 = run_gp_imfil(p.objective(7), p.domain, b, pat, 11);
  auto r2 = run_gp_imfil(p.objective(7), p.domain, b, pat, 11);
  EXPECT_EQ(r1.to_json().dump(), r2.to_json().dump());
  auto r3 = run_gp_imfil(p.objective(7), p.domain, b, pat, 12);
  EXPECT_NE(r1.to_json().dump(), r3.to_json().dump());
}

TEST(GpImfilTest, ParallelLocalIsDeterministicAndBoxed) {
  const Problem p = make_problem("H2-n");
  auto b = BudgetPlan::paper_protocol(2, 300, p.local_half_width);
  OrchestratorOptions opt;
  opt.parallel_local = true;
  auto pat = WeightPattern::cycling(b.b_start);
  auto r1 = run_gp_imfil(p.objective(1), p.domain, b, pat, 2, opt);
  auto r2 = run_gp_imfil(p.objective(1), p.domain, b, pat, 2, opt);
  check_record(r1, p.domain, b);
  check_local_boxes(r1);
  EXPECT_EQ(r1.to_json().dump(), r2.to_json().dump());
}

TEST(GpImfilTest, PatternTooShortThrows) {
  auto fn = synthetic_suite(SyntheticKind::Sphere, 2);
  BudgetPlan b{6, 20, 50, 4, 0.05, 100};
  EXPECT_THROW(run_gp_imfil(wrap(fn.f), fn.domain, b, WeightPattern{{0.3}}, 1),
               std::invalid_argument);
}

TEST(GpImfilTest, ObjectiveFailureAbortsWithPartialRecord) {
  auto fn = synthetic_suite(SyntheticKind::Sphere, 2);
  int calls = 0;
  Objective f = [&](std::span<const double> x, std::uint64_t) {
    if (++calls == 15) throw std::runtime_error("device offline");
    return fn(x);
  };
  BudgetPlan b{6, 20, 50, 2, 0.05, 100};
  auto r = run_gp_imfil(f, fn.domain, b, WeightPattern::cycling(2), 1);
  EXPECT_TRUE(r.aborted);
  EXPECT_NE(r.error.find("device offline"), std::string::npos);
  EXPECT_EQ(r.samples.size(), 14u);
  EXPECT_EQ(r.best_value, r.incumbent_at(14));
}

TEST(GpImfilTest, BoundarySeedIsLogged) {
  // The minimum sits on a corner, so seeds end up at the boundary.
  auto dom = SearchDomain::cube(2, 0.0, 1.0);
  auto f = wrap([](std::span<const double> x) { return x[0] + x[1]; });
  BudgetPlan b{6, 15, 30, 2, 0.1, 60};
  auto r = run_gp_imfil(f, dom, b, WeightPattern::cycling(2), 1);
  bool logged = false;
  for (const auto& e : r.events) logged |= e.kind == "boundary_seed";
  EXPECT_TRUE(logged);
}

TEST(ImfilOnlyTest, RestartsFromDesignInValueOrder) {
  auto fn = synthetic_suite(SyntheticKind::Sphere, 2);
  BudgetPlan b{6, 6, 0, 1, 0.05, 400};
  auto r = run_imfil_only(wrap(fn.f), fn.domain, b, 2);
  check_record(r, fn.domain, b);
  ASSERT_GE(r.local_searches.size(), 2u);  // restarts continue after convergence
  Vector design_values;
  for (int i = 0; i < 6; ++i) design_values.push_back(r.samples[i].value);
  for (std::size_t s = 0; s < r.local_searches.size(); ++s) {
    // Each search starts from a design point; starts are ordered by design value.
    const auto& ls = r.local_searches[s];
    EXPECT_EQ(ls.box_lower, fn.domain.lower());
    EXPECT_EQ(ls.box_upper, fn.domain.upper());
    if (s > 0) {
      double prev = 0.0, cur = 0.0;
      for (int i = 0; i < 6; ++i) {
        if (r.samples[i].theta == r.local_searches[s - 1].start) prev = r.samples[i].value;
        if (r.samples[i].theta == ls.start) cur = r.samples[i].value;
      }
      EXPECT_LE(prev, cur);
    }
  }
  EXPECT_LE(r.best_value, 1e-4);
}

TEST(ImfilOnlyTest, CapBelowDesignIsJustTheDesign) {
  auto fn = synthetic_suite(SyntheticKind::Sphere, 2);
  BudgetPlan b{6, 6, 0, 1, 0.05, 6};
  auto r = run_imfil_only(wrap(fn.f), fn.domain, b, 2);
  EXPECT_EQ(r.samples.size(), 6u);
  EXPECT_TRUE(r.local_searches.empty());
}

TEST(ImfilOnlyTest, H2ReachesGroundState) {
  const Problem p = make_problem("H2-d");
  auto b = BudgetPlan::paper_protocol(2, 1000, p.local_half_width);
  auto r = run_imfil_only(p.objective(0), p.domain, b, 1);
  check_record(r, p.domain, b);
  EXPECT_NEAR(r.best_value, *p.reference_min, 1e-3);
}

TEST(GpOnlyTest, SineMinimizer) {
  auto dom = SearchDomain::cube(1, 0.0, 3.0);
  auto f = wrap([](std::span<const double> x) { return std::sin(3.0 * x[0]); });
  BudgetPlan b{4, 60, 0, 1, 0.05, 60};
  auto r = run_gp_only(f, dom, b, 3);
  check_record(r, dom, b);
  EXPECT_EQ(r.samples.size(), 60u);
  // Dense-grid oracle for the minimizer of sin(3x) on [0, 3].
  double arg = 0.0, best = 2.0;
  for (int i = 0; i <= 30000; ++i) {
    const double x = i * 1e-4;
    if (std::sin(3.0 * x) < best) {
      best = std::sin(3.0 * x);
      arg = x;
    }
  }
  EXPECT_NEAR(r.best_theta[0], arg, 0.05);
}

TEST(GpOnlyTest, CapEqualToDesign) {
  auto fn = synthetic_suite(SyntheticKind::Sphere, 3);
  BudgetPlan b{8, 8, 0, 1, 0.05, 8};
  auto r = run_gp_only(wrap(fn.f), fn.domain, b, 1);
  ASSERT_EQ(r.samples.size(), 8u);
  for (const auto& s : r.samples) EXPECT_EQ(s.phase, Phase::InitDesign);
  EXPECT_EQ(r.best_value, r.incumbent_at(8));
}

TEST(RunRecordTest, JsonHasSamplesAndConfig) {
  auto fn = synthetic_suite(SyntheticKind::Sphere, 2);
  BudgetPlan b{6, 10, 10, 2, 0.05, 20};
  auto r = run_mode(Mode::GpImfil, wrap(fn.f), fn.domain, b, WeightPattern::cycling(2), 1);
  const auto j = r.to_json();
  EXPECT_EQ(j["mode"], "GpImfil");
  EXPECT_EQ(j["samples"].size(), r.samples.size());
  EXPECT_TRUE(j["config"].contains("budgets"));
  EXPECT_FALSE(j.contains("timing"));
}

}  // namespace
}  // namespace nso
