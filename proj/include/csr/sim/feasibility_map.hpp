// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "csr/cost_model.hpp"
#include "csr/sim/scheduler_sim.hpp"

namespace csr::sim {

struct FeasibilityGrid {
  std::vector<double> epsilons{0.1, 0.3, 0.5, 0.7, 0.9};
  /// Token arrival rates in tokens per second.
  std::vector<double> rates{0.0, 100.0, 300.0, 1000.0, 3000.0};
  std::vector<double> n_maxes{100500, 101000, 103000, 110000, 130000};
  std::size_t total_len = 100000;
  std::size_t chunk_tokens = 100;
  std::size_t prefix_tokens = 0;
  std::size_t n_catchup = 0;
  HardwareProfile profile = HardwareProfile{}.with_kappa(2e-9);
  std::uint64_t seed = 1;
};

struct FeasibilityPoint {
  double epsilon_requested = 0.0;
  /// Retained fraction the chunk-granular policy actually produced.
  double epsilon = 0.0;
  double rate = 0.0;
  double n_max = 0.0;
  FeasibilityReport report;
  bool simulated_feasible = true;
  std::optional<double> swap_time;
  std::optional<double> overflow_time;
  /// |margin| within one chunk-arrival period.
  bool boundary = false;
  bool agree = true;
};

struct FeasibilityMap {
  std::vector<FeasibilityPoint> points;
  std::size_t agree = 0;
  std::size_t disagree = 0;
  std::size_t boundary = 0;
  /// Disagreements on points outside the boundary band.
  std::size_t off_boundary_disagree = 0;

  std::string to_csv() const {
    std::ostringstream os;
    os.precision(9);
    os << "epsilon_requested,epsilon,rate,n_max,warmup_time,recon_time,time_to_oom,margin,"
          "analytic_feasible,simulated_feasible,swap_time,overflow_time,boundary,agree\n";
    auto opt = [](const std::optional<double>& v) { return v ? std::to_string(*v) : std::string(); };
    for (const auto& p : points) {
      os << p.epsilon_requested << ',' << p.epsilon << ',' << p.rate << ',' << p.n_max << ','
         << p.report.warmup_time << ',' << p.report.recon_time << ','
         << (p.report.time_to_oom ? std::to_string(*p.report.time_to_oom) : "unbounded") << ','
         << opt(p.report.margin()) << ',' << p.report.feasible << ',' << p.simulated_feasible << ','
         << opt(p.swap_time) << ',' << opt(p.overflow_time) << ',' << p.boundary << ',' << p.agree << '\n';
    }
    return os.str();
  }
};

/// One reconciliation cycle per grid point. The static state is preloaded
/// one chunk short of total_len; the chunk arriving at t = 0 brings it to
/// total_len and triggers the eviction (tau_mem = total_len). Further chunks
/// arrive every chunk_tokens / rate seconds. The point is simulated-feasible
/// when the swap lands before the static state exceeds n_max.
inline FeasibilityPoint simulate_feasibility_point(const FeasibilityGrid& g, double epsilon, double rate,
                                                   double n_max) {
  if (g.total_len <= g.prefix_tokens || (g.total_len - g.prefix_tokens) % g.chunk_tokens != 0)
    throw DomainError("total_len - prefix_tokens must be a positive multiple of chunk_tokens");
  if (!(n_max > static_cast<double>(g.total_len))) throw DomainError("n_max must exceed total_len");
  TokenSource src(g.seed, 50000);
  CsrContext ctx(src.draw(g.prefix_tokens));
  const auto preload = (g.total_len - g.prefix_tokens) / g.chunk_tokens - 1;
  for (std::size_t i = 0; i < preload; ++i) ctx = append_chunk(std::move(ctx), {src.draw(g.chunk_tokens), i + 1, 0.0});

  SchedulerSimConfig sc;
  sc.initial = std::move(ctx);
  sc.scheduler.tau_mem = g.total_len;
  sc.scheduler.n_catchup = g.n_catchup;
  sc.scheduler.policy = KeepNewestFraction{epsilon};
  sc.scheduler.n_max = static_cast<std::size_t>(std::floor(n_max));
  sc.profile = g.profile;
  sc.chunk_min = sc.chunk_max = g.chunk_tokens;
  sc.arrival_period = rate > 0.0 ? static_cast<double>(g.chunk_tokens) / rate : 0.0;
  sc.seed = g.seed + 1;
  const auto sim = run_scheduler_sim(sc);

  FeasibilityPoint p;
  p.epsilon_requested = epsilon;
  p.rate = rate;
  p.n_max = n_max;
  p.epsilon = sim.swaps.empty() ? epsilon : sim.swaps.front().epsilon;
  if (!sim.trigger_times.empty() && sim.swaps.empty() && !sim.overflow_time)
    throw DomainError("feasibility simulation ended without swap or overflow");
  p.report = reconciliation_feasibility(static_cast<double>(g.total_len), p.epsilon, n_max,
                                        g.profile.with_token_rate(rate));
  if (!sim.swaps.empty()) p.swap_time = sim.swaps.front().swap_time;
  p.overflow_time = sim.overflow_time;
  p.simulated_feasible = p.swap_time && (!p.overflow_time || *p.swap_time <= *p.overflow_time);
  if (const auto m = p.report.margin()) p.boundary = std::abs(*m) <= static_cast<double>(g.chunk_tokens) / rate;
  p.agree = p.simulated_feasible == p.report.feasible;
  return p;
}

/// Analytic prediction against one simulated cycle for every grid point.
inline FeasibilityMap feasibility_map(const FeasibilityGrid& g) {
  if (g.epsilons.empty() || g.rates.empty() || g.n_maxes.empty()) throw DomainError("feasibility grid ranges must be non-empty");
  FeasibilityMap map;
  for (double eps : g.epsilons)
    for (double rate : g.rates)
      for (double n_max : g.n_maxes) {
        auto p = simulate_feasibility_point(g, eps, rate, n_max);
        if (p.agree) ++map.agree; else ++map.disagree;
        if (p.boundary) ++map.boundary;
        if (!p.agree && !p.boundary) ++map.off_boundary_disagree;
        map.points.push_back(std::move(p));
      }
  return map;
}

}  // namespace csr::sim
