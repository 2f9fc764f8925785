// SPDX-License-Identifier: Apache-2.0
// Acceptance checks. Usage: csr_acceptance [N ...]   (no argument: all)
// Prints one "[PASS]" or "[FAIL]" line per criterion; exit status 1 if any failed.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "csr/csr.hpp"
#include "router_harness.hpp"
#include "test_support.hpp"

using namespace csr;
using namespace csr::sim;
namespace ts = testing_support;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

/// Least squares y = a + b x; returns {a, b, r2}.
std::array<double, 3> linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double b = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double a = (sy - b * sx) / n;
  const double mean = sy / n;
  double ss_res = 0, ss_tot = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    ss_res += (y[i] - a - b * x[i]) * (y[i] - a - b * x[i]);
    ss_tot += (y[i] - mean) * (y[i] - mean);
  }
  return {a, b, 1.0 - ss_res / ss_tot};
}

// 1. ttft_units against explicit summation.
Outcome formula_fidelity() {
  std::uint64_t checked = 0;
  for (std::uint64_t n = 1; n <= 10000; ++n) {
    // Walk i* downwards so each brute-force sum extends the previous one by one term.
    std::uint64_t brute = 0;
    for (std::uint64_t s = n + 1; s >= 1; --s) {
      if (s <= n) brute += s;
      if (ttft_units(n, s) != brute) return {false, fmt("mismatch at n=%llu i*=%llu", (unsigned long long)n, (unsigned long long)s)};
      ++checked;
    }
  }
  std::mt19937_64 rng(20240601);
  for (int i = 0; i < 10000; ++i) {
    const std::uint64_t n = 10001 + rng() % 90000;
    const std::uint64_t s = 1 + rng() % (n + 1);
    if (ttft_units(n, s) != ts::brute_units(n, s))
      return {false, fmt("mismatch at n=%llu i*=%llu", (unsigned long long)n, (unsigned long long)s)};
    ++checked;
  }
  return {true, fmt("%llu (n, i*) pairs exact", (unsigned long long)checked)};
}

// 2. Speedup law at n = 1e5, delta = 1e3.
Outcome speedup_law() {
  const auto r = speedup_ratio(100000, 1000);
  const bool approx_ok = r.approximation == 100.0;
  const double rel = std::abs(r.exact - 100.0) / 100.0;
  return {approx_ok && rel <= 0.02,
          fmt("approximation=%.6f (exact 100: %s), exact-units ratio=%.4f, deviation from 100=%.2f%% (limit 2%%)",
              r.approximation, approx_ok ? "yes" : "no", r.exact, 100.0 * rel)};
}

SweepResult mock_sweep(double kappa, const std::vector<std::size_t>& n, const std::vector<std::size_t>& m) {
  VirtualClock clock;
  MockBackend mock(HardwareProfile{}.with_kappa(kappa), clock);
  return sweep_latency(mock, n, m);
}

// 3. Unordered vs CSR(M=1024) at N = 120000.
Outcome table_ratio() {
  std::string detail;
  bool pass = true;
  for (double kappa : {2e-9, 1.22e-9, 1e-6}) {
    const auto r = mock_sweep(kappa, {120000}, {1024});
    const double ratio = r.unordered[0] / r.csr[0][0];
    pass = pass && ratio >= 26.0;
    detail += fmt("kappa=%g ratio=%.3f; ", kappa, ratio);
  }
  return {pass, detail + "threshold 26"};
}

// 4. Affine in M at fixed N; unordered superlinear in N.
Outcome scaling_shape() {
  const std::vector<std::size_t> ms{1, 1024, 2048, 4096, 8192};
  const std::vector<std::size_t> ns{30000, 60000, 90000, 120000};
  const auto r = mock_sweep(2e-9, ns, ms);
  std::vector<double> x(ms.begin(), ms.end());
  std::vector<double> r2(ns.size());
  for (std::size_t j = 0; j < ns.size(); ++j) {
    std::vector<double> y;
    for (std::size_t i = 0; i < ms.size(); ++i) y.push_back(r.csr[i][j]);
    r2[j] = linear_fit(x, y)[2];
  }
  std::vector<double> lx, ly;
  for (std::size_t j = 0; j < ns.size(); ++j) {
    lx.push_back(std::log(static_cast<double>(ns[j])));
    ly.push_back(std::log(r.unordered[j]));
  }
  const double exponent = linear_fit(lx, ly)[1];
  const bool pass = r2[3] > 0.999 && exponent >= 1.9;
  return {pass, fmt("R^2 in M at N=120000: %.6f (N=30000/60000/90000: %.5f/%.5f/%.5f), unordered exponent in N: %.4f",
                    r2[3], r2[0], r2[1], r2[2], exponent)};
}

// 5. Spike-freedom on the default scenario.
Outcome spike_freedom() {
  ScenarioConfig cfg;
  cfg.cycles = 10;
  cfg.policy = Policy::CsrAsr;
  const auto asr = run_scenario(cfg);
  const auto asr_stats = trace_stats(asr, cfg.spike_multiple, cfg.spike_window);
  const double drift = asr_stats.median_drift(1, cfg.cycles);

  cfg.policy = Policy::CsrSyncEvict;
  const auto sync = run_scenario(cfg);
  const auto sync_stats = trace_stats(sync, cfg.spike_multiple, cfg.spike_window);
  const double jump = cfg.profile.kappa() * static_cast<double>(ttft_units(55000, 1));

  // Consecutive flagged samples form one episode: the eviction's recompute
  // and the queries queued behind it.
  struct Episode {
    std::size_t cycle;
    double excess;
  };
  std::vector<Episode> episodes;
  std::size_t prev = 0;
  for (const auto& sp : sync_stats.spikes) {
    if (episodes.empty() || sp.sample != prev + 1)
      episodes.push_back({sp.cycle, sp.ttft_seconds - sp.trailing_median});
    prev = sp.sample;
  }
  std::map<std::size_t, std::size_t> per_cycle;
  bool all_clear = true;
  double min_excess = INFINITY;
  for (const auto& e : episodes) {
    ++per_cycle[e.cycle];
    all_clear = all_clear && e.excess >= jump;
    min_excess = std::min(min_excess, e.excess);
  }
  bool one_per_cycle = per_cycle.size() == cfg.cycles;
  for (std::size_t c = 1; c <= cfg.cycles; ++c) one_per_cycle = one_per_cycle && per_cycle[c] == 1;

  const bool asr_ok = asr.evictions == cfg.cycles && asr.swaps == cfg.cycles && asr_stats.spikes.empty() && drift < 0.10;
  const bool sync_ok = sync.evictions == cfg.cycles && episodes.size() >= 10 && one_per_cycle && all_clear;
  return {asr_ok && sync_ok,
          fmt("csr_asr: %zu queries, %zu cycles, %zu spikes, median drift %.3g%%, p99 %.4fs, max %.4fs | "
              "csr_sync_evict: %zu spike episodes (%zu flagged samples), one per cycle: %s, smallest excess over "
              "trailing median %.4fs vs required %.4fs",
              asr.samples.size(), asr.evictions, asr_stats.spikes.size(), 100.0 * drift, asr_stats.p99, asr_stats.max,
              episodes.size(), sync_stats.spikes.size(), one_per_cycle ? "yes" : "no", min_excess, jump)};
}

// 6. Analytic feasibility against simulated swap-before-overflow.
Outcome feasibility() {
  const FeasibilityGrid grid;
  const auto map = feasibility_map(grid);
  std::size_t feasible = 0;
  for (const auto& p : map.points) feasible += p.report.feasible ? 1 : 0;
  return {map.points.size() == 125 && map.off_boundary_disagree == 0,
          fmt("%zu points (%zu analytically feasible): %zu agree, %zu disagree, %zu within one chunk period of the "
              "boundary, %zu disagreements off the boundary",
              map.points.size(), feasible, map.agree, map.disagree, map.boundary, map.off_boundary_disagree)};
}

// Scripted interleaving covering every routing case.
std::map<RoutingCase, std::size_t> scripted_router_cases(std::vector<std::string>& problems) {
  VirtualClock clock;
  MockBackend mock(HardwareProfile{}.with_kappa(1e-9), clock);
  RequestRouter router(mock, RouterConfig{.n_catchup = 0, .max_straggler_age = std::nullopt, .retry_delay = 0.0});
  std::map<RoutingCase, std::size_t> seen;
  auto route = [&](const TokenSeq& stat, Token dyn, std::uint64_t k, std::optional<std::size_t> j_eps) {
    TokenSeq q = stat;
    q.push_back(dyn);
    const auto out = router.route({q, stat.size(), k, j_eps, 0.0});
    ++seen[out.decision.route_case];
    return out;
  };
  const TokenSeq a{1, 2, 3, 4}, b{5, 6, 7, 8}, c{9, 10}, d{11, 12};
  const auto ab = concat(a, b), bc = concat(b, c), bcd = concat(bc, d);
  route(ab, 100, 0, std::nullopt);                                     // case 1
  router.begin_reconcile({b, 1, b.size(), ab});
  const auto sec = router.secondary();
  router.reconcile_step();
  if (route(bc, 101, 1, b.size()).served != TokenSeq{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 101})  // case 2 bridge
    problems.push_back("scripted bridge served the wrong sequence");
  route(bc, 102, 1, b.size());
  while (router.reconcile_step().status != ReconcileStep::Status::Done) {}
  if (route(bc, 103, 1, b.size()).decision.resource != sec) problems.push_back("swap did not promote the secondary");
  route(ab, 104, 0, std::nullopt);                                     // case 3, secondary
  route(bcd, 105, 1, std::nullopt);                                    // case 1 again
  router.begin_reconcile({d, 2, d.size(), bcd});
  const auto st = route(ab, 106, 0, std::nullopt);                     // case 3, bridge
  if (st.decision.resource == router.secondary()) problems.push_back("straggler reached the secondary while reconciling");
  return seen;
}

// 7. Router case coverage and randomized interleavings.
Outcome router_coverage() {
  std::vector<std::string> problems;
  const auto scripted = scripted_router_cases(problems);
  const std::vector<RoutingCase> all{RoutingCase::Continuation, RoutingCase::Bridge, RoutingCase::Swap,
                                     RoutingCase::StragglerBridge, RoutingCase::StragglerSecondary};
  for (auto c : all)
    if (!scripted.count(c)) problems.push_back("scripted run missed " + std::string(to_string(c)));

  std::map<RoutingCase, std::size_t> total;
  std::size_t swaps = 0, runs_failed = 0;
  for (std::uint64_t seed = 1; seed <= 1000; ++seed) {
    const auto rep = ts::RouterInterleaving(seed).run(300);
    for (const auto& [c, n] : rep.cases) total[c] += n;
    swaps += rep.swaps;
    if (!rep.violations.empty()) {
      if (runs_failed++ == 0) problems.push_back("seed " + std::to_string(seed) + ": " + rep.violations.front());
    }
  }
  for (auto c : all)
    if (!total.count(c)) problems.push_back("randomized runs never hit " + std::string(to_string(c)));
  std::string counts;
  for (auto c : all) counts += fmt("%s=%zu ", std::string(to_string(c)).c_str(), total[c]);
  return {problems.empty(), fmt("1000 interleavings, %zu failed, %zu swaps; cases: %s%s", runs_failed, swaps,
                                counts.c_str(), problems.empty() ? "" : ("; " + problems.front()).c_str())};
}

// 8. Conservation across the swap.
Outcome conservation() {
  std::mt19937_64 rng(8080);
  std::size_t swaps = 0, exact_at_swap = 0, with_residual = 0;
  std::string problem;
  for (int scenario = 0; scenario < 100 && problem.empty(); ++scenario) {
    SchedulerSimConfig sc;
    const auto prefix = ts::random_tokens(rng, rng() % 200);
    sc.initial = CsrContext(prefix);
    sc.chunk_min = 10 + rng() % 50;
    sc.chunk_max = sc.chunk_min + rng() % 100;
    sc.scheduler.tau_mem = prefix.size() + 2000 + rng() % 40000;
    sc.scheduler.n_catchup = scenario % 2 == 0 ? 0 : rng() % 3000;
    sc.scheduler.n_max = sc.scheduler.tau_mem * 10;
    const bool oldest_half = rng() % 2 == 0;
    const double keep = 0.2 + 0.6 * static_cast<double>(rng() % 1000) / 1000.0;
    if (oldest_half) sc.scheduler.policy = OldestHalf{};
    else sc.scheduler.policy = KeepNewestFraction{keep};
    // Rates and kappa keep every scenario able to reconcile before n_max.
    sc.profile = HardwareProfile{}.with_kappa(1e-9 * static_cast<double>(1 + rng() % 5));
    sc.arrival_period = 0.05 + 0.2 * static_cast<double>(rng() % 100) / 100.0;
    sc.query_period = 0.05 + 0.3 * static_cast<double>(rng() % 100) / 100.0;
    sc.suffix_tokens = rng() % 20;
    sc.task_tokens = rng() % 5;
    sc.stop_after_swaps = 1 + rng() % 4;
    sc.seed = rng();
    const auto res = run_scheduler_sim(sc);
    if (res.swaps.size() != sc.stop_after_swaps) {
      problem = fmt("scenario %d finished %zu of %zu swaps (overflow: %s)", scenario, res.swaps.size(),
                    sc.stop_after_swaps, res.overflow_time ? "yes" : "no");
      break;
    }
    for (const auto& s : res.swaps) {
      ++swaps;
      // Independent eviction oracle on the trigger snapshot.
      std::vector<TokenSeq> chunks;
      for (const auto& c : s.trigger_chunks) chunks.push_back(c.tokens);
      TokenSeq evicted = s.trigger_prefix;
      const std::size_t drop = oldest_half ? chunks.size() / 2
                                           : chunks.size() - std::max<std::size_t>(1, static_cast<std::size_t>(
                                                 std::ceil(keep * static_cast<double>(chunks.size()))));
      for (std::size_t i = drop; i < chunks.size(); ++i) append_tokens(evicted, chunks[i]);
      if (oldest_half && evicted != ts::oldest_half_oracle(s.trigger_prefix, chunks)) problem = "oracle inconsistency";
      if (s.record.evicted_snapshot != evicted) problem = fmt("scenario %d: evicted snapshot differs from the oracle", scenario);
      TokenSeq expected = evicted;
      for (const auto& c : s.since_trigger) append_tokens(expected, c.tokens);
      TokenSeq drained = evicted;
      for (const auto& c : s.record.drained) append_tokens(drained, c.tokens);
      if (s.static_after_swap != expected) problem = fmt("scenario %d: static state after swap differs", scenario);
      if (s.primary_cache_at_swap != drained) problem = fmt("scenario %d: primary cache differs from evicted + drained", scenario);
      if (s.record.residual.empty()) {
        ++exact_at_swap;
        if (s.primary_cache_at_swap != expected) problem = fmt("scenario %d: primary cache at swap differs", scenario);
      } else {
        ++with_residual;
        // The residual is recomputed by the first query after the swap.
        const auto& after = s.primary_cache_after_query;
        if (!after || after->size() < expected.size() || !std::equal(expected.begin(), expected.end(), after->begin()))
          problem = fmt("scenario %d: first query after swap did not complete the state", scenario);
      }
      if (!problem.empty()) break;
    }
  }
  return {problem.empty(), fmt("100 scenarios, %zu swaps: %zu token-exact at the swap, %zu exact after the residual "
                               "was absorbed by the next query%s",
                               swaps, exact_at_swap, with_residual, problem.empty() ? "" : ("; " + problem).c_str())};
}

// 9. Prefix stability of appends and mutations.
Outcome prefix_stability() {
  std::mt19937_64 rng(99);
  std::size_t appends = 0, mutations = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    CsrContext ctx(ts::random_tokens(rng, rng() % 50));
    const auto n = rng() % 20;
    for (std::uint64_t i = 0; i < n; ++i)
      ctx = append_chunk(std::move(ctx), {ts::random_tokens(rng, 1 + rng() % 30), i + 1, 0.0});
    ctx = set_dynamic(std::move(ctx), ts::random_tokens(rng, rng() % 10), ts::random_tokens(rng, rng() % 10));

    // Pure append of one chunk to the static part.
    const auto before = ctx.static_tokens();
    const auto next = append_chunk(ctx, {ts::random_tokens(rng, 1 + rng() % 30), n + 1, 0.0});
    const auto after = assemble(next);
    if (first_differing_index(before, after) != before.size() + 1)
      return {false, fmt("append: i* != |before| + 1 at trial %d", trial)};
    if (first_differing_index(assemble(ctx), after) < before.size() + 1)
      return {false, fmt("append: dynamic part moved i* below the old cursor at trial %d", trial)};
    ++appends;

    // In-place mutation, insertion or deletion at a random position.
    auto seq = assemble(ctx);
    if (seq.empty()) continue;
    const auto pos = rng() % seq.size();
    auto mutated = seq;
    switch (rng() % 3) {
      case 0: mutated[pos] = seq[pos] + 1 + static_cast<Token>(rng() % 1000); break;
      case 1: mutated.insert(mutated.begin() + static_cast<std::ptrdiff_t>(pos), static_cast<Token>(rng() % 50000)); break;
      default: mutated.erase(mutated.begin() + static_cast<std::ptrdiff_t>(pos)); break;
    }
    if (mutated == seq) continue;
    const auto i_star = first_differing_index(seq, mutated);
    if (i_star > pos + 1) return {false, fmt("mutation at %zu gave i*=%zu", static_cast<std::size_t>(pos + 1), i_star)};
    if (i_star != ts::scan_first_difference(seq, mutated)) return {false, "i* disagrees with the element scan"};
    ++mutations;
  }
  return {true, fmt("%zu appends with i* = |before| + 1, %zu mutations with i* <= mutation position", appends, mutations)};
}

struct Criterion {
  int id;
  const char* title;
  double time_limit;  // seconds; 0 = none
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "formula fidelity", 10.0, formula_fidelity},
      {2, "speedup law", 0.0, speedup_law},
      {3, "unordered vs CSR ratio", 5.0, table_ratio},
      {4, "scaling shape", 5.0, scaling_shape},
      {5, "spike freedom", 60.0, spike_freedom},
      {6, "feasibility inequality", 120.0, feasibility},
      {7, "router case coverage", 0.0, router_coverage},
      {8, "conservation across swap", 0.0, conservation},
      {9, "prefix stability", 0.0, prefix_stability},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::stoi(argv[i]));

  bool all_pass = true;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.time_limit > 0.0 && secs >= c.time_limit) {
      o.pass = false;
      o.detail += fmt("; runtime limit %.0fs exceeded", c.time_limit);
    }
    all_pass = all_pass && o.pass;
    std::printf("[%s] criterion %d (%s): %s [%.2fs]\n", o.pass ? "PASS" : "FAIL", c.id, c.title, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return all_pass ? 0 : 1;
}
