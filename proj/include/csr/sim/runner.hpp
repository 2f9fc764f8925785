// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <limits>

#include "csr/backend.hpp"
#include "csr/event_log.hpp"
#include "csr/request_router.hpp"
#include "csr/sim/client.hpp"
#include "csr/sim/event_queue.hpp"
#include "csr/sim/scenario.hpp"
#include "csr/sim/trace.hpp"

namespace csr::sim {

/// Discrete-event run of one scenario against the mock backend.
///
/// Chunks arrive every arrival_period and queries every query_period,
/// starting one period in. Each resource is a FIFO serial server, so a
/// sample's TTFT includes time spent waiting for earlier work. The run ends
/// at `duration`, at the eviction trigger that would open cycle cycles + 1,
/// or at the first overflow past n_max, whichever comes first.
///
///   csr_asr             router with versioned queries; warm-up and catch-up run
///                       on the secondary between events
///   csr_sync_evict      eviction applied in place; the next query recomputes
///                       the evicted state on the primary
///   unordered_baseline  one never-seen token ahead of every prompt
inline TtftTrace run_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  if (cfg.mode != RunMode::Simulated) throw DomainError("run_scenario only drives the simulated backend");
  TtftTrace trace;
  if (cfg.duration == 0.0 && cfg.cycles == 0) return trace;

  VirtualClock clock;
  MockBackend backend(cfg.profile, clock);
  EventLog log;
  RequestRouter router(backend, RouterConfig{.n_catchup = cfg.n_catchup, .max_straggler_age = std::nullopt}, &log);
  ScenarioClient client(cfg);

  const double stop_time = cfg.duration > 0.0 ? cfg.duration : std::numeric_limits<double>::infinity();
  EventQueue queue;
  std::uint64_t chunk_n = 1, query_n = 1;
  queue.push(cfg.arrival_period, EventKind::Chunk);
  queue.push(cfg.query_period, EventKind::Query);

  auto overflow = [&](double now, std::size_t tokens, const char* where) {
    if (tokens <= cfg.n_max) return;
    trace.overflowed = true;
    log.emit({{"time", now}, {"event", "overflow"}, {"where", where}, {"sizes", {{"tokens", tokens}, {"n_max", cfg.n_max}}}});
  };

  while (!queue.empty()) {
    const Event e = queue.pop();
    if (e.time > stop_time) break;
    clock.advance_to(e.time);

    if (e.kind == EventKind::Background) {
      const auto step = router.reconcile_step(e.time);
      if (step.status == ReconcileStep::Status::Prefilled || step.status == ReconcileStep::Status::Retry)
        queue.push(step.wake_at, EventKind::Background);
      continue;
    }

    if (e.kind == EventKind::Chunk) {
      client.append(e.time);
      queue.push(static_cast<double>(++chunk_n) * cfg.arrival_period, EventKind::Chunk);
      overflow(e.time, client.context().static_cursor(), "static");
      if (trace.overflowed) break;
      if (!client.over_threshold()) continue;
      if (cfg.policy == Policy::CsrAsr && (router.is_reconciling() || router.k() != client.version())) continue;
      if (cfg.cycles > 0 && client.evictions() == cfg.cycles) break;
      const auto before = client.context().static_cursor();
      auto notice = client.evict_now();
      log.emit({{"time", e.time},
                {"event", "evict"},
                {"sizes", {{"before", before}, {"after", notice.evicted.size()}, {"epsilon", client.last_epsilon()}}}});
      if (cfg.policy == Policy::CsrAsr) {
        router.begin_reconcile(std::move(notice), e.time);
        queue.push(e.time, EventKind::Background);
      }
      continue;
    }

    TtftSample s;
    s.query_index = static_cast<std::size_t>(query_n - 1);
    s.scenario_time = e.time;
    s.eviction_cycle_index = client.evictions();
    PrefillResult r;
    if (cfg.policy == Policy::CsrAsr) {
      const auto out = router.route(client.next_query(e.time), e.time);
      r = out.result;
      s.resource = out.decision.resource;
      s.routing_case = std::string(to_string(out.decision.route_case));
      s.seq_len = out.served.size();
    } else {
      const auto seq =
          cfg.policy == Policy::UnorderedBaseline ? client.unordered_query() : client.next_query(e.time).tokens;
      r = backend.prefill(ResourceId::R1, seq);
      s.resource = ResourceId::R1;
      s.routing_case = to_string(cfg.policy);
      s.seq_len = seq.size();
    }
    s.ttft_seconds = backend.busy_until(s.resource) - e.time;
    s.charged_units = r.charged_units;
    s.i_star = r.i_star;
    overflow(e.time, s.seq_len, "query");
    trace.samples.push_back(std::move(s));
    if (trace.overflowed) break;
    queue.push(static_cast<double>(++query_n) * cfg.query_period, EventKind::Query);
  }

  trace.evictions = client.evictions();
  trace.swaps = router.swap_count();
  trace.events = log.snapshot();
  return trace;
}

}  // namespace csr::sim
