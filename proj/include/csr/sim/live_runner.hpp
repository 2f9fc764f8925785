// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <exception>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "csr/backend.hpp"
#include "csr/event_log.hpp"
#include "csr/request_router.hpp"
#include "csr/sim/client.hpp"
#include "csr/sim/scenario.hpp"
#include "csr/sim/trace.hpp"

namespace csr::sim {

/// Wall-clock run of a scenario against a real backend. The foreground loop
/// sleeps until the next chunk or query is due; for csr_asr each
/// reconciliation runs on its own background thread. Sample TTFT includes
/// the lag between the scheduled query time and the request start.
inline TtftTrace run_live(const ScenarioConfig& cfg, Backend& backend) {
  cfg.validate();
  if (!(cfg.duration > 0.0)) throw DomainError("live runs need a positive duration");
  using Clock = std::chrono::steady_clock;
  const auto origin = Clock::now();
  auto now = [&] { return std::chrono::duration<double>(Clock::now() - origin).count(); };

  TtftTrace trace;
  EventLog log;
  RequestRouter router(backend, RouterConfig{.n_catchup = cfg.n_catchup, .max_straggler_age = std::nullopt}, &log);
  ScenarioClient client(cfg);
  std::jthread background;
  std::mutex err_mu;
  std::optional<std::string> background_error;

  double next_chunk = cfg.arrival_period, next_query = cfg.query_period;
  std::size_t query_index = 0;
  while (true) {
    const bool chunk_first = next_chunk <= next_query;
    const double due = chunk_first ? next_chunk : next_query;
    if (due > cfg.duration) break;
    std::this_thread::sleep_until(origin + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(due)));

    if (chunk_first) {
      client.append(due);
      next_chunk += cfg.arrival_period;
      if (client.context().static_cursor() > cfg.n_max) {
        trace.overflowed = true;
        log.emit({{"time", now()}, {"event", "overflow"}, {"sizes", {{"tokens", client.context().static_cursor()}}}});
      }
      if (!client.over_threshold()) continue;
      if (cfg.policy == Policy::CsrAsr && (router.is_reconciling() || router.k() != client.version())) continue;
      if (cfg.cycles > 0 && client.evictions() == cfg.cycles) break;
      auto notice = client.evict_now();
      log.emit({{"time", now()}, {"event", "evict"}, {"sizes", {{"after", notice.evicted.size()}}}});
      if (cfg.policy == Policy::CsrAsr) {
        if (background.joinable()) background.join();
        router.begin_reconcile(std::move(notice), now());
        background = std::jthread([&] {
          try {
            router.drive_reconcile();
          } catch (const std::exception& e) {
            std::lock_guard lock(err_mu);
            background_error = e.what();
          }
        });
      }
      continue;
    }

    TtftSample s;
    s.query_index = query_index++;
    s.scenario_time = due;
    s.eviction_cycle_index = client.evictions();
    const double start = now();
    PrefillResult r;
    if (cfg.policy == Policy::CsrAsr) {
      const auto out = router.route(client.next_query(due), start);
      r = out.result;
      s.resource = out.decision.resource;
      s.routing_case = std::string(to_string(out.decision.route_case));
      s.seq_len = out.served.size();
    } else {
      const auto seq =
          cfg.policy == Policy::UnorderedBaseline ? client.unordered_query() : client.next_query(due).tokens;
      r = backend.prefill(ResourceId::R1, seq);
      s.routing_case = to_string(cfg.policy);
      s.seq_len = seq.size();
    }
    s.ttft_seconds = (start - due) + r.ttft;
    trace.samples.push_back(std::move(s));
    next_query += cfg.query_period;
  }
  if (background.joinable()) background.join();
  if (background_error) log.emit({{"time", now()}, {"event", "reconcile_failed"}, {"error", *background_error}});
  trace.evictions = client.evictions();
  trace.swaps = router.swap_count();
  trace.events = log.snapshot();
  return trace;
}

}  // namespace csr::sim
