// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "csr/asr_scheduler.hpp"
#include "csr/backend.hpp"
#include "csr/sim/client.hpp"
#include "csr/sim/event_queue.hpp"

namespace csr::sim {

/// Discrete-event driver for AsrScheduler (chunks, optional queries and the
/// background track) on the mock backend.
struct SchedulerSimConfig {
  CsrContext initial;
  SchedulerConfig scheduler;
  HardwareProfile profile = HardwareProfile{}.with_kappa(2e-9);
  /// Chunk sizes are drawn uniformly from [chunk_min, chunk_max].
  std::size_t chunk_min = 100;
  std::size_t chunk_max = 100;
  double first_arrival = 0.0;
  /// Non-positive: only the chunk at first_arrival arrives.
  double arrival_period = 1.0;
  /// Non-positive: no queries.
  double query_period = 0.0;
  std::size_t suffix_tokens = 0;
  std::size_t task_tokens = 0;
  /// Stop once this many swaps have happened (and the query after the last
  /// one has been served, when queries are enabled).
  std::size_t stop_after_swaps = 1;
  bool stop_on_overflow = true;
  double max_time = 1e7;
  std::uint64_t seed = 1;
  std::uint32_t vocab = 50000;
};

struct SwapObservation {
  SwapRecord record;
  /// Static state when the eviction fired (before eviction).
  TokenSeq trigger_static;
  /// The same state as prefix and chunk log.
  TokenSeq trigger_prefix;
  std::vector<StateChunk> trigger_chunks;
  /// Chunks appended after the triggering one, up to the swap.
  std::vector<StateChunk> since_trigger;
  /// New primary's cache at the moment of the swap.
  TokenSeq primary_cache_at_swap;
  /// Scheduler static state right after the swap.
  TokenSeq static_after_swap;
  /// New primary's cache after the first query that followed the swap.
  std::optional<TokenSeq> primary_cache_after_query;
  double trigger_time = 0.0;
  double swap_time = 0.0;
  double epsilon = 1.0;
};

struct QueryObservation {
  double time = 0.0;
  Units charged_units = 0;
  /// ttft_units(|seq|, last primary static + 1) at the time of the query.
  Units bridging_bound = 0;
  bool during_reconcile = false;
  ResourceId resource = ResourceId::R1;
};

struct SchedulerSimResult {
  std::vector<SwapObservation> swaps;
  std::vector<QueryObservation> queries;
  std::optional<double> overflow_time;
  std::vector<double> trigger_times;
  std::vector<MockBackend::Call> calls;
  std::size_t secondary_query_prefills = 0;
  double end_time = 0.0;
};

inline SchedulerSimResult run_scheduler_sim(const SchedulerSimConfig& cfg) {
  if (cfg.chunk_min == 0 || cfg.chunk_max < cfg.chunk_min) throw DomainError("bad chunk size range");
  VirtualClock clock;
  MockBackend backend(cfg.profile, clock);
  AsrScheduler sched(cfg.initial, cfg.scheduler, backend);
  TokenSource src(cfg.seed, cfg.vocab);
  std::mt19937_64 size_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  const TokenSeq task = src.draw(cfg.task_tokens);

  SchedulerSimResult res;
  std::optional<SwapObservation> open;  // cycle in flight
  std::size_t awaiting_query = 0;       // index + 1 of a swap whose next query is pending
  std::uint64_t next_id = cfg.initial.last_chunk_id() + 1;
  std::uint64_t chunk_n = 0, query_n = 1;

  EventQueue queue;
  queue.push(cfg.first_arrival, EventKind::Chunk);
  if (cfg.query_period > 0.0) queue.push(cfg.query_period, EventKind::Query);

  auto done = [&] {
    if (res.swaps.size() < cfg.stop_after_swaps) return false;
    return cfg.query_period <= 0.0 || awaiting_query == 0;
  };

  while (!queue.empty() && !done()) {
    const Event e = queue.pop();
    if (e.time > cfg.max_time) break;
    clock.advance_to(e.time);
    res.end_time = e.time;

    if (e.kind == EventKind::Background) {
      const auto step = sched.reconcile_step(e.time);
      if (step.status == ReconcileStep::Status::Prefilled || step.status == ReconcileStep::Status::Retry) {
        queue.push(step.wake_at, EventKind::Background);
      } else if (step.status == ReconcileStep::Status::Done && open) {
        open->record = *sched.last_swap();
        open->primary_cache_at_swap = backend.cache(sched.primary()).cached_seq;
        open->static_after_swap = sched.static_context().static_tokens();
        open->swap_time = e.time;
        res.swaps.push_back(std::move(*open));
        open.reset();
        awaiting_query = res.swaps.size();
      }
      continue;
    }

    if (e.kind == EventKind::Chunk) {
      const auto span = cfg.chunk_max - cfg.chunk_min + 1;
      StateChunk chunk{src.draw(cfg.chunk_min + static_cast<std::size_t>(size_rng() % span)), next_id++, e.time};
      if (open) open->since_trigger.push_back(chunk);
      const auto actions = sched.increment(chunk, e.time);
      for (const auto& a : actions) {
        if (a.kind == SchedulerActionKind::OverflowAlarm && !res.overflow_time) res.overflow_time = e.time;
        if (a.kind == SchedulerActionKind::LaunchReconcile) {
          SwapObservation obs;
          obs.trigger_static = sched.static_context().static_tokens();
          obs.trigger_prefix = sched.static_context().prefix();
          obs.trigger_chunks = sched.static_context().chunks();
          obs.trigger_time = e.time;
          obs.epsilon = sched.last_epsilon();
          open = std::move(obs);
          res.trigger_times.push_back(e.time);
          queue.push(e.time, EventKind::Background);
        }
      }
      if (res.overflow_time && cfg.stop_on_overflow) break;
      if (cfg.arrival_period > 0.0)
        queue.push(cfg.first_arrival + static_cast<double>(++chunk_n) * cfg.arrival_period, EventKind::Chunk);
      continue;
    }

    const auto suffix = src.draw(cfg.suffix_tokens);
    QueryObservation q;
    q.time = e.time;
    q.during_reconcile = sched.is_reconciling();
    const auto seq_len = sched.static_size() + suffix.size() + task.size();
    q.bridging_bound = ttft_units(seq_len, std::min(sched.last_query_static(), seq_len) + 1);
    const auto r = sched.serve_query(suffix, task, e.time);
    q.charged_units = r.charged_units;
    q.resource = backend.last_call()->resource;
    if (q.during_reconcile && q.resource == sched.secondary()) ++res.secondary_query_prefills;
    res.queries.push_back(q);
    if (awaiting_query > 0) {
      res.swaps[awaiting_query - 1].primary_cache_after_query = backend.cache(sched.primary()).cached_seq;
      awaiting_query = 0;
    }
    queue.push(static_cast<double>(++query_n) * cfg.query_period, EventKind::Query);
  }
  res.calls = backend.call_log();
  return res;
}

}  // namespace csr::sim
