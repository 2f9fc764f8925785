// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstddef>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "csr/backend.hpp"
#include "csr/context.hpp"
#include "csr/event_log.hpp"
#include "csr/reconcile_step.hpp"

namespace csr {

struct SchedulerConfig {
  /// Static length that triggers an eviction.
  std::size_t tau_mem = 110000;
  /// Catch-up stops once the buffered chunks hold at most this many tokens.
  std::size_t n_catchup = 0;
  EvictionPolicy policy = OldestHalf{};
  /// Hard memory cap; exceeding it raises an overflow alarm.
  std::optional<std::size_t> n_max;
  /// Delay before a failed background prefill is retried.
  double retry_delay = 1.0;
  /// Retries allowed by the blocking reconcile() before it gives up.
  std::size_t max_retries = 3;
};

enum class SchedulerActionKind { Evict, LaunchReconcile, OverflowAlarm };

struct SchedulerAction {
  SchedulerActionKind kind;
  /// Static tokens involved: evicted size for Evict/LaunchReconcile, current size for alarms.
  std::size_t tokens = 0;
};

/// Bookkeeping captured at each swap so callers can verify conservation.
struct SwapRecord {
  /// Static tokens of the evicted snapshot taken at the trigger.
  TokenSeq evicted_snapshot;
  /// Chunks folded into the secondary by catch-up prefills.
  std::vector<StateChunk> drained;
  /// Chunks still buffered at the swap; absorbed by the next query.
  std::vector<StateChunk> residual;
  ResourceId new_primary = ResourceId::R1;
  double time = 0.0;
};

/// Threshold-triggered eviction with background warm-up, catch-up and an
/// atomic swap of the two resources.
///
/// increment() and serve_query() belong to the foreground track,
/// reconcile_step()/reconcile() to the background track. All shared state sits
/// behind one mutex; backend calls are made with the mutex released. The
/// deterministic harness drives reconcile_step() at virtual wake times instead
/// of running a thread.
class AsrScheduler {
 public:
  AsrScheduler(CsrContext initial, SchedulerConfig cfg, Backend& backend, EventLog* log = nullptr)
      : cfg_(std::move(cfg)), backend_(&backend), log_(log), static_(std::move(initial)) {
    if (cfg_.n_max && cfg_.tau_mem >= *cfg_.n_max) throw DomainError("tau_mem must be below n_max");
  }

  AsrScheduler(const AsrScheduler&) = delete;
  AsrScheduler& operator=(const AsrScheduler&) = delete;

  /// Extends the live static state by one chunk, forking it into the
  /// catch-up buffer while a reconciliation runs, and triggers an eviction
  /// when the threshold is crossed.
  std::vector<SchedulerAction> increment(StateChunk chunk, double now = 0.0) {
    std::vector<SchedulerAction> actions;
    std::lock_guard lock(mu_);
    check_appendable(static_, chunk);
    const auto added = chunk.tokens.size();
    static_ = append_chunk(std::move(static_), chunk);
    if (reconciling_) {
      buffered_tokens_ += added;
      buffer_.push_back(std::move(chunk));
    }
    emit({{"time", now}, {"event", "append"}, {"sizes", {{"chunk", added}, {"static", static_.static_cursor()}, {"buffer", buffered_tokens_}}}});

    if (cfg_.n_max && static_.static_cursor() > *cfg_.n_max) {
      overflowed_ = true;
      actions.push_back({SchedulerActionKind::OverflowAlarm, static_.static_cursor()});
      emit({{"time", now}, {"event", "overflow"}, {"sizes", {{"static", static_.static_cursor()}, {"n_max", *cfg_.n_max}}}});
    }

    if (static_.static_cursor() >= cfg_.tau_mem && !reconciling_) {
      // Evict a snapshot; the live state keeps growing during warm-up.
      auto evicted = evict(static_, cfg_.policy);
      evicted_ = std::move(evicted.context);
      snapshot_ = evicted_.static_tokens();
      drained_.clear();
      buffer_.clear();
      buffered_tokens_ = 0;
      phase_ = Phase::Warmup;
      reconciling_ = true;
      last_epsilon_ = evicted.retained_fraction;
      actions.push_back({SchedulerActionKind::Evict, evicted_.static_cursor()});
      actions.push_back({SchedulerActionKind::LaunchReconcile, evicted_.static_cursor()});
      emit({{"time", now}, {"event", "evict"}, {"sizes", {{"before", static_.static_cursor()}, {"after", evicted_.static_cursor()}, {"epsilon", last_epsilon_}}}});
    }
    return actions;
  }

  /// Serves a query on the primary: current static state plus the given
  /// dynamic part. Never touches the secondary.
  PrefillResult serve_query(TokenView suffix, TokenView task, double now = 0.0) {
    TokenSeq seq;
    ResourceId target;
    {
      std::lock_guard lock(mu_);
      seq = assemble_with(static_, suffix, task);
      target = primary_;
      last_query_static_ = static_.static_cursor();
    }
    auto result = backend_->prefill(target, seq);
    emit({{"time", now}, {"event", "query"}, {"resource", to_string(target)}, {"sizes", {{"seq", seq.size()}, {"i_star", result.i_star.value_or(0)}, {"units", result.charged_units}}}});
    return result;
  }

  /// Performs the next background action: warm-up, one catch-up prefill, or
  /// the swap. Safe to call while idle.
  ReconcileStep reconcile_step(double now = 0.0) {
    TokenSeq seq;
    ResourceId target;
    {
      std::lock_guard lock(mu_);
      switch (phase_) {
        case Phase::Idle:
          return {};
        case Phase::Warmup:
          break;
        case Phase::Catchup:
          if (!pending_prefill_) {
            if (buffered_tokens_ > cfg_.n_catchup) {
              for (auto& c : buffer_) {
                evicted_ = append_chunk(std::move(evicted_), c);
                drained_.push_back(std::move(c));
              }
              emit({{"time", now}, {"event", "catchup"}, {"resource", to_string(secondary_)}, {"sizes", {{"drained", buffered_tokens_}, {"evicted", evicted_.static_cursor()}}}});
              buffer_.clear();
              buffered_tokens_ = 0;
              pending_prefill_ = true;
            } else {
              swap_locked(now);
              return {ReconcileStep::Status::Done, now};
            }
          }
          break;
      }
      seq = evicted_.static_tokens();
      target = secondary_;
      if (phase_ == Phase::Warmup)
        emit({{"time", now}, {"event", "warmup_start"}, {"resource", to_string(target)}, {"sizes", {{"evicted", seq.size()}}}});
    }

    try {
      backend_->prefill(target, seq);
    } catch (const BackendError& e) {
      std::lock_guard lock(mu_);
      ++failures_;
      emit({{"time", now}, {"event", "reconcile_error"}, {"resource", to_string(target)}, {"error", e.what()}});
      return {ReconcileStep::Status::Retry, now + cfg_.retry_delay};
    }

    std::lock_guard lock(mu_);
    phase_ = Phase::Catchup;
    pending_prefill_ = false;
    return {ReconcileStep::Status::Prefilled, backend_->busy_until(target)};
  }

  /// Runs the whole background procedure on the calling thread. Backend
  /// failures are retried up to cfg.max_retries times, then rethrown as
  /// BackendError with the scheduler still flagged as reconciling.
  void reconcile() {
    std::size_t retries = 0;
    for (;;) {
      const auto step = reconcile_step();
      switch (step.status) {
        case ReconcileStep::Status::Idle:
        case ReconcileStep::Status::Done:
          return;
        case ReconcileStep::Status::Retry:
          if (++retries > cfg_.max_retries) throw BackendError("reconciliation failed after retries");
          std::this_thread::sleep_for(std::chrono::duration<double>(cfg_.retry_delay));
          break;
        case ReconcileStep::Status::Prefilled:
          break;
      }
    }
  }

  bool is_reconciling() const {
    std::lock_guard lock(mu_);
    return reconciling_;
  }
  ResourceId primary() const {
    std::lock_guard lock(mu_);
    return primary_;
  }
  ResourceId secondary() const {
    std::lock_guard lock(mu_);
    return secondary_;
  }
  CsrContext static_context() const {
    std::lock_guard lock(mu_);
    return static_;
  }
  std::size_t static_size() const {
    std::lock_guard lock(mu_);
    return static_.static_cursor();
  }
  /// X_eps: evicted state plus whatever catch-up has folded in so far.
  TokenSeq evicted_tokens() const {
    std::lock_guard lock(mu_);
    return evicted_.static_tokens();
  }
  std::vector<StateChunk> buffer() const {
    std::lock_guard lock(mu_);
    return buffer_;
  }
  std::size_t buffered_tokens() const {
    std::lock_guard lock(mu_);
    return buffered_tokens_;
  }
  std::optional<SwapRecord> last_swap() const {
    std::lock_guard lock(mu_);
    return last_swap_;
  }
  std::size_t swap_count() const {
    std::lock_guard lock(mu_);
    return swaps_;
  }
  std::size_t failure_count() const {
    std::lock_guard lock(mu_);
    return failures_;
  }
  bool overflowed() const {
    std::lock_guard lock(mu_);
    return overflowed_;
  }
  /// Static length of the primary at its last served query.
  std::size_t last_query_static() const {
    std::lock_guard lock(mu_);
    return last_query_static_;
  }
  double last_epsilon() const {
    std::lock_guard lock(mu_);
    return last_epsilon_;
  }
  const SchedulerConfig& config() const noexcept { return cfg_; }

 private:
  enum class Phase { Idle, Warmup, Catchup };

  void swap_locked(double now) {
    SwapRecord rec;
    rec.evicted_snapshot = std::move(snapshot_);
    rec.drained = std::move(drained_);
    rec.residual = buffer_;
    // The reconciled state becomes the live state; residual chunks are
    // appended here and recomputed by the next query.
    CsrContext next = std::move(evicted_);
    for (auto& c : buffer_) next = append_chunk(std::move(next), std::move(c));
    static_ = std::move(next);
    std::swap(primary_, secondary_);
    reconciling_ = false;
    phase_ = Phase::Idle;
    buffer_.clear();
    buffered_tokens_ = 0;
    rec.new_primary = primary_;
    rec.time = now;
    emit({{"time", now}, {"event", "swap"}, {"resource", to_string(primary_)}, {"sizes", {{"static", static_.static_cursor()}, {"residual", rec.residual.size()}}}});
    last_swap_ = std::move(rec);
    snapshot_.clear();
    drained_.clear();
    evicted_ = CsrContext{};
    ++swaps_;
  }

  void emit(nlohmann::json record) {
    if (log_) log_->emit(std::move(record));
  }

  SchedulerConfig cfg_;
  Backend* backend_;
  EventLog* log_;

  mutable std::mutex mu_;
  CsrContext static_;
  CsrContext evicted_;
  TokenSeq snapshot_;
  std::vector<StateChunk> buffer_;
  std::vector<StateChunk> drained_;
  std::size_t buffered_tokens_ = 0;
  ResourceId primary_ = ResourceId::R1;
  ResourceId secondary_ = ResourceId::R2;
  bool reconciling_ = false;
  bool pending_prefill_ = false;
  bool overflowed_ = false;
  Phase phase_ = Phase::Idle;
  std::optional<SwapRecord> last_swap_;
  std::size_t swaps_ = 0;
  std::size_t failures_ = 0;
  std::size_t last_query_static_ = 0;
  double last_epsilon_ = 1.0;
};

}  // namespace csr
