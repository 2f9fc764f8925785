// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <mutex>
#include <optional>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "csr/backend.hpp"
#include "csr/context.hpp"
#include "csr/event_log.hpp"
#include "csr/reconcile_step.hpp"

namespace csr {

/// A full assembled task sequence plus the cursors the client attaches to it.
struct VersionedQuery {
  TokenSeq tokens;
  /// Static length within `tokens`.
  std::size_t j = 0;
  /// Sequence version (number of evictions the client has applied).
  std::uint64_t k = 0;
  /// Length of the evicted static part of version k (old chunks only).
  std::optional<std::size_t> j_eps;
  /// Time the client built the query; used to report straggler age.
  double issued_at = 0.0;
};

enum class RoutingCase {
  Continuation,        // k_t == k
  Bridge,              // k_t == k + 1, secondary not ready: stitched onto the primary
  Swap,                // k_t == k + 1 == k_ready: resources exchanged
  StragglerBridge,     // k_t < k while reconciling: stitched onto the primary
  StragglerSecondary,  // k_t < k otherwise: verbatim on the secondary
};

constexpr std::string_view to_string(RoutingCase c) noexcept {
  switch (c) {
    case RoutingCase::Continuation: return "case1_continuation";
    case RoutingCase::Bridge: return "case2_bridge";
    case RoutingCase::Swap: return "case2_swap";
    case RoutingCase::StragglerBridge: return "case3_bridge";
    case RoutingCase::StragglerSecondary: return "case3_secondary";
  }
  return "unknown";
}

struct RoutingDecision {
  RoutingCase route_case = RoutingCase::Continuation;
  ResourceId resource = ResourceId::R1;
  /// True when the served sequence was rebuilt from the reconciliation state.
  bool stitched = false;
};

struct RouteOutcome {
  RoutingDecision decision;
  PrefillResult result;
  TokenSeq served;
};

/// Sent by the client when it applies an eviction and moves to version k + 1.
struct EvictionNotice {
  /// Static tokens of the evicted state (X_eps).
  TokenSeq evicted;
  std::uint64_t k_target = 0;
  /// |evicted|: where post-eviction chunks start in version k_target queries.
  std::size_t j_eps = 0;
  /// Static state the eviction was applied to. Lets the bridging state pick
  /// up chunks that arrived after the last continuation query.
  std::optional<TokenSeq> pre_eviction_static;
};

struct RouterConfig {
  /// Catch-up stops once the buffered bridge tokens are at most this many.
  std::size_t n_catchup = 0;
  /// Reject stragglers older than this many seconds; off when unset.
  std::optional<double> max_straggler_age;
  double retry_delay = 1.0;
  std::size_t max_retries = 3;
};

/// Movement of bridge increments through the catch-up buffer, in order.
struct BufferAudit {
  std::vector<TokenSeq> appended;
  /// Batches taken by catch-up prefills.
  std::vector<std::vector<TokenSeq>> drained;
  /// Batches dropped when a reconciliation started or finished (left for the
  /// next inference to recompute).
  std::vector<std::vector<TokenSeq>> discarded;
  /// Order in which batches left the buffer: true = drained, false = discarded.
  std::vector<bool> removal_order;
};

/// Per-query routing across a primary and a secondary resource with sequence
/// versioning, plus the background reconciliation that precomputes the next
/// version on the secondary.
///
/// route() runs on the foreground track, reconcile_step()/reconcile() on the
/// background track. The catch-up buffer, the cursors and the resource
/// handles share one mutex that is never held across a backend call, so the
/// swap and k_ready publication appear atomic to route().
class RequestRouter {
 public:
  RequestRouter(Backend& backend, RouterConfig cfg = {}, EventLog* log = nullptr)
      : cfg_(cfg), backend_(&backend), log_(log) {}

  RequestRouter(const RequestRouter&) = delete;
  RequestRouter& operator=(const RequestRouter&) = delete;

  RouteOutcome route(const VersionedQuery& q, double now = 0.0) {
    RouteOutcome out;
    std::uint64_t k_seen = 0, k_ready_seen = 0;
    std::optional<double> straggler_age;
    {
      std::lock_guard lock(mu_);
      if (q.j > q.tokens.size()) throw ProtocolViolation("static cursor exceeds query length");
      if (q.k > k_ + 1) throw ProtocolViolation("query version skips ahead of k + 1");
      if (q.k == k_ + 1 && q.j_eps) {
        if (!j_eps_) j_eps_ = q.j_eps;
        if (notice_j_eps_ && *q.j_eps != *notice_j_eps_)
          throw ProtocolViolation("query eviction cursor disagrees with eviction notice");
      }
      const TokenView tokens(q.tokens);
      const auto dyn = tokens.subspan(q.j);

      if (q.k == k_) {
        if (q.j > j_) {
          x_recon_.assign(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(q.j));
          j_ = q.j;
        }
        // j_t < j: stale duplicate of the active version, served as-is.
        out.decision = {RoutingCase::Continuation, primary_, false};
        out.served = q.tokens;
      } else if (q.k > k_) {
        if (q.k > k_ready_) {
          if (!j_eps_) throw ProtocolViolation("bridge query without an eviction cursor");
          const auto lo = *j_eps_;
          if (q.j > lo) {
            TokenSeq delta(tokens.begin() + static_cast<std::ptrdiff_t>(lo),
                           tokens.begin() + static_cast<std::ptrdiff_t>(q.j));
            append_tokens(x_recon_, delta);
            buffered_tokens_ += delta.size();
            audit_.appended.push_back(delta);
            buffer_.push_back(std::move(delta));
            j_eps_ = q.j;
          }
          out.decision = {RoutingCase::Bridge, primary_, true};
          out.served = concat(x_recon_, dyn);
        } else {
          std::swap(primary_, secondary_);
          reconciling_ = false;
          x_recon_.assign(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(q.j));
          j_ = q.j;
          k_ = q.k;
          j_eps_.reset();
          notice_j_eps_.reset();
          ++swaps_;
          out.decision = {RoutingCase::Swap, primary_, false};
          out.served = q.tokens;
        }
      } else {
        straggler_age = now - q.issued_at;
        if (cfg_.max_straggler_age && *straggler_age > *cfg_.max_straggler_age)
          throw ProtocolViolation("straggler query exceeds the configured maximum age");
        if (reconciling_) {
          // Keep the secondary free for the precomputation.
          out.decision = {RoutingCase::StragglerBridge, primary_, true};
          out.served = concat(x_recon_, dyn);
        } else {
          // The secondary still holds the previous version's cache.
          out.decision = {RoutingCase::StragglerSecondary, secondary_, false};
          out.served = q.tokens;
        }
      }
      k_seen = k_;
      k_ready_seen = k_ready_;
    }

    out.result = backend_->prefill(out.decision.resource, out.served);
    nlohmann::json rec = {{"time", now},
                          {"case", to_string(out.decision.route_case)},
                          {"k_t", q.k},
                          {"k", k_seen},
                          {"k_ready", k_ready_seen},
                          {"resource", to_string(out.decision.resource)},
                          {"stitched", out.decision.stitched},
                          {"ttft", out.result.ttft}};
    if (straggler_age) rec["straggler_age"] = *straggler_age;
    emit(std::move(rec));
    return out;
  }

  /// Starts precomputing version notice.k_target on the secondary: marks the
  /// router as reconciling (which fences stragglers off the secondary) and
  /// empties the catch-up buffer.
  void begin_reconcile(EvictionNotice notice, double now = 0.0) {
    std::lock_guard lock(mu_);
    if (reconciling_) throw ProtocolViolation("a reconciliation is already in flight");
    if (notice.k_target != k_ + 1) throw ProtocolViolation("reconciliation target must be k + 1");
    reconciling_ = true;
    discard_locked();
    x_eps_ = std::move(notice.evicted);
    j_eps_ = notice.j_eps;
    notice_j_eps_ = notice.j_eps;
    k_target_ = notice.k_target;
    if (notice.pre_eviction_static) {
      const auto& pre = *notice.pre_eviction_static;
      if (pre.size() > x_recon_.size() && std::equal(x_recon_.begin(), x_recon_.end(), pre.begin())) {
        x_recon_ = pre;
        j_ = pre.size();
      }
    }
    phase_ = Phase::Warmup;
    pending_prefill_ = true;
    emit({{"time", now}, {"event", "reconcile_start"}, {"k_target", k_target_}, {"sizes", {{"evicted", x_eps_.size()}}}});
  }

  /// One background action: the warm-up prefill, one catch-up prefill, or
  /// publishing k_ready once the buffer is small enough.
  ReconcileStep reconcile_step(double now = 0.0) {
    TokenSeq seq;
    ResourceId target;
    {
      std::lock_guard lock(mu_);
      if (phase_ == Phase::Idle) return {};
      if (!pending_prefill_) {
        if (buffered_tokens_ > cfg_.n_catchup) {
          audit_.drained.push_back({});
          for (auto& delta : buffer_) {
            append_tokens(x_eps_, delta);
            audit_.drained.back().push_back(std::move(delta));
          }
          audit_.removal_order.push_back(true);
          emit({{"time", now}, {"event", "catchup"}, {"sizes", {{"drained", buffered_tokens_}, {"evicted", x_eps_.size()}}}});
          buffer_.clear();
          buffered_tokens_ = 0;
          pending_prefill_ = true;
        } else {
          discard_locked();
          k_ready_ = k_target_;
          phase_ = Phase::Idle;
          emit({{"time", now}, {"event", "ready"}, {"k_ready", k_ready_}});
          return {ReconcileStep::Status::Done, now};
        }
      }
      seq = x_eps_;
      target = secondary_;
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
    pending_prefill_ = false;
    ++secondary_prefills_;
    return {ReconcileStep::Status::Prefilled, backend_->busy_until(target)};
  }

  /// Blocking form for a background thread.
  void reconcile(EvictionNotice notice) {
    begin_reconcile(std::move(notice));
    drive_reconcile();
  }

  /// Runs reconcile_step() until the target version is ready. Backend
  /// failures are retried up to cfg.max_retries times, then rethrown as
  /// BackendError with the router still reconciling.
  void drive_reconcile() {
    std::size_t retries = 0;
    for (;;) {
      const auto step = reconcile_step();
      if (step.status == ReconcileStep::Status::Done || step.status == ReconcileStep::Status::Idle) return;
      if (step.status == ReconcileStep::Status::Retry) {
        if (++retries > cfg_.max_retries) throw BackendError("reconciliation failed after retries");
        std::this_thread::sleep_for(std::chrono::duration<double>(cfg_.retry_delay));
      }
    }
  }

 private:
  template <class F>
  auto locked(F f) const {
    std::lock_guard lock(mu_);
    return f();
  }

 public:
  std::size_t j() const { return locked([&] { return j_; }); }
  std::uint64_t k() const { return locked([&] { return k_; }); }
  std::uint64_t k_ready() const { return locked([&] { return k_ready_; }); }
  std::optional<std::size_t> j_eps() const { return locked([&] { return j_eps_; }); }
  TokenSeq x_recon() const { return locked([&] { return x_recon_; }); }
  std::size_t recon_size() const { return locked([&] { return x_recon_.size(); }); }
  TokenSeq x_eps() const { return locked([&] { return x_eps_; }); }
  std::size_t buffered_tokens() const { return locked([&] { return buffered_tokens_; }); }
  ResourceId primary() const { return locked([&] { return primary_; }); }
  ResourceId secondary() const { return locked([&] { return secondary_; }); }
  bool is_reconciling() const { return locked([&] { return reconciling_; }); }
  std::size_t swap_count() const { return locked([&] { return swaps_; }); }
  std::size_t failure_count() const { return locked([&] { return failures_; }); }
  std::size_t secondary_prefills() const { return locked([&] { return secondary_prefills_; }); }
  BufferAudit audit() const { return locked([&] { return audit_; }); }
  /// Bridge increments currently waiting in the catch-up buffer.
  std::vector<TokenSeq> buffer() const { return locked([&] { return buffer_; }); }

 private:
  enum class Phase { Idle, Warmup, Catchup };

  void discard_locked() {
    if (buffer_.empty()) return;
    audit_.discarded.push_back(std::move(buffer_));
    audit_.removal_order.push_back(false);
    buffer_.clear();
    buffered_tokens_ = 0;
  }

  void emit(nlohmann::json record) {
    if (log_) log_->emit(std::move(record));
  }

  RouterConfig cfg_;
  Backend* backend_;
  EventLog* log_;

  mutable std::mutex mu_;
  std::size_t j_ = 0;
  std::uint64_t k_ = 0;
  std::uint64_t k_ready_ = 0;
  std::uint64_t k_target_ = 0;
  std::optional<std::size_t> j_eps_;
  std::optional<std::size_t> notice_j_eps_;
  TokenSeq x_recon_;
  TokenSeq x_eps_;
  std::vector<TokenSeq> buffer_;
  std::size_t buffered_tokens_ = 0;
  ResourceId primary_ = ResourceId::R1;
  ResourceId secondary_ = ResourceId::R2;
  bool reconciling_ = false;
  bool pending_prefill_ = false;
  Phase phase_ = Phase::Idle;
  std::size_t swaps_ = 0;
  std::size_t failures_ = 0;
  std::size_t secondary_prefills_ = 0;
  BufferAudit audit_;
};

}  // namespace csr
