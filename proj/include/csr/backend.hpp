// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <mutex>
#include <optional>
#include <string_view>
#include <vector>

#include "csr/context.hpp"
#include "csr/cost_model.hpp"

namespace csr {

/// One of the two inference resources an engine owns.
enum class ResourceId : std::uint8_t { R1 = 0, R2 = 1 };

constexpr ResourceId other(ResourceId r) noexcept {
  return r == ResourceId::R1 ? ResourceId::R2 : ResourceId::R1;
}

constexpr std::size_t index_of(ResourceId r) noexcept { return static_cast<std::size_t>(r); }

constexpr std::string_view to_string(ResourceId r) noexcept {
  return r == ResourceId::R1 ? "R1" : "R2";
}

struct PrefillResult {
  /// Seconds spent on the prefill itself (excludes queueing).
  double ttft = 0.0;
  /// 1-based index matched against the resource cache; unknown in live mode.
  std::optional<std::size_t> i_star;
  Units charged_units = 0;
};

/// What a resource currently holds: the full sequence of its last prefill.
struct ResourceCacheState {
  TokenSeq cached_seq;
  double last_prefill_at = 0.0;
};

/// Abstract pair of inference resources.
///
/// At most one prefill may be in flight per resource; implementations are
/// called from at most two tracks, one per resource at a time.
class Backend {
 public:
  virtual ~Backend() = default;

  virtual PrefillResult prefill(ResourceId resource, TokenView seq) = 0;
  virtual void reset(ResourceId resource) = 0;
  /// Time at which the resource's queued work completes (scenario or wall clock).
  virtual double busy_until(ResourceId resource) const = 0;
};

/// Scenario clock shared by a simulation harness and its mock backend.
class VirtualClock {
 public:
  double now() const noexcept { return now_; }
  void advance_to(double t) noexcept { now_ = std::max(now_, t); }

 private:
  double now_ = 0.0;
};

/// Deterministic backend: each resource remembers the last sequence it
/// prefilled and charges kappa * ttft_units(|seq|, i*) for the next one.
///
/// Each resource is a serial server on the shared virtual clock. A prefill
/// issued at `now` starts at max(now, busy_until) and the cache reflects the
/// new sequence immediately; callers issue work in time order.
class MockBackend final : public Backend {
 public:
  struct Call {
    ResourceId resource;
    double start;
    double end;
    std::size_t seq_len;
    std::size_t i_star;
    Units charged_units;
  };

  MockBackend(HardwareProfile profile, const VirtualClock& clock) : profile_(profile), clock_(&clock) {
    profile_.validate();
  }

  PrefillResult prefill(ResourceId resource, TokenView seq) override {
    if (seq.empty()) throw DomainError("prefill needs a non-empty sequence");
    std::lock_guard lock(mu_);
    auto& slot = slots_[index_of(resource)];
    const auto i_star = first_differing_index(slot.cache.cached_seq, seq);
    const auto units = ttft_units(seq.size(), i_star);
    const double ttft = profile_.kappa() * static_cast<double>(units);
    const double start = std::max(clock_->now(), slot.busy_until);
    slot.busy_until = start + ttft;
    slot.cache.cached_seq.assign(seq.begin(), seq.end());
    slot.cache.last_prefill_at = start;
    calls_.push_back({resource, start, slot.busy_until, seq.size(), i_star, units});
    return {ttft, i_star, units};
  }

  void reset(ResourceId resource) override {
    std::lock_guard lock(mu_);
    slots_[index_of(resource)].cache.cached_seq.clear();
  }

  double busy_until(ResourceId resource) const override {
    std::lock_guard lock(mu_);
    return std::max(clock_->now(), slots_[index_of(resource)].busy_until);
  }

  ResourceCacheState cache(ResourceId resource) const {
    std::lock_guard lock(mu_);
    return slots_[index_of(resource)].cache;
  }

  std::vector<Call> call_log() const {
    std::lock_guard lock(mu_);
    return calls_;
  }

  std::optional<Call> last_call() const {
    std::lock_guard lock(mu_);
    if (calls_.empty()) return std::nullopt;
    return calls_.back();
  }

  std::size_t call_count() const {
    std::lock_guard lock(mu_);
    return calls_.size();
  }

  void clear_call_log() {
    std::lock_guard lock(mu_);
    calls_.clear();
  }

  const HardwareProfile& profile() const noexcept { return profile_; }

 private:
  struct Slot {
    ResourceCacheState cache;
    double busy_until = 0.0;
  };

  HardwareProfile profile_;
  const VirtualClock* clock_;
  mutable std::mutex mu_;
  std::array<Slot, 2> slots_{};
  std::vector<Call> calls_;
};

}  // namespace csr
