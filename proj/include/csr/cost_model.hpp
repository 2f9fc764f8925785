// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>

#include "csr/errors.hpp"

namespace csr {

/// Summation units: the number of (token position) terms charged by a
/// prefill, i.e. sum of i over the recomputed positions.
using Units = std::uint64_t;

/// Sum of i for i in [i_star, seq_len], via the closed form
/// (seq_len - i_star + 1)(seq_len + i_star) / 2.
///
/// `i_star` is the 1-based first differing index; `seq_len + 1` means a full
/// cache hit and costs nothing.
inline Units ttft_units(std::uint64_t seq_len, std::uint64_t i_star) {
  if (i_star < 1 || i_star > seq_len + 1)
    throw DomainError("i_star " + std::to_string(i_star) + " outside [1, " +
                      std::to_string(seq_len + 1) + "]");
  __extension__ typedef unsigned __int128 wide;
  const wide count = static_cast<wide>(seq_len - i_star + 1);
  const wide ends = static_cast<wide>(seq_len) + static_cast<wide>(i_star);
  const wide total = count * ends / 2;  // one of the factors is always even
  if (total > std::numeric_limits<Units>::max()) throw DomainError("ttft_units overflows 64 bits");
  return static_cast<Units>(total);
}

/// Real-valued sum of i over [1, n] for a possibly fractional token count.
inline double cold_units(double n) noexcept { return n * (n + 1.0) / 2.0; }

/// Cost-model constants for one serving setup.
///
/// kappa() = cost_per_op * layers * hidden_dim converts summation units into
/// seconds and is the only constant the latency formulas consume.
struct HardwareProfile {
  std::uint32_t layers = 64;
  std::uint32_t hidden_dim = 5120;
  double cost_per_op = 2e-9 / (64.0 * 5120.0);
  double device_flops = 1e15;
  /// Tokens per second appended to the active context. Zero means no arrivals.
  double token_rate = 0.0;

  double kappa() const noexcept {
    return cost_per_op * static_cast<double>(layers) * static_cast<double>(hidden_dim);
  }

  /// Same architecture, cost_per_op rescaled so that kappa() == k.
  HardwareProfile with_kappa(double k) const {
    HardwareProfile p = *this;
    p.cost_per_op = k / (static_cast<double>(layers) * static_cast<double>(hidden_dim));
    p.validate();
    return p;
  }

  HardwareProfile with_token_rate(double rate) const {
    HardwareProfile p = *this;
    p.token_rate = rate;
    p.validate();
    return p;
  }

  void validate() const {
    if (layers == 0 || hidden_dim == 0) throw DomainError("layers and hidden_dim must be positive");
    if (!(cost_per_op > 0.0)) throw DomainError("cost_per_op must be positive");
    if (!(device_flops > 0.0)) throw DomainError("device_flops must be positive");
    if (!(token_rate >= 0.0)) throw DomainError("token_rate must be non-negative");
  }
};

inline double ttft_seconds(std::uint64_t seq_len, std::uint64_t i_star, const HardwareProfile& profile) {
  return profile.kappa() * static_cast<double>(ttft_units(seq_len, i_star));
}

/// Operation budget available within a deadline.
inline double flops_budget(double tau_max, double f_hw) {
  if (!(tau_max > 0.0) || !(f_hw > 0.0)) throw DomainError("flops_budget needs positive deadline and throughput");
  return tau_max * f_hw;
}

/// Smallest first-differing index whose prefill still fits in `tau_max`.
///
/// Cost is non-increasing in i_star, so a binary search over [1, seq_len + 1]
/// suffices. A negative deadline cannot be met even by a full hit; that case
/// returns the sentinel seq_len + 2.
inline std::uint64_t min_stable_prefix(std::uint64_t seq_len, const HardwareProfile& profile, double tau_max) {
  if (seq_len < 1) throw DomainError("min_stable_prefix needs seq_len >= 1");
  if (tau_max < 0.0) return seq_len + 2;
  std::uint64_t lo = 1, hi = seq_len + 1;  // hi always satisfies the budget
  while (lo < hi) {
    const auto mid = lo + (hi - lo) / 2;
    if (ttft_seconds(seq_len, mid, profile) <= tau_max)
      hi = mid;
    else
      lo = mid + 1;
  }
  return lo;
}

struct SpeedupRatio {
  /// ttft_units(n, 1) / ttft_units(n, n - delta + 1).
  double exact = 0.0;
  /// n / delta.
  double approximation = 0.0;
};

/// Cold prefill cost relative to recomputing only the trailing `delta` tokens.
inline SpeedupRatio speedup_ratio(std::uint64_t seq_len, std::uint64_t delta) {
  if (delta == 0 || delta >= seq_len) throw DomainError("speedup_ratio needs 0 < delta < seq_len");
  const double cold = static_cast<double>(ttft_units(seq_len, 1));
  const double warm = static_cast<double>(ttft_units(seq_len, seq_len - delta + 1));
  return {cold / warm, static_cast<double>(seq_len) / static_cast<double>(delta)};
}

struct FeasibilityReport {
  double warmup_time = 0.0;
  double recon_time = 0.0;
  /// Time until the active state hits n_max; nullopt when nothing arrives.
  std::optional<double> time_to_oom;
  bool feasible = true;
  /// Tokens that arrive while the secondary warms up.
  double delta_n = 0.0;
  /// Tokens left after eviction, epsilon * |T|.
  double evicted_len = 0.0;

  /// Slack in seconds (time_to_oom - warm - recon); nullopt when unbounded.
  std::optional<double> margin() const {
    if (!time_to_oom) return std::nullopt;
    return *time_to_oom - warmup_time - recon_time;
  }
};

/// Checks warm-up plus one catch-up pass against the time left before the
/// active state overflows.
///
///   warm  = kappa * E(E+1)/2              with E = epsilon * total_len
///   dN    = rate * warm
///   recon = kappa * dN (2E + dN + 1) / 2
///   oom   = (n_max - total_len) / rate
inline FeasibilityReport reconciliation_feasibility(double total_len, double epsilon, double n_max,
                                                    const HardwareProfile& profile) {
  profile.validate();
  if (total_len > n_max) throw DomainError("active state already exceeds n_max");
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw DomainError("epsilon must lie in (0, 1]");
  const double kappa = profile.kappa();
  const double rate = profile.token_rate;

  FeasibilityReport r;
  r.evicted_len = epsilon * total_len;
  r.warmup_time = kappa * cold_units(r.evicted_len);
  r.delta_n = rate * r.warmup_time;
  r.recon_time = kappa * r.delta_n * (2.0 * r.evicted_len + r.delta_n + 1.0) / 2.0;
  if (rate > 0.0) {
    r.time_to_oom = (n_max - total_len) / rate;
    r.feasible = r.warmup_time + r.recon_time <= *r.time_to_oom;
  } else {
    r.feasible = true;
  }
  return r;
}

}  // namespace csr
