// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "csr/context.hpp"
#include "csr/cost_model.hpp"
#include "csr/serialization.hpp"

namespace csr::sim {

enum class RunMode { Simulated, Live };
enum class Policy { CsrAsr, CsrSyncEvict, UnorderedBaseline };

inline std::string to_string(Policy p) {
  switch (p) {
    case Policy::CsrAsr: return "csr_asr";
    case Policy::CsrSyncEvict: return "csr_sync_evict";
    case Policy::UnorderedBaseline: return "unordered_baseline";
  }
  return "unknown";
}

inline Policy policy_from_string(const std::string& s) {
  if (s == "csr_asr") return Policy::CsrAsr;
  if (s == "csr_sync_evict") return Policy::CsrSyncEvict;
  if (s == "unordered_baseline") return Policy::UnorderedBaseline;
  throw FormatError("unknown policy '" + s + "'");
}

struct ScenarioConfig {
  std::size_t chunk_tokens = 100;
  double arrival_period = 0.3;
  double query_period = 0.5;
  /// Static prefix that is never evicted.
  std::size_t prefix_tokens = 2000;
  std::size_t suffix_tokens = 32;
  std::size_t task_tokens = 32;
  std::size_t tau_mem = 110000;
  std::size_t n_max = 131072;
  std::size_t n_catchup = 500;
  EvictionPolicy eviction = OldestHalf{};
  HardwareProfile profile = HardwareProfile{}.with_kappa(2e-9);
  /// Stop after this much scenario time; 0 disables the limit.
  double duration = 0.0;
  /// Stop at the trigger that would start cycle cycles + 1; 0 disables the limit.
  std::size_t cycles = 10;
  RunMode mode = RunMode::Simulated;
  Policy policy = Policy::CsrAsr;
  std::uint64_t seed = 1;
  /// A sample is a spike when it exceeds this multiple of the trailing median.
  double spike_multiple = 3.0;
  /// Number of preceding samples in the trailing median.
  std::size_t spike_window = 32;
  /// Token ids are drawn from [0, vocab).
  std::uint32_t vocab = 50000;

  void validate() const {
    if (chunk_tokens == 0) throw DomainError("chunk_tokens must be positive");
    if (!(arrival_period > 0.0) || !(query_period > 0.0)) throw DomainError("periods must be positive");
    if (tau_mem == 0 || tau_mem >= n_max) throw DomainError("need 0 < tau_mem < n_max");
    if (prefix_tokens >= tau_mem) throw DomainError("prefix must be shorter than tau_mem");
    if (duration < 0.0) throw DomainError("duration must be non-negative");
    if (!(spike_multiple > 1.0) || spike_window == 0) throw DomainError("bad spike detector settings");
    if (vocab == 0) throw DomainError("vocab must be positive");
    profile.validate();
  }
};

inline nlohmann::json to_json(const ScenarioConfig& c) {
  return {{"chunk_tokens", c.chunk_tokens},
          {"arrival_period", c.arrival_period},
          {"query_period", c.query_period},
          {"prefix_tokens", c.prefix_tokens},
          {"suffix_tokens", c.suffix_tokens},
          {"task_tokens", c.task_tokens},
          {"tau_mem", c.tau_mem},
          {"n_max", c.n_max},
          {"n_catchup", c.n_catchup},
          {"eviction", csr::to_json(c.eviction)},
          {"profile", csr::to_json(c.profile)},
          {"duration", c.duration},
          {"cycles", c.cycles},
          {"mode", c.mode == RunMode::Live ? "live" : "simulated"},
          {"policy", to_string(c.policy)},
          {"seed", c.seed},
          {"spike_multiple", c.spike_multiple},
          {"spike_window", c.spike_window},
          {"vocab", c.vocab}};
}

/// Missing fields keep their defaults.
inline ScenarioConfig scenario_from_json(const nlohmann::json& j) {
  using csr::detail::field_or;
  ScenarioConfig c;
  c.chunk_tokens = field_or(j, "chunk_tokens", c.chunk_tokens);
  c.arrival_period = field_or(j, "arrival_period", c.arrival_period);
  c.query_period = field_or(j, "query_period", c.query_period);
  c.prefix_tokens = field_or(j, "prefix_tokens", c.prefix_tokens);
  c.suffix_tokens = field_or(j, "suffix_tokens", c.suffix_tokens);
  c.task_tokens = field_or(j, "task_tokens", c.task_tokens);
  c.tau_mem = field_or(j, "tau_mem", c.tau_mem);
  c.n_max = field_or(j, "n_max", c.n_max);
  c.n_catchup = field_or(j, "n_catchup", c.n_catchup);
  if (j.contains("eviction")) c.eviction = policy_from_json(j.at("eviction"));
  if (j.contains("profile")) c.profile = profile_from_json(j.at("profile"));
  c.duration = field_or(j, "duration", c.duration);
  c.cycles = field_or(j, "cycles", c.cycles);
  const auto mode = field_or<std::string>(j, "mode", "simulated");
  if (mode != "simulated" && mode != "live") throw FormatError("mode must be 'simulated' or 'live'");
  c.mode = mode == "live" ? RunMode::Live : RunMode::Simulated;
  c.policy = policy_from_string(field_or<std::string>(j, "policy", to_string(c.policy)));
  c.seed = field_or(j, "seed", c.seed);
  c.spike_multiple = field_or(j, "spike_multiple", c.spike_multiple);
  c.spike_window = field_or(j, "spike_window", c.spike_window);
  c.vocab = field_or(j, "vocab", c.vocab);
  try {
    c.validate();
  } catch (const DomainError& e) {
    throw FormatError(std::string("invalid scenario: ") + e.what());
  }
  return c;
}

}  // namespace csr::sim
