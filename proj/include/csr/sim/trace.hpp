// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "csr/backend.hpp"
#include "csr/errors.hpp"

namespace csr::sim {

struct TtftSample {
  std::size_t query_index = 0;
  /// Time the query was issued.
  double scenario_time = 0.0;
  /// Queueing behind earlier work on the resource plus the prefill itself.
  double ttft_seconds = 0.0;
  std::string routing_case;
  /// Evictions triggered before this query; 0 is the initial fill.
  std::size_t eviction_cycle_index = 0;
  Units charged_units = 0;
  std::optional<std::size_t> i_star;
  ResourceId resource = ResourceId::R1;
  std::size_t seq_len = 0;
};

struct TtftTrace {
  std::vector<TtftSample> samples;
  std::vector<nlohmann::json> events;
  std::size_t evictions = 0;
  std::size_t swaps = 0;
  bool overflowed = false;
};

inline nlohmann::json to_json(const TtftSample& s) {
  nlohmann::json j = {{"query_index", s.query_index},
                      {"scenario_time", s.scenario_time},
                      {"ttft_seconds", s.ttft_seconds},
                      {"routing_case", s.routing_case},
                      {"eviction_cycle_index", s.eviction_cycle_index},
                      {"charged_units", s.charged_units},
                      {"resource", to_string(s.resource)},
                      {"seq_len", s.seq_len}};
  j["i_star"] = s.i_star ? nlohmann::json(*s.i_star) : nlohmann::json(nullptr);
  return j;
}

/// One JSON object per sample, then one per event (tagged "kind": "event").
inline void write_jsonl(const TtftTrace& trace, std::ostream& os) {
  for (const auto& s : trace.samples) {
    auto j = to_json(s);
    j["kind"] = "sample";
    os << j.dump() << '\n';
  }
  for (auto e : trace.events) {
    e["kind"] = "event";
    os << e.dump() << '\n';
  }
}

/// Linear interpolation between closest ranks, q in [0, 1].
inline double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw DomainError("percentile of an empty set");
  if (!(q >= 0.0 && q <= 1.0)) throw DomainError("quantile must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

inline double median(std::vector<double> values) { return percentile(std::move(values), 0.5); }

struct Spike {
  std::size_t sample = 0;
  std::size_t query_index = 0;
  std::size_t cycle = 0;
  double ttft_seconds = 0.0;
  double trailing_median = 0.0;
};

struct CycleSummary {
  std::size_t cycle = 0;
  std::size_t count = 0;
  double median = 0.0;
  double mean = 0.0;
  double p99 = 0.0;
  double max = 0.0;
};

struct TraceStats {
  std::size_t count = 0;
  double mean = 0.0;
  /// Population standard deviation.
  double std = 0.0;
  double p50 = 0.0;
  double p99 = 0.0;
  double max = 0.0;
  std::vector<CycleSummary> per_cycle;
  std::vector<Spike> spikes;

  /// (max - min) / min of the per-cycle medians for cycles in [first, last].
  double median_drift(std::size_t first, std::size_t last) const {
    std::optional<double> lo, hi;
    for (const auto& c : per_cycle) {
      if (c.cycle < first || c.cycle > last) continue;
      lo = lo ? std::min(*lo, c.median) : c.median;
      hi = hi ? std::max(*hi, c.median) : c.median;
    }
    if (!lo || !(*lo > 0.0)) throw DomainError("no positive cycle medians in range");
    return (*hi - *lo) / *lo;
  }
};

/// Order statistics, per-cycle summaries and spikes. A sample is a spike
/// when it exceeds `multiple` times the median of the up to `window`
/// samples before it; the first sample is never a spike.
inline TraceStats trace_stats(const TtftTrace& trace, double multiple = 3.0, std::size_t window = 32) {
  const auto& s = trace.samples;
  if (s.empty()) throw DomainError("trace_stats needs a non-empty trace");
  if (window == 0) throw DomainError("spike window must be positive");
  TraceStats st;
  st.count = s.size();
  std::vector<double> all;
  all.reserve(s.size());
  std::map<std::size_t, std::vector<double>> by_cycle;
  for (const auto& x : s) {
    all.push_back(x.ttft_seconds);
    by_cycle[x.eviction_cycle_index].push_back(x.ttft_seconds);
  }
  double sum = 0.0;
  for (double v : all) sum += v;
  st.mean = sum / static_cast<double>(all.size());
  double sq = 0.0;
  for (double v : all) sq += (v - st.mean) * (v - st.mean);
  st.std = std::sqrt(sq / static_cast<double>(all.size()));
  st.p50 = percentile(all, 0.5);
  st.p99 = percentile(all, 0.99);
  st.max = *std::max_element(all.begin(), all.end());

  for (const auto& [cycle, v] : by_cycle) {
    double cs = 0.0;
    for (double x : v) cs += x;
    st.per_cycle.push_back({cycle, v.size(), percentile(v, 0.5), cs / static_cast<double>(v.size()),
                            percentile(v, 0.99), *std::max_element(v.begin(), v.end())});
  }

  for (std::size_t i = 1; i < s.size(); ++i) {
    const auto from = i > window ? i - window : 0;
    const double m = median(std::vector<double>(all.begin() + static_cast<std::ptrdiff_t>(from),
                                                all.begin() + static_cast<std::ptrdiff_t>(i)));
    if (all[i] > multiple * m)
      st.spikes.push_back({i, s[i].query_index, s[i].eviction_cycle_index, all[i], m});
  }
  return st;
}

inline nlohmann::json to_json(const TraceStats& st) {
  nlohmann::json cycles = nlohmann::json::array();
  for (const auto& c : st.per_cycle)
    cycles.push_back({{"cycle", c.cycle}, {"count", c.count}, {"median", c.median}, {"mean", c.mean},
                      {"p99", c.p99}, {"max", c.max}});
  nlohmann::json spikes = nlohmann::json::array();
  for (const auto& sp : st.spikes)
    spikes.push_back({{"query_index", sp.query_index}, {"cycle", sp.cycle}, {"ttft_seconds", sp.ttft_seconds},
                      {"trailing_median", sp.trailing_median}});
  return {{"count", st.count}, {"mean", st.mean},     {"std", st.std},
          {"p50", st.p50},     {"p99", st.p99},       {"max", st.max},
          {"per_cycle", cycles}, {"spikes", spikes}, {"spike_count", st.spikes.size()}};
}

}  // namespace csr::sim
