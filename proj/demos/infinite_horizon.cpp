// SPDX-License-Identifier: Apache-2.0
// Ten eviction cycles with and without background reconciliation.

#include <iomanip>
#include <iostream>

#include "csr/csr.hpp"

int main() {
  using namespace csr::sim;
  for (const auto policy : {Policy::CsrAsr, Policy::CsrSyncEvict}) {
    ScenarioConfig cfg;
    cfg.policy = policy;
    const auto trace = run_scenario(cfg);
    const auto st = trace_stats(trace, cfg.spike_multiple, cfg.spike_window);
    std::cout << std::left << std::setw(16) << to_string(policy) << " queries=" << st.count
              << " evictions=" << trace.evictions << " mean=" << st.mean << "s p99=" << st.p99
              << "s max=" << st.max << "s spikes=" << st.spikes.size() << '\n';
  }
}
