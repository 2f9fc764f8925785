// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "csr/backend.hpp"
#include "csr/sim/client.hpp"

namespace csr::sim {

struct SweepResult {
  std::vector<std::size_t> n_values;
  std::vector<std::size_t> m_values;
  /// Per N: one fresh token ahead of the static part, nothing cached.
  std::vector<double> unordered;
  /// [m][n]: static part cached, M new dynamic tokens.
  std::vector<std::vector<double>> csr;
  std::vector<Units> unordered_units;
  std::vector<std::vector<Units>> csr_units;

  /// Rows: "unordered" then "M=<m>"; columns: N.
  std::string to_csv() const {
    std::ostringstream os;
    os.precision(9);
    os << "row";
    for (auto n : n_values) os << ",N=" << n;
    os << '\n' << "unordered";
    for (double v : unordered) os << ',' << v;
    os << '\n';
    for (std::size_t i = 0; i < m_values.size(); ++i) {
      os << "M=" << m_values[i];
      for (double v : csr[i]) os << ',' << v;
      os << '\n';
    }
    return os.str();
  }
};

/// Latency grid over static length N and dynamic length M on resource R1.
///
/// Per N the resource is reset and warmed with the static tokens, then each M
/// is measured as static + M fresh tokens, re-warming the static part before
/// every measurement. Works with any backend; with the mock backend the
/// TTFT values are exact cost-model charges.
inline SweepResult sweep_latency(Backend& backend, const std::vector<std::size_t>& n_values,
                                 const std::vector<std::size_t>& m_values, std::uint64_t seed = 1,
                                 std::uint32_t vocab = 50000) {
  if (n_values.empty() || m_values.empty()) throw DomainError("sweep needs non-empty N and M lists");
  SweepResult out{n_values, m_values, {}, std::vector<std::vector<double>>(m_values.size()), {},
                  std::vector<std::vector<Units>>(m_values.size())};
  TokenSource src(seed, vocab);
  const auto r = ResourceId::R1;
  for (const auto n : n_values) {
    if (n == 0) throw DomainError("static length must be positive");
    const TokenSeq stat = src.draw(n);

    backend.reset(r);
    TokenSeq cold{src.fresh()};
    append_tokens(cold, stat);
    const auto u = backend.prefill(r, cold);
    out.unordered.push_back(u.ttft);
    out.unordered_units.push_back(u.charged_units);

    backend.reset(r);
    for (std::size_t i = 0; i < m_values.size(); ++i) {
      backend.prefill(r, stat);
      const auto res = backend.prefill(r, concat(stat, src.draw(m_values[i])));
      out.csr[i].push_back(res.ttft);
      out.csr_units[i].push_back(res.charged_units);
    }
  }
  return out;
}

}  // namespace csr::sim
