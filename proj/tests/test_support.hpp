// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "csr/backend.hpp"
#include "csr/context.hpp"
#include "csr/cost_model.hpp"

namespace testing_support {

inline csr::TokenSeq random_tokens(std::mt19937_64& rng, std::size_t n, std::uint32_t vocab = 50000) {
  csr::TokenSeq out(n);
  for (auto& t : out) t = static_cast<csr::Token>(rng() % vocab);
  return out;
}

/// Element scan: 1-based position of the first mismatch or of the first
/// position past the end of either sequence.
inline std::size_t scan_first_difference(const csr::TokenSeq& a, const csr::TokenSeq& b) {
  std::size_t i = 0;
  while (true) {
    if (i >= a.size() || i >= b.size()) return i + 1;
    if (a[i] != b[i]) return i + 1;
    ++i;
  }
}

/// Explicit loop over the charged positions.
inline std::uint64_t brute_units(std::uint64_t n, std::uint64_t i_star) {
  std::uint64_t sum = 0;
  for (std::uint64_t i = i_star; i <= n; ++i) sum += i;
  return sum;
}

inline csr::TokenSeq rebuild_static(const csr::CsrContext& ctx) {
  csr::TokenSeq out = ctx.prefix();
  for (const auto& c : ctx.chunks()) out.insert(out.end(), c.tokens.begin(), c.tokens.end());
  return out;
}

/// Oldest-half eviction applied to a flat token list split into chunk sizes.
inline csr::TokenSeq oldest_half_oracle(const csr::TokenSeq& prefix, const std::vector<csr::TokenSeq>& chunks) {
  csr::TokenSeq out = prefix;
  for (std::size_t i = chunks.size() / 2; i < chunks.size(); ++i)
    out.insert(out.end(), chunks[i].begin(), chunks[i].end());
  return out;
}

/// Decorator that fails selected calls to the wrapped backend.
class FaultyBackend final : public csr::Backend {
 public:
  explicit FaultyBackend(csr::Backend& inner) : inner_(&inner) {}

  /// Fail the next `n` prefills issued on `r`.
  void fail_next(csr::ResourceId r, int n) { failures_[csr::index_of(r)] = n; }

  csr::PrefillResult prefill(csr::ResourceId r, csr::TokenView seq) override {
    if (failures_[csr::index_of(r)] > 0) {
      --failures_[csr::index_of(r)];
      ++injected_;
      throw csr::TransportError("injected fault");
    }
    return inner_->prefill(r, seq);
  }
  void reset(csr::ResourceId r) override { inner_->reset(r); }
  double busy_until(csr::ResourceId r) const override { return inner_->busy_until(r); }

  int injected() const { return injected_; }

 private:
  csr::Backend* inner_;
  int failures_[2] = {0, 0};
  int injected_ = 0;
};

}  // namespace testing_support
