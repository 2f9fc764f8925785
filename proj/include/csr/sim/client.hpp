// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <random>

#include "csr/context.hpp"
#include "csr/request_router.hpp"
#include "csr/sim/scenario.hpp"

namespace csr::sim {

/// Seeded token generator. Regular tokens come from [0, vocab); fresh()
/// hands out ids above the vocabulary that never repeat, which forces a
/// mismatch at the position where they are placed.
class TokenSource {
 public:
  TokenSource(std::uint64_t seed, std::uint32_t vocab) : rng_(seed), vocab_(vocab) {}

  TokenSeq draw(std::size_t n) {
    TokenSeq out(n);
    for (auto& t : out) t = static_cast<Token>(rng_() % vocab_);
    return out;
  }

  Token fresh() { return vocab_ + next_fresh_++; }

 private:
  std::mt19937_64 rng_;
  std::uint32_t vocab_;
  std::uint32_t next_fresh_ = 0;
};

/// The producer side of a scenario: owns the client's CSR context, appends
/// synthetic state chunks, applies evictions and builds versioned queries.
class ScenarioClient {
 public:
  explicit ScenarioClient(const ScenarioConfig& cfg)
      : cfg_(cfg), src_(cfg.seed, cfg.vocab), ctx_(src_.draw(cfg.prefix_tokens)), task_(src_.draw(cfg.task_tokens)) {}

  void append(double now) {
    ctx_ = append_chunk(std::move(ctx_), {src_.draw(cfg_.chunk_tokens), next_chunk_id_++, now});
  }

  bool over_threshold() const { return ctx_.static_cursor() >= cfg_.tau_mem; }

  /// Applies the eviction policy and returns the notice for the router.
  EvictionNotice evict_now() {
    TokenSeq pre = ctx_.static_tokens();
    auto ev = evict(std::move(ctx_), cfg_.eviction);
    ctx_ = std::move(ev.context);
    last_epsilon_ = ev.retained_fraction;
    j_eps_ = ctx_.static_cursor();
    ++evictions_;
    return {ctx_.static_tokens(), ctx_.seq_version(), *j_eps_, std::move(pre)};
  }

  /// Static part plus a fresh suffix and the fixed task.
  VersionedQuery next_query(double now) {
    const auto suffix = src_.draw(cfg_.suffix_tokens);
    return {assemble_with(ctx_, suffix, task_), ctx_.static_cursor(), ctx_.seq_version(), j_eps_, now};
  }

  /// One never-seen token followed by the assembled sequence.
  TokenSeq unordered_query() {
    const auto suffix = src_.draw(cfg_.suffix_tokens);
    TokenSeq out{src_.fresh()};
    append_tokens(out, assemble_with(ctx_, suffix, task_));
    return out;
  }

  const CsrContext& context() const noexcept { return ctx_; }
  std::uint64_t version() const noexcept { return ctx_.seq_version(); }
  std::size_t evictions() const noexcept { return evictions_; }
  double last_epsilon() const noexcept { return last_epsilon_; }

 private:
  ScenarioConfig cfg_;
  TokenSource src_;
  CsrContext ctx_;
  TokenSeq task_;
  std::uint64_t next_chunk_id_ = 1;
  std::optional<std::size_t> j_eps_;
  std::size_t evictions_ = 0;
  double last_epsilon_ = 1.0;
};

}  // namespace csr::sim
