// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "csr/errors.hpp"

namespace csr {

/// Opaque token identifier. No tokenizer lives in this library; callers map
/// text to ids however they like, only equality matters here.
using Token = std::uint32_t;
using TokenSeq = std::vector<Token>;
using TokenView = std::span<const Token>;

/// 1-based index of the first position where `prev` and `next` disagree.
///
/// A position where exactly one of the sequences has already ended counts as
/// a disagreement, so a pure extension (or an identical sequence) yields
/// `prev.size() + 1`: every cached token of `prev` stays valid.
inline std::size_t first_differing_index(TokenView prev, TokenView next) noexcept {
  const auto common = std::min(prev.size(), next.size());
  const auto mm = std::mismatch(prev.begin(), prev.begin() + common, next.begin());
  const auto pos = static_cast<std::size_t>(mm.first - prev.begin());
  if (pos < common) return pos + 1;
  // One sequence is a prefix of the other.
  if (prev.size() <= next.size()) return prev.size() + 1;
  return next.size() + 1;
}

inline void append_tokens(TokenSeq& dst, TokenView src) {
  dst.insert(dst.end(), src.begin(), src.end());
}

inline TokenSeq concat(TokenView a, TokenView b) {
  TokenSeq out;
  out.reserve(a.size() + b.size());
  append_tokens(out, a);
  append_tokens(out, b);
  return out;
}

struct StateChunk {
  TokenSeq tokens;
  std::uint64_t chunk_id = 0;
  double created_at = 0.0;

  bool operator==(const StateChunk&) const = default;
};

/// Drop the first floor(n/2) chunks of an n-chunk log.
struct OldestHalf {
  bool operator==(const OldestHalf&) const = default;
};

/// Keep the newest ceil(keep * n) chunks, keep in (0, 1].
struct KeepNewestFraction {
  double keep = 0.5;
  bool operator==(const KeepNewestFraction&) const = default;
};

using EvictionPolicy = std::variant<OldestHalf, KeepNewestFraction>;

/// Number of leading (oldest) chunks a policy removes from an n-chunk log.
inline std::size_t chunks_to_drop(const EvictionPolicy& policy, std::size_t n) {
  if (const auto* f = std::get_if<KeepNewestFraction>(&policy)) {
    if (!(f->keep > 0.0 && f->keep <= 1.0))
      throw DomainError("keep_newest_fraction must lie in (0, 1]");
    // Small tolerance so that e.g. 0.1 * 1000 keeps exactly 100 chunks.
    auto keep = static_cast<std::size_t>(std::ceil(f->keep * static_cast<double>(n) - 1e-9));
    keep = std::clamp<std::size_t>(keep, n == 0 ? 0 : 1, n);
    return n - keep;
  }
  return n / 2;
}

inline std::string policy_name(const EvictionPolicy& policy) {
  if (const auto* f = std::get_if<KeepNewestFraction>(&policy))
    return "keep_newest_fraction(" + std::to_string(f->keep) + ")";
  return "oldest_half";
}

struct EvictionResult;

/// Cached state representation of one task stream.
///
/// The static part (prefix followed by the chunk log) is the region whose KV
/// state is reused between queries; suffix and task form the dynamic part that
/// is recomputed per query. Values of this type are snapshots: the free
/// functions below return modified copies.
class CsrContext {
 public:
  CsrContext() = default;
  explicit CsrContext(TokenSeq prefix) : prefix_(std::move(prefix)), static_(prefix_) {}

  const TokenSeq& prefix() const noexcept { return prefix_; }
  const std::vector<StateChunk>& chunks() const noexcept { return chunks_; }
  const TokenSeq& suffix() const noexcept { return suffix_; }
  const TokenSeq& task() const noexcept { return task_; }
  std::uint64_t seq_version() const noexcept { return seq_version_; }

  /// Token count of prefix plus all chunks.
  std::size_t static_cursor() const noexcept { return static_.size(); }
  std::size_t dynamic_size() const noexcept { return suffix_.size() + task_.size(); }
  std::size_t size() const noexcept { return static_cursor() + dynamic_size(); }

  /// Flattened prefix followed by chunks in id order.
  const TokenSeq& static_tokens() const noexcept { return static_; }

  std::size_t chunk_token_count() const noexcept { return static_.size() - prefix_.size(); }

  bool has_chunks() const noexcept { return !chunks_.empty(); }
  std::uint64_t last_chunk_id() const noexcept { return chunks_.empty() ? 0 : chunks_.back().chunk_id; }

  bool operator==(const CsrContext& o) const {
    return prefix_ == o.prefix_ && chunks_ == o.chunks_ && suffix_ == o.suffix_ &&
           task_ == o.task_ && seq_version_ == o.seq_version_;
  }

 private:
  friend CsrContext append_chunk(CsrContext ctx, StateChunk chunk);
  friend CsrContext set_dynamic(CsrContext ctx, TokenSeq suffix, TokenSeq task);
  friend EvictionResult evict(CsrContext ctx, const EvictionPolicy& policy);
  friend CsrContext with_version(CsrContext ctx, std::uint64_t version);

  TokenSeq prefix_;
  std::vector<StateChunk> chunks_;
  TokenSeq suffix_;
  TokenSeq task_;
  std::uint64_t seq_version_ = 0;
  TokenSeq static_;  // prefix_ ++ chunk tokens, kept in sync
};

struct EvictionResult {
  CsrContext context;
  /// |new static| / |old static|; 1 when nothing was evicted.
  double retained_fraction = 1.0;
};

/// Throws if `chunk` cannot be appended to `ctx`.
inline void check_appendable(const CsrContext& ctx, const StateChunk& chunk) {
  if (chunk.tokens.empty()) throw EmptyChunkError("state chunk has no tokens");
  if (ctx.has_chunks() && chunk.chunk_id <= ctx.last_chunk_id())
    throw ChunkOrderError("chunk_id " + std::to_string(chunk.chunk_id) +
                          " does not exceed last id " + std::to_string(ctx.last_chunk_id()));
}

/// Incremental extension of the static part by one chunk.
inline CsrContext append_chunk(CsrContext ctx, StateChunk chunk) {
  check_appendable(ctx, chunk);
  append_tokens(ctx.static_, chunk.tokens);
  ctx.chunks_.push_back(std::move(chunk));
  return ctx;
}

inline CsrContext set_dynamic(CsrContext ctx, TokenSeq suffix, TokenSeq task) {
  ctx.suffix_ = std::move(suffix);
  ctx.task_ = std::move(task);
  return ctx;
}

inline CsrContext with_version(CsrContext ctx, std::uint64_t version) {
  ctx.seq_version_ = version;
  return ctx;
}

/// Removes the oldest chunks according to `policy`. The prefix is never
/// touched. A non-empty log always bumps seq_version, even when the policy
/// drops nothing (a single chunk under oldest-half).
inline EvictionResult evict(CsrContext ctx, const EvictionPolicy& policy) {
  if (ctx.chunks_.empty()) return {std::move(ctx), 1.0};
  const auto old_static = ctx.static_.size();
  const auto drop = chunks_to_drop(policy, ctx.chunks_.size());
  std::size_t dropped_tokens = 0;
  for (std::size_t i = 0; i < drop; ++i) dropped_tokens += ctx.chunks_[i].tokens.size();
  ctx.chunks_.erase(ctx.chunks_.begin(), ctx.chunks_.begin() + static_cast<std::ptrdiff_t>(drop));
  const auto cut = static_cast<std::ptrdiff_t>(ctx.prefix_.size());
  ctx.static_.erase(ctx.static_.begin() + cut, ctx.static_.begin() + cut + static_cast<std::ptrdiff_t>(dropped_tokens));
  ++ctx.seq_version_;
  const double eps = static_cast<double>(ctx.static_.size()) / static_cast<double>(old_static);
  return {std::move(ctx), eps};
}

/// prefix ++ chunks ++ suffix ++ task.
inline TokenSeq assemble(const CsrContext& ctx) {
  TokenSeq out;
  out.reserve(ctx.size());
  append_tokens(out, ctx.static_tokens());
  append_tokens(out, ctx.suffix());
  append_tokens(out, ctx.task());
  return out;
}

/// Static part followed by an ad-hoc dynamic part, without building a new context.
inline TokenSeq assemble_with(const CsrContext& ctx, TokenView suffix, TokenView task) {
  TokenSeq out;
  out.reserve(ctx.static_cursor() + suffix.size() + task.size());
  append_tokens(out, ctx.static_tokens());
  append_tokens(out, suffix);
  append_tokens(out, task);
  return out;
}

}  // namespace csr
