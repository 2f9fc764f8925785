// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include <json.hpp>

#include "csr/context.hpp"
#include "csr/cost_model.hpp"
#include "csr/errors.hpp"

namespace csr {

using nlohmann::json;

namespace detail {

template <class T>
T field(const json& j, const char* key) {
  if (!j.contains(key)) throw FormatError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad field '") + key + "': " + e.what());
  }
}

template <class T>
T field_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? field<T>(j, key) : fallback;
}

}  // namespace detail

inline json to_json(const StateChunk& c) {
  return {{"chunk_id", c.chunk_id}, {"tokens", c.tokens}, {"created_at", c.created_at}};
}

inline json to_json(const CsrContext& ctx) {
  json chunks = json::array();
  for (const auto& c : ctx.chunks()) chunks.push_back(to_json(c));
  return {{"prefix", ctx.prefix()},
          {"chunks", std::move(chunks)},
          {"suffix", ctx.suffix()},
          {"task", ctx.task()},
          {"seq_version", ctx.seq_version()}};
}

/// Rebuilds a context through append_chunk, so malformed logs are rejected
/// with the same errors as live appends.
inline CsrContext context_from_json(const json& j) {
  if (!j.is_object()) throw FormatError("context must be a JSON object");
  CsrContext ctx(detail::field_or<TokenSeq>(j, "prefix", {}));
  for (const auto& c : detail::field_or<json>(j, "chunks", json::array())) {
    StateChunk chunk{detail::field<TokenSeq>(c, "tokens"), detail::field<std::uint64_t>(c, "chunk_id"),
                     detail::field_or<double>(c, "created_at", 0.0)};
    ctx = append_chunk(std::move(ctx), std::move(chunk));
  }
  ctx = set_dynamic(std::move(ctx), detail::field_or<TokenSeq>(j, "suffix", {}),
                    detail::field_or<TokenSeq>(j, "task", {}));
  return with_version(std::move(ctx), detail::field_or<std::uint64_t>(j, "seq_version", 0));
}

inline json to_json(const EvictionPolicy& p) {
  if (const auto* f = std::get_if<KeepNewestFraction>(&p)) return {{"kind", "keep_newest_fraction"}, {"keep", f->keep}};
  return {{"kind", "oldest_half"}};
}

/// Accepts {"kind": ...} objects or the bare string "oldest_half".
inline EvictionPolicy policy_from_json(const json& j) {
  const auto kind = j.is_string() ? j.get<std::string>() : detail::field<std::string>(j, "kind");
  if (kind == "oldest_half") return OldestHalf{};
  if (kind == "keep_newest_fraction") {
    KeepNewestFraction f{detail::field<double>(j, "keep")};
    if (!(f.keep > 0.0 && f.keep <= 1.0)) throw FormatError("keep must lie in (0, 1]");
    return f;
  }
  throw FormatError("unknown eviction policy '" + kind + "'");
}

inline json to_json(const HardwareProfile& p) {
  return {{"layers", p.layers},           {"hidden_dim", p.hidden_dim}, {"cost_per_op", p.cost_per_op},
          {"device_flops", p.device_flops}, {"token_rate", p.token_rate}, {"kappa", p.kappa()}};
}

/// A "kappa" field, when present, overrides cost_per_op.
inline HardwareProfile profile_from_json(const json& j) {
  HardwareProfile p;
  p.layers = detail::field_or<std::uint32_t>(j, "layers", p.layers);
  p.hidden_dim = detail::field_or<std::uint32_t>(j, "hidden_dim", p.hidden_dim);
  p.cost_per_op = detail::field_or<double>(j, "cost_per_op", p.cost_per_op);
  p.device_flops = detail::field_or<double>(j, "device_flops", p.device_flops);
  p.token_rate = detail::field_or<double>(j, "token_rate", p.token_rate);
  try {
    if (j.contains("kappa")) p = p.with_kappa(detail::field<double>(j, "kappa"));
    p.validate();
  } catch (const DomainError& e) {
    throw FormatError(e.what());
  }
  return p;
}

inline json to_json(const FeasibilityReport& r) {
  json out = {{"warmup_time", r.warmup_time}, {"recon_time", r.recon_time}, {"feasible", r.feasible},
              {"delta_n", r.delta_n},         {"evicted_len", r.evicted_len}};
  out["time_to_oom"] = r.time_to_oom ? json(*r.time_to_oom) : json("unbounded");
  return out;
}

}  // namespace csr
