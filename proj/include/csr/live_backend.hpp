// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <chrono>
#include <cstdlib>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <httplib.h>
#include <json.hpp>

#include "csr/backend.hpp"
#include "csr/errors.hpp"

namespace csr {

/// Turns opaque token ids into prompt text. Each id maps to one short common
/// word, so equal token prefixes render to equal text prefixes and the
/// server's prefix cache sees the same stability as the token stream.
inline std::string render_tokens(TokenView seq) {
  static constexpr std::array<std::string_view, 64> words = {
      "the",   "of",    "and",   "to",    "in",    "is",    "it",    "that",  "for",   "on",    "was",
      "with",  "as",    "at",    "by",    "this",  "from",  "or",    "an",    "be",    "are",   "not",
      "have",  "one",   "all",   "can",   "her",   "his",   "they",  "we",    "you",   "out",   "up",
      "so",    "if",    "no",    "my",    "time",  "new",   "day",   "way",   "man",   "hand",  "part",
      "place", "year",  "home",  "room",  "door",  "table", "robot", "arm",   "left",  "right", "red",
      "blue",  "green", "box",   "cup",   "move",  "stop",  "look",  "near",  "far"};
  std::string out;
  out.reserve(seq.size() * 5);
  for (const auto t : seq) {
    out += ' ';
    out += words[t % words.size()];
  }
  return out;
}

struct UpstreamConfig {
  /// scheme://host[:port]; https needs a build with OpenSSL.
  std::string base_url;
  std::string path = "/v1/completions";
  std::string model;
};

struct LiveBackendConfig {
  std::array<UpstreamConfig, 2> upstreams;
  /// Environment variable holding the bearer token; unset or empty means no header.
  std::string api_key_env = "OPENAI_API_KEY";
  double timeout_seconds = 120.0;
};

/// Wall-clock backend talking to two OpenAI-compatible completion servers,
/// one per resource. TTFT runs from just before the request is sent to the
/// first streamed data event. The server's cache is opaque, so i_star is
/// never reported.
class LiveBackend final : public Backend {
 public:
  explicit LiveBackend(LiveBackendConfig cfg) : cfg_(std::move(cfg)), origin_(Clock::now()) {
    if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key && *key) api_key_ = key;
    for (std::size_t i = 0; i < 2; ++i) {
      const auto& up = cfg_.upstreams[i];
      if (up.base_url.empty()) throw DomainError("upstream base_url is empty");
      try {
        slots_[i].client = std::make_unique<httplib::Client>(up.base_url);
      } catch (const std::invalid_argument& e) {
        throw DomainError("unsupported upstream url '" + up.base_url + "': " + e.what());
      }
      if (!slots_[i].client->is_valid()) throw DomainError("unsupported upstream url '" + up.base_url + "'");
      const auto secs = static_cast<time_t>(cfg_.timeout_seconds);
      const auto usecs = static_cast<time_t>((cfg_.timeout_seconds - static_cast<double>(secs)) * 1e6);
      slots_[i].client->set_connection_timeout(secs, usecs);
      slots_[i].client->set_read_timeout(secs, usecs);
      slots_[i].client->set_write_timeout(secs, usecs);
    }
  }

  PrefillResult prefill(ResourceId resource, TokenView seq) override {
    if (seq.empty()) throw DomainError("prefill needs a non-empty sequence");
    auto& slot = slots_[index_of(resource)];
    std::lock_guard lock(slot.mu);
    const auto& up = cfg_.upstreams[index_of(resource)];

    httplib::Request req;
    req.method = "POST";
    req.path = up.path;
    req.set_header("Accept", "text/event-stream");
    if (api_key_) req.set_header("Authorization", "Bearer " + *api_key_);
    req.set_header("Content-Type", "application/json");
    req.body = nlohmann::json{{"model", up.model},
                              {"prompt", render_tokens(seq)},
                              {"max_tokens", 1},
                              {"stream", true},
                              {"temperature", 0}}
                   .dump();

    int status = 0;
    std::string pending, error_body;
    std::optional<Clock::time_point> first_data;
    bool saw_done = false;
    req.response_handler = [&](const httplib::Response& r) {
      status = r.status;
      return true;
    };
    req.content_receiver = [&](const char* data, size_t len, uint64_t, uint64_t) {
      if (status < 200 || status >= 300) {
        error_body.append(data, len);
        return true;
      }
      if (first_data) return true;
      pending.append(data, len);
      // SSE events are separated by blank lines; the first "data:" line that
      // is not the terminator carries the first generated token.
      std::size_t pos;
      while ((pos = pending.find('\n')) != std::string::npos) {
        std::string line = pending.substr(0, pos);
        pending.erase(0, pos + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.rfind("data:", 0) != 0) continue;
        std::string_view payload(line);
        payload.remove_prefix(5);
        while (!payload.empty() && payload.front() == ' ') payload.remove_prefix(1);
        if (payload == "[DONE]") {
          saw_done = true;
          continue;
        }
        first_data = Clock::now();
        break;
      }
      return true;
    };

    const auto start = Clock::now();
    auto res = slot.client->send(req);
    if (!res) throw TransportError("upstream " + up.base_url + ": " + httplib::to_string(res.error()));
    status = res->status;
    if (status < 200 || status >= 300)
      throw UpstreamProtocolError(status, "upstream " + up.base_url + " returned " + std::to_string(status) +
                                              (error_body.empty() ? "" : ": " + error_body.substr(0, 512)));
    if (!first_data)
      throw UpstreamProtocolError(status, saw_done ? "stream ended before any token" : "response was not an event stream");
    return {std::chrono::duration<double>(*first_data - start).count(), std::nullopt, 0};
  }

  /// Server caches cannot be flushed through the completions API; this only
  /// drops the keep-alive connection.
  void reset(ResourceId resource) override {
    auto& slot = slots_[index_of(resource)];
    std::lock_guard lock(slot.mu);
    slot.client->stop();
  }

  double busy_until(ResourceId resource) const override {
    (void)resource;
    return seconds_since_origin(Clock::now());
  }

  /// Seconds since construction on the monotonic clock.
  double now() const { return seconds_since_origin(Clock::now()); }

 private:
  using Clock = std::chrono::steady_clock;

  double seconds_since_origin(Clock::time_point t) const {
    return std::chrono::duration<double>(t - origin_).count();
  }

  struct Slot {
    std::unique_ptr<httplib::Client> client;
    std::mutex mu;
  };

  LiveBackendConfig cfg_;
  Clock::time_point origin_;
  std::optional<std::string> api_key_;
  std::array<Slot, 2> slots_;
};

}  // namespace csr
