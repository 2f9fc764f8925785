// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <chrono>
#include <cstdlib>
#include <mutex>
#include <random>
#include <thread>

#include "csr/live_backend.hpp"
#include "csr/sim/live_runner.hpp"
#include "test_support.hpp"

using namespace csr;

namespace {

/// Local OpenAI-style completions server speaking server-sent events.
class FakeUpstream {
 public:
  FakeUpstream() {
    server_.Post("/v1/completions", [this](const httplib::Request& req, httplib::Response& res) {
      {
        std::lock_guard lock(mu_);
        bodies_.push_back(nlohmann::json::parse(req.body));
        auth_ = req.get_header_value("Authorization");
      }
      res.set_chunked_content_provider("text/event-stream", [](size_t, httplib::DataSink& sink) {
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
        const std::string ev = "data: {\"choices\":[{\"text\":\" a\"}]}\r\n\r\n";
        sink.write(ev.data(), ev.size());
        const std::string done = "data: [DONE]\n\n";
        sink.write(done.data(), done.size());
        sink.done();
        return true;
      });
    });
    server_.Post("/fail", [](const httplib::Request&, httplib::Response& res) {
      res.status = 503;
      res.set_content("overloaded", "text/plain");
    });
    server_.Post("/empty", [](const httplib::Request&, httplib::Response& res) {
      res.set_content("data: [DONE]\n\n", "text/event-stream");
    });
    server_.Post("/plain", [](const httplib::Request&, httplib::Response& res) {
      res.set_content("{\"choices\":[]}", "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeUpstream() {
    server_.stop();
    thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

  std::vector<nlohmann::json> bodies() {
    std::lock_guard lock(mu_);
    return bodies_;
  }
  std::string auth() {
    std::lock_guard lock(mu_);
    return auth_;
  }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  std::mutex mu_;
  std::vector<nlohmann::json> bodies_;
  std::string auth_;
};

LiveBackendConfig config_for(const std::string& url, const std::string& path = "/v1/completions") {
  LiveBackendConfig cfg;
  cfg.upstreams = {UpstreamConfig{url, path, "m1"}, UpstreamConfig{url, path, "m2"}};
  cfg.api_key_env = "CSR_TEST_API_KEY";
  cfg.timeout_seconds = 5.0;
  return cfg;
}

}  // namespace

TEST(RenderTokens, PrefixStable) {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 100; ++i) {
    const auto a = testing_support::random_tokens(rng, 1 + rng() % 50);
    auto b = a;
    const auto more = testing_support::random_tokens(rng, 1 + rng() % 10);
    b.insert(b.end(), more.begin(), more.end());
    const auto ra = render_tokens(a), rb = render_tokens(b);
    EXPECT_EQ(rb.compare(0, ra.size(), ra), 0);
  }
  EXPECT_EQ(render_tokens(TokenSeq{0, 1, 64}), " the of the");
}

TEST(LiveBackend, MeasuresTimeToFirstEvent) {
  FakeUpstream up;
  ::setenv("CSR_TEST_API_KEY", "secret", 1);
  LiveBackend backend(config_for(up.url()));
  const auto r = backend.prefill(ResourceId::R2, TokenSeq{5, 6, 7});
  EXPECT_GE(r.ttft, 0.015);
  EXPECT_LT(r.ttft, 5.0);
  EXPECT_FALSE(r.i_star.has_value());
  const auto bodies = up.bodies();
  ASSERT_EQ(bodies.size(), 1u);
  EXPECT_EQ(bodies[0].at("model"), "m2");
  EXPECT_EQ(bodies[0].at("prompt"), render_tokens(TokenSeq{5, 6, 7}));
  EXPECT_EQ(bodies[0].at("max_tokens"), 1);
  EXPECT_EQ(bodies[0].at("stream"), true);
  EXPECT_EQ(up.auth(), "Bearer secret");
  ::unsetenv("CSR_TEST_API_KEY");
  backend.reset(ResourceId::R2);
  EXPECT_NO_THROW(backend.prefill(ResourceId::R2, TokenSeq{5}));
}

TEST(LiveBackend, HttpErrorStatus) {
  FakeUpstream up;
  LiveBackend backend(config_for(up.url(), "/fail"));
  try {
    backend.prefill(ResourceId::R1, TokenSeq{1});
    FAIL() << "expected UpstreamProtocolError";
  } catch (const UpstreamProtocolError& e) {
    EXPECT_EQ(e.status(), 503);
    EXPECT_NE(std::string(e.what()).find("overloaded"), std::string::npos);
  }
}

TEST(LiveBackend, StreamWithoutTokens) {
  FakeUpstream up;
  EXPECT_THROW(LiveBackend(config_for(up.url(), "/empty")).prefill(ResourceId::R1, TokenSeq{1}), UpstreamProtocolError);
  EXPECT_THROW(LiveBackend(config_for(up.url(), "/plain")).prefill(ResourceId::R1, TokenSeq{1}), UpstreamProtocolError);
}

TEST(LiveBackend, ConnectionRefused) {
  httplib::Server probe;
  const int port = probe.bind_to_any_port("127.0.0.1");
  probe.stop();
  LiveBackend backend(config_for("http://127.0.0.1:" + std::to_string(port)));
  EXPECT_THROW(backend.prefill(ResourceId::R1, TokenSeq{1}), TransportError);
}

TEST(LiveBackend, RejectsBadConfig) {
  EXPECT_THROW(LiveBackend(config_for("")), DomainError);
  EXPECT_THROW(LiveBackend(config_for("ftp://x")), DomainError);
  FakeUpstream up;
  LiveBackend backend(config_for(up.url()));
  EXPECT_THROW(backend.prefill(ResourceId::R1, TokenSeq{}), DomainError);
}

TEST(LiveRunner, ShortScenarioAgainstFakeUpstreams) {
  FakeUpstream up;
  LiveBackend backend(config_for(up.url()));
  sim::ScenarioConfig cfg;
  cfg.mode = sim::RunMode::Live;
  cfg.chunk_tokens = 10;
  cfg.arrival_period = 0.02;
  cfg.query_period = 0.1;
  cfg.prefix_tokens = 20;
  cfg.suffix_tokens = 4;
  cfg.task_tokens = 2;
  cfg.tau_mem = 150;
  cfg.n_max = 5000;
  cfg.n_catchup = 0;
  cfg.cycles = 0;
  cfg.duration = 1.5;
  const auto t = sim::run_live(cfg, backend);
  EXPECT_GE(t.samples.size(), 12u);
  EXPECT_GE(t.evictions, 1u);
  EXPECT_GE(t.swaps, 1u);
  for (const auto& s : t.samples) EXPECT_GE(s.ttft_seconds, 0.015);
  EXPECT_GE(up.bodies().size(), t.samples.size());
  cfg.duration = 0.0;
  EXPECT_THROW(sim::run_live(cfg, backend), DomainError);
}
