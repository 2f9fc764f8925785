// SPDX-License-Identifier: Apache-2.0
// csrctl: scenario simulation, latency sweeps, feasibility grids, kappa
// calibration and live runs against OpenAI-compatible servers.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "csr/csr.hpp"
#include "csr/live_backend.hpp"
#include "csr/sim/live_runner.hpp"

namespace {

using csr::json;

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw csr::FormatError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw csr::FormatError(path + ": " + e.what());
  }
}

/// Writes to `path`, or stdout when it is empty or "-".
void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw csr::FormatError("cannot write " + path);
  out << text;
}

csr::sim::ScenarioConfig load_scenario(const std::string& path) {
  return path.empty() ? csr::sim::ScenarioConfig{} : csr::sim::scenario_from_json(read_json(path));
}

void write_trace(const csr::sim::TtftTrace& trace, const csr::sim::ScenarioConfig& cfg, const std::string& trace_path,
                 const std::string& stats_path) {
  if (!trace_path.empty()) {
    std::ostringstream os;
    csr::sim::write_jsonl(trace, os);
    emit(trace_path, os.str());
  }
  json stats = {{"samples", trace.samples.size()},
                {"evictions", trace.evictions},
                {"swaps", trace.swaps},
                {"overflowed", trace.overflowed},
                {"scenario", csr::sim::to_json(cfg)}};
  if (!trace.samples.empty())
    stats["stats"] = csr::sim::to_json(csr::sim::trace_stats(trace, cfg.spike_multiple, cfg.spike_window));
  emit(stats_path, stats.dump(2) + "\n");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CSR/ASR scheduling toolkit"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "run a scenario on the simulated backend");
  std::string scenario_path, trace_path, stats_path;
  std::string policy;
  std::size_t cycles = 0;
  double duration = -1.0;
  sim->add_option("-s,--scenario", scenario_path, "scenario JSON (defaults when omitted)");
  sim->add_option("--policy", policy, "csr_asr | csr_sync_evict | unordered_baseline");
  sim->add_option("--cycles", cycles, "override the eviction cycle count");
  sim->add_option("--duration", duration, "override the scenario duration (seconds)");
  sim->add_option("--trace", trace_path, "trace JSON-lines output");
  sim->add_option("--stats", stats_path, "stats JSON output (stdout by default)");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "N/M latency grid as CSV");
  std::vector<std::size_t> n_values{30000, 60000, 90000, 120000};
  std::vector<std::size_t> m_values{1, 1024, 2048, 4096, 8192};
  double kappa = 2e-9;
  std::uint64_t seed = 1;
  std::string out_path;
  sweep->add_option("--n", n_values, "static lengths")->delimiter(',');
  sweep->add_option("--m", m_values, "dynamic lengths")->delimiter(',');
  sweep->add_option("--kappa", kappa, "seconds per summation unit");
  sweep->add_option("--seed", seed);
  sweep->add_option("-o,--out", out_path, "CSV output (stdout by default)");

  // feasibility
  auto* feas = app.add_subcommand("feasibility", "analytic vs simulated reconciliation feasibility grid");
  csr::sim::FeasibilityGrid grid;
  double grid_kappa = grid.profile.kappa();
  std::string summary_path;
  feas->add_option("--eps", grid.epsilons, "retained fractions")->delimiter(',');
  feas->add_option("--rates", grid.rates, "token arrival rates (tokens/s)")->delimiter(',');
  feas->add_option("--n-max", grid.n_maxes, "memory caps (tokens)")->delimiter(',');
  feas->add_option("--total-len", grid.total_len, "static length at the trigger");
  feas->add_option("--chunk", grid.chunk_tokens, "tokens per chunk");
  feas->add_option("--prefix", grid.prefix_tokens, "non-evictable prefix tokens");
  feas->add_option("--n-catchup", grid.n_catchup, "catch-up stop threshold (tokens)");
  feas->add_option("--kappa", grid_kappa, "seconds per summation unit");
  feas->add_option("-o,--out", out_path, "CSV output (stdout by default)");
  feas->add_option("--summary", summary_path, "agreement summary JSON (stderr by default)");

  // calibrate
  auto* cal = app.add_subcommand("calibrate", "fit kappa to measured anchors");
  std::string fixture_path;
  cal->add_option("fixture", fixture_path, "fixture JSON with an 'anchors' list")->required();
  cal->add_option("-o,--out", out_path, "result JSON (stdout by default)");

  // live
  auto* live = app.add_subcommand("live", "run against two OpenAI-compatible upstreams");
  csr::LiveBackendConfig live_cfg;
  std::string model;
  std::vector<std::size_t> live_n, live_m;
  live->add_option("--r1", live_cfg.upstreams[0].base_url, "primary upstream base URL")->required();
  live->add_option("--r2", live_cfg.upstreams[1].base_url, "secondary upstream base URL")->required();
  live->add_option("--model", model, "model name sent to both upstreams")->required();
  live->add_option("--path", live_cfg.upstreams[0].path, "completions path");
  live->add_option("--api-key-env", live_cfg.api_key_env, "environment variable with the API key");
  live->add_option("--timeout", live_cfg.timeout_seconds, "request timeout (seconds)");
  live->add_option("-s,--scenario", scenario_path, "scenario JSON; needs a positive duration");
  live->add_option("--duration", duration, "override the scenario duration (seconds)");
  live->add_option("--sweep-n", live_n, "run an N/M sweep on R1 instead of a scenario")->delimiter(',');
  live->add_option("--sweep-m", live_m, "dynamic lengths for --sweep-n")->delimiter(',');
  live->add_option("--trace", trace_path, "trace JSON-lines output");
  live->add_option("--stats", stats_path, "stats JSON output (stdout by default)");
  live->add_option("-o,--out", out_path, "sweep CSV output (stdout by default)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) {
      auto cfg = load_scenario(scenario_path);
      if (!policy.empty()) cfg.policy = csr::sim::policy_from_string(policy);
      if (sim->count("--cycles")) cfg.cycles = cycles;
      if (duration >= 0.0) cfg.duration = duration;
      const auto trace = csr::sim::run_scenario(cfg);
      write_trace(trace, cfg, trace_path, stats_path);
    } else if (*sweep) {
      csr::VirtualClock clock;
      csr::MockBackend backend(csr::HardwareProfile{}.with_kappa(kappa), clock);
      emit(out_path, csr::sim::sweep_latency(backend, n_values, m_values, seed).to_csv());
    } else if (*feas) {
      grid.profile = grid.profile.with_kappa(grid_kappa);
      const auto map = csr::sim::feasibility_map(grid);
      emit(out_path, map.to_csv());
      const json summary = {{"points", map.points.size()},
                            {"agree", map.agree},
                            {"disagree", map.disagree},
                            {"boundary", map.boundary},
                            {"off_boundary_disagree", map.off_boundary_disagree}};
      if (summary_path.empty())
        std::cerr << summary.dump() << '\n';
      else
        emit(summary_path, summary.dump(2) + "\n");
    } else if (*cal) {
      const auto anchors = csr::anchors_from_json(read_json(fixture_path));
      emit(out_path, csr::to_json(csr::fit_kappa(anchors), anchors).dump(2) + "\n");
    } else if (*live) {
      live_cfg.upstreams[1].path = live_cfg.upstreams[0].path;
      for (auto& up : live_cfg.upstreams) up.model = model;
      csr::LiveBackend backend(live_cfg);
      if (!live_n.empty()) {
        if (live_m.empty()) live_m = {1, 1024};
        emit(out_path, csr::sim::sweep_latency(backend, live_n, live_m).to_csv());
      } else {
        auto cfg = load_scenario(scenario_path);
        cfg.mode = csr::sim::RunMode::Live;
        if (duration >= 0.0) cfg.duration = duration;
        const auto trace = csr::sim::run_live(cfg, backend);
        write_trace(trace, cfg, trace_path, stats_path);
      }
    }
  } catch (const csr::Error& e) {
    std::cerr << "csrctl: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
