// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "csr/cost_model.hpp"
#include "csr/errors.hpp"
#include "csr/serialization.hpp"

namespace csr {

enum class IStarMode { Cold, StaticHit };

/// One measured TTFT. Cold: nothing cached (i* = 1). StaticHit: the first
/// static_len tokens are cached (i* = static_len + 1).
struct CalibrationAnchor {
  std::uint64_t seq_len = 0;
  IStarMode mode = IStarMode::Cold;
  std::uint64_t static_len = 0;
  double measured_seconds = 0.0;
  std::string label;

  Units units() const {
    return ttft_units(seq_len, mode == IStarMode::Cold ? 1 : static_len + 1);
  }
};

struct CalibrationResult {
  double kappa = 0.0;
  /// measured - kappa * units, per anchor in input order.
  std::vector<double> residuals;
  /// Residuals relative to the measurement.
  std::vector<double> relative_residuals;
  double rms_relative = 0.0;
};

/// Least-squares fit of seconds = kappa * units through the origin.
/// A single anchor is reproduced exactly.
inline CalibrationResult fit_kappa(const std::vector<CalibrationAnchor>& anchors) {
  if (anchors.empty()) throw DomainError("calibration needs at least one anchor");
  long double su = 0, ss = 0;
  for (const auto& a : anchors) {
    if (!(a.measured_seconds > 0.0)) throw DomainError("measured_seconds must be positive");
    const long double u = static_cast<long double>(a.units());
    if (u == 0) throw DomainError("anchor charges zero units (full cache hit)");
    su += u * u;
    ss += u * static_cast<long double>(a.measured_seconds);
  }
  CalibrationResult r;
  r.kappa = static_cast<double>(ss / su);
  double acc = 0.0;
  for (const auto& a : anchors) {
    const double res = a.measured_seconds - r.kappa * static_cast<double>(a.units());
    r.residuals.push_back(res);
    r.relative_residuals.push_back(res / a.measured_seconds);
    acc += r.relative_residuals.back() * r.relative_residuals.back();
  }
  r.rms_relative = std::sqrt(acc / static_cast<double>(anchors.size()));
  return r;
}

/// Reads {"anchors": [{seq_len, i_star_mode, static_len?, measured_seconds, label?}]}.
inline std::vector<CalibrationAnchor> anchors_from_json(const json& j) {
  std::vector<CalibrationAnchor> out;
  for (const auto& a : detail::field<json>(j, "anchors")) {
    CalibrationAnchor anchor;
    anchor.seq_len = detail::field<std::uint64_t>(a, "seq_len");
    const auto mode = detail::field<std::string>(a, "i_star_mode");
    if (mode == "cold") {
      anchor.mode = IStarMode::Cold;
    } else if (mode == "static_hit") {
      anchor.mode = IStarMode::StaticHit;
      anchor.static_len = detail::field<std::uint64_t>(a, "static_len");
      if (anchor.static_len > anchor.seq_len) throw FormatError("static_len exceeds seq_len");
    } else {
      throw FormatError("i_star_mode must be 'cold' or 'static_hit'");
    }
    anchor.measured_seconds = detail::field<double>(a, "measured_seconds");
    anchor.label = detail::field_or<std::string>(a, "label", "");
    out.push_back(std::move(anchor));
  }
  return out;
}

inline json to_json(const CalibrationResult& r, const std::vector<CalibrationAnchor>& anchors) {
  json rows = json::array();
  for (std::size_t i = 0; i < anchors.size(); ++i)
    rows.push_back({{"label", anchors[i].label},
                    {"seq_len", anchors[i].seq_len},
                    {"units", anchors[i].units()},
                    {"measured_seconds", anchors[i].measured_seconds},
                    {"predicted_seconds", r.kappa * static_cast<double>(anchors[i].units())},
                    {"residual", r.residuals[i]},
                    {"relative_residual", r.relative_residuals[i]}});
  return {{"kappa", r.kappa}, {"rms_relative", r.rms_relative}, {"anchors", std::move(rows)}};
}

}  // namespace csr
