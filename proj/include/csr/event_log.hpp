// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <mutex>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

namespace csr {

/// Append-only, thread-safe collection of JSON records, written out as
/// JSON lines. Shared by the scheduler, the router and the harness.
class EventLog {
 public:
  void emit(nlohmann::json record) {
    std::lock_guard lock(mu_);
    records_.push_back(std::move(record));
  }

  std::vector<nlohmann::json> snapshot() const {
    std::lock_guard lock(mu_);
    return records_;
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return records_.size();
  }

  /// Records whose "event" (or "case") field equals `name`.
  std::size_t count(const std::string& name) const {
    std::lock_guard lock(mu_);
    std::size_t n = 0;
    for (const auto& r : records_)
      if (r.value("event", "") == name || r.value("case", "") == name) ++n;
    return n;
  }

  void write_jsonl(std::ostream& os) const {
    std::lock_guard lock(mu_);
    for (const auto& r : records_) os << r.dump() << '\n';
  }

 private:
  mutable std::mutex mu_;
  std::vector<nlohmann::json> records_;
};

}  // namespace csr
