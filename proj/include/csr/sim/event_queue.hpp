// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <queue>
#include <vector>

namespace csr::sim {

/// Kinds in tie-break order: at equal times background work runs first,
/// then chunk arrivals, then queries.
enum class EventKind : std::uint8_t { Background = 0, Chunk = 1, Query = 2 };

struct Event {
  double time = 0.0;
  EventKind kind = EventKind::Chunk;
  std::uint64_t seq = 0;
};

/// Min-heap on (time, kind, insertion order).
class EventQueue {
 public:
  void push(double time, EventKind kind) { heap_.push({time, kind, next_++}); }
  bool empty() const noexcept { return heap_.empty(); }
  std::size_t size() const noexcept { return heap_.size(); }
  const Event& top() const { return heap_.top(); }
  Event pop() {
    Event e = heap_.top();
    heap_.pop();
    return e;
  }

 private:
  struct Later {
    bool operator()(const Event& a, const Event& b) const noexcept {
      if (a.time != b.time) return a.time > b.time;
      if (a.kind != b.kind) return a.kind > b.kind;
      return a.seq > b.seq;
    }
  };
  std::priority_queue<Event, std::vector<Event>, Later> heap_;
  std::uint64_t next_ = 0;
};

}  // namespace csr::sim
