#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <queue>
#include <vector>

#include "cacs/vtime.hpp"

namespace cacs {

// Discrete-event scheduler. Events fire in timestamp order; equal timestamps
// fire in insertion order. Time never moves backwards.
class EventQueue {
 public:
  VTime now() const { return now_; }

  // Schedules fn at absolute time t. t < now() clamps to now().
  void at(VTime t, std::function<void()> fn);

  // Schedules fn after a delay relative to now().
  void in(VDur delay, std::function<void()> fn) { at(now_ + delay, std::move(fn)); }

  // Schedules fn at the current instant, after already-queued work for now().
  void immediate(std::function<void()> fn) { at(now_, std::move(fn)); }

  // Fires every event with timestamp <= until, then sets now() = until.
  // Returns the number of events fired.
  std::size_t advance(VTime until);

  std::size_t run_for(VDur d) { return advance(now_ + d); }

  // Fires events one timestamp group at a time until pred() holds or the
  // queue is exhausted or now() would exceed limit. Returns true if pred
  // became true.
  bool advance_until(const std::function<bool()>& pred, VTime limit);

  bool empty() const { return pending_.empty(); }
  std::size_t size() const { return pending_.size(); }
  std::optional<VTime> next_time() const;

 private:
  struct Item {
    VTime at;
    std::uint64_t seq;
    std::function<void()> fn;
  };
  struct Later {
    bool operator()(const Item& a, const Item& b) const {
      if (a.at != b.at) return a.at > b.at;
      return a.seq > b.seq;
    }
  };

  VTime now_ = 0;
  std::uint64_t next_seq_ = 0;
  std::priority_queue<Item, std::vector<Item>, Later> pending_;
};

}  // namespace cacs
