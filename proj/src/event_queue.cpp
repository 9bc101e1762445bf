#include "cacs/event_queue.hpp"

#include <utility>

namespace cacs {

void EventQueue::at(VTime t, std::function<void()> fn) {
  if (t < now_) t = now_;
  pending_.push(Item{t, next_seq_++, std::move(fn)});
}

std::size_t EventQueue::advance(VTime until) {
  std::size_t fired = 0;
  while (!pending_.empty() && pending_.top().at <= until) {
    Item item = pending_.top();
    pending_.pop();
    now_ = item.at;
    item.fn();
    ++fired;
  }
  if (until > now_) now_ = until;
  return fired;
}

bool EventQueue::advance_until(const std::function<bool()>& pred, VTime limit) {
  if (pred()) return true;
  while (!pending_.empty()) {
    VTime t = pending_.top().at;
    if (t > limit) break;
    // Fire the whole timestamp group before re-testing.
    while (!pending_.empty() && pending_.top().at == t) {
      Item item = pending_.top();
      pending_.pop();
      now_ = t;
      item.fn();
    }
    if (pred()) return true;
  }
  return pred();
}

std::optional<VTime> EventQueue::next_time() const {
  if (pending_.empty()) return std::nullopt;
  return pending_.top().at;
}

}  // namespace cacs
