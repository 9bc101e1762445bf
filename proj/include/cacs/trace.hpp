#pragma once

#include <string>
#include <vector>

#include "cacs/vtime.hpp"

namespace cacs {

// Append-only event log. Scenario runs with identical inputs must produce
// byte-identical dumps, so entries carry virtual timestamps, never wall time.
class TraceLog {
 public:
  struct Entry {
    VTime at;
    std::string category;
    std::string text;
  };

  void append(VTime at, std::string category, std::string text);

  const std::vector<Entry>& entries() const { return entries_; }
  std::string dump() const;
  void clear() { entries_.clear(); }

  // Entries in [from, to] whose category matches exactly.
  std::vector<Entry> find(const std::string& category) const;

 private:
  std::vector<Entry> entries_;
};

}  // namespace cacs
