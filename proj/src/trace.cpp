#include "cacs/trace.hpp"

#include <sstream>

namespace cacs {

void TraceLog::append(VTime at, std::string category, std::string text) {
  entries_.push_back(Entry{at, std::move(category), std::move(text)});
}

std::string TraceLog::dump() const {
  std::ostringstream out;
  for (const Entry& e : entries_) {
    out << "t=" << e.at << " [" << e.category << "] " << e.text << "\n";
  }
  return out.str();
}

std::vector<TraceLog::Entry> TraceLog::find(const std::string& category) const {
  std::vector<Entry> out;
  for (const Entry& e : entries_) {
    if (e.category == category) out.push_back(e);
  }
  return out;
}

}  // namespace cacs
