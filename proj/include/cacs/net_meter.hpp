#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>

namespace cacs {

// Registry of open network flows, each a constant bytes/sec drain tagged with
// a category ("poll", "exec"). Experiments sample aggregate rates and compare
// them against the analytic worker-count model, so flows must be closed
// exactly when the worker that owns them stops.
class NetMeter {
 public:
  using FlowId = std::uint64_t;

  FlowId open(std::string category, double bytes_per_s);
  void close(FlowId id);  // unknown ids are ignored

  int count(const std::string& category) const;
  double rate(const std::string& category) const;
  double total_rate() const;
  std::size_t open_flows() const { return flows_.size(); }

 private:
  std::map<FlowId, std::pair<std::string, double>> flows_;
  FlowId next_id_ = 1;
};

}  // namespace cacs
