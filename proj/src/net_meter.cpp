#include "cacs/net_meter.hpp"

namespace cacs {

NetMeter::FlowId NetMeter::open(std::string category, double bytes_per_s) {
  FlowId id = next_id_++;
  flows_[id] = {std::move(category), bytes_per_s};
  return id;
}

void NetMeter::close(FlowId id) { flows_.erase(id); }

int NetMeter::count(const std::string& category) const {
  int n = 0;
  for (const auto& [id, flow] : flows_) {
    if (flow.first == category) ++n;
  }
  return n;
}

double NetMeter::rate(const std::string& category) const {
  double r = 0;
  for (const auto& [id, flow] : flows_) {
    if (flow.first == category) r += flow.second;
  }
  return r;
}

double NetMeter::total_rate() const {
  double r = 0;
  for (const auto& [id, flow] : flows_) r += flow.second;
  return r;
}

}  // namespace cacs
