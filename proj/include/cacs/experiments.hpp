#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cacs/api.hpp"
#include "cacs/config.hpp"
#include "cacs/vtime.hpp"

namespace cacs {

// Analytic front-end traffic model: m polling workers at c1 bytes/s each and
// n remote-exec workers at c2 bytes/s each.
struct NetworkModel {
  double m = 0;
  double n = 0;
  double c1 = 0;
  double c2 = 0;
};

double traffic(const NetworkModel& model);

// One sampled value. `at` is virtual microseconds for time series; size-sweep
// scenarios (scaling, heartbeat, compare) put the cluster size there instead.
struct MetricPoint {
  VTime at = 0;
  std::string metric;
  double value = 0;
};

class MetricReport {
 public:
  explicit MetricReport(std::string scenario) : scenario_(std::move(scenario)) {}

  // Keeps each metric's samples ordered; out-of-order adds are a bug.
  void add(VTime at, const std::string& metric, double value);

  const std::string& scenario() const { return scenario_; }
  const std::vector<MetricPoint>& series() const { return series_; }
  std::vector<std::pair<double, double>> curve(const std::string& metric) const;

  Json& summary() { return summary_; }
  const Json& summary() const { return summary_; }

  std::string csv() const;
  Json to_json() const;

 private:
  std::string scenario_;
  std::vector<MetricPoint> series_;
  Json summary_ = Json::object();
};

struct ExperimentParams {
  std::uint64_t seed = 7;
  Config config = Config::defaults();
};

const std::vector<std::string>& experiment_names();

// Runs one built-in scenario on a fresh simulated world and returns its
// report. A violated scenario assertion raises Internal with the first
// failing check; unknown names raise InvalidRequest.
MetricReport run_experiment(const std::string& name, const ExperimentParams& params = {});

}  // namespace cacs
