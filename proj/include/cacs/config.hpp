#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "cacs/vtime.hpp"

namespace cacs {

// One simulated IaaS cloud. Latencies model how the provider processes
// allocation requests; absolute values are deployment configuration, not
// asserted behavior.
struct BackendProfile {
  std::string name;
  int capacity = 128;                  // VM pool size
  VDur boot_latency = vseconds(10);    // base time from claim to UP
  VDur boot_jitter = 0;                // extra uniform [0, jitter] per VM
  int max_concurrent_boots = 0;        // 0 = unlimited
  double poll_bytes_per_s = 1000;      // front-end polling cost (the c1 term)
  bool has_failure_notifications = false;
  VDur restart_jitter = 0;             // extra uniform [0, jitter] per image download
};

struct ServiceConfig {
  std::string name = "cacs";

  // REST layer.
  int worker_pool_capacity = 100;

  // Remote execution (provisioning).
  int ssh_max_concurrent = 16;
  VDur ssh_command_latency = vseconds(2);
  VDur ssh_setup_latency = 0;
  bool ssh_reuse_connections = true;
  double exec_bytes_per_s = 5000;      // per live remote-exec worker (the c2 term)

  // Application start.
  VDur start_latency = vseconds(1);
  VDur default_checkpoint_period = vseconds(60);
  std::string checkpoint_dir = "/ckpt";

  // Workload runtime.
  VDur msg_hop = vseconds(0.05);

  // Checkpoint storage.
  double local_write_bandwidth_bps = 64.0 * 1024 * 1024;
  std::uint64_t local_quota_bytes = 0;  // 0 = unlimited
  double remote_bandwidth_bps = 1024 * 1024;
  VDur replication_retry = vseconds(5);

  // Monitoring.
  VDur heartbeat_period = vseconds(10);
  VDur heartbeat_link_latency = vseconds(1);
  VDur heartbeat_hook_cost = 0;
  VDur heartbeat_hook_timeout = vseconds(1);
  VDur heartbeat_probe_timeout = vseconds(3);

  // Optional write-through snapshot of the coordinators database.
  std::string db_snapshot_path;
};

struct Config {
  ServiceConfig service;
  std::map<std::string, BackendProfile> backends;

  static Config defaults();

  // INI-style file: [service] keys, plus one [backend.<name>] section per
  // profile. Unknown keys are rejected. Missing sections keep defaults.
  static Config load_file(const std::string& path);
  static Config parse(const std::string& text);
};

BackendProfile default_snooze_profile();
BackendProfile default_openstack_profile();

}  // namespace cacs
