#include "cacs/config.hpp"

#include <fstream>
#include <sstream>

#include "cacs/errors.hpp"

namespace cacs {
namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  raise(ErrorCode::InvalidRequest, "config: bad boolean for " + key + ": " + v);
}

double parse_num(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    raise(ErrorCode::InvalidRequest, "config: bad number for " + key + ": " + v);
  }
}

void apply_service_key(ServiceConfig& svc, const std::string& key, const std::string& val) {
  if (key == "name") svc.name = val;
  else if (key == "worker_pool_capacity") svc.worker_pool_capacity = static_cast<int>(parse_num(val, key));
  else if (key == "ssh_max_concurrent") svc.ssh_max_concurrent = static_cast<int>(parse_num(val, key));
  else if (key == "ssh_command_latency_s") svc.ssh_command_latency = vseconds(parse_num(val, key));
  else if (key == "ssh_setup_latency_s") svc.ssh_setup_latency = vseconds(parse_num(val, key));
  else if (key == "ssh_reuse_connections") svc.ssh_reuse_connections = parse_bool(val, key);
  else if (key == "exec_bytes_per_s") svc.exec_bytes_per_s = parse_num(val, key);
  else if (key == "start_latency_s") svc.start_latency = vseconds(parse_num(val, key));
  else if (key == "default_checkpoint_period_s") svc.default_checkpoint_period = vseconds(parse_num(val, key));
  else if (key == "checkpoint_dir") svc.checkpoint_dir = val;
  else if (key == "msg_hop_s") svc.msg_hop = vseconds(parse_num(val, key));
  else if (key == "local_write_bandwidth_bps") svc.local_write_bandwidth_bps = parse_num(val, key);
  else if (key == "local_quota_bytes") svc.local_quota_bytes = static_cast<std::uint64_t>(parse_num(val, key));
  else if (key == "remote_bandwidth_bps") svc.remote_bandwidth_bps = parse_num(val, key);
  else if (key == "replication_retry_s") svc.replication_retry = vseconds(parse_num(val, key));
  else if (key == "heartbeat_period_s") svc.heartbeat_period = vseconds(parse_num(val, key));
  else if (key == "heartbeat_link_latency_s") svc.heartbeat_link_latency = vseconds(parse_num(val, key));
  else if (key == "heartbeat_hook_cost_s") svc.heartbeat_hook_cost = vseconds(parse_num(val, key));
  else if (key == "heartbeat_hook_timeout_s") svc.heartbeat_hook_timeout = vseconds(parse_num(val, key));
  else if (key == "heartbeat_probe_timeout_s") svc.heartbeat_probe_timeout = vseconds(parse_num(val, key));
  else if (key == "db_snapshot_path") svc.db_snapshot_path = val;
  else raise(ErrorCode::InvalidRequest, "config: unknown [service] key " + key);
}

void apply_backend_key(BackendProfile& b, const std::string& key, const std::string& val) {
  if (key == "capacity") b.capacity = static_cast<int>(parse_num(val, key));
  else if (key == "boot_latency_s") b.boot_latency = vseconds(parse_num(val, key));
  else if (key == "boot_jitter_s") b.boot_jitter = vseconds(parse_num(val, key));
  else if (key == "max_concurrent_boots") b.max_concurrent_boots = static_cast<int>(parse_num(val, key));
  else if (key == "poll_bytes_per_s") b.poll_bytes_per_s = parse_num(val, key);
  else if (key == "failure_notifications") b.has_failure_notifications = parse_bool(val, key);
  else if (key == "restart_jitter_s") b.restart_jitter = vseconds(parse_num(val, key));
  else raise(ErrorCode::InvalidRequest, "config: unknown backend key " + key);
}

}  // namespace

BackendProfile default_snooze_profile() {
  BackendProfile b;
  b.name = "snooze-sim";
  b.capacity = 128;
  b.boot_latency = vseconds(10);
  b.boot_jitter = 0;
  b.max_concurrent_boots = 0;
  b.poll_bytes_per_s = 1000;
  b.has_failure_notifications = true;
  b.restart_jitter = 0;
  return b;
}

BackendProfile default_openstack_profile() {
  BackendProfile b;
  b.name = "openstack-sim";
  b.capacity = 128;
  b.boot_latency = vseconds(30);
  b.boot_jitter = vseconds(6);
  b.max_concurrent_boots = 8;
  b.poll_bytes_per_s = 1000;
  b.has_failure_notifications = false;
  b.restart_jitter = vseconds(2);
  return b;
}

Config Config::defaults() {
  Config c;
  BackendProfile snooze = default_snooze_profile();
  BackendProfile openstack = default_openstack_profile();
  c.backends[snooze.name] = snooze;
  c.backends[openstack.name] = openstack;
  return c;
}

Config Config::parse(const std::string& text) {
  Config cfg = defaults();
  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') raise(ErrorCode::InvalidRequest, "config: bad section at line " + std::to_string(lineno));
      section = trim(t.substr(1, t.size() - 2));
      if (section.rfind("backend.", 0) == 0) {
        std::string name = section.substr(8);
        if (name.empty()) raise(ErrorCode::InvalidRequest, "config: empty backend name");
        if (!cfg.backends.count(name)) {
          BackendProfile b;
          b.name = name;
          cfg.backends[name] = b;
        }
      } else if (section != "service") {
        raise(ErrorCode::InvalidRequest, "config: unknown section [" + section + "]");
      }
      continue;
    }
    std::size_t eq = t.find('=');
    if (eq == std::string::npos) raise(ErrorCode::InvalidRequest, "config: missing '=' at line " + std::to_string(lineno));
    std::string key = trim(t.substr(0, eq));
    std::string val = trim(t.substr(eq + 1));
    if (section == "service") {
      apply_service_key(cfg.service, key, val);
    } else if (section.rfind("backend.", 0) == 0) {
      apply_backend_key(cfg.backends[section.substr(8)], key, val);
    } else {
      raise(ErrorCode::InvalidRequest, "config: key outside a section at line " + std::to_string(lineno));
    }
  }
  return cfg;
}

Config Config::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::InvalidRequest, "config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

}  // namespace cacs
