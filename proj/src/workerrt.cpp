#include "cacs/workerrt.hpp"

#include <algorithm>
#include <utility>

#include "cacs/errors.hpp"
#include "cacs/rng.hpp"

namespace cacs {

namespace {
constexpr std::uint64_t kFold = 6364136223846793005ULL;
constexpr std::uint64_t kPaddingStream = 0x9ad9f00dULL;
}  // namespace

struct AppRuntime::Core {
  EventQueue& clock;
  TraceLog& trace;
  std::uint64_t app_id = 0;
  std::uint64_t coordinator_id = 0;
  WorkloadSpec spec;
  VDur msg_hop = 0;

  struct Daemon {
    ProcessState st;
    bool healthy = true;
  };
  std::vector<Daemon> daemons;

  struct Flight {
    std::uint32_t dest = 0;
    WireMessage msg;
  };
  std::map<std::uint64_t, Flight> flight;  // send order
  std::uint64_t next_seq = 1;

  std::uint64_t sent = 0;
  std::uint64_t delivered = 0;
  std::uint64_t rounds_done = 0;
  bool frozen = false;
  bool stopped = false;
  bool done = false;

  CheckpointSink sink;
  bool periodic = false;
  VDur period = 0;
  bool app_initiated = false;
  std::uint64_t timer_epoch = 0;

  Core(EventQueue& c, TraceLog& t) : clock(c), trace(t) {}

  std::size_t n() const { return daemons.size(); }

  std::uint64_t draw(Daemon& d) {
    SplitMix64 r(0);
    r.state = d.st.rng_state;
    std::uint64_t c = r.next();
    d.st.rng_state = r.state;
    return c;
  }

  std::vector<std::uint8_t> filler(std::uint32_t src, std::uint64_t round) const {
    std::vector<std::uint8_t> p(spec.payload_bytes_per_msg);
    for (std::size_t j = 0; j < p.size(); ++j) {
      p[j] = static_cast<std::uint8_t>(src * 131 + round * 31 + j);
    }
    return p;
  }

  void send(const std::shared_ptr<Core>& self, std::uint32_t src, std::uint32_t dest,
            std::uint64_t round, std::uint64_t value) {
    WireMessage m{src, round, value, filler(src, round)};
    std::uint64_t seq = next_seq++;
    flight[seq] = Flight{dest, std::move(m)};
    ++sent;
    clock.in(msg_hop, [self, seq] { self->deliver(self, seq); });
  }

  void deliver(const std::shared_ptr<Core>& self, std::uint64_t seq) {
    if (stopped) return;
    auto it = flight.find(seq);
    if (it == flight.end()) return;  // drained into an inbox by a checkpoint
    std::uint32_t dest = it->second.dest;
    WireMessage msg = std::move(it->second.msg);
    flight.erase(it);
    process(self, dest, msg);
  }

  void process(const std::shared_ptr<Core>& self, std::uint32_t dest, const WireMessage& msg) {
    ++delivered;
    Daemon& d = daemons[dest];
    if (spec.kind == WorkloadKind::SingleCounter) {
      std::uint64_t c = draw(d);
      d.st.accumulator = d.st.accumulator * kFold + c;
      d.st.iteration = msg.round;
      rounds_done = msg.round;
      if (msg.round < spec.iterations) {
        send(self, 0, 0, msg.round + 1, 0);
        maybe_app_checkpoint(self);
      } else {
        finish();
      }
      return;
    }
    if (dest != 0) {
      std::uint64_t c = draw(d);
      d.st.accumulator += c;
      d.st.iteration = msg.round;
      send(self, dest, (dest + 1) % static_cast<std::uint32_t>(n()), msg.round, msg.value + c);
      return;
    }
    // Token back at the origin: fold and open the next round.
    d.st.accumulator = d.st.accumulator * kFold + msg.value;
    d.st.iteration = msg.round;
    rounds_done = msg.round;
    if (msg.round < spec.iterations) {
      begin_round(self, msg.round + 1);
      maybe_app_checkpoint(self);
    } else {
      finish();
    }
  }

  void begin_round(const std::shared_ptr<Core>& self, std::uint64_t round) {
    Daemon& d0 = daemons[0];
    std::uint64_t c = draw(d0);
    d0.st.accumulator += c;
    send(self, 0, 1 % static_cast<std::uint32_t>(n()), round, c);
  }

  void finish() {
    done = true;
    trace.append(clock.now(), "app",
                 "app " + std::to_string(app_id) + " completed " +
                     std::to_string(rounds_done) + " iterations");
  }

  // An iteration boundary just opened the next round; with an app-initiated
  // policy the cut is taken right here, in-flight token included.
  void maybe_app_checkpoint(const std::shared_ptr<Core>& self) {
    if (!app_initiated || frozen || stopped || done) return;
    do_policy_checkpoint(self);
  }

  std::vector<std::vector<std::uint8_t>> quiesce() {
    if (stopped) raise(ErrorCode::QuiesceTimeout, "daemons are gone; quiesce cannot complete");
    if (frozen) raise(ErrorCode::StateConflict, "checkpoint already in flight");
    frozen = true;
    for (auto& [seq, fl] : flight) {
      daemons[fl.dest].st.inbox.push_back(std::move(fl.msg));
    }
    flight.clear();
    std::vector<std::vector<std::uint8_t>> blobs;
    blobs.reserve(n());
    for (const Daemon& d : daemons) blobs.push_back(encode_process_state(d.st));
    trace.append(clock.now(), "app",
                 "app " + std::to_string(app_id) + " quiesced at iteration " +
                     std::to_string(rounds_done));
    return blobs;
  }

  void resume(const std::shared_ptr<Core>& self) {
    if (stopped || !frozen) return;
    frozen = false;
    trace.append(clock.now(), "app", "app " + std::to_string(app_id) + " resumed");
    // Drain from the live inboxes one message at a time: processing can
    // trigger a nested policy checkpoint, and anything not yet processed
    // must still be sitting in an inbox for that cut to capture.
    for (std::uint32_t i = 0; i < n() && !stopped && !frozen; ++i) {
      while (!stopped && !frozen && !daemons[i].st.inbox.empty()) {
        WireMessage m = std::move(daemons[i].st.inbox.front());
        daemons[i].st.inbox.erase(daemons[i].st.inbox.begin());
        process(self, i, m);
      }
    }
    if (!stopped && !frozen && periodic && !done) schedule_periodic(self);
  }

  // Each (re)schedule supersedes any timer still in flight, so a user
  // checkpoint's resume cannot fork a second periodic chain.
  void schedule_periodic(const std::shared_ptr<Core>& self) {
    const std::uint64_t epoch = ++timer_epoch;
    clock.in(period, [self, epoch] {
      if (epoch != self->timer_epoch) return;
      if (self->stopped || self->done) return;
      if (self->frozen) {
        self->schedule_periodic(self);
        return;
      }
      self->do_policy_checkpoint(self);
    });
  }

  void do_policy_checkpoint(const std::shared_ptr<Core>& self) {
    std::vector<std::vector<std::uint8_t>> blobs = quiesce();
    VDur write_time = sink ? sink(blobs) : 0;
    clock.in(write_time, [self] { self->resume(self); });
  }
};

AppRuntime::AppRuntime(std::shared_ptr<Core> core) : core_(std::move(core)) {
  handle_.coordinator_id = core_->coordinator_id;
  handle_.app_id = core_->app_id;
  for (std::uint32_t i = 0; i < core_->n(); ++i) handle_.members.push_back(i);
}

AppRuntime::~AppRuntime() {
  if (core_) core_->stopped = true;
}

namespace {

void check_cluster_fit(const WorkloadSpec& spec, std::size_t cluster_size) {
  if (spec.kind == WorkloadKind::RingSum && cluster_size < 2) {
    raise(ErrorCode::ClusterMismatch, "ring workload needs at least 2 processes");
  }
  if (spec.kind == WorkloadKind::SingleCounter && cluster_size != 1) {
    raise(ErrorCode::ClusterMismatch, "counter workload runs on exactly 1 process");
  }
}

}  // namespace

std::unique_ptr<AppRuntime> AppRuntime::start(std::uint64_t app_id, std::uint64_t coordinator_id,
                                              const WorkloadSpec& spec, std::size_t cluster_size,
                                              std::uint64_t seed, VDur msg_hop, EventQueue& clock,
                                              TraceLog& trace) {
  check_cluster_fit(spec, cluster_size);
  auto core = std::make_shared<Core>(clock, trace);
  core->app_id = app_id;
  core->coordinator_id = coordinator_id;
  core->spec = spec;
  core->msg_hop = msg_hop;
  core->daemons.resize(cluster_size);
  std::size_t pad = spec.state_bytes_total / cluster_size;
  for (std::uint32_t i = 0; i < cluster_size; ++i) {
    Core::Daemon& d = core->daemons[i];
    d.st.vm_index = i;
    d.st.rng_state = mix_seed(seed, i);
    SplitMix64 pad_rng(mix_seed(mix_seed(seed, kPaddingStream), i));
    d.st.padding.resize(pad);
    for (auto& b : d.st.padding) b = static_cast<std::uint8_t>(pad_rng.next());
  }
  trace.append(clock.now(), "app",
               "app " + std::to_string(app_id) + " coordinator " +
                   std::to_string(coordinator_id) + " started (" +
                   std::to_string(cluster_size) + " daemons)");
  return std::unique_ptr<AppRuntime>(new AppRuntime(std::move(core)));
}

std::unique_ptr<AppRuntime> AppRuntime::restart(std::uint64_t app_id, std::uint64_t coordinator_id,
                                                const WorkloadSpec& spec, std::size_t cluster_size,
                                                const std::vector<std::vector<std::uint8_t>>& blobs,
                                                VDur msg_hop, EventQueue& clock, TraceLog& trace) {
  check_cluster_fit(spec, cluster_size);
  if (blobs.size() != cluster_size) {
    raise(ErrorCode::CountMismatch, "need " + std::to_string(cluster_size) + " images, got " +
                                        std::to_string(blobs.size()));
  }
  auto core = std::make_shared<Core>(clock, trace);
  core->app_id = app_id;
  core->coordinator_id = coordinator_id;
  core->spec = spec;
  core->msg_hop = msg_hop;
  core->daemons.resize(cluster_size);
  std::vector<bool> seen(cluster_size, false);
  for (const auto& blob : blobs) {
    ProcessState st = decode_process_state(blob);
    if (st.vm_index >= cluster_size || seen[st.vm_index]) {
      raise(ErrorCode::CountMismatch, "images do not cover process indices exactly once");
    }
    seen[st.vm_index] = true;
    core->daemons[st.vm_index].st = std::move(st);
  }
  core->rounds_done = core->daemons[0].st.iteration;
  core->done = core->rounds_done >= spec.iterations;
  // Carried-over inbox messages were sent by the previous incarnation.
  for (const auto& d : core->daemons) core->sent += d.st.inbox.size();
  core->frozen = true;  // run() releases the cut
  trace.append(clock.now(), "app",
               "app " + std::to_string(app_id) + " coordinator " +
                   std::to_string(coordinator_id) + " restarted at iteration " +
                   std::to_string(core->rounds_done));
  return std::unique_ptr<AppRuntime>(new AppRuntime(std::move(core)));
}

void AppRuntime::run() {
  auto& c = *core_;
  if (c.stopped) raise(ErrorCode::StateConflict, "runtime already stopped");
  if (c.frozen) {
    // Restarted incarnation: releasing the cut resumes computation.
    c.resume(core_);
    return;
  }
  if (c.done) return;
  if (c.spec.kind == WorkloadKind::SingleCounter) {
    c.send(core_, 0, 0, 1, 0);
  } else {
    c.begin_round(core_, 1);
  }
  if (c.periodic) c.schedule_periodic(core_);
}

std::vector<std::vector<std::uint8_t>> AppRuntime::checkpoint() { return core_->quiesce(); }

void AppRuntime::resume_after(VDur delay) {
  auto core = core_;
  core_->clock.in(delay, [core] { core->resume(core); });
}

void AppRuntime::stop() {
  if (core_->stopped) return;
  core_->stopped = true;
  core_->trace.append(core_->clock.now(), "app",
                      "app " + std::to_string(core_->app_id) + " coordinator " +
                          std::to_string(core_->coordinator_id) + " stopped");
}

bool AppRuntime::completed() const { return core_->done; }
std::uint64_t AppRuntime::iterations_done() const { return core_->rounds_done; }
std::uint64_t AppRuntime::final_output() const { return core_->daemons[0].st.accumulator; }
std::size_t AppRuntime::size() const { return core_->n(); }
bool AppRuntime::stopped() const { return core_->stopped; }
bool AppRuntime::frozen() const { return core_->frozen; }

void AppRuntime::set_health(std::uint32_t vm_index, bool healthy) {
  if (vm_index >= core_->n()) {
    raise(ErrorCode::UnknownDaemon, "no daemon at index " + std::to_string(vm_index));
  }
  core_->daemons[vm_index].healthy = healthy;
}

bool AppRuntime::hook_healthy(std::uint32_t vm_index) const {
  if (vm_index >= core_->n()) {
    raise(ErrorCode::UnknownDaemon, "no daemon at index " + std::to_string(vm_index));
  }
  return core_->daemons[vm_index].healthy;
}

void AppRuntime::set_checkpoint_sink(CheckpointSink sink) { core_->sink = std::move(sink); }

void AppRuntime::enable_periodic(VDur period) {
  core_->periodic = true;
  core_->period = period;
}

void AppRuntime::enable_app_initiated() { core_->app_initiated = true; }

std::uint64_t AppRuntime::messages_sent() const { return core_->sent; }
std::uint64_t AppRuntime::messages_delivered() const { return core_->delivered; }
std::size_t AppRuntime::in_flight() const { return core_->flight.size(); }

std::size_t AppRuntime::inbox_total() const {
  std::size_t total = 0;
  for (const auto& d : core_->daemons) total += d.st.inbox.size();
  return total;
}

}  // namespace cacs
