#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <vector>

#include "cacs/blob.hpp"
#include "cacs/event_queue.hpp"
#include "cacs/trace.hpp"
#include "cacs/workload.hpp"

namespace cacs {

// One live coordinator incarnation and its member daemons.
struct CoordinatorHandle {
  std::uint64_t coordinator_id = 0;
  std::uint64_t app_id = 0;
  std::vector<std::uint32_t> members;
};

// In-process stand-in for a checkpointable distributed application: one
// daemon per VM exchanging FIFO messages on the virtual clock, under a
// per-incarnation coordinator that implements coordinated checkpoint
// (quiesce, drain in-flight messages into inboxes, serialize) and restart.
//
// RingSum: process 0 opens round r by drawing a contribution and sending the
// running sum around the ring; every process adds its own draw; when the
// token returns, process 0 folds it into its accumulator and opens the next
// round. SingleCounter is the one-process degenerate case with self-messages
// as ticks. Both are fully deterministic given (seed, spec).
class AppRuntime {
 public:
  // Fresh start. Throws ClusterMismatch when the workload cannot run on
  // cluster_size processes.
  static std::unique_ptr<AppRuntime> start(std::uint64_t app_id, std::uint64_t coordinator_id,
                                           const WorkloadSpec& spec, std::size_t cluster_size,
                                           std::uint64_t seed, VDur msg_hop, EventQueue& clock,
                                           TraceLog& trace);

  // Restart from serialized images, one per process, any order. Throws
  // CountMismatch (wrong number / bad index coverage) or CorruptImage.
  static std::unique_ptr<AppRuntime> restart(std::uint64_t app_id, std::uint64_t coordinator_id,
                                             const WorkloadSpec& spec, std::size_t cluster_size,
                                             const std::vector<std::vector<std::uint8_t>>& blobs,
                                             VDur msg_hop, EventQueue& clock, TraceLog& trace);

  ~AppRuntime();
  AppRuntime(const AppRuntime&) = delete;
  AppRuntime& operator=(const AppRuntime&) = delete;

  // Begins (or, after restart, resumes) computation.
  void run();

  // Coordinated checkpoint at the current instant. Computation freezes until
  // resume_after(); the returned blobs are a consistent cut. Throws
  // StateConflict if a checkpoint is already in flight, QuiesceTimeout if
  // the runtime has been stopped.
  std::vector<std::vector<std::uint8_t>> checkpoint();
  void resume_after(VDur delay);

  // Kills every daemon; scheduled deliveries become no-ops.
  void stop();

  bool completed() const;
  std::uint64_t iterations_done() const;
  std::uint64_t final_output() const;  // process 0 accumulator
  std::size_t size() const;
  const CoordinatorHandle& handle() const { return handle_; }
  bool stopped() const;
  bool frozen() const;

  // Health hook backing state, driven from outside for failure drills.
  void set_health(std::uint32_t vm_index, bool healthy);
  bool hook_healthy(std::uint32_t vm_index) const;

  // Checkpoint policy wiring: the sink persists a cut and returns the write
  // time the application stays frozen for.
  using CheckpointSink = std::function<VDur(const std::vector<std::vector<std::uint8_t>>&)>;
  void set_checkpoint_sink(CheckpointSink sink);
  void enable_periodic(VDur period);
  void enable_app_initiated();

  // Cut accounting (messages sent includes restored-inbox carryover so that
  // sent − delivered always equals in-flight + inboxed).
  std::uint64_t messages_sent() const;
  std::uint64_t messages_delivered() const;
  std::size_t in_flight() const;
  std::size_t inbox_total() const;

 private:
  struct Core;
  explicit AppRuntime(std::shared_ptr<Core> core);

  std::shared_ptr<Core> core_;
  CoordinatorHandle handle_;
};

}  // namespace cacs
