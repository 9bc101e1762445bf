#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cacs {

enum class ErrorCode {
  IllegalTransition,
  InvalidAsr,
  InvalidRequest,
  UnknownRoute,
  UnknownApp,
  UnknownCheckpoint,
  UnknownVm,
  UnknownBackend,
  UnknownDaemon,
  ClusterUnavailable,
  ClusterMismatch,
  EmptyCluster,
  NodeUnreachable,
  NoCheckpoint,
  StorageFull,
  RemoteUnavailable,
  CorruptImage,
  CountMismatch,
  QuiesceTimeout,
  StateConflict,
  UploadFailed,
  Internal,
};

std::string_view error_code_name(ErrorCode code);

class CacsError : public std::runtime_error {
 public:
  CacsError(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& what) {
  throw CacsError(code, what);
}

}  // namespace cacs
