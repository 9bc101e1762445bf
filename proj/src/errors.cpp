#include "cacs/errors.hpp"

namespace cacs {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::IllegalTransition: return "illegal_transition";
    case ErrorCode::InvalidAsr: return "invalid_asr";
    case ErrorCode::InvalidRequest: return "invalid_request";
    case ErrorCode::UnknownRoute: return "unknown_route";
    case ErrorCode::UnknownApp: return "unknown_app";
    case ErrorCode::UnknownCheckpoint: return "unknown_checkpoint";
    case ErrorCode::UnknownVm: return "unknown_vm";
    case ErrorCode::UnknownBackend: return "unknown_backend";
    case ErrorCode::UnknownDaemon: return "unknown_daemon";
    case ErrorCode::ClusterUnavailable: return "cluster_unavailable";
    case ErrorCode::ClusterMismatch: return "cluster_mismatch";
    case ErrorCode::EmptyCluster: return "empty_cluster";
    case ErrorCode::NodeUnreachable: return "node_unreachable";
    case ErrorCode::NoCheckpoint: return "no_checkpoint";
    case ErrorCode::StorageFull: return "storage_full";
    case ErrorCode::RemoteUnavailable: return "remote_unavailable";
    case ErrorCode::CorruptImage: return "corrupt_image";
    case ErrorCode::CountMismatch: return "count_mismatch";
    case ErrorCode::QuiesceTimeout: return "quiesce_timeout";
    case ErrorCode::StateConflict: return "state_conflict";
    case ErrorCode::UploadFailed: return "upload_failed";
    case ErrorCode::Internal: return "internal";
  }
  return "internal";
}

}  // namespace cacs
