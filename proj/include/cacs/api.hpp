#pragma once

#include <optional>
#include <string>

#include "nlohmann/json.hpp"

namespace cacs {

using Json = nlohmann::json;

struct ApiRequest {
  std::string method;  // GET, POST or DELETE
  std::string path;    // e.g. /coordinators/7/checkpoints, query string allowed
  std::optional<Json> body;
};

struct ApiResponse {
  int status = 0;
  Json body;

  bool ok() const { return status >= 200 && status < 300; }
};

// Transport-neutral request channel. Cloning to another deployment goes
// through one of these, so the same code path drives an in-process service
// or a remote gateway over HTTP.
class ApiClient {
 public:
  virtual ~ApiClient() = default;
  virtual ApiResponse call(const ApiRequest& req) = 0;
};

}  // namespace cacs
