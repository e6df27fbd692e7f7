#pragma once

// JSON request handling for the HTTP service. Handlers work on (method,
// path, body) triples so they can be exercised without sockets; the
// socket binding lives in service_http.hpp.

#include "sonoguide/geometry.hpp"
#include "sonoguide/registration.hpp"
#include "sonoguide/volume.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sonoguide {

inline constexpr int kSchemaVersion = 1;
inline constexpr int kDefaultPort = 8080;

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws std::invalid_argument on characters outside the standard alphabet
/// or a length that is not a multiple of 4.
std::vector<std::uint8_t> base64_decode(std::string_view text);

/// round(clamp(v, 0, 1) * 255) per pixel, row-major.
std::vector<std::uint8_t> quantize_8bit(const SliceImage& image);
/// Inverse mapping v = byte / 255. Throws on a size mismatch.
SliceImage dequantize_8bit(std::span<const std::uint8_t> bytes, int width, int height);

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

struct SessionState {
  std::string id;
  std::string volume_name;
  Pose pose;
  SpId sp_id = SpId::TVP;
  std::optional<GuidanceInstruction> last_guidance;
};
nlohmann::json to_json(const SessionState& s);

class ApiService {
 public:
  /// No volume: every volume-dependent route answers 409.
  ApiService() = default;
  ApiService(Volume volume, std::vector<StandardPlaneDef> standard_planes,
             RegistrationConfig registration = {});

  /// Routes one request. Never throws; errors become 4xx/5xx responses with
  /// {"error": message}. Every body carries "schema_version".
  ApiResponse handle(std::string_view method, std::string_view path,
                     std::string_view body) const;

  bool has_volume() const { return volume_.has_value(); }
  std::optional<SessionState> session(const std::string& id) const;

 private:
  ApiResponse get_volume() const;
  ApiResponse post_slice(const nlohmann::json& req) const;
  ApiResponse post_register(const nlohmann::json& req) const;
  ApiResponse post_guidance(const nlohmann::json& req) const;
  ApiResponse post_simulate(const nlohmann::json& req) const;
  ApiResponse get_session(std::string_view id) const;
  const StandardPlaneDef& standard_plane(SpId id) const;

  std::optional<Volume> volume_;
  std::vector<StandardPlaneDef> standard_planes_;
  RegistrationConfig registration_;

  mutable std::mutex sessions_mutex_;
  mutable std::map<std::string, SessionState> sessions_;
};

}  // namespace sonoguide
