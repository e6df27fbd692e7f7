#include "sonoguide/service.hpp"

#include "sonoguide/evaluation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace sonoguide {

using nlohmann::json;

namespace {

constexpr std::string_view kAlphabet =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

// 400 when raised while handling a request.
struct BadRequest : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct Conflict : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json error_body(const std::string& message) {
  return {{"schema_version", kSchemaVersion}, {"error", message}};
}

const json& field(const json& req, const char* name) {
  if (!req.contains(name)) {
    throw BadRequest(std::string("missing field \"") + name + "\"");
  }
  return req.at(name);
}

int positive_int(const json& req, const char* name, int fallback, int max_value) {
  if (!req.contains(name)) return fallback;
  const json& v = req.at(name);
  if (!v.is_number_integer() || v.get<long long>() < 1 || v.get<long long>() > max_value) {
    throw BadRequest(std::string("\"") + name + "\" must be an integer in [1, " +
                     std::to_string(max_value) + "]");
  }
  return v.get<int>();
}

SpId parse_sp(const json& req) {
  const json& v = field(req, "sp_id");
  if (!v.is_string()) throw BadRequest("\"sp_id\" must be \"TVP\" or \"TCP\"");
  return sp_id_from_string(v.get<std::string>());
}

SpDirection parse_direction(const json& req) {
  if (!req.contains("direction")) return SpDirection::Auto;
  const std::string d = req.at("direction").get<std::string>();
  if (d == "auto") return SpDirection::Auto;
  if (d == "pos") return SpDirection::Pos;
  if (d == "neg") return SpDirection::Neg;
  throw BadRequest("\"direction\" must be one of auto, pos, neg");
}

}  // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  const std::size_t rest = bytes.size() - i;
  if (rest == 1) {
    const std::uint32_t v = bytes[i] << 16;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += "==";
  } else if (rest == 2) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8);
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) {
    throw std::invalid_argument("base64 length must be a multiple of 4");
  }
  std::array<int, 256> lookup;
  lookup.fill(-1);
  for (std::size_t i = 0; i < kAlphabet.size(); ++i) {
    lookup[static_cast<unsigned char>(kAlphabet[i])] = static_cast<int>(i);
  }
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    const bool last = i + 4 == text.size();
    int pad = 0;
    std::uint32_t v = 0;
    for (std::size_t k = 0; k < 4; ++k) {
      const char c = text[i + k];
      int d;
      if (c == '=' && last && k >= 2) {
        d = 0;
        ++pad;
      } else {
        d = lookup[static_cast<unsigned char>(c)];
        if (d < 0 || pad > 0) {
          throw std::invalid_argument("invalid base64 data");
        }
      }
      v = (v << 6) | static_cast<std::uint32_t>(d);
    }
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    if (pad < 2) out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
    if (pad < 1) out.push_back(static_cast<std::uint8_t>(v & 0xff));
  }
  return out;
}

std::vector<std::uint8_t> quantize_8bit(const SliceImage& image) {
  std::vector<std::uint8_t> out(image.pixels.size());
  std::transform(image.pixels.begin(), image.pixels.end(), out.begin(), [](float v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(static_cast<double>(v), 0.0, 1.0) * 255.0));
  });
  return out;
}

SliceImage dequantize_8bit(std::span<const std::uint8_t> bytes, int width, int height) {
  if (width < 1 || height < 1 ||
      bytes.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw std::invalid_argument("pixel count does not match width * height");
  }
  SliceImage img;
  img.width = width;
  img.height = height;
  img.pixels.resize(bytes.size());
  std::transform(bytes.begin(), bytes.end(), img.pixels.begin(),
                 [](std::uint8_t b) { return static_cast<float>(b / 255.0); });
  return img;
}

json to_json(const SessionState& s) {
  json j = {{"id", s.id},
            {"volume_name", s.volume_name},
            {"pose", to_json(s.pose)},
            {"sp_id", std::string(to_string(s.sp_id))}};
  j["last_guidance"] = s.last_guidance ? to_json(*s.last_guidance) : json(nullptr);
  return j;
}

ApiService::ApiService(Volume volume, std::vector<StandardPlaneDef> standard_planes,
                       RegistrationConfig registration)
    : volume_(std::move(volume)),
      standard_planes_(std::move(standard_planes)),
      registration_(registration) {}

std::optional<SessionState> ApiService::session(const std::string& id) const {
  std::lock_guard lock(sessions_mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) return std::nullopt;
  return it->second;
}

const StandardPlaneDef& ApiService::standard_plane(SpId id) const {
  for (const auto& sp : standard_planes_) {
    if (sp.id == id) return sp;
  }
  throw Conflict("loaded volume has no " + std::string(to_string(id)) + " definition");
}

ApiResponse ApiService::handle(std::string_view method, std::string_view path,
                               std::string_view body) const {
  constexpr std::string_view session_prefix = "/api/session/";
  try {
    const bool is_get = method == "GET";
    const bool is_post = method == "POST";
    const bool known = path == "/api/volume" || path == "/api/slice" || path == "/api/register" ||
                       path == "/api/guidance" || path == "/api/simulate" ||
                       (path.starts_with(session_prefix) && path.size() > session_prefix.size());
    if (!known) {
      return {404, error_body("unknown route " + std::string(path))};
    }
    if (path.starts_with(session_prefix)) {
      if (!is_get) return {405, error_body("method not allowed")};
      return get_session(path.substr(session_prefix.size()));
    }
    if (path == "/api/volume") {
      if (!is_get) return {405, error_body("method not allowed")};
      if (!volume_) throw Conflict("no volume loaded");
      return get_volume();
    }
    if (!is_post) return {405, error_body("method not allowed")};
    if (!volume_) throw Conflict("no volume loaded");

    json req;
    try {
      req = json::parse(body);
    } catch (const json::exception& e) {
      throw BadRequest(std::string("malformed JSON body: ") + e.what());
    }
    if (!req.is_object()) throw BadRequest("request body must be a JSON object");
    if (path == "/api/guidance") return post_guidance(req);
    if (path == "/api/slice") return post_slice(req);
    if (path == "/api/register") return post_register(req);
    return post_simulate(req);
  } catch (const Conflict& e) {
    return {409, error_body(e.what())};
  } catch (const std::invalid_argument& e) {
    return {400, error_body(e.what())};
  } catch (const json::exception& e) {
    return {400, error_body(e.what())};
  } catch (const std::exception& e) {
    return {500, error_body(e.what())};
  }
}

ApiResponse ApiService::get_volume() const {
  json sps = json::array();
  for (const auto& sp : standard_planes_) sps.push_back(to_json(sp));
  return {200,
          {{"schema_version", kSchemaVersion},
           {"name", volume_->name()},
           {"dims", volume_->dims()},
           {"standard_planes", sps}}};
}

ApiResponse ApiService::post_slice(const json& req) const {
  const Pose pose = pose_from_json(field(req, "pose"));
  const int w = positive_int(req, "width", kDefaultSliceSize, 1024);
  const int h = positive_int(req, "height", kDefaultSliceSize, 1024);
  const SliceImage img = sample_slice(*volume_, pose, w, h);
  return {200,
          {{"schema_version", kSchemaVersion},
           {"width", w},
           {"height", h},
           {"pose", to_json(pose)},
           {"pixels_b64", base64_encode(quantize_8bit(img))}}};
}

ApiResponse ApiService::post_register(const json& req) const {
  const int w = positive_int(req, "width", 0, 1024);
  const int h = positive_int(req, "height", 0, 1024);
  const json& px = field(req, "pixels_b64");
  if (!px.is_string()) throw BadRequest("\"pixels_b64\" must be a string");
  const SliceImage img = dequantize_8bit(base64_decode(px.get<std::string>()), w, h);
  const RegistrationConfig cfg =
      req.contains("config") ? registration_config_from_json(req.at("config")) : registration_;
  json out = to_json(register_slice(*volume_, img, cfg));
  out["schema_version"] = kSchemaVersion;
  return {200, out};
}

ApiResponse ApiService::post_guidance(const json& req) const {
  const Pose pose = pose_from_json(field(req, "pose"));
  const SpId id = parse_sp(req);
  const SpDirection dir = parse_direction(req);
  const GuidanceInstruction g = transform_to_sp(pose, standard_plane(id), dir);
  json out = to_json(g);
  out["schema_version"] = kSchemaVersion;
  if (req.contains("session_id")) {
    const std::string sid = req.at("session_id").get<std::string>();
    if (sid.empty()) throw BadRequest("\"session_id\" must be non-empty");
    std::lock_guard lock(sessions_mutex_);
    SessionState& s = sessions_[sid];
    s.id = sid;
    s.volume_name = volume_->name();
    s.pose = pose;
    s.sp_id = id;
    s.last_guidance = g;
    out["session_id"] = sid;
  }
  return {200, out};
}

ApiResponse ApiService::post_simulate(const json& req) const {
  const SpId id = parse_sp(req);
  TrajectoryConfig cfg;
  if (req.contains("seed")) {
    const json& s = req.at("seed");
    if (!s.is_number_integer() || s.get<long long>() < 0) {
      throw BadRequest("\"seed\" must be a non-negative integer");
    }
    cfg.rng_seed = s.get<std::uint64_t>();
  }
  cfg.steps = positive_int(req, "steps", cfg.steps, 1000);
  const SimulatedScan sim = simulate_scan(*volume_, standard_plane(id), cfg);
  json out = scan_manifest(sim.scan);
  json truth = json::array();
  for (const auto& p : sim.truth) truth.push_back(to_json(p));
  out["truth"] = truth;
  out["schema_version"] = kSchemaVersion;
  return {200, out};
}

ApiResponse ApiService::get_session(std::string_view id) const {
  const auto s = session(std::string(id));
  if (!s) return {404, error_body("unknown session " + std::string(id))};
  json out = to_json(*s);
  out["schema_version"] = kSchemaVersion;
  return {200, out};
}

}  // namespace sonoguide
