#include "sonoguide/alignment.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace sonoguide {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string frame_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%03zu.raw", i);
  return buf;
}

}  // namespace

json scan_manifest(const ScanSequence& scan) {
  json m = {{"sp_index", scan.sp_index},
            {"sp_id", std::string(to_string(scan.sp_id))},
            {"frame_rate_hz", scan.frame_rate_hz},
            {"num_frames", scan.size()}};
  json frames = json::array();
  for (std::size_t i = 0; i < scan.size(); ++i) frames.push_back(frame_name(i));
  m["frames"] = frames;
  if (scan.probe_q) {
    json pq = json::array();
    for (const auto& q : *scan.probe_q) pq.push_back(to_json(q));
    m["probe_q"] = pq;
  } else {
    m["probe_q"] = nullptr;
  }
  return m;
}

void save_scan(const ScanSequence& scan, const fs::path& dir) {
  scan.validate();
  fs::create_directories(dir);
  for (std::size_t i = 0; i < scan.size(); ++i) {
    save_image(scan.frames[i], dir / frame_name(i));
  }
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot write manifest in " + dir.string());
  }
  out << scan_manifest(scan).dump(2) << '\n';
}

ScanSequence load_scan(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) {
    throw std::runtime_error("no manifest.json in " + dir.string());
  }
  json m;
  try {
    m = json::parse(in);
    ScanSequence scan;
    scan.sp_index = m.at("sp_index").get<std::size_t>();
    scan.sp_id = sp_id_from_string(m.at("sp_id").get<std::string>());
    scan.frame_rate_hz = m.value("frame_rate_hz", kScanFrameRateHz);
    for (const auto& f : m.at("frames")) {
      scan.frames.push_back(load_image(dir / f.get<std::string>()));
    }
    if (m.contains("probe_q") && !m["probe_q"].is_null()) {
      std::vector<Quaternion> pq;
      for (const auto& q : m["probe_q"]) pq.push_back(quaternion_from_json(q));
      scan.probe_q = std::move(pq);
    }
    scan.validate();
    return scan;
  } catch (const json::exception& e) {
    throw std::runtime_error(dir.string() + "/manifest.json: " + e.what());
  }
}

}  // namespace sonoguide
