#include "sonoguide/volume.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace sonoguide {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path sidecar_path(const fs::path& payload) {
  fs::path p = payload;
  p += ".json";
  return p;
}

namespace {

static_assert(sizeof(float) == 4);

void write_floats(const fs::path& path, std::span<const float> values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot open " + path.string() + " for writing");
  }
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(float)));
  } else {
    for (float v : values) {
      auto bits = std::bit_cast<std::uint32_t>(v);
      unsigned char b[4] = {static_cast<unsigned char>(bits), static_cast<unsigned char>(bits >> 8),
                            static_cast<unsigned char>(bits >> 16),
                            static_cast<unsigned char>(bits >> 24)};
      out.write(reinterpret_cast<const char*>(b), 4);
    }
  }
  if (!out) {
    throw std::runtime_error("failed writing " + path.string());
  }
}

std::vector<float> read_floats(const fs::path& path, std::size_t expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open " + path.string());
  }
  in.seekg(0, std::ios::end);
  const auto bytes = static_cast<std::size_t>(in.tellg());
  in.seekg(0, std::ios::beg);
  if (bytes != expected * sizeof(float)) {
    throw std::runtime_error(path.string() + ": payload holds " + std::to_string(bytes) +
                             " bytes but sidecar dims imply " +
                             std::to_string(expected * sizeof(float)));
  }
  std::vector<unsigned char> raw(bytes);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(bytes));
  if (!in) {
    throw std::runtime_error("failed reading " + path.string());
  }
  std::vector<float> values(expected);
  for (std::size_t i = 0; i < expected; ++i) {
    const unsigned char* b = raw.data() + 4 * i;
    const std::uint32_t bits = static_cast<std::uint32_t>(b[0]) |
                               (static_cast<std::uint32_t>(b[1]) << 8) |
                               (static_cast<std::uint32_t>(b[2]) << 16) |
                               (static_cast<std::uint32_t>(b[3]) << 24);
    values[i] = std::bit_cast<float>(bits);
  }
  return values;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open sidecar " + path.string());
  }
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot open " + path.string() + " for writing");
  }
  out << j.dump(2) << '\n';
}

std::vector<int> read_dims(const json& meta, std::size_t rank, const fs::path& path) {
  if (!meta.contains("dims") || !meta["dims"].is_array() || meta["dims"].size() != rank) {
    throw std::runtime_error(path.string() + ": sidecar needs \"dims\" with " +
                             std::to_string(rank) + " entries");
  }
  std::vector<int> dims;
  for (const auto& d : meta["dims"]) {
    if (!d.is_number_integer() || d.get<int>() < 2) {
      throw std::runtime_error(path.string() + ": dims must be integers >= 2");
    }
    dims.push_back(d.get<int>());
  }
  return dims;
}

}  // namespace

void save_volume(const Volume& volume, const fs::path& path,
                 const std::vector<StandardPlaneDef>& standard_planes) {
  write_floats(path, volume.data());
  json meta = {{"dims", {volume.width(), volume.height(), volume.depth()}},
               {"name", volume.name()}};
  if (!standard_planes.empty()) {
    json sps = json::array();
    for (const auto& sp : standard_planes) sps.push_back(to_json(sp));
    meta["standard_planes"] = sps;
  }
  write_json(sidecar_path(path), meta);
}

Volume load_volume(const fs::path& path) {
  const json meta = read_json(sidecar_path(path));
  const auto dims = read_dims(meta, 3, path);
  const std::size_t n = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  return Volume(dims[0], dims[1], dims[2], read_floats(path, n),
                meta.value("name", path.stem().string()));
}

std::vector<StandardPlaneDef> load_standard_planes(const fs::path& path) {
  const json meta = read_json(sidecar_path(path));
  std::vector<StandardPlaneDef> out;
  if (meta.contains("standard_planes")) {
    for (const auto& j : meta["standard_planes"]) out.push_back(sp_from_json(j));
  }
  return out;
}

void save_image(const SliceImage& image, const fs::path& path) {
  write_floats(path, image.pixels);
  json meta = {{"dims", {image.width, image.height}}, {"name", path.stem().string()}};
  if (image.pose) {
    meta["pose"] = to_json(*image.pose);
  }
  write_json(sidecar_path(path), meta);
}

SliceImage load_image(const fs::path& path) {
  const json meta = read_json(sidecar_path(path));
  const auto dims = read_dims(meta, 2, path);
  SliceImage img(dims[0], dims[1]);
  img.pixels = read_floats(path, img.pixels.size());
  if (meta.contains("pose")) {
    img.pose = pose_from_json(meta["pose"]);
  }
  return img;
}

}  // namespace sonoguide
