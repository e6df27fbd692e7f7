#include "sonoguide/cli.hpp"

#include "sonoguide/evaluation.hpp"
#include "sonoguide/service_http.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>

namespace sonoguide {

using nlohmann::json;

namespace {

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

std::array<int, 3> parse_dims(const std::string& text) {
  std::vector<int> v;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) v.push_back(std::stoi(part));
  if (v.size() == 1) return {v[0], v[0], v[0]};
  if (v.size() == 3) return {v[0], v[1], v[2]};
  throw std::invalid_argument("--dims takes N or W,H,D");
}

// "TVP", "TCP:neg", "identity", an inline JSON object or a JSON file.
Pose parse_pose(const std::string& text, const std::vector<StandardPlaneDef>& sps) {
  if (text == "identity") return {};
  const auto colon = text.find(':');
  const std::string name = text.substr(0, colon);
  if (name == "TVP" || name == "TCP") {
    const SpId id = sp_id_from_string(name);
    const bool neg = colon != std::string::npos && text.substr(colon + 1) == "neg";
    for (const auto& sp : sps) {
      if (sp.id == id) return sp.pose(neg);
    }
    throw std::runtime_error("volume defines no " + name + " plane");
  }
  if (!text.empty() && text.front() == '{') return pose_from_json(json::parse(text));
  return pose_from_json(read_json_file(text));
}

const StandardPlaneDef& find_sp(const std::vector<StandardPlaneDef>& sps, SpId id) {
  for (const auto& sp : sps) {
    if (sp.id == id) return sp;
  }
  throw std::runtime_error("volume defines no " + std::string(to_string(id)) + " plane");
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Slice-to-volume registration and standard plane guidance"};
  app.name("sonoguide");
  app.require_subcommand(1);

  std::uint64_t seed = 7;
  std::string volume_path, out_path, dims_text = "64", pose_text = "identity", image_path,
                                     config_path, sp_name = "TVP", host = "127.0.0.1";
  int width = kDefaultSliceSize, height = kDefaultSliceSize, steps = 60, scans = 20,
      port = kDefaultPort;
  double speckle = 0.0;
  bool cors = false;

  auto* phantom = app.add_subcommand("phantom", "Generate a synthetic head phantom volume");
  phantom->add_option("--seed", seed, "Random seed")->capture_default_str();
  phantom->add_option("--dims", dims_text, "N or W,H,D voxels")->capture_default_str();
  phantom->add_option("--out", out_path, "Output volume path")->required();

  auto* slice = app.add_subcommand("slice", "Sample a plane from a volume");
  slice->add_option("--volume", volume_path, "Volume path")->required();
  slice->add_option("--pose", pose_text, "identity, TVP[:neg], TCP[:neg], JSON or JSON file")
      ->capture_default_str();
  slice->add_option("--width", width)->capture_default_str()->check(CLI::PositiveNumber);
  slice->add_option("--height", height)->capture_default_str()->check(CLI::PositiveNumber);
  slice->add_option("--out", out_path, "Output image path")->required();

  auto* reg = app.add_subcommand("register", "Estimate the pose of an image inside a volume");
  reg->add_option("--volume", volume_path, "Volume path")->required();
  reg->add_option("--image", image_path, "Image path")->required();
  reg->add_option("--config", config_path, "Registration config JSON");
  reg->add_option("--seed", seed, "Orientation grid seed")->capture_default_str();
  reg->add_option("--out", out_path, "Write the result JSON here");

  auto* sim = app.add_subcommand("simulate", "Simulate a freehand scan ending at a standard plane");
  sim->add_option("--volume", volume_path, "Volume path")->required();
  sim->add_option("--sp", sp_name, "TVP or TCP")->capture_default_str()->check(
      CLI::IsMember({"TVP", "TCP"}));
  sim->add_option("--seed", seed, "Random seed")->capture_default_str();
  sim->add_option("--steps", steps)->capture_default_str()->check(CLI::PositiveNumber);
  sim->add_option("--speckle", speckle, "Multiplicative frame noise sd")->capture_default_str();
  sim->add_option("--out", out_path, "Output scan directory")->required();

  auto* bench = app.add_subcommand("benchmark", "Score random, registration and aligned poses");
  bench->add_option("--volume", volume_path, "Volume path")->required();
  bench->add_option("--scans", scans, "Scans per standard plane")->capture_default_str()->check(
      CLI::PositiveNumber);
  bench->add_option("--seed", seed, "Random seed")->capture_default_str();
  bench->add_option("--out", out_path, "Write the tables as JSON here");

  auto* serve = app.add_subcommand("serve", "Run the HTTP/JSON service");
  serve->add_option("--volume", volume_path, "Volume path");
  serve->add_option("--port", port)->capture_default_str()->check(CLI::Range(1, 65535));
  serve->add_option("--host", host)->capture_default_str();
  serve->add_flag("--cors", cors, "Allow cross-origin requests");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return 2;
  }

  try {
    if (*phantom) {
      const Phantom ph = generate_phantom(seed, parse_dims(dims_text));
      save_volume(ph.volume, out_path, ph.standard_planes);
      json sps = json::array();
      for (const auto& sp : ph.standard_planes) sps.push_back(to_json(sp));
      out << json{{"volume", out_path}, {"dims", ph.volume.dims()}, {"standard_planes", sps}}.dump(2)
          << '\n';
    } else if (*slice) {
      const Volume volume = load_volume(volume_path);
      const Pose pose = parse_pose(pose_text, load_standard_planes(volume_path));
      SliceImage img = sample_slice(volume, pose, width, height);
      img.pose = pose;
      save_image(img, out_path);
      out << json{{"image", out_path}, {"width", width}, {"height", height}, {"pose", to_json(pose)}}
                 .dump(2)
          << '\n';
    } else if (*reg) {
      const Volume volume = load_volume(volume_path);
      const SliceImage img = load_image(image_path);
      RegistrationConfig cfg;
      if (!config_path.empty()) cfg = registration_config_from_json(read_json_file(config_path));
      if (reg->count("--seed") > 0) cfg.seed = seed;
      const RegistrationResult r = register_slice(volume, img, cfg);
      json j = to_json(r);
      if (img.pose) {
        j["truth"] = {
            {"pose", to_json(*img.pose)},
            {"rotation_error_deg", rotation_angle_3d(img.pose->q, r.pose.q) * 180.0 / std::numbers::pi},
            {"translation_error", (img.pose->delta - r.pose.delta).norm()}};
      }
      if (!out_path.empty()) write_json_file(out_path, j);
      out << j.dump(2) << '\n';
    } else if (*sim) {
      const Volume volume = load_volume(volume_path);
      const auto sps = load_standard_planes(volume_path);
      TrajectoryConfig cfg;
      cfg.rng_seed = seed;
      cfg.steps = steps;
      cfg.speckle = speckle;
      const SimulatedScan s = simulate_scan(volume, find_sp(sps, sp_id_from_string(sp_name)), cfg);
      save_scan(s.scan, out_path);
      json truth = json::array();
      for (const auto& p : s.truth) truth.push_back(to_json(p));
      write_json_file(out_path + "/truth.json", truth);
      out << scan_manifest(s.scan).dump(2) << '\n';
    } else if (*bench) {
      const Volume volume = load_volume(volume_path);
      BenchmarkConfig cfg;
      cfg.n_scans = scans;
      cfg.seed = seed;
      const auto tables = run_benchmark(volume, load_standard_planes(volume_path), cfg);
      if (!out_path.empty()) {
        json j = json::array();
        for (const auto& t : tables) j.push_back(to_json(t));
        write_json_file(out_path, j);
      }
      out << format_table(tables);
    } else if (*serve) {
      ApiService service = volume_path.empty()
                               ? ApiService()
                               : ApiService(load_volume(volume_path), load_standard_planes(volume_path));
      httplib::Server server;
      mount_api(server, service, cors);
      out << "listening on http://" << host << ':' << port << std::endl;
      if (!server.listen(host, port)) {
        throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port));
      }
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace sonoguide
