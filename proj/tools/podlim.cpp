// Scenario runner and figure reproduction harness.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "podlim/io.hpp"
#include "podlim/scenarios.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw podlim::NumericError("sha256 failed");
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

podlim::FrequencyGrid parse_grid(const std::string& spec) {
  std::stringstream ss(spec);
  std::string a, b, c;
  if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c) )
    throw podlim::ConfigError("--grid expects min,max,points");
  try {
    return podlim::scen::grid_from_json({{"min", std::stod(a)}, {"max", std::stod(b)}, {"points", std::stoi(c)}});
  } catch (const std::logic_error&) {
    throw podlim::ConfigError("--grid expects min,max,points");
  }
}

/// Writes every artifact plus a summary and a manifest with content hashes.
json write_result(const podlim::scen::Result& r, const fs::path& dir, const json& extra) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw podlim::ConfigError("cannot create output directory '" + dir.string() + "': " + ec.message());
  std::vector<podlim::scen::Artifact> files = r.files;
  files.push_back({r.id + "_summary.json", r.summary.dump(2) + "\n", false});
  json listed = json::array();
  for (const auto& f : files) {
    podlim::io::write_text((dir / f.name).string(), f.content);
    listed.push_back({{"name", f.name}, {"sha256", sha256_hex(f.content)}, {"bytes", f.content.size()},
                      {"plottable", f.plottable}});
  }
  json manifest = extra;
  manifest["id"] = r.id;
  manifest["files"] = listed;
  manifest["summary"] = r.summary;
  podlim::io::write_text((dir / "manifest.json").string(), manifest.dump(2) + "\n");
  return manifest;
}

json grid_json(const podlim::FrequencyGrid& g) {
  return {{"min", g.omegas().front()}, {"max", g.omegas().back()}, {"points", g.size()}};
}

int fail(int code, const std::string& kind, const std::string& msg) {
  std::cerr << json{{"error", kind}, {"message", msg}}.dump() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"podlim: damping-control limitation toolkit"};
  app.require_subcommand(1);
  std::string grid_spec;
  long long seed = 0;
  app.add_option("--grid", grid_spec, "Frequency grid as min,max,points (rad/s)");
  app.add_option("--seed", seed, "Reserved; every algorithm is deterministic");

  auto* run = app.add_subcommand("run", "Run a scenario configuration");
  std::string config_path, run_out;
  run->add_option("config", config_path, "Scenario JSON")->required();
  run->add_option("--out", run_out, "Override the configured output directory");

  auto* repro = app.add_subcommand("repro", "Reproduce a figure analog");
  std::string fig, repro_out;
  repro->add_option("figure", fig, "Figure id or 'all'")->required();
  repro->add_option("--out", repro_out, "Output directory (default out/<figure>)");

  auto* schema = app.add_subcommand("schema", "Print the scenario JSON schema");

  CLI11_PARSE(app, argc, argv);

  try {
    std::optional<podlim::FrequencyGrid> grid;
    if (!grid_spec.empty()) grid = parse_grid(grid_spec);

    if (schema->parsed()) {
      std::cout << podlim::scen::config_schema().dump(2) << "\n";
      return 0;
    }

    if (run->parsed()) {
      std::ifstream in(config_path);
      if (!in) throw podlim::ConfigError("cannot read config '" + config_path + "'");
      json cfg;
      try {
        cfg = json::parse(in);
      } catch (const json::parse_error& e) {
        throw podlim::ConfigError(std::string("config is not valid JSON: ") + e.what());
      }
      if (grid && cfg.is_object()) cfg["grid"] = grid_json(*grid);
      podlim::scen::validate_config(cfg);
      const podlim::scen::Result r = podlim::scen::run_config(cfg);
      const fs::path dir = run_out.empty() ? fs::path(cfg.at("outputs").get<std::string>()) : fs::path(run_out);
      const json m = write_result(r, dir, {{"kind", cfg.at("kind")}, {"config", cfg}, {"seed", seed}});
      std::cout << m.dump(2) << "\n";
      return 0;
    }

    const podlim::FrequencyGrid g = grid ? *grid : podlim::scen::default_grid();
    std::vector<std::string> ids;
    if (fig == "all") {
      ids = podlim::scen::figure_ids();
    } else {
      const auto& known = podlim::scen::figure_ids();
      if (std::find(known.begin(), known.end(), fig) == known.end())
        throw podlim::ConfigError("unknown figure id '" + fig + "'");
      ids = {fig};
    }
    // Figures are independent; compute them concurrently and write in a fixed order.
    std::vector<std::future<podlim::scen::Result>> jobs;
    for (const auto& id : ids) jobs.push_back(std::async(std::launch::async, [id, &g] { return podlim::scen::repro(id, g); }));
    const json extra = {{"kind", "repro"}, {"note", podlim::scen::kAnalogNote}, {"grid", grid_json(g)}, {"seed", seed}};
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const podlim::scen::Result r = jobs[i].get();
      fs::path dir = repro_out.empty() ? fs::path("out") / ids[i] : fs::path(repro_out);
      if (ids.size() > 1) dir = (repro_out.empty() ? fs::path("out") : fs::path(repro_out)) / ids[i];
      const json m = write_result(r, dir, extra);
      std::cout << ids[i] << ": " << m.at("files").size() << " files in " << dir.string() << "\n";
    }
    return 0;
  } catch (const podlim::ConfigError& e) {
    return fail(kExitConfig, "config", e.what());
  } catch (const podlim::ParameterError& e) {
    return fail(kExitConfig, "config", e.what());
  } catch (const podlim::UnsupportedError& e) {
    return fail(kExitConfig, "config", e.what());
  } catch (const podlim::Error& e) {
    return fail(kExitNumeric, "numeric", e.what());
  } catch (const std::exception& e) {
    return fail(kExitNumeric, "numeric", e.what());
  }
}
